#include "recsyn/corpus.hpp"

#include "recsyn/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace recsyn {

namespace {

constexpr std::string_view open_tag = "<RECTOKEN>";
constexpr std::string_view close_tag = "</RECTOKEN>";

constexpr std::string_view item_prefix = "This item <RECTOKEN> ";
constexpr std::string_view item_mid = " </RECTOKEN> is described as ";

constexpr std::string_view cf_prefix = "When a user interacts with item <RECTOKEN> ";
constexpr std::string_view cf_mid1 = " </RECTOKEN>, there is a ";
constexpr std::string_view cf_mid2 = "% probability they will also interact with item <RECTOKEN> ";
constexpr std::string_view cf_mid3 = " </RECTOKEN> (confidence: ";
constexpr std::string_view cf_mid4 = ", lift: ";

constexpr std::string_view uih_prefix = "A user interacted with the following sequence of items: ";
constexpr std::string_view uih_sep = ", ";

std::size_t count_tokens(std::string_view text, const TokenCounter& counter) {
    const auto n = counter ? counter(text) : whitespace_token_count(text);
    if (n == 0) throw ValidationError("document has no tokens");
    return n;
}

bool valid_token(std::string_view t) {
    if (t.empty()) return false;
    for (char c : t)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '<' || c == '>') return false;
    return true;
}

void check_tokens(const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw ValidationError("semantic token list is empty");
    for (const auto& t : tokens)
        if (!valid_token(t)) throw ValidationError("invalid semantic token '" + t + "'");
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::vector<std::string> parse_token_run(std::string_view run) {
    std::vector<std::string> out;
    for (auto piece : split(run, ' ')) {
        if (!valid_token(piece)) throw ParseError("malformed semantic token run '" + std::string(run) + "'");
        out.emplace_back(piece);
    }
    return out;
}

void expect(std::string_view& rest, std::string_view literal, const char* what) {
    if (rest.substr(0, literal.size()) != literal) throw ParseError(std::string("expected ") + what);
    rest.remove_prefix(literal.size());
}

// Everything up to the first occurrence of `stop`, which is consumed.
std::string_view take_until(std::string_view& rest, std::string_view stop, const char* what) {
    const auto pos = rest.find(stop);
    if (pos == std::string_view::npos) throw ParseError(std::string("expected ") + what);
    const auto head = rest.substr(0, pos);
    rest.remove_prefix(pos + stop.size());
    return head;
}

std::string fixed(double v, int decimals) { return strprintf("%.*f", decimals, v); }

double parse_fixed(std::string_view s, int decimals, const char* what) {
    const std::string str(s);
    char* end = nullptr;
    const double v = std::strtod(str.c_str(), &end);
    if (str.empty() || end != str.c_str() + str.size() || !std::isfinite(v) || fixed(v, decimals) != str)
        throw ParseError(std::string("non-canonical ") + what + " '" + str + "'");
    return v;
}

std::string render_group(const std::vector<std::string>& tokens) {
    return std::string(open_tag) + " " + join_tokens(tokens) + " " + std::string(close_tag);
}

}  // namespace

const char* doc_kind_name(DocKind kind) noexcept {
    switch (kind) {
        case DocKind::item_text: return "item_text";
        case DocKind::cf_statement: return "cf_statement";
        case DocKind::uih: return "uih";
    }
    return "unknown";
}

CorpusDoc render_item_text(const ItemTextParts& parts, const TokenCounter& counter) {
    check_tokens(parts.tokens);
    if (parts.description.empty()) throw ValidationError("item description is empty");
    std::string text;
    text.reserve(item_prefix.size() + item_mid.size() + parts.description.size() + 16 * parts.tokens.size());
    text += item_prefix;
    text += join_tokens(parts.tokens);
    text += item_mid;
    text += parts.description;
    text += '.';
    const auto n = count_tokens(text, counter);
    return {DocKind::item_text, std::move(text), n};
}

CorpusDoc render_cf(const CfParts& parts, const TokenCounter& counter) {
    check_tokens(parts.a_tokens);
    check_tokens(parts.b_tokens);
    std::string text;
    text += cf_prefix;
    text += join_tokens(parts.a_tokens);
    text += cf_mid1;
    text += fixed(parts.percent, 1);
    text += cf_mid2;
    text += join_tokens(parts.b_tokens);
    text += cf_mid3;
    text += fixed(parts.confidence, 3);
    text += cf_mid4;
    text += fixed(parts.lift, 2);
    text += ')';
    const auto n = count_tokens(text, counter);
    return {DocKind::cf_statement, std::move(text), n};
}

CorpusDoc render_cf_statement(const AssociationRule& rule, const std::vector<std::string>& a_tokens,
                              const std::vector<std::string>& b_tokens, const TokenCounter& counter) {
    return render_cf({a_tokens, b_tokens, rule.confidence * 100.0, rule.confidence, rule.lift}, counter);
}

CorpusDoc render_uih(const UihParts& parts, const TokenCounter& counter) {
    if (parts.groups.size() < 2) throw ValidationError("an interaction history needs at least two items");
    std::string text(uih_prefix);
    for (std::size_t i = 0; i < parts.groups.size(); ++i) {
        check_tokens(parts.groups[i]);
        if (i) text += uih_sep;
        text += render_group(parts.groups[i]);
    }
    const auto n = count_tokens(text, counter);
    return {DocKind::uih, std::move(text), n};
}

CorpusDoc render_uih(const std::vector<std::string>& items, const IdMap& id_map, const TokenCounter& counter) {
    UihParts parts;
    parts.groups.reserve(items.size());
    for (const auto& item : items) {
        const auto it = id_map.find(item);
        if (it == id_map.end()) throw ValidationError("item '" + item + "' has no semantic id");
        parts.groups.push_back(it->second);
    }
    return render_uih(parts, counter);
}

ItemTextParts parse_item_text(std::string_view text) {
    auto rest = text;
    expect(rest, item_prefix, "item-text prefix");
    ItemTextParts out;
    out.tokens = parse_token_run(take_until(rest, item_mid, "'is described as'"));
    if (rest.size() < 2 || rest.back() != '.') throw ParseError("item text must end with a description and '.'");
    out.description = std::string(rest.substr(0, rest.size() - 1));
    return out;
}

CfParts parse_cf(std::string_view text) {
    auto rest = text;
    expect(rest, cf_prefix, "CF prefix");
    CfParts out;
    out.a_tokens = parse_token_run(take_until(rest, cf_mid1, "first item group"));
    out.percent = parse_fixed(take_until(rest, cf_mid2, "percent"), 1, "percent");
    out.b_tokens = parse_token_run(take_until(rest, cf_mid3, "second item group"));
    out.confidence = parse_fixed(take_until(rest, cf_mid4, "confidence"), 3, "confidence");
    if (rest.empty() || rest.back() != ')') throw ParseError("CF statement must end with ')'");
    out.lift = parse_fixed(rest.substr(0, rest.size() - 1), 2, "lift");
    return out;
}

UihParts parse_uih(std::string_view text) {
    auto rest = text;
    expect(rest, uih_prefix, "UIH prefix");
    UihParts out;
    while (true) {
        expect(rest, open_tag, "<RECTOKEN>");
        expect(rest, " ", "space after <RECTOKEN>");
        out.groups.push_back(parse_token_run(take_until(rest, " " + std::string(close_tag), "</RECTOKEN>")));
        if (rest.empty()) break;
        expect(rest, uih_sep, "', ' between items");
    }
    if (out.groups.size() < 2) throw ParseError("an interaction history needs at least two items");
    return out;
}

DocKind detect_kind(std::string_view text) {
    if (text.substr(0, item_prefix.size()) == item_prefix) {
        parse_item_text(text);
        return DocKind::item_text;
    }
    if (text.substr(0, cf_prefix.size()) == cf_prefix) {
        parse_cf(text);
        return DocKind::cf_statement;
    }
    if (text.substr(0, uih_prefix.size()) == uih_prefix) {
        parse_uih(text);
        return DocKind::uih;
    }
    throw ParseError("line matches no document grammar");
}

MixtureDomain MixtureDomain::from_docs(std::string name, double ratio, std::vector<CorpusDoc> docs) {
    MixtureDomain d{std::move(name), ratio, 0.0, std::move(docs)};
    for (const auto& doc : d.docs) d.unique_tokens += static_cast<double>(doc.token_count);
    return d;
}

std::vector<std::string> MixtureSpec::violations() const {
    std::vector<std::string> out;
    if (total_token_budget == 0) out.push_back("total_token_budget must be positive");
    if (domains.empty()) out.push_back("mixture needs at least one domain");
    double sum = 0.0;
    for (const auto& d : domains) {
        if (!(d.ratio >= 0.0 && d.ratio <= 1.0))
            out.push_back(strprintf("ratio of domain '%s' must lie in [0, 1]", d.name.c_str()));
        if (!(d.unique_tokens > 0.0))
            out.push_back(strprintf("domain '%s' has no tokens", d.name.c_str()));
        sum += d.ratio;
    }
    if (!domains.empty() && std::abs(sum - 1.0) > 1e-9)
        out.push_back(strprintf("mixture ratios sum to %.12g, expected 1", sum));
    return out;
}

void MixtureSpec::validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid mixture spec:";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ValidationError(msg);
}

MixtureSpec with_ratio(const MixtureSpec& spec, std::size_t index, double ratio) {
    if (index >= spec.domains.size()) throw ValidationError("mixture domain index out of range");
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ValidationError("ratio must lie in [0, 1]");
    MixtureSpec out = spec;
    double others = 0.0;
    for (std::size_t i = 0; i < spec.domains.size(); ++i)
        if (i != index) others += spec.domains[i].ratio;
    if (others <= 0.0 && ratio < 1.0) throw ValidationError("no other domain carries weight to rescale");
    for (std::size_t i = 0; i < out.domains.size(); ++i)
        out.domains[i].ratio = i == index ? ratio : spec.domains[i].ratio * (1.0 - ratio) / others;
    return out;
}

std::vector<double> estimate_repeats(const MixtureSpec& spec) {
    std::vector<double> out;
    out.reserve(spec.domains.size());
    for (const auto& d : spec.domains) {
        if (!(d.unique_tokens > 0.0)) throw ValidationError("domain '" + d.name + "' has no unique tokens");
        out.push_back(static_cast<double>(spec.total_token_budget) * d.ratio / d.unique_tokens);
    }
    return out;
}

Mixture compose_mixture(const MixtureSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t n_dom = spec.domains.size();
    for (const auto& d : spec.domains)
        if (d.docs.empty()) throw ValidationError("domain '" + d.name + "' has no documents to mix");

    const double budget = static_cast<double>(spec.total_token_budget);
    std::vector<double> target(n_dom);
    std::vector<std::uint64_t> emitted(n_dom, 0);
    std::vector<std::vector<std::size_t>> order(n_dom);
    std::vector<std::size_t> cursor(n_dom, 0), epochs(n_dom, 0);

    auto refill = [&](std::size_t d) {
        auto& o = order[d];
        o.resize(spec.domains[d].docs.size());
        std::iota(o.begin(), o.end(), 0);
        Rng rng(derive_seed(seed, {d, epochs[d]}));
        portable_shuffle(o, rng);
        cursor[d] = 0;
        ++epochs[d];
    };
    for (std::size_t d = 0; d < n_dom; ++d) {
        target[d] = budget * spec.domains[d].ratio;
        refill(d);
    }

    Mixture mix;
    while (true) {
        std::size_t pick = n_dom;
        double best = 0.0;
        for (std::size_t d = 0; d < n_dom; ++d) {
            if (target[d] <= 0.0) continue;
            const auto len = spec.domains[d].docs[order[d][cursor[d]]].token_count;
            // only emit when it brings the domain closer to its target
            if (static_cast<double>(emitted[d]) + 0.5 * static_cast<double>(len) >= target[d]) continue;
            const double frac = static_cast<double>(emitted[d]) / target[d];
            if (pick == n_dom || frac < best) {
                pick = d;
                best = frac;
            }
        }
        if (pick == n_dom) break;
        const auto doc = order[pick][cursor[pick]];
        mix.stream.push_back({pick, doc});
        emitted[pick] += spec.domains[pick].docs[doc].token_count;
        if (++cursor[pick] == order[pick].size()) refill(pick);
    }

    auto& rep = mix.report;
    rep.total_tokens = std::accumulate(emitted.begin(), emitted.end(), std::uint64_t{0});
    const auto repeats = estimate_repeats(spec);
    for (std::size_t d = 0; d < n_dom; ++d) {
        const auto& dom = spec.domains[d];
        const std::size_t full_epochs = epochs[d] - 1 + (cursor[d] > 0 ? 1 : 0);
        rep.domains.push_back({dom.name, dom.ratio, target[d], emitted[d],
                               rep.total_tokens ? static_cast<double>(emitted[d]) / static_cast<double>(rep.total_tokens)
                                                : 0.0,
                               dom.unique_tokens, repeats[d], full_epochs});
    }
    return mix;
}

void save_corpus(const std::vector<CorpusDoc>& docs, const std::filesystem::path& path) {
    std::string out;
    for (const auto& d : docs) {
        out += escape_line(d.text);
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<CorpusDoc> load_corpus(const std::filesystem::path& path, const TokenCounter& counter) {
    const auto lines = read_lines(path);
    std::vector<CorpusDoc> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        CorpusDoc doc;
        doc.text = unescape_line(lines[i]);
        try {
            doc.kind = detect_kind(doc.text);
        } catch (const ParseError& err) {
            throw ParseError(err.what(), i + 1);
        }
        doc.token_count = count_tokens(doc.text, counter);
        out.push_back(std::move(doc));
    }
    return out;
}

void save_mixture(const Mixture& mix, const MixtureSpec& spec, const std::filesystem::path& path) {
    std::string out;
    for (const auto& m : mix.stream) {
        out += escape_line(spec.domains[m.domain].docs[m.doc].text);
        out += '\n';
    }
    write_text_file(path, out);
}

std::string mixture_report_json(const MixtureReport& report) {
    nlohmann::ordered_json j;
    j["total_tokens"] = report.total_tokens;
    auto& doms = j["domains"] = nlohmann::ordered_json::array();
    for (const auto& d : report.domains) {
        doms.push_back({{"name", d.name},
                        {"ratio", d.ratio},
                        {"target_tokens", d.target_tokens},
                        {"realized_tokens", d.realized_tokens},
                        {"realized_share", d.realized_share},
                        {"unique_tokens", d.unique_tokens},
                        {"repeats", d.repeats},
                        {"epochs", d.epochs}});
    }
    return j.dump(2) + "\n";
}

}  // namespace recsyn
