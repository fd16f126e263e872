#include "recsyn/rules.hpp"

#include "recsyn/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace recsyn {

using nlohmann::json;

namespace {

using PairKey = std::uint64_t;

PairKey pair_key(ItemIndex a, ItemIndex b) { return (static_cast<PairKey>(a) << 32) | b; }

// Distinct ordered pairs occurring in one session under the window/order policy.
void session_pairs(const std::vector<ItemIndex>& s, const MiningOptions& opt, std::vector<PairKey>& out) {
    out.clear();
    const std::size_t n = s.size();
    const bool adjacent = opt.window.kind == CooccurWindow::Kind::adjacent_k;
    const std::size_t span = adjacent ? opt.window.k : n;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t end = std::min(n, i + span + 1);
        for (std::size_t j = i + 1; j < end; ++j) {
            if (s[i] == s[j]) continue;
            out.push_back(pair_key(s[i], s[j]));
            if (opt.order == PairOrder::symmetric) out.push_back(pair_key(s[j], s[i]));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

}  // namespace

RuleSet mine_pairwise_rules(const SessionizedLog& log, const MiningOptions& options) {
    if (log.sessions.empty()) throw ValidationError("cannot mine rules from an empty log");
    if (options.min_cooccur < 1) throw ValidationError("min_cooccur must be at least 1");
    if (options.window.kind == CooccurWindow::Kind::adjacent_k && options.window.k < 1)
        throw ValidationError("adjacent-k window needs k >= 1");

    const std::size_t n_items = log.vocab.size();
    const auto n_sessions = static_cast<std::int64_t>(log.sessions.size());

    std::vector<std::uint64_t> freq(n_items, 0);
    std::unordered_map<PairKey, std::uint64_t> co;

#pragma omp parallel
    {
        std::vector<std::uint64_t> local_freq(n_items, 0);
        std::unordered_map<PairKey, std::uint64_t> local_co;
        std::vector<PairKey> pairs;
        std::vector<ItemIndex> distinct;
#pragma omp for schedule(dynamic, 64) nowait
        for (std::int64_t si = 0; si < n_sessions; ++si) {
            const auto& items = log.sessions[static_cast<std::size_t>(si)].items;
            distinct.assign(items.begin(), items.end());
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            for (auto it : distinct) ++local_freq[it];
            session_pairs(items, options, pairs);
            for (auto key : pairs) ++local_co[key];
        }
#pragma omp critical
        {
            for (std::size_t i = 0; i < n_items; ++i) freq[i] += local_freq[i];
            for (const auto& [key, count] : local_co) co[key] += count;
        }
    }

    std::vector<std::pair<PairKey, std::uint64_t>> kept;
    for (const auto& entry : co)
        if (entry.second >= options.min_cooccur) kept.push_back(entry);
    std::sort(kept.begin(), kept.end());

    RuleSet out;
    out.n_sessions = static_cast<std::uint64_t>(n_sessions);
    for (std::size_t i = 0; i < n_items; ++i) out.item_freq.emplace(log.vocab[i], freq[i]);
    out.rules.reserve(kept.size());
    const auto n = static_cast<double>(n_sessions);
    for (const auto& [key, count] : kept) {
        const auto a = static_cast<ItemIndex>(key >> 32);
        const auto b = static_cast<ItemIndex>(key & 0xffffffffu);
        AssociationRule r;
        r.antecedent = log.vocab[a];
        r.consequent = log.vocab[b];
        r.cooccur_count = count;
        // each ratio is a single division of exact integers, so it is correctly rounded
        r.support = static_cast<double>(count) / n;
        r.confidence = static_cast<double>(count) / static_cast<double>(freq[a]);
        r.lift = static_cast<double>(count * out.n_sessions) / static_cast<double>(freq[a] * freq[b]);
        out.rules.push_back(std::move(r));
    }
    return out;
}

RuleSet filter_rules(const RuleSet& rules, double min_confidence, double min_lift,
                     std::size_t top_k_per_antecedent) {
    if (min_confidence < 0.0 || min_lift < 0.0) throw ValidationError("rule thresholds must be non-negative");

    std::map<std::string, std::vector<std::size_t>> by_antecedent;
    for (std::size_t i = 0; i < rules.rules.size(); ++i) {
        const auto& r = rules.rules[i];
        if (r.confidence >= min_confidence && r.lift >= min_lift) by_antecedent[r.antecedent].push_back(i);
    }

    std::vector<bool> keep(rules.rules.size(), false);
    for (auto& [antecedent, ids] : by_antecedent) {
        std::sort(ids.begin(), ids.end(), [&](std::size_t x, std::size_t y) {
            const auto& a = rules.rules[x];
            const auto& b = rules.rules[y];
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            if (a.lift != b.lift) return a.lift > b.lift;
            return a.consequent < b.consequent;
        });
        const std::size_t take = std::min(ids.size(), top_k_per_antecedent);
        for (std::size_t i = 0; i < take; ++i) keep[ids[i]] = true;
    }

    RuleSet out;
    out.n_sessions = rules.n_sessions;
    out.item_freq = rules.item_freq;
    for (std::size_t i = 0; i < rules.rules.size(); ++i)
        if (keep[i]) out.rules.push_back(rules.rules[i]);
    return out;
}

std::string rules_to_jsonl(const RuleSet& rules) {
    std::string out;
    for (const auto& r : rules.rules) {
        json row = {{"a", r.antecedent},   {"b", r.consequent}, {"support", r.support},
                    {"confidence", r.confidence}, {"lift", r.lift}, {"n", r.cooccur_count}};
        out += row.dump();
        out += '\n';
    }
    return out;
}

void save_rules(const RuleSet& rules, const std::filesystem::path& path) {
    write_text_file(path, rules_to_jsonl(rules));
}

RuleSet rules_from_jsonl(const std::string& content) {
    RuleSet out;
    const auto lines = split(content, '\n');
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        AssociationRule r;
        try {
            const auto row = json::parse(lines[i]);
            r.antecedent = row.at("a").get<std::string>();
            r.consequent = row.at("b").get<std::string>();
            r.support = row.at("support").get<double>();
            r.confidence = row.at("confidence").get<double>();
            r.lift = row.at("lift").get<double>();
            r.cooccur_count = row.at("n").get<std::uint64_t>();
        } catch (const json::exception& err) {
            throw ParseError(std::string("bad rule row: ") + err.what(), i + 1);
        }
        if (r.support < 0 || r.support > 1 || r.confidence < 0 || r.confidence > 1 || r.lift < 0)
            throw ParseError("rule statistics out of range", i + 1);
        if (r.support > 0 && r.confidence > 0 && r.lift > 0) {
            const auto co = static_cast<double>(r.cooccur_count);
            const auto n = static_cast<std::uint64_t>(std::llround(co / r.support));
            const auto fa = static_cast<std::uint64_t>(std::llround(co / r.confidence));
            const auto fb = static_cast<std::uint64_t>(
                std::llround(co * static_cast<double>(n) / (static_cast<double>(fa) * r.lift)));
            out.n_sessions = std::max(out.n_sessions, n);
            out.item_freq[r.antecedent] = fa;
            out.item_freq[r.consequent] = fb;
        }
        out.rules.push_back(std::move(r));
    }
    return out;
}

RuleSet load_rules(const std::filesystem::path& path) { return rules_from_jsonl(read_text_file(path)); }

}  // namespace recsyn
