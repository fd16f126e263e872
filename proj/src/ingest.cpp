#include "recsyn/ingest.hpp"

#include "recsyn/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace recsyn {

using nlohmann::json;

Action parse_action(std::string_view text) noexcept {
    std::string lower;
    for (unsigned char c : trim(text)) lower.push_back(static_cast<char>(std::tolower(c)));
    if (lower == "view") return Action::view;
    if (lower == "like") return Action::like;
    if (lower == "purchase") return Action::purchase;
    return Action::other;
}

const char* action_name(Action action) noexcept {
    switch (action) {
        case Action::view: return "view";
        case Action::like: return "like";
        case Action::purchase: return "purchase";
        case Action::other: return "other";
    }
    return "other";
}

namespace {

std::int64_t parse_timestamp(std::string_view text, std::size_t line) {
    text = trim(text);
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("timestamp is not an integer: '" + std::string(text) + "'", line);
    if (value < 0) throw ParseError("timestamp must be non-negative", line);
    return value;
}

void check_ids(const InteractionEvent& e, std::size_t line) {
    if (e.user_id.empty()) throw ParseError("missing user_id", line);
    if (e.item_id.empty()) throw ParseError("missing item_id", line);
}

std::vector<InteractionEvent> parse_delimited(const std::vector<std::string_view>& lines) {
    if (lines.empty()) throw ParseError("missing header row", 1);
    const auto header = split(lines[0], ',');
    int user_col = -1, item_col = -1, ts_col = -1, action_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto name = trim(header[c]);
        if (name == "user_id") user_col = static_cast<int>(c);
        else if (name == "item_id") item_col = static_cast<int>(c);
        else if (name == "timestamp") ts_col = static_cast<int>(c);
        else if (name == "action") action_col = static_cast<int>(c);
    }
    if (user_col < 0 || item_col < 0 || ts_col < 0 || action_col < 0)
        throw ParseError("header must name user_id,item_id,timestamp,action", 1);

    std::vector<InteractionEvent> events;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (trim(lines[i]).empty()) continue;
        const auto fields = split(lines[i], ',');
        if (fields.size() != header.size())
            throw ParseError(strprintf("expected %zu fields, found %zu", header.size(), fields.size()),
                             line_no);
        InteractionEvent e;
        e.user_id = std::string(trim(fields[user_col]));
        e.item_id = std::string(trim(fields[item_col]));
        check_ids(e, line_no);
        e.timestamp = parse_timestamp(fields[ts_col], line_no);
        e.action = parse_action(fields[action_col]);
        events.push_back(std::move(e));
    }
    return events;
}

std::string json_id(const json& row, const char* key, std::size_t line) {
    const auto it = row.find(key);
    if (it == row.end() || it->is_null()) return {};
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
    throw ParseError(std::string(key) + " must be a string", line);
}

std::vector<InteractionEvent> parse_json_lines(const std::vector<std::string_view>& lines) {
    std::vector<InteractionEvent> events;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (trim(lines[i]).empty()) continue;
        json row;
        try {
            row = json::parse(lines[i]);
        } catch (const json::parse_error& err) {
            throw ParseError(std::string("invalid JSON: ") + err.what(), line_no);
        }
        if (!row.is_object()) throw ParseError("expected a JSON object", line_no);
        InteractionEvent e;
        e.user_id = json_id(row, "user_id", line_no);
        e.item_id = json_id(row, "item_id", line_no);
        check_ids(e, line_no);
        const auto ts = row.find("timestamp");
        if (ts == row.end() || !ts->is_number_integer())
            throw ParseError("timestamp must be an integer", line_no);
        e.timestamp = ts->get<std::int64_t>();
        if (e.timestamp < 0) throw ParseError("timestamp must be non-negative", line_no);
        const auto action = row.find("action");
        if (action != row.end() && action->is_string()) e.action = parse_action(action->get<std::string>());
        events.push_back(std::move(e));
    }
    return events;
}

}  // namespace

std::vector<InteractionEvent> parse_events(const std::string& content, EventFormat format) {
    auto lines = split(content, '\n');
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    return format == EventFormat::delimited ? parse_delimited(lines) : parse_json_lines(lines);
}

std::vector<InteractionEvent> load_events(const std::filesystem::path& path, EventFormat format) {
    return parse_events(read_text_file(path), format);
}

SessionizedLog SessionizedLog::from_sequences(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& sequences,
    std::int64_t gap_threshold_ms) {
    SessionizedLog log;
    log.gap_threshold_ms = gap_threshold_ms;
    for (const auto& [user, items] : sequences) {
        if (items.size() < 2) continue;
        log.vocab.insert(log.vocab.end(), items.begin(), items.end());
    }
    std::sort(log.vocab.begin(), log.vocab.end());
    log.vocab.erase(std::unique(log.vocab.begin(), log.vocab.end()), log.vocab.end());
    for (const auto& [user, items] : sequences) {
        if (items.size() < 2) continue;
        Session s{user, {}};
        s.items.reserve(items.size());
        for (const auto& item : items) s.items.push_back(*log.find(item));
        log.sessions.push_back(std::move(s));
    }
    return log;
}

std::optional<ItemIndex> SessionizedLog::find(std::string_view item) const {
    const auto it = std::lower_bound(vocab.begin(), vocab.end(), item);
    if (it == vocab.end() || *it != item) return std::nullopt;
    return static_cast<ItemIndex>(it - vocab.begin());
}

std::vector<std::string> SessionizedLog::session_items(std::size_t i) const {
    std::vector<std::string> out;
    out.reserve(sessions[i].items.size());
    for (auto idx : sessions[i].items) out.push_back(vocab[idx]);
    return out;
}

std::vector<std::vector<std::string>> SessionizedLog::sequences() const {
    std::vector<std::vector<std::string>> out;
    out.reserve(sessions.size());
    for (std::size_t i = 0; i < sessions.size(); ++i) out.push_back(session_items(i));
    return out;
}

std::size_t SessionizedLog::event_count() const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.items.size();
    return n;
}

SessionizedLog sessionize(const std::vector<InteractionEvent>& events, std::int64_t gap_threshold_ms) {
    if (gap_threshold_ms <= 0) throw ValidationError("gap_threshold_ms must be positive");

    // users in order of first appearance; per-user event indices in file order
    std::unordered_map<std::string, std::size_t> user_slot;
    std::vector<std::string> users;
    std::vector<std::vector<std::size_t>> per_user;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto [it, inserted] = user_slot.try_emplace(events[i].user_id, users.size());
        if (inserted) {
            users.push_back(events[i].user_id);
            per_user.emplace_back();
        }
        per_user[it->second].push_back(i);
    }

    std::vector<std::pair<std::string, std::vector<std::string>>> sequences;
    for (std::size_t u = 0; u < users.size(); ++u) {
        auto& idx = per_user[u];
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return events[a].timestamp < events[b].timestamp;
        });
        std::vector<std::string> current;
        std::int64_t last_ts = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto& e = events[idx[k]];
            if (k > 0 && e.timestamp - last_ts > gap_threshold_ms) {
                sequences.emplace_back(users[u], std::move(current));
                current.clear();
            }
            current.push_back(e.item_id);
            last_ts = e.timestamp;
        }
        if (!current.empty()) sequences.emplace_back(users[u], std::move(current));
    }
    return SessionizedLog::from_sequences(sequences, gap_threshold_ms);
}

namespace {

SessionizedLog subset(const SessionizedLog& log, const std::vector<std::size_t>& session_ids,
                      const std::vector<std::string>* keep_vocab) {
    std::vector<std::pair<std::string, std::vector<std::string>>> sequences;
    sequences.reserve(session_ids.size());
    for (auto i : session_ids) {
        std::vector<std::string> items;
        for (auto idx : log.sessions[i].items) {
            const auto& item = log.vocab[idx];
            if (!keep_vocab || std::binary_search(keep_vocab->begin(), keep_vocab->end(), item))
                items.push_back(item);
        }
        sequences.emplace_back(log.sessions[i].user, std::move(items));
    }
    return SessionizedLog::from_sequences(sequences, log.gap_threshold_ms);
}

}  // namespace

SessionizedLog restrict_to_vocab(const SessionizedLog& log, const std::vector<std::string>& vocab) {
    std::vector<std::string> sorted = vocab;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> all(log.sessions.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return subset(log, all, &sorted);
}

HoldoutSplit split_holdout(const SessionizedLog& log, double test_fraction, std::uint64_t seed,
                           const std::vector<std::string>& synthetic_vocab) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test_fraction must lie in (0, 1)");

    std::vector<std::string> users;
    std::unordered_set<std::string> seen;
    for (const auto& s : log.sessions)
        if (seen.insert(s.user).second) users.push_back(s.user);

    Rng rng(seed);
    portable_shuffle(users, rng);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(users.size())));
    if (users.size() >= 2) n_test = std::clamp<std::size_t>(n_test, 1, users.size() - 1);
    const std::unordered_set<std::string> test_users(users.begin(), users.begin() + n_test);

    std::vector<std::size_t> train_ids, test_ids;
    for (std::size_t i = 0; i < log.sessions.size(); ++i)
        (test_users.count(log.sessions[i].user) ? test_ids : train_ids).push_back(i);

    HoldoutSplit split;
    split.train = subset(log, train_ids, nullptr);

    std::vector<std::string> synth = synthetic_vocab;
    std::sort(synth.begin(), synth.end());
    std::set_intersection(split.train.vocab.begin(), split.train.vocab.end(), synth.begin(), synth.end(),
                          std::back_inserter(split.common_vocab));

    split.test = subset(log, test_ids, &split.common_vocab);
    if (split.test.sessions.empty())
        throw ValidationError(
            "holdout split left no test session after vocabulary filtering; "
            "synthetic and real vocabularies barely overlap");
    return split;
}

void save_sessions(const SessionizedLog& log, const std::filesystem::path& path) {
    std::string out;
    for (std::size_t i = 0; i < log.sessions.size(); ++i) {
        json row = {{"user", log.sessions[i].user}, {"items", log.session_items(i)}};
        out += row.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

SessionizedLog load_sessions(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    std::vector<std::pair<std::string, std::vector<std::string>>> sequences;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            const auto row = json::parse(lines[i]);
            sequences.emplace_back(row.at("user").get<std::string>(),
                                   row.at("items").get<std::vector<std::string>>());
        } catch (const json::exception& err) {
            throw ParseError(std::string("bad session row: ") + err.what(), i + 1);
        }
    }
    return SessionizedLog::from_sequences(sequences);
}

}  // namespace recsyn
