#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace recsyn {

enum class Action { view, like, purchase, other };

/// Unknown strings map to Action::other; matching is case-insensitive.
Action parse_action(std::string_view text) noexcept;
const char* action_name(Action action) noexcept;

struct InteractionEvent {
    std::string user_id;
    std::string item_id;
    std::int64_t timestamp = 0;  // epoch milliseconds
    Action action = Action::other;
};

enum class EventFormat { delimited, json_lines };

using ItemIndex = std::uint32_t;

/// One user's chronologically ordered interactions; item indices point into SessionizedLog::vocab.
struct Session {
    std::string user;
    std::vector<ItemIndex> items;
};

/// Sessions over a sorted, de-duplicated vocabulary. Every session has at least two items
/// and every vocabulary entry occurs in some session.
struct SessionizedLog {
    std::vector<std::string> vocab;
    std::vector<Session> sessions;
    std::int64_t gap_threshold_ms = 0;

    /// Builds a log from string sequences; shorter-than-2 sequences are dropped.
    static SessionizedLog from_sequences(
        const std::vector<std::pair<std::string, std::vector<std::string>>>& sequences,
        std::int64_t gap_threshold_ms = 0);

    std::vector<std::string> session_items(std::size_t i) const;
    std::vector<std::vector<std::string>> sequences() const;
    std::optional<ItemIndex> find(std::string_view item) const;
    std::size_t event_count() const;
};

struct HoldoutSplit {
    SessionizedLog train;
    SessionizedLog test;
    std::vector<std::string> common_vocab;  // sorted
};

inline constexpr std::int64_t default_gap_threshold_ms = 30 * 60 * 1000;

std::vector<InteractionEvent> load_events(const std::filesystem::path& path, EventFormat format);
std::vector<InteractionEvent> parse_events(const std::string& content, EventFormat format);

SessionizedLog sessionize(const std::vector<InteractionEvent>& events,
                          std::int64_t gap_threshold_ms = default_gap_threshold_ms);

/// Partitions users by seed, then restricts test sessions to train-vocab ∩ synthetic_vocab.
/// Throws ValidationError when no test session survives the filter.
HoldoutSplit split_holdout(const SessionizedLog& log, double test_fraction, std::uint64_t seed,
                           const std::vector<std::string>& synthetic_vocab);

/// Keeps only items in `vocab` (sorted), dropping sessions that fall below two items.
SessionizedLog restrict_to_vocab(const SessionizedLog& log, const std::vector<std::string>& vocab);

void save_sessions(const SessionizedLog& log, const std::filesystem::path& path);
SessionizedLog load_sessions(const std::filesystem::path& path);

}  // namespace recsyn
