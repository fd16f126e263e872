#pragma once

#include "recsyn/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace recsyn {

/// Directed item pair with its association statistics over sessions.
///   support    = co / n_sessions
///   confidence = co / sessions_containing(antecedent)
///   lift       = confidence / P(consequent)
struct AssociationRule {
    std::string antecedent;
    std::string consequent;
    double support = 0.0;
    double confidence = 0.0;
    double lift = 0.0;
    std::uint64_t cooccur_count = 0;
};

struct RuleSet {
    std::vector<AssociationRule> rules;
    std::uint64_t n_sessions = 0;
    std::map<std::string, std::uint64_t> item_freq;  // sessions containing each item
};

/// Which positions inside a session may form a pair.
struct CooccurWindow {
    enum class Kind { whole_session, adjacent_k };
    Kind kind = Kind::whole_session;
    std::size_t k = 1;  // max position distance for adjacent_k

    static CooccurWindow whole_session() { return {}; }
    static CooccurWindow adjacent(std::size_t k) { return {Kind::adjacent_k, k}; }
};

/// `precedence` counts (a, b) only when a occurs before b; `symmetric` counts both
/// directions for every co-occurring pair.
enum class PairOrder { precedence, symmetric };

struct MiningOptions {
    std::uint64_t min_cooccur = 2;
    CooccurWindow window = CooccurWindow::whole_session();
    PairOrder order = PairOrder::precedence;
};

/// Rules come back sorted by (antecedent, consequent). Co-occurrence is counted once per
/// session. Throws ValidationError on an empty log or min_cooccur == 0.
RuleSet mine_pairwise_rules(const SessionizedLog& log, const MiningOptions& options = {});

inline constexpr std::size_t unlimited = std::numeric_limits<std::size_t>::max();

/// Keeps rules meeting both thresholds, then at most `top_k_per_antecedent` per antecedent
/// ranked by (confidence desc, lift desc, consequent asc). Survivors keep their input order.
RuleSet filter_rules(const RuleSet& rules, double min_confidence, double min_lift,
                     std::size_t top_k_per_antecedent = unlimited);

/// JSON-lines: {"a","b","support","confidence","lift","n"}.
void save_rules(const RuleSet& rules, const std::filesystem::path& path);
std::string rules_to_jsonl(const RuleSet& rules);

/// n_sessions and per-antecedent frequencies are recovered from the stored ratios.
RuleSet load_rules(const std::filesystem::path& path);
RuleSet rules_from_jsonl(const std::string& content);

}  // namespace recsyn
