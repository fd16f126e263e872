#pragma once

#include "recsyn/rules.hpp"
#include "recsyn/tokenizer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace recsyn {

/// Sorted-form Gini: (2 * sum_i i * x_(i) - (n + 1) * sum x) / (n * sum x) with 1-based ranks
/// over ascending counts. Throws ValidationError when every count is zero.
double gini(const std::vector<std::uint64_t>& counts);

/// exp(mean ln lift) over every traversed edge of every walk. Throws ValidationError when an
/// edge has no rule or a non-positive lift.
double geometric_mean_lift(const std::vector<std::vector<std::string>>& walks, const RuleSet& rules);

struct CorpusStats {
    double mean_length = 0.0;
    std::size_t unique_items = 0;
    double item_gini = 0.0;
    std::optional<double> token_gini;        // needs an id map
    std::optional<std::size_t> unique_tokens;
    std::optional<std::uint64_t> total_tokens;
    double geom_lift = 0.0;
    std::size_t n_walks = 0;
};

/// Item Gini runs over the items that occur in the corpus. Token statistics are filled in
/// when `id_map` is given; every walk item must then be in it.
CorpusStats corpus_stats(const std::vector<std::vector<std::string>>& walks, const RuleSet& rules,
                         const IdMap* id_map = nullptr);

std::string corpus_stats_json(const CorpusStats& stats);

}  // namespace recsyn
