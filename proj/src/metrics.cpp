#include "recsyn/metrics.hpp"

#include "recsyn/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace recsyn {

double gini(const std::vector<std::uint64_t>& counts) {
    if (counts.empty()) throw ValidationError("gini of an empty count list");
    std::vector<std::uint64_t> x = counts;
    std::sort(x.begin(), x.end());
    unsigned __int128 weighted = 0, total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        weighted += static_cast<unsigned __int128>(i + 1) * x[i];
        total += x[i];
    }
    if (total == 0) throw ValidationError("gini is undefined when every count is zero");
    const auto n = static_cast<unsigned __int128>(x.size());
    // 2 * weighted >= (n + 1) * total always holds for ascending x
    const unsigned __int128 num = 2 * weighted - (n + 1) * total;
    const unsigned __int128 den = n * total;
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

double geometric_mean_lift(const std::vector<std::vector<std::string>>& walks, const RuleSet& rules) {
    std::map<std::pair<std::string_view, std::string_view>, double> lift;
    for (const auto& r : rules.rules) lift.emplace(std::pair<std::string_view, std::string_view>{r.antecedent, r.consequent}, r.lift);

    std::vector<double> log_sum(walks.size(), 0.0);
    std::vector<std::size_t> edges(walks.size(), 0);
    for (std::size_t w = 0; w < walks.size(); ++w) {
        const auto& seq = walks[w];
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            const auto it = lift.find({seq[i], seq[i + 1]});
            if (it == lift.end()) throw ValidationError("walk edge " + seq[i] + " -> " + seq[i + 1] + " has no rule");
            if (!(it->second > 0.0)) throw ValidationError("walk edge " + seq[i] + " -> " + seq[i + 1] + " has lift <= 0");
            log_sum[w] += std::log(it->second);
            ++edges[w];
        }
    }
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t w = 0; w < walks.size(); ++w) {
        total += log_sum[w];
        n += edges[w];
    }
    if (n == 0) throw ValidationError("corpus traverses no edges");
    return std::exp(total / static_cast<double>(n));
}

CorpusStats corpus_stats(const std::vector<std::vector<std::string>>& walks, const RuleSet& rules,
                         const IdMap* id_map) {
    if (walks.empty()) throw ValidationError("corpus stats need at least one walk");
    CorpusStats s;
    s.n_walks = walks.size();

    std::map<std::string_view, std::uint64_t> item_counts;
    std::size_t total_len = 0;
    for (const auto& w : walks) {
        total_len += w.size();
        for (const auto& item : w) ++item_counts[item];
    }
    s.mean_length = static_cast<double>(total_len) / static_cast<double>(walks.size());
    s.unique_items = item_counts.size();
    std::vector<std::uint64_t> counts;
    counts.reserve(item_counts.size());
    for (const auto& [item, c] : item_counts) counts.push_back(c);
    s.item_gini = gini(counts);

    if (id_map) {
        std::map<std::string_view, std::uint64_t> token_counts;
        std::uint64_t total_tokens = 0;
        for (const auto& [item, c] : item_counts) {
            const auto it = id_map->find(std::string(item));
            if (it == id_map->end()) throw ValidationError("walk item '" + std::string(item) + "' has no semantic id");
            for (const auto& tok : it->second) {
                token_counts[tok] += c;
                total_tokens += c;
            }
        }
        std::vector<std::uint64_t> tc;
        tc.reserve(token_counts.size());
        for (const auto& [tok, c] : token_counts) tc.push_back(c);
        s.token_gini = gini(tc);
        s.unique_tokens = token_counts.size();
        s.total_tokens = total_tokens;
    }
    s.geom_lift = geometric_mean_lift(walks, rules);
    return s;
}

std::string corpus_stats_json(const CorpusStats& s) {
    nlohmann::ordered_json j;
    j["n_walks"] = s.n_walks;
    j["mean_length"] = s.mean_length;
    j["unique_items"] = s.unique_items;
    j["item_gini"] = s.item_gini;
    j["token_gini"] = s.token_gini ? nlohmann::ordered_json(*s.token_gini) : nlohmann::ordered_json();
    j["unique_tokens"] = s.unique_tokens ? nlohmann::ordered_json(*s.unique_tokens) : nlohmann::ordered_json();
    j["total_tokens"] = s.total_tokens ? nlohmann::ordered_json(*s.total_tokens) : nlohmann::ordered_json();
    j["geom_lift"] = s.geom_lift;
    return j.dump(2) + "\n";
}

}  // namespace recsyn
