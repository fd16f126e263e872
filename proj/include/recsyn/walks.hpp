#pragma once

#include "recsyn/common.hpp"
#include "recsyn/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace recsyn {

enum class WalkOrder { first, second };
enum class StartPolicy { uniform, degree_weighted };

struct WalkConfig {
    WalkOrder order = WalkOrder::first;
    double p = 1.0;  // return parameter, second order only
    double q = 1.0;  // in-out parameter, second order only
    double alpha_stop = 0.15;
    std::optional<double> path_conf_threshold;
    std::size_t min_len = 2;
    std::size_t max_len = 50;
    std::size_t n_walks = 1000;
    std::uint64_t seed = 0;
    StartPolicy start_policy = StartPolicy::uniform;
    double min_accept_rate = 1e-4;

    /// Every violated constraint, empty when the config is usable.
    std::vector<std::string> violations() const;
    void validate() const;
};

/// A synthetic interaction history. There is deliberately no rank or position field.
struct Walk {
    std::vector<NodeId> items;
    double path_confidence = 1.0;  // product of traversed edge confidences
};

struct Transition {
    NodeId node;
    double probability;
};

/// Next-step distribution from `cur`. With second order and a previous node t the node2vec
/// bias is 1/p for x == t, 1 when t -> x is an edge and 1/q otherwise; the probability is
/// proportional to bias * weight. Empty when `cur` is dangling.
std::vector<Transition> transition_distribution(const ItemGraph& graph, std::optional<NodeId> prev, NodeId cur,
                                                const WalkConfig& cfg);

/// Draws one step from the same distribution; nullopt when `cur` is dangling.
std::optional<NodeId> sample_next(const ItemGraph& graph, std::optional<NodeId> prev, NodeId cur,
                                  const WalkConfig& cfg, Rng& rng);

/// One attempt. Returns nullopt when the walk ends shorter than min_len or its path
/// confidence falls below the threshold.
std::optional<Walk> sample_walk(const ItemGraph& graph, const WalkConfig& cfg, Rng& rng);

/// Stream for attempt `attempt` of walk `index`; the only source of randomness per walk.
Rng walk_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt);

struct GenerationReport {
    std::size_t n_walks = 0;
    std::uint64_t attempts = 0;
    double accept_rate = 0.0;
    double mean_len = 0.0;
    std::size_t unique_items = 0;
};

struct WalkCorpus {
    std::vector<Walk> walks;
    GenerationReport report;
};

/// Exactly cfg.n_walks accepted walks. Output depends only on (graph, cfg), never on the
/// thread count. Throws ComputeError when the acceptance rate falls below cfg.min_accept_rate.
WalkCorpus generate_corpus_walks(const ItemGraph& graph, const WalkConfig& cfg);

/// JSON-lines {"items":[...],"path_conf":f}.
void save_walks(const std::vector<Walk>& walks, const ItemGraph& graph, const std::filesystem::path& path);
std::vector<Walk> load_walks(const std::filesystem::path& path, const ItemGraph& graph);

std::vector<std::vector<std::string>> walk_sequences(const std::vector<Walk>& walks, const ItemGraph& graph);

}  // namespace recsyn
