#pragma once

#include "recsyn/rules.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace recsyn {

using NodeId = std::uint32_t;

enum class WeightSource { confidence, lift, support };

struct Edge {
    NodeId source = 0;
    NodeId target = 0;
    double weight = 0.0;
    double confidence = 0.0;
};

/// Immutable CSR item graph. Node ids index a sorted item table; each adjacency list is
/// sorted by target with no self-loops or duplicates, weights > 0 and confidences in [0, 1].
class ItemGraph {
public:
    ItemGraph() = default;

    /// Validates and packs edges over `items` (which must be sorted and unique).
    static ItemGraph from_edges(std::vector<std::string> items, std::vector<Edge> edges);

    std::size_t node_count() const noexcept { return items_.size(); }
    std::size_t edge_count() const noexcept { return targets_.size(); }

    const std::string& item(NodeId v) const { return items_.at(v); }
    const std::vector<std::string>& items() const noexcept { return items_; }
    std::optional<NodeId> find(std::string_view item) const;

    std::size_t out_degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
    std::span<const NodeId> neighbors(NodeId v) const;
    std::span<const double> weights(NodeId v) const;
    std::span<const double> confidences(NodeId v) const;

    /// Position of edge v->x inside v's adjacency, via binary search.
    std::optional<std::size_t> edge_slot(NodeId v, NodeId x) const;
    bool has_edge(NodeId v, NodeId x) const { return edge_slot(v, x).has_value(); }

    std::vector<Edge> edges() const;

    const std::vector<std::uint64_t>& offsets() const noexcept { return offsets_; }

    friend bool operator==(const ItemGraph&, const ItemGraph&) = default;

private:
    std::vector<std::string> items_;
    std::vector<std::uint64_t> offsets_{0};
    std::vector<NodeId> targets_;
    std::vector<double> weights_;
    std::vector<double> confidences_;
};

struct GraphBuildOptions {
    WeightSource weight_source = WeightSource::confidence;
    bool symmetrize = false;  // add a reverse edge wherever one is missing
};

struct GraphBuild {
    ItemGraph graph;
    std::size_t dropped_self_loops = 0;
    std::size_t dropped_nonpositive = 0;
};

/// One edge per rule; items left without any edge are excluded from the node table.
/// Throws ValidationError on duplicate pairs or when no edge survives.
GraphBuild build_graph(const RuleSet& rules, const GraphBuildOptions& options = {});

enum class HoldoutMode { edge_holdout, node_holdout };

/// Both graphs share the input's node table; test edges refer to those node ids.
struct EdgeSplit {
    ItemGraph train_graph;
    std::vector<Edge> test_edges;
    std::vector<NodeId> held_out_nodes;  // node_holdout only
};

EdgeSplit split_edges(const ItemGraph& graph, double holdout_fraction, std::uint64_t seed, HoldoutMode mode);

inline constexpr std::uint32_t graph_format_version = 1;

void save_graph(const ItemGraph& graph, const std::filesystem::path& path);
ItemGraph load_graph(const std::filesystem::path& path);
std::string serialize_graph(const ItemGraph& graph);
ItemGraph deserialize_graph(std::string bytes);

/// Debug dump, one {"src","dst","w","conf"} object per edge.
void dump_graph_jsonl(const ItemGraph& graph, const std::filesystem::path& path);

}  // namespace recsyn
