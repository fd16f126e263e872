#include "recsyn/graph.hpp"

#include "recsyn/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace recsyn {

namespace {
constexpr std::string_view graph_magic = "RSYNGRPH";
}

ItemGraph ItemGraph::from_edges(std::vector<std::string> items, std::vector<Edge> edges) {
    if (!std::is_sorted(items.begin(), items.end()) ||
        std::adjacent_find(items.begin(), items.end()) != items.end())
        throw ValidationError("graph item table must be sorted and unique");

    const std::size_t n = items.size();
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return a.source != b.source ? a.source < b.source : a.target < b.target;
    });
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        if (e.source >= n || e.target >= n) throw ValidationError("edge endpoint out of range");
        if (e.source == e.target) throw ValidationError("self-loop on " + items[e.source]);
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw ValidationError("edge weight must be positive and finite");
        if (!(e.confidence >= 0.0 && e.confidence <= 1.0))
            throw ValidationError("edge confidence must lie in [0, 1]");
        if (i > 0 && edges[i - 1].source == e.source && edges[i - 1].target == e.target)
            throw ValidationError("duplicate edge " + items[e.source] + " -> " + items[e.target]);
    }

    ItemGraph g;
    g.items_ = std::move(items);
    g.offsets_.assign(n + 1, 0);
    for (const auto& e : edges) ++g.offsets_[e.source + 1];
    for (std::size_t v = 0; v < n; ++v) g.offsets_[v + 1] += g.offsets_[v];
    g.targets_.reserve(edges.size());
    g.weights_.reserve(edges.size());
    g.confidences_.reserve(edges.size());
    for (const auto& e : edges) {
        g.targets_.push_back(e.target);
        g.weights_.push_back(e.weight);
        g.confidences_.push_back(e.confidence);
    }
    return g;
}

std::optional<NodeId> ItemGraph::find(std::string_view item) const {
    const auto it = std::lower_bound(items_.begin(), items_.end(), item);
    if (it == items_.end() || *it != item) return std::nullopt;
    return static_cast<NodeId>(it - items_.begin());
}

std::span<const NodeId> ItemGraph::neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], out_degree(v)};
}

std::span<const double> ItemGraph::weights(NodeId v) const {
    return {weights_.data() + offsets_[v], out_degree(v)};
}

std::span<const double> ItemGraph::confidences(NodeId v) const {
    return {confidences_.data() + offsets_[v], out_degree(v)};
}

std::optional<std::size_t> ItemGraph::edge_slot(NodeId v, NodeId x) const {
    const auto adj = neighbors(v);
    const auto it = std::lower_bound(adj.begin(), adj.end(), x);
    if (it == adj.end() || *it != x) return std::nullopt;
    return static_cast<std::size_t>(it - adj.begin());
}

std::vector<Edge> ItemGraph::edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (NodeId v = 0; v < node_count(); ++v)
        for (auto i = offsets_[v]; i < offsets_[v + 1]; ++i)
            out.push_back({v, targets_[i], weights_[i], confidences_[i]});
    return out;
}

namespace {

double rule_weight(const AssociationRule& r, WeightSource source) {
    switch (source) {
        case WeightSource::confidence: return r.confidence;
        case WeightSource::lift: return r.lift;
        case WeightSource::support: return r.support;
    }
    return r.confidence;
}

}  // namespace

GraphBuild build_graph(const RuleSet& rules, const GraphBuildOptions& options) {
    if (rules.rules.empty()) throw ValidationError("cannot build a graph from an empty rule set");

    GraphBuild out;
    std::vector<const AssociationRule*> usable;
    std::set<std::string> items;
    for (const auto& r : rules.rules) {
        if (r.antecedent == r.consequent) {
            ++out.dropped_self_loops;
            continue;
        }
        if (!(rule_weight(r, options.weight_source) > 0.0)) {
            ++out.dropped_nonpositive;
            continue;
        }
        usable.push_back(&r);
        items.insert(r.antecedent);
        items.insert(r.consequent);
    }
    if (usable.empty()) throw ValidationError("every rule was filtered away; graph would be empty");

    std::vector<std::string> table(items.begin(), items.end());
    auto index = [&](const std::string& s) {
        return static_cast<NodeId>(std::lower_bound(table.begin(), table.end(), s) - table.begin());
    };

    std::map<std::pair<NodeId, NodeId>, Edge> edges;
    for (const auto* r : usable) {
        const Edge e{index(r->antecedent), index(r->consequent), rule_weight(*r, options.weight_source),
                     r->confidence};
        if (!edges.emplace(std::pair{e.source, e.target}, e).second)
            throw ValidationError("duplicate rule " + r->antecedent + " -> " + r->consequent);
    }
    if (options.symmetrize) {
        std::vector<Edge> reverse;
        for (const auto& [key, e] : edges)
            if (!edges.count({e.target, e.source})) reverse.push_back({e.target, e.source, e.weight, e.confidence});
        for (const auto& e : reverse) edges.emplace(std::pair{e.source, e.target}, e);
    }

    std::vector<Edge> flat;
    flat.reserve(edges.size());
    for (const auto& [key, e] : edges) flat.push_back(e);
    out.graph = ItemGraph::from_edges(std::move(table), std::move(flat));
    return out;
}

EdgeSplit split_edges(const ItemGraph& graph, double holdout_fraction, std::uint64_t seed, HoldoutMode mode) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw ValidationError("holdout_fraction must lie in (0, 1)");

    auto all = graph.edges();
    Rng rng(seed);
    EdgeSplit out;
    std::vector<Edge> train;

    if (mode == HoldoutMode::edge_holdout) {
        std::vector<std::size_t> order(all.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        portable_shuffle(order, rng);
        const auto n_test = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(all.size())));
        std::vector<bool> is_test(all.size(), false);
        for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
        for (std::size_t i = 0; i < all.size(); ++i) (is_test[i] ? out.test_edges : train).push_back(all[i]);
    } else {
        std::vector<NodeId> nodes(graph.node_count());
        for (NodeId v = 0; v < nodes.size(); ++v) nodes[v] = v;
        portable_shuffle(nodes, rng);
        const auto n_held =
            static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(nodes.size())));
        std::vector<bool> held(graph.node_count(), false);
        for (std::size_t i = 0; i < n_held; ++i) held[nodes[i]] = true;
        for (NodeId v = 0; v < held.size(); ++v)
            if (held[v]) out.held_out_nodes.push_back(v);
        for (const auto& e : all) (held[e.source] || held[e.target] ? out.test_edges : train).push_back(e);
    }

    if (train.empty()) throw ValidationError("holdout removed every edge; training graph would be empty");
    out.train_graph = ItemGraph::from_edges(graph.items(), std::move(train));
    return out;
}

std::string serialize_graph(const ItemGraph& graph) {
    BinaryWriter w;
    w.put_bytes(graph_magic);
    w.put_u32(graph_format_version);
    w.put_u64(graph.node_count());
    w.put_u64(graph.edge_count());
    for (const auto& item : graph.items()) w.put_string(item);
    for (auto off : graph.offsets()) w.put_u64(off);
    const auto edges = graph.edges();
    for (const auto& e : edges) w.put_u32(e.target);
    for (const auto& e : edges) w.put_f64(e.weight);
    for (const auto& e : edges) w.put_f64(e.confidence);
    return w.buffer();
}

ItemGraph deserialize_graph(std::string bytes) {
    BinaryReader r(std::move(bytes));
    if (r.get_bytes(graph_magic.size()) != graph_magic) throw ParseError("not a graph file (bad magic)");
    if (const auto version = r.get_u32(); version != graph_format_version)
        throw ParseError("unsupported graph format version " + std::to_string(version));
    const auto n = r.get_u64();
    const auto m = r.get_u64();
    std::vector<std::string> items(n);
    for (auto& item : items) item = r.get_string();
    std::vector<std::uint64_t> offsets(n + 1);
    for (auto& off : offsets) off = r.get_u64();
    if (offsets.front() != 0 || offsets.back() != m || !std::is_sorted(offsets.begin(), offsets.end()))
        throw ParseError("corrupt CSR offsets");
    std::vector<Edge> edges(m);
    for (NodeId v = 0; v < n; ++v)
        for (auto i = offsets[v]; i < offsets[v + 1]; ++i) edges[i].source = v;
    for (auto& e : edges) e.target = r.get_u32();
    for (auto& e : edges) e.weight = r.get_f64();
    for (auto& e : edges) e.confidence = r.get_f64();
    if (!r.at_end()) throw ParseError("trailing bytes after graph payload");
    try {
        return ItemGraph::from_edges(std::move(items), std::move(edges));
    } catch (const ValidationError& err) {
        throw ParseError(std::string("invalid graph payload: ") + err.what());
    }
}

void save_graph(const ItemGraph& graph, const std::filesystem::path& path) {
    write_text_file(path, serialize_graph(graph));
}

ItemGraph load_graph(const std::filesystem::path& path) { return deserialize_graph(read_text_file(path)); }

void dump_graph_jsonl(const ItemGraph& graph, const std::filesystem::path& path) {
    std::string out;
    for (const auto& e : graph.edges()) {
        nlohmann::json row = {{"src", graph.item(e.source)}, {"dst", graph.item(e.target)},
                              {"w", e.weight}, {"conf", e.confidence}};
        out += row.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

}  // namespace recsyn
