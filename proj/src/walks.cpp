#include "recsyn/walks.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

namespace recsyn {

std::vector<std::string> WalkConfig::violations() const {
    std::vector<std::string> out;
    if (!(p > 0.0)) out.push_back("p must be positive");
    if (!(q > 0.0)) out.push_back("q must be positive");
    if (!(alpha_stop > 0.0 && alpha_stop < 1.0)) out.push_back("alpha_stop must lie in (0, 1)");
    if (path_conf_threshold && !(*path_conf_threshold > 0.0))
        out.push_back("path_conf_threshold must be positive when set");
    if (min_len < 2) out.push_back("min_len must be at least 2");
    if (max_len < min_len) out.push_back("max_len must be >= min_len");
    if (!(min_accept_rate > 0.0 && min_accept_rate <= 1.0)) out.push_back("min_accept_rate must lie in (0, 1]");
    return out;
}

void WalkConfig::validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid walk config:";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ValidationError(msg);
}

namespace {

double bias(const ItemGraph& graph, std::optional<NodeId> prev, NodeId x, const WalkConfig& cfg) {
    if (cfg.order == WalkOrder::first || !prev) return 1.0;
    if (x == *prev) return 1.0 / cfg.p;
    if (graph.has_edge(*prev, x)) return 1.0;
    return 1.0 / cfg.q;
}

// Picks an adjacency slot of `cur`; returns out_degree when cur is dangling.
std::size_t sample_slot(const ItemGraph& graph, std::optional<NodeId> prev, NodeId cur, const WalkConfig& cfg,
                        Rng& rng) {
    const auto adj = graph.neighbors(cur);
    const auto w = graph.weights(cur);
    if (adj.empty()) return 0;
    const bool unbiased = cfg.order == WalkOrder::first || !prev;
    double total = 0.0;
    for (std::size_t i = 0; i < adj.size(); ++i) total += (unbiased ? 1.0 : bias(graph, prev, adj[i], cfg)) * w[i];
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < adj.size(); ++i) {
        acc += (unbiased ? 1.0 : bias(graph, prev, adj[i], cfg)) * w[i];
        if (target < acc) return i;
    }
    return adj.size() - 1;
}

NodeId pick_start(const ItemGraph& graph, const WalkConfig& cfg, Rng& rng) {
    if (cfg.start_policy == StartPolicy::uniform || graph.edge_count() == 0)
        return static_cast<NodeId>(uniform_index(rng, graph.node_count()));
    const auto& off = graph.offsets();
    const auto e = uniform_index(rng, graph.edge_count());
    return static_cast<NodeId>(std::upper_bound(off.begin(), off.end(), e) - off.begin() - 1);
}

}  // namespace

std::vector<Transition> transition_distribution(const ItemGraph& graph, std::optional<NodeId> prev, NodeId cur,
                                                const WalkConfig& cfg) {
    const auto adj = graph.neighbors(cur);
    const auto w = graph.weights(cur);
    std::vector<Transition> out;
    out.reserve(adj.size());
    double total = 0.0;
    for (std::size_t i = 0; i < adj.size(); ++i) {
        const double mass = bias(graph, prev, adj[i], cfg) * w[i];
        out.push_back({adj[i], mass});
        total += mass;
    }
    for (auto& t : out) t.probability /= total;
    return out;
}

std::optional<NodeId> sample_next(const ItemGraph& graph, std::optional<NodeId> prev, NodeId cur,
                                  const WalkConfig& cfg, Rng& rng) {
    if (graph.out_degree(cur) == 0) return std::nullopt;
    return graph.neighbors(cur)[sample_slot(graph, prev, cur, cfg, rng)];
}

std::optional<Walk> sample_walk(const ItemGraph& graph, const WalkConfig& cfg, Rng& rng) {
    if (graph.node_count() == 0) throw ValidationError("cannot walk an empty graph");
    Walk walk;
    walk.items.reserve(std::min<std::size_t>(cfg.max_len, 64));
    NodeId cur = pick_start(graph, cfg, rng);
    std::optional<NodeId> prev;
    walk.items.push_back(cur);

    while (walk.items.size() < cfg.max_len) {
        if (graph.out_degree(cur) == 0) break;
        const auto slot = sample_slot(graph, prev, cur, cfg, rng);
        const NodeId next = graph.neighbors(cur)[slot];
        walk.path_confidence *= graph.confidences(cur)[slot];
        walk.items.push_back(next);
        prev = cur;
        cur = next;
        // confidences never exceed 1, so a walk below threshold can only stay below it
        if (cfg.path_conf_threshold && walk.path_confidence < *cfg.path_conf_threshold) return std::nullopt;
        if (walk.items.size() >= cfg.min_len && walk.items.size() < cfg.max_len &&
            uniform01(rng) < cfg.alpha_stop)
            break;
    }
    if (walk.items.size() < cfg.min_len) return std::nullopt;
    return walk;
}

Rng walk_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
    return Rng(derive_seed(seed, {index, attempt}));
}

WalkCorpus generate_corpus_walks(const ItemGraph& graph, const WalkConfig& cfg) {
    cfg.validate();
    WalkCorpus out;
    if (cfg.n_walks == 0) return out;
    if (graph.node_count() == 0) throw ValidationError("cannot walk an empty graph");

    const auto max_attempts = static_cast<std::uint64_t>(std::ceil(1.0 / cfg.min_accept_rate));
    const auto n = static_cast<std::int64_t>(cfg.n_walks);
    out.walks.resize(cfg.n_walks);
    std::vector<std::uint64_t> attempts(cfg.n_walks, 0);
    std::atomic<bool> exhausted{false};

#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < n; ++i) {
        if (exhausted.load(std::memory_order_relaxed)) continue;
        const auto idx = static_cast<std::size_t>(i);
        for (std::uint64_t a = 0; a < max_attempts; ++a) {
            auto rng = walk_stream(cfg.seed, idx, a);
            auto walk = sample_walk(graph, cfg, rng);
            attempts[idx] = a + 1;
            if (walk) {
                out.walks[idx] = std::move(*walk);
                break;
            }
            if (a + 1 == max_attempts) exhausted = true;
        }
    }

    auto& rep = out.report;
    rep.n_walks = cfg.n_walks;
    rep.attempts = std::accumulate(attempts.begin(), attempts.end(), std::uint64_t{0});
    rep.accept_rate = static_cast<double>(cfg.n_walks) / static_cast<double>(rep.attempts);
    if (exhausted || rep.accept_rate < cfg.min_accept_rate) {
        std::string msg = strprintf("walk acceptance rate %.3g is below the floor %.3g", rep.accept_rate,
                                    cfg.min_accept_rate);
        if (cfg.path_conf_threshold)
            msg += strprintf("; path_conf_threshold=%g is the likely cause", *cfg.path_conf_threshold);
        else
            msg += "; min_len may exceed what the graph supports";
        throw ComputeError(msg);
    }

    std::vector<bool> touched(graph.node_count(), false);
    std::size_t total_len = 0;
    for (const auto& w : out.walks) {
        total_len += w.items.size();
        for (auto v : w.items) touched[v] = true;
    }
    rep.mean_len = static_cast<double>(total_len) / static_cast<double>(cfg.n_walks);
    rep.unique_items = static_cast<std::size_t>(std::count(touched.begin(), touched.end(), true));
    return out;
}

void save_walks(const std::vector<Walk>& walks, const ItemGraph& graph, const std::filesystem::path& path) {
    std::string out;
    for (const auto& w : walks) {
        nlohmann::json items = nlohmann::json::array();
        for (auto v : w.items) items.push_back(graph.item(v));
        nlohmann::json row = {{"items", std::move(items)}, {"path_conf", w.path_confidence}};
        out += row.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<Walk> load_walks(const std::filesystem::path& path, const ItemGraph& graph) {
    const auto lines = read_lines(path);
    std::vector<Walk> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        Walk w;
        try {
            const auto row = nlohmann::json::parse(lines[i]);
            for (const auto& item : row.at("items")) {
                const auto id = graph.find(item.get<std::string>());
                if (!id) throw ParseError("walk item not in graph: " + item.get<std::string>(), i + 1);
                w.items.push_back(*id);
            }
            w.path_confidence = row.at("path_conf").get<double>();
        } catch (const nlohmann::json::exception& err) {
            throw ParseError(std::string("bad walk row: ") + err.what(), i + 1);
        }
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<std::vector<std::string>> walk_sequences(const std::vector<Walk>& walks, const ItemGraph& graph) {
    std::vector<std::vector<std::string>> out;
    out.reserve(walks.size());
    for (const auto& w : walks) {
        std::vector<std::string> seq;
        seq.reserve(w.items.size());
        for (auto v : w.items) seq.push_back(graph.item(v));
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace recsyn
