#include "recsyn/walks.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace recsyn;

namespace {

// v=0 with out-neighbours t=1, x1=2, x2=3; t -> x1 exists, t -> x2 does not.
ItemGraph bias_fixture() {
    return ItemGraph::from_edges({"n0_v", "n1_t", "n2_x1", "n3_x2"},
                                 {{0, 1, 1.0, 0.5}, {0, 2, 1.0, 0.5}, {0, 3, 1.0, 0.5}, {1, 0, 1.0, 0.5}, {1, 2, 1.0, 0.5}});
}

ItemGraph random_graph(Rng& rng, std::size_t n, double density, double conf_lo = 0.05) {
    std::vector<std::string> items;
    for (std::size_t i = 0; i < n; ++i) items.push_back("n" + std::to_string(10 + i));
    std::vector<Edge> edges;
    for (NodeId a = 0; a < n; ++a)
        for (NodeId b = 0; b < n; ++b)
            if (a != b && uniform01(rng) < density)
                edges.push_back({a, b, 0.1 + uniform01(rng), conf_lo + (1.0 - conf_lo) * uniform01(rng)});
    return ItemGraph::from_edges(items, edges);
}

std::vector<std::vector<double>> dense(const ItemGraph& g) {
    std::vector<std::vector<double>> w(g.node_count(), std::vector<double>(g.node_count(), 0.0));
    for (const auto& e : g.edges()) w[e.source][e.target] = e.weight;
    return w;
}

}  // namespace

TEST_CASE("second-order bias cases give 4/7, 2/7, 1/7") {
    const auto g = bias_fixture();
    WalkConfig cfg;
    cfg.order = WalkOrder::second;
    cfg.p = 0.5;
    cfg.q = 2.0;
    const auto dist = transition_distribution(g, NodeId{1}, 0, cfg);
    REQUIRE(dist.size() == 3);
    CHECK(dist[0].node == 1);
    CHECK(dist[0].probability == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
    CHECK(dist[1].probability == doctest::Approx(2.0 / 7.0).epsilon(1e-15));
    CHECK(dist[2].probability == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("p = q = 1 reduces second order to first order") {
    Rng rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = random_graph(rng, 6, 0.5);
        WalkConfig first, second;
        second.order = WalkOrder::second;
        for (NodeId v = 0; v < g.node_count(); ++v) {
            if (g.out_degree(v) == 0) continue;
            for (NodeId t = 0; t < g.node_count(); ++t) {
                const auto a = transition_distribution(g, std::nullopt, v, first);
                const auto b = transition_distribution(g, t, v, second);
                REQUIRE(a.size() == b.size());
                for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].probability == doctest::Approx(b[i].probability));
            }
        }
    }
}

TEST_CASE("first order normalizes weights") {
    const auto g = ItemGraph::from_edges({"a", "b", "c"}, {{0, 1, 0.3, 0.5}, {0, 2, 0.1, 0.5}});
    const auto dist = transition_distribution(g, std::nullopt, 0, WalkConfig{});
    REQUIRE(dist.size() == 2);
    CHECK(dist[0].probability == doctest::Approx(0.75));
    CHECK(dist[1].probability == doctest::Approx(0.25));
    CHECK(transition_distribution(g, std::nullopt, 1, WalkConfig{}).empty());
}

TEST_CASE("distributions match the matrix oracle and sum to one") {
    Rng rng(33);
    for (int trial = 0; trial < 40; ++trial) {
        const auto g = random_graph(rng, 5, 0.5);
        const auto w = dense(g);
        for (auto [p, q] : {std::pair{0.5, 2.0}, {1.0, 1.0}, {2.0, 0.5}, {0.3, 0.7}}) {
            WalkConfig cfg;
            cfg.order = WalkOrder::second;
            cfg.p = p;
            cfg.q = q;
            for (NodeId v = 0; v < g.node_count(); ++v) {
                if (g.out_degree(v) == 0) continue;
                for (int t = -1; t < static_cast<int>(g.node_count()); ++t) {
                    const auto dist = transition_distribution(
                        g, t < 0 ? std::nullopt : std::optional<NodeId>(static_cast<NodeId>(t)), v, cfg);
                    const auto raw = oracle::node2vec_weights(w, t, static_cast<int>(v), p, q);
                    double z = 0.0;
                    for (double x : raw) z += x;
                    double sum = 0.0;
                    for (const auto& tr : dist) {
                        CHECK(tr.probability >= 0.0);
                        CHECK(tr.probability == doctest::Approx(raw[tr.node] / z).epsilon(1e-12));
                        sum += tr.probability;
                    }
                    CHECK(std::abs(sum - 1.0) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("sampled next steps follow the distribution") {
    const auto g = bias_fixture();
    WalkConfig cfg;
    cfg.order = WalkOrder::second;
    cfg.p = 0.5;
    cfg.q = 2.0;
    Rng rng(77);
    const int n = 20000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) ++counts[*sample_next(g, NodeId{1}, 0, cfg, rng)];
    const double expect[4] = {0.0, 4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0};
    for (int x = 1; x < 4; ++x) {
        const double se = std::sqrt(expect[x] * (1 - expect[x]) / n);
        CHECK(std::abs(counts[x] / double(n) - expect[x]) <= 4 * se);
    }
    CHECK_FALSE(sample_next(g, std::nullopt, 3, cfg, rng).has_value());
}

TEST_CASE("stop probability near one gives length-2 walks") {
    Rng rng(2);
    const auto g = random_graph(rng, 8, 0.6);
    WalkConfig cfg;
    cfg.alpha_stop = 1.0 - 1e-12;
    cfg.n_walks = 500;
    cfg.seed = 4;
    for (const auto& w : generate_corpus_walks(g, cfg).walks) CHECK(w.items.size() == 2);
}

TEST_CASE("confidence 0.049 with threshold 1e-9 caps walks at six edges") {
    std::vector<Edge> edges;
    for (NodeId a = 0; a < 4; ++a)
        for (NodeId b = 0; b < 4; ++b)
            if (a != b) edges.push_back({a, b, 1.0, 0.049});
    const auto g = ItemGraph::from_edges({"a", "b", "c", "d"}, edges);
    WalkConfig cfg;
    cfg.alpha_stop = 0.05;
    cfg.path_conf_threshold = 1e-9;
    cfg.n_walks = 2000;
    cfg.seed = 6;
    const auto corpus = generate_corpus_walks(g, cfg);
    std::size_t longest = 0;
    for (const auto& w : corpus.walks) {
        CHECK(w.items.size() - 1 <= 6);
        CHECK(w.path_confidence >= 1e-9);
        longest = std::max(longest, w.items.size() - 1);
    }
    CHECK(longest == 6);
    CHECK(corpus.report.accept_rate < 1.0);
}

TEST_CASE("same stream gives the same walk") {
    Rng g_rng(9);
    const auto g = random_graph(g_rng, 10, 0.4);
    WalkConfig cfg;
    cfg.order = WalkOrder::second;
    cfg.p = 0.5;
    cfg.q = 2;
    for (std::uint64_t i = 0; i < 50; ++i) {
        auto r1 = walk_stream(1, i, 0), r2 = walk_stream(1, i, 0);
        const auto a = sample_walk(g, cfg, r1), b = sample_walk(g, cfg, r2);
        REQUIRE(a.has_value() == b.has_value());
        if (a) CHECK(a->items == b->items);
    }
}

TEST_CASE("no walks requested gives an empty corpus") {
    Rng rng(1);
    const auto g = random_graph(rng, 5, 0.5);
    WalkConfig cfg;
    cfg.n_walks = 0;
    const auto c = generate_corpus_walks(g, cfg);
    CHECK(c.walks.empty());
    CHECK(c.report.n_walks == 0);
    CHECK(c.report.mean_len == 0.0);
}

TEST_CASE("a two-node cycle alternates") {
    const auto g = ItemGraph::from_edges({"a", "b"}, {{0, 1, 1.0, 0.9}, {1, 0, 1.0, 0.9}});
    WalkConfig cfg;
    cfg.n_walks = 200;
    cfg.seed = 3;
    cfg.alpha_stop = 0.1;
    for (const auto& w : generate_corpus_walks(g, cfg).walks)
        for (std::size_t i = 1; i < w.items.size(); ++i) CHECK(w.items[i] != w.items[i - 1]);
}

TEST_CASE("every emitted walk satisfies its invariants") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = random_graph(rng, 12, 0.3, 0.01);
        WalkConfig cfg;
        cfg.order = trial % 2 ? WalkOrder::second : WalkOrder::first;
        cfg.p = 0.5;
        cfg.q = 2;
        cfg.min_len = 2 + trial % 3;
        cfg.max_len = cfg.min_len + 6;
        cfg.alpha_stop = 0.2;
        cfg.path_conf_threshold = trial % 3 ? std::optional<double>(1e-4) : std::nullopt;
        cfg.start_policy = trial % 4 < 2 ? StartPolicy::uniform : StartPolicy::degree_weighted;
        cfg.n_walks = 300;
        cfg.seed = static_cast<std::uint64_t>(trial);
        cfg.min_accept_rate = 1e-6;
        WalkCorpus corpus;
        try {
            corpus = generate_corpus_walks(g, cfg);
        } catch (const ComputeError&) {
            continue;
        }
        REQUIRE(corpus.walks.size() == cfg.n_walks);
        for (const auto& w : corpus.walks) {
            CHECK(w.items.size() >= cfg.min_len);
            CHECK(w.items.size() <= cfg.max_len);
            double conf = 1.0;
            for (std::size_t i = 1; i < w.items.size(); ++i) {
                const auto slot = g.edge_slot(w.items[i - 1], w.items[i]);
                REQUIRE(slot.has_value());
                conf *= g.confidences(w.items[i - 1])[*slot];
            }
            CHECK(w.path_confidence == doctest::Approx(conf).epsilon(1e-12));
            if (cfg.path_conf_threshold) CHECK(w.path_confidence >= *cfg.path_conf_threshold);
        }
    }
}

TEST_CASE("corpus is identical across thread counts") {
    Rng rng(5);
    const auto g = random_graph(rng, 40, 0.15);
    WalkConfig cfg;
    cfg.order = WalkOrder::second;
    cfg.p = 0.5;
    cfg.q = 2;
    cfg.n_walks = 3000;
    cfg.seed = 12;
    set_thread_count(1);
    const auto a = generate_corpus_walks(g, cfg);
    set_thread_count(4);
    const auto b = generate_corpus_walks(g, cfg);
    set_thread_count(0);
    REQUIRE(a.walks.size() == b.walks.size());
    for (std::size_t i = 0; i < a.walks.size(); ++i) {
        CHECK(a.walks[i].items == b.walks[i].items);
        CHECK(a.walks[i].path_confidence == b.walks[i].path_confidence);
    }
    CHECK(a.report.attempts == b.report.attempts);
}

TEST_CASE("an unreachable threshold fails with the threshold named") {
    const auto g = ItemGraph::from_edges({"a", "b"}, {{0, 1, 1.0, 0.01}, {1, 0, 1.0, 0.01}});
    WalkConfig cfg;
    cfg.path_conf_threshold = 0.5;
    cfg.n_walks = 10;
    try {
        generate_corpus_walks(g, cfg);
        FAIL("expected a compute error");
    } catch (const ComputeError& e) {
        CHECK(std::string(e.what()).find("path_conf_threshold") != std::string::npos);
    }
}

TEST_CASE("invalid configs list every violation") {
    WalkConfig cfg;
    cfg.alpha_stop = 0.0;
    cfg.min_len = 1;
    cfg.order = WalkOrder::second;
    cfg.p = -1;
    CHECK(cfg.violations().size() == 3);
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("walk files round trip") {
    oracle::TempDir dir("walks");
    Rng rng(8);
    const auto g = random_graph(rng, 10, 0.4);
    WalkConfig cfg;
    cfg.n_walks = 50;
    const auto c = generate_corpus_walks(g, cfg);
    save_walks(c.walks, g, dir / "w.jsonl");
    const auto back = load_walks(dir / "w.jsonl", g);
    REQUIRE(back.size() == c.walks.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i].items == c.walks[i].items);
    const auto seqs = walk_sequences(c.walks, g);
    CHECK(seqs[0].front() == g.item(c.walks[0].items.front()));
}
