#include "recsyn/graph.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

using namespace recsyn;

namespace {

AssociationRule rule(std::string a, std::string b, double conf, double lift = 1.0, double support = 0.1) {
    AssociationRule r;
    r.antecedent = std::move(a);
    r.consequent = std::move(b);
    r.confidence = conf;
    r.lift = lift;
    r.support = support;
    r.cooccur_count = 1;
    return r;
}

ItemGraph ten_edge_graph() {
    std::vector<Edge> edges;
    const std::vector<std::pair<NodeId, NodeId>> pairs = {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3},
                                                          {2, 4}, {3, 4}, {3, 0}, {4, 0}, {4, 1}};
    for (auto [s, t] : pairs) edges.push_back({s, t, 0.5, 0.5});
    return ItemGraph::from_edges({"a", "b", "c", "d", "e"}, edges);
}

RuleSet random_rules(Rng& rng, std::size_t n_items) {
    RuleSet rs;
    rs.n_sessions = 10;
    for (std::size_t a = 0; a < n_items; ++a)
        for (std::size_t b = 0; b < n_items; ++b)
            if (a != b && uniform01(rng) < 0.4)
                rs.rules.push_back(rule("i" + std::to_string(a), "i" + std::to_string(b), 0.05 + 0.9 * uniform01(rng),
                                        0.5 + uniform01(rng), 0.05));
    std::sort(rs.rules.begin(), rs.rules.end(), [](const auto& x, const auto& y) {
        return std::tie(x.antecedent, x.consequent) < std::tie(y.antecedent, y.consequent);
    });
    return rs;
}

}  // namespace

TEST_CASE("two rules map straight to two weighted edges") {
    RuleSet rs;
    rs.rules = {rule("A", "B", 0.5), rule("B", "A", 0.25)};
    const auto g = build_graph(rs).graph;
    REQUIRE(g.node_count() == 2);
    REQUIRE(g.edge_count() == 2);
    CHECK(g.weights(*g.find("A"))[0] == 0.5);
    CHECK(g.weights(*g.find("B"))[0] == 0.25);
}

TEST_CASE("self-loop rules are dropped and counted") {
    RuleSet rs;
    rs.rules = {rule("A", "A", 0.5), rule("A", "B", 0.3)};
    const auto b = build_graph(rs);
    CHECK(b.dropped_self_loops == 1);
    CHECK(b.graph.edge_count() == 1);
    CHECK_FALSE(b.graph.has_edge(*b.graph.find("A"), *b.graph.find("A")));
}

TEST_CASE("lift weights on the four-session example give A->B weight 8/9") {
    SessionizedLog log;
    log.vocab = {"A", "B", "C"};
    log.sessions = {{"u1", {0, 1}}, {"u2", {0, 1}}, {"u3", {0, 2}}, {"u4", {1}}};
    MiningOptions opt;
    opt.min_cooccur = 1;
    GraphBuildOptions gopt;
    gopt.weight_source = WeightSource::lift;
    const auto g = build_graph(mine_pairwise_rules(log, opt), gopt).graph;
    const auto a = *g.find("A"), b = *g.find("B");
    CHECK(g.weights(a)[*g.edge_slot(a, b)] == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
    CHECK(g.confidences(a)[*g.edge_slot(a, b)] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("isolated items are excluded and empty results are errors") {
    RuleSet rs;
    rs.rules = {rule("A", "B", 0.5), rule("C", "C", 0.5), rule("D", "E", 0.0)};
    const auto b = build_graph(rs);
    CHECK(b.graph.items() == std::vector<std::string>{"A", "B"});
    CHECK(b.dropped_nonpositive == 1);
    CHECK_THROWS_AS(build_graph(RuleSet{}), ValidationError);
    RuleSet only_loops;
    only_loops.rules = {rule("A", "A", 0.5)};
    CHECK_THROWS_AS(build_graph(only_loops), ValidationError);
    RuleSet dup;
    dup.rules = {rule("A", "B", 0.5), rule("A", "B", 0.4)};
    CHECK_THROWS_AS(build_graph(dup), ValidationError);
}

TEST_CASE("symmetrize adds only missing reverse edges") {
    RuleSet rs;
    rs.rules = {rule("A", "B", 0.5), rule("B", "C", 0.2), rule("C", "B", 0.7)};
    GraphBuildOptions opt;
    opt.symmetrize = true;
    const auto g = build_graph(rs, opt).graph;
    CHECK(g.edge_count() == 4);
    const auto a = *g.find("A"), b = *g.find("B"), c = *g.find("C");
    CHECK(g.has_edge(b, a));
    CHECK(g.weights(c)[*g.edge_slot(c, b)] == 0.7);
}

TEST_CASE("structural invariants hold on random rule sets") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto rules = random_rules(rng, 2 + uniform_index(rng, 12));
        if (rules.rules.empty()) continue;
        const auto g = build_graph(rules).graph;
        std::size_t total = 0;
        for (NodeId v = 0; v < g.node_count(); ++v) {
            const auto nb = g.neighbors(v);
            total += nb.size();
            for (std::size_t i = 0; i < nb.size(); ++i) {
                CHECK(nb[i] != v);
                if (i > 0) CHECK(nb[i - 1] < nb[i]);
                CHECK(g.weights(v)[i] > 0.0);
                CHECK(g.edge_slot(v, nb[i]) == i);
            }
        }
        CHECK(total == g.edge_count());
        CHECK(std::is_sorted(g.items().begin(), g.items().end()));
    }
}

TEST_CASE("building from reloaded rules matches the in-memory build") {
    oracle::TempDir dir("graph");
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto seqs = oracle::random_sessions(rng, 10, 20);
        std::vector<std::pair<std::string, std::vector<std::string>>> named;
        for (const auto& s : seqs) named.push_back({"u", s});
        MiningOptions opt;
        opt.min_cooccur = 1;
        const auto rs = mine_pairwise_rules(SessionizedLog::from_sequences(named), opt);
        save_rules(rs, dir / "r.jsonl");
        for (auto ws : {WeightSource::confidence, WeightSource::lift, WeightSource::support}) {
            GraphBuildOptions gopt;
            gopt.weight_source = ws;
            CHECK(build_graph(load_rules(dir / "r.jsonl"), gopt).graph == build_graph(rs, gopt).graph);
        }
    }
}

TEST_CASE("binary format round trip and corruption") {
    oracle::TempDir dir("graph");
    const auto g = ten_edge_graph();
    save_graph(g, dir / "g.bin");
    CHECK(load_graph(dir / "g.bin") == g);
    auto bytes = serialize_graph(g);
    CHECK(deserialize_graph(bytes) == g);
    CHECK_THROWS_AS(deserialize_graph(bytes.substr(0, bytes.size() - 3)), ParseError);
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize_graph(bytes), ParseError);
    dump_graph_jsonl(g, dir / "g.jsonl");
    CHECK(read_lines(dir / "g.jsonl").size() == 10);
}

TEST_CASE("edge holdout: exactly 3 of 10, reproducible, counts add up") {
    const auto g = ten_edge_graph();
    const auto s1 = split_edges(g, 0.3, 99, HoldoutMode::edge_holdout);
    const auto s2 = split_edges(g, 0.3, 99, HoldoutMode::edge_holdout);
    CHECK(s1.test_edges.size() == 3);
    CHECK(s1.train_graph.edge_count() == 7);
    CHECK(s1.train_graph == s2.train_graph);
    for (const auto& e : s1.test_edges) CHECK_FALSE(s1.train_graph.has_edge(e.source, e.target));
    CHECK(s1.train_graph.items() == g.items());
}

TEST_CASE("tiny holdout fraction leaves the graph untouched") {
    const auto g = ten_edge_graph();
    const auto s = split_edges(g, 1e-9, 1, HoldoutMode::edge_holdout);
    CHECK(s.test_edges.empty());
    CHECK(s.train_graph == g);
}

TEST_CASE("node holdout removes every edge touching held-out nodes") {
    const auto g = ten_edge_graph();
    const auto s = split_edges(g, 0.2, 5, HoldoutMode::node_holdout);
    REQUIRE(s.held_out_nodes.size() == 1);
    const auto x = s.held_out_nodes[0];
    CHECK(s.train_graph.out_degree(x) == 0);
    for (NodeId v = 0; v < s.train_graph.node_count(); ++v) CHECK_FALSE(s.train_graph.has_edge(v, x));
    CHECK(s.train_graph.edge_count() + s.test_edges.size() == g.edge_count());
    CHECK_THROWS_AS(split_edges(g, 0.0, 5, HoldoutMode::node_holdout), ValidationError);
    CHECK_THROWS_AS(split_edges(g, 0.99, 5, HoldoutMode::node_holdout), ValidationError);
}

TEST_CASE("from_edges validates its input") {
    CHECK_THROWS_AS(ItemGraph::from_edges({"b", "a"}, {{0, 1, 1.0, 0.5}}), ValidationError);
    CHECK_THROWS_AS(ItemGraph::from_edges({"a", "b"}, {{0, 0, 1.0, 0.5}}), ValidationError);
    CHECK_THROWS_AS(ItemGraph::from_edges({"a", "b"}, {{0, 1, -1.0, 0.5}}), ValidationError);
    CHECK_THROWS_AS(ItemGraph::from_edges({"a", "b"}, {{0, 1, 1.0, 1.5}}), ValidationError);
    CHECK_THROWS_AS(ItemGraph::from_edges({"a", "b"}, {{0, 2, 1.0, 0.5}}), ValidationError);
    CHECK_THROWS_AS(ItemGraph::from_edges({"a", "b"}, {{0, 1, 1.0, 0.5}, {0, 1, 2.0, 0.5}}), ValidationError);
}
