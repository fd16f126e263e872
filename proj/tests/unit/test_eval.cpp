#include "recsyn/eval.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace recsyn;

namespace {

const Sequences fixture = {{"A", "B"}, {"A", "B"}, {"A", "C"}};

}  // namespace

TEST_CASE("markov ranks by transition counts") {
    const auto m = train_baseline(ModelKind::markov, fixture);
    const auto r = m->rank({"A"}, 3);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == "B");
    CHECK(r[1] == "C");
    CHECK(r[2] == "A");
    CHECK(recall_at_k(*m, {{"A", "B"}}, {10}).recall_at.at(10) == 1.0);
    CHECK(recall_at_k(*m, {{"A", "C"}}, {1}).recall_at.at(1) == 0.0);
}

TEST_CASE("markov backs off to popularity for states without successors") {
    const auto m = train_baseline(ModelKind::markov, {{"A", "B"}});
    const auto pop = train_baseline(ModelKind::popularity, {{"A", "B"}});
    CHECK(m->rank({"B"}, 2) == pop->rank({}, 2));
    CHECK(m->rank({"Z"}, 2) == pop->rank({}, 2));
    CHECK(m->rank({"A"}, 1) == std::vector<std::string>{"B"});
}

TEST_CASE("popularity ignores order") {
    Sequences rev = fixture;
    for (auto& s : rev) std::reverse(s.begin(), s.end());
    const auto a = train_baseline(ModelKind::popularity, fixture);
    const auto b = train_baseline(ModelKind::popularity, rev);
    CHECK(a->rank({"A"}, 3) == b->rank({"C"}, 3));
    CHECK(a->rank({}, 3) == std::vector<std::string>{"A", "B", "C"});
    CHECK(recall_at_k(*a, {{"C", "A"}, {"B", "A"}}, {10}).recall_at.at(10) == 1.0);
}

TEST_CASE("item knn prefers the strongest co-occurrence") {
    const auto m = train_baseline(ModelKind::item_knn, {{"A", "B"}, {"A", "B"}, {"A", "C"}, {"C", "D"}, {"D", "C"}});
    CHECK(m->rank({"B"}, 1) == std::vector<std::string>{"A"});
    CHECK(m->rank({"D"}, 1) == std::vector<std::string>{"C"});
}

TEST_CASE("rankings are duplicate free and stay in the training vocabulary") {
    Rng rng(8);
    for (auto kind : {ModelKind::markov, ModelKind::item_knn, ModelKind::popularity}) {
        const auto train = oracle::random_sessions(rng, 12, 30);
        const auto m = train_baseline(kind, train);
        const std::set<std::string> vocab(m->vocabulary().begin(), m->vocabulary().end());
        for (const auto& s : train) {
            const auto r = m->rank(s, 100);
            CHECK(r.size() == vocab.size());
            CHECK(std::set<std::string>(r.begin(), r.end()).size() == r.size());
            for (const auto& item : r) CHECK(vocab.count(item) == 1);
        }
    }
}

TEST_CASE("recall is monotone in K and evaluation is deterministic") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto train = oracle::random_sessions(rng, 10, 20);
        const auto test = oracle::random_sessions(rng, 10, 20);
        for (auto kind : {ModelKind::markov, ModelKind::item_knn, ModelKind::popularity}) {
            const auto m = train_baseline(kind, train);
            const std::vector<std::size_t> ks = {1, 2, 3, 5, 8, 13};
            const auto a = recall_at_k(*m, test, ks);
            const auto b = recall_at_k(*m, test, ks);
            CHECK(eval_report_json(a) == eval_report_json(b));
            double prev = 0.0;
            for (auto k : ks) {
                CHECK(a.recall_at.at(k) >= prev);
                CHECK(a.recall_at.at(k) <= 1.0);
                prev = a.recall_at.at(k);
            }
        }
    }
}

TEST_CASE("short sessions are skipped and K lists are validated") {
    const auto m = train_baseline(ModelKind::markov, fixture);
    const auto r = recall_at_k(*m, {{"A"}, {"A", "B"}}, {10});
    CHECK(r.n_skipped == 1);
    CHECK(r.n_predictions == 1);
    CHECK_THROWS_AS(recall_at_k(*m, {{"A", "B"}}, {}), ValidationError);
    CHECK_THROWS_AS(recall_at_k(*m, {{"A", "B"}}, {10, 5}), ValidationError);
    CHECK_THROWS_AS(recall_at_k(*m, {{"A", "B"}}, {0}), ValidationError);
    CHECK_THROWS_AS(recall_at_k(*m, {{"A"}}, {10}), ValidationError);
    CHECK_THROWS_AS(train_baseline(ModelKind::markov, {}), ValidationError);
    CHECK_THROWS_AS(train_baseline(ModelKind::markov, {{"A", "A"}}), ValidationError);
    CHECK_THROWS_AS(parse_model_kind("gru"), ValidationError);
    CHECK(parse_model_kind("item_knn") == ModelKind::item_knn);
}

TEST_CASE("identical training data gives identical paired reports") {
    Rng rng(12);
    const auto train = oracle::random_sessions(rng, 10, 20);
    const auto test = oracle::random_sessions(rng, 10, 20);
    const auto p = run_tstr_trtr(train, train, test, ModelKind::markov, {1, 5, 10});
    CHECK(p.tstr.recall_at == p.trtr.recall_at);
    CHECK(p.tstr.n_predictions == p.trtr.n_predictions);
    CHECK(p.tstr.setting == "TSTR");
    CHECK(p.trtr.setting == "TRTR");
    CHECK_THROWS_AS(run_tstr_trtr(train, train, test, ModelKind::markov, {}), ValidationError);
}

TEST_CASE("markov ranking follows a known first-order chain") {
    // state i moves to (i + j) mod 6 with probability proportional to 6 - j, j = 1..5
    const std::vector<std::string> names = {"s0", "s1", "s2", "s3", "s4", "s5"};
    Rng rng(77);
    Sequences seqs;
    for (int n = 0; n < 400; ++n) {
        std::vector<std::string> s;
        std::size_t cur = uniform_index(rng, 6);
        s.push_back(names[cur]);
        for (int step = 0; step < 60; ++step) {
            const auto u = uniform_index(rng, 15);
            std::size_t j = 1;
            for (std::size_t acc = 5; u >= acc; acc += 5 - j, ++j) {
            }
            cur = (cur + j) % 6;
            s.push_back(names[cur]);
        }
        seqs.push_back(s);
    }
    const auto m = train_baseline(ModelKind::markov, seqs);
    for (std::size_t i = 0; i < 6; ++i) {
        std::vector<std::string> want;
        for (std::size_t j = 1; j <= 5; ++j) want.push_back(names[(i + j) % 6]);
        auto got = m->rank({names[i]}, 6);
        got.resize(5);
        CHECK(got == want);
    }
}

TEST_CASE("report json carries the declared keys") {
    const auto m = train_baseline(ModelKind::markov, fixture);
    const auto js = eval_report_json(recall_at_k(*m, {{"A", "B"}}, {10, 100}, "TRTR"));
    CHECK(js.find("\"setting\": \"TRTR\"") != std::string::npos);
    CHECK(js.find("\"10\": 1.0") != std::string::npos);
    CHECK(js.find("\"n\": 1") != std::string::npos);
}
