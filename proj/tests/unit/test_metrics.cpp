#include "recsyn/metrics.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace recsyn;

namespace {

RuleSet lifts(std::initializer_list<std::tuple<const char*, const char*, double>> edges) {
    RuleSet rs;
    for (const auto& [a, b, l] : edges) {
        AssociationRule r;
        r.antecedent = a;
        r.consequent = b;
        r.lift = l;
        r.confidence = 0.5;
        r.support = 0.1;
        rs.rules.push_back(r);
    }
    return rs;
}

}  // namespace

TEST_CASE("gini fixed cases") {
    CHECK(gini({1, 1, 1, 1}) == 0.0);
    CHECK(gini({0, 0, 0, 1}) == 0.75);
    CHECK(gini({1, 3}) == 0.25);
    CHECK(gini({7}) == 0.0);
    CHECK_THROWS_AS(gini({0, 0}), ValidationError);
    CHECK_THROWS_AS(gini({}), ValidationError);
}

TEST_CASE("gini equals the pairwise formula") {
    Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::uint64_t> x(1 + uniform_index(rng, 200));
        const auto scale = 1 + uniform_index(rng, trial % 3 == 0 ? 1'000'000'000 : 20);
        for (auto& v : x) v = uniform_index(rng, scale);
        x[uniform_index(rng, x.size())] += 1;
        const double g = gini(x);
        CHECK(std::abs(g - oracle::pairwise_gini(x)) <= 1e-12);
        CHECK(g >= 0.0);
        CHECK(g <= 1.0 - 1.0 / static_cast<double>(x.size()) + 1e-15);
    }
}

TEST_CASE("gini is scale invariant") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::uint64_t> x(2 + uniform_index(rng, 50));
        for (auto& v : x) v = 1 + uniform_index(rng, 1000);
        auto y = x;
        const auto k = 1 + uniform_index(rng, 1000);
        for (auto& v : y) v *= k;
        CHECK(gini(x) == gini(y));
    }
}

TEST_CASE("geometric mean lift") {
    CHECK(geometric_mean_lift({{"a", "b", "c"}}, lifts({{"a", "b", 1.0}, {"b", "c", 1.0}})) == 1.0);
    CHECK(geometric_mean_lift({{"a", "b", "c"}}, lifts({{"a", "b", 4.0}, {"b", "c", 1.0}})) == doctest::Approx(2.0));
    CHECK(geometric_mean_lift({{"a", "b"}}, lifts({{"a", "b", 8.0 / 9.0}})) == doctest::Approx(8.0 / 9.0));
    CHECK_THROWS_AS(geometric_mean_lift({{"a", "c"}}, lifts({{"a", "b", 1.0}})), ValidationError);
    CHECK_THROWS_AS(geometric_mean_lift({{"a", "b"}}, lifts({{"a", "b", 0.0}})), ValidationError);
    CHECK_THROWS_AS(geometric_mean_lift({{"a"}}, lifts({{"a", "b", 1.0}})), ValidationError);
}

TEST_CASE("splitting a walk at a node keeps the geometric mean lift") {
    Rng rng(12);
    const auto rs = lifts({{"a", "b", 3.0}, {"b", "c", 0.5}, {"c", "a", 7.0}, {"b", "a", 1.2}});
    const std::vector<std::string> walk = {"a", "b", "c", "a", "b", "a", "b", "c"};
    const double whole = geometric_mean_lift({walk}, rs);
    for (std::size_t cut = 1; cut + 1 < walk.size(); ++cut) {
        const std::vector<std::string> left(walk.begin(), walk.begin() + static_cast<long>(cut) + 1);
        const std::vector<std::string> right(walk.begin() + static_cast<long>(cut), walk.end());
        CHECK(geometric_mean_lift({left, right}, rs) == doctest::Approx(whole).epsilon(1e-14));
    }
}

TEST_CASE("corpus stats basics") {
    const auto rs = lifts({{"a", "b", 2.0}});
    auto s = corpus_stats({{"a", "b"}}, rs);
    CHECK(s.mean_length == 2.0);
    CHECK(s.unique_items == 2);
    CHECK(s.n_walks == 1);
    CHECK_FALSE(s.token_gini.has_value());
    s = corpus_stats({{"a", "b"}, {"a", "b"}}, rs);
    CHECK(s.unique_items == 2);
    CHECK(s.n_walks == 2);
    CHECK_THROWS_AS(corpus_stats({}, rs), ValidationError);
}

TEST_CASE("planted corpus item gini matches a brute-force double loop") {
    RuleSet rs = lifts({{"A", "B", 1.0}, {"A", "C", 1.0}, {"A", "D", 1.0}, {"A", "E", 1.0}, {"A", "F", 1.0}});
    const std::vector<std::vector<std::string>> walks = {{"A", "B"}, {"A", "C"}, {"A", "D"}, {"A", "E"}, {"A", "F"}};
    const auto s = corpus_stats(walks, rs);
    const std::vector<double> counts = {5, 1, 1, 1, 1, 1};
    double num = 0.0, total = 0.0;
    for (double a : counts) {
        total += a;
        for (double b : counts) num += std::abs(a - b);
    }
    CHECK(s.item_gini == doctest::Approx(num / (2.0 * 6.0 * total)).epsilon(1e-14));
}

TEST_CASE("token statistics expand items through the id map") {
    const auto rs = lifts({{"a", "b", 2.0}, {"b", "a", 2.0}});
    const IdMap m{{"a", {"REC1", "REC5"}}, {"b", {"REC1", "REC6"}}};
    const auto s = corpus_stats({{"a", "b", "a"}}, rs, &m);
    REQUIRE(s.token_gini.has_value());
    CHECK(*s.unique_tokens == 3);
    CHECK(*s.total_tokens == 6);
    CHECK(*s.token_gini == doctest::Approx(oracle::pairwise_gini({3, 2, 1})));
    const IdMap partial{{"a", {"REC1"}}};
    CHECK_THROWS_AS(corpus_stats({{"a", "b"}}, rs, &partial), ValidationError);
    const auto js = corpus_stats_json(s);
    CHECK(js.find("\"token_gini\"") != std::string::npos);
}
