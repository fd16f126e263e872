#include "recsyn/ingest.hpp"

#include "support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>

using namespace recsyn;

namespace {

InteractionEvent ev(std::string user, std::string item, std::int64_t ts) {
    return {std::move(user), std::move(item), ts, Action::view};
}

}  // namespace

TEST_CASE("delimited file rows come back in file order") {
    oracle::TempDir dir("ingest");
    write_text_file(dir / "e.csv",
                    "user_id,item_id,timestamp,action\nu1,i1,5,view\nu2,i2,3,like\nu1,i3,9,purchase\n");
    const auto events = load_events(dir / "e.csv", EventFormat::delimited);
    REQUIRE(events.size() == 3);
    CHECK(events[0].item_id == "i1");
    CHECK(events[1].user_id == "u2");
    CHECK(events[1].action == Action::like);
    CHECK(events[2].timestamp == 9);
    CHECK(events[2].action == Action::purchase);
}

TEST_CASE("columns may appear in any order") {
    const auto events = parse_events("action,timestamp,item_id,user_id\nview,7,x,u\n", EventFormat::delimited);
    REQUIRE(events.size() == 1);
    CHECK(events[0].user_id == "u");
    CHECK(events[0].item_id == "x");
    CHECK(events[0].timestamp == 7);
}

TEST_CASE("a row missing item_id is rejected with its line number") {
    try {
        parse_events("user_id,item_id,timestamp,action\nu1,,5,view\nu1,i2,6,view\n", EventFormat::delimited);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.category() == ErrorCategory::parse);
    }
}

TEST_CASE("malformed rows are errors, never skipped") {
    CHECK_THROWS_AS(parse_events("user_id,item_id,timestamp,action\nu1,i1,abc,view\n", EventFormat::delimited),
                    ParseError);
    CHECK_THROWS_AS(parse_events("user_id,item_id,timestamp,action\nu1,i1,-4,view\n", EventFormat::delimited),
                    ParseError);
    CHECK_THROWS_AS(parse_events("user_id,item_id,timestamp,action\nu1,i1,4\n", EventFormat::delimited), ParseError);
    CHECK_THROWS_AS(parse_events("user,item\n", EventFormat::delimited), ParseError);
    CHECK_THROWS_AS(parse_events("{\"user_id\":\"u\",\"item_id\":\"i\"\n", EventFormat::json_lines), ParseError);
}

TEST_CASE("json-lines actions map through the table, unknown ones to other") {
    const auto events = parse_events(
        "{\"user_id\":\"u\",\"item_id\":\"a\",\"timestamp\":1,\"action\":\"view\"}\n"
        "{\"user_id\":\"u\",\"item_id\":\"b\",\"timestamp\":2,\"action\":\"buy\"}\n",
        EventFormat::json_lines);
    REQUIRE(events.size() == 2);
    CHECK(events[0].action == Action::view);
    CHECK(events[1].action == Action::other);
}

TEST_CASE("action parsing is case-insensitive") {
    CHECK(parse_action("VIEW") == Action::view);
    CHECK(parse_action("Purchase") == Action::purchase);
    CHECK(parse_action("") == Action::other);
}

TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(load_events("/nonexistent/path/events.csv", EventFormat::delimited), IoError);
}

TEST_CASE("an event beyond the gap starts a new session and singletons drop") {
    const auto log = sessionize({ev("u", "i1", 0), ev("u", "i2", 10), ev("u", "i3", 10'000'000)}, 1'000'000);
    REQUIRE(log.sessions.size() == 1);
    CHECK(log.session_items(0) == std::vector<std::string>{"i1", "i2"});
    CHECK(log.vocab == std::vector<std::string>{"i1", "i2"});
}

TEST_CASE("five events within the gap form one session") {
    std::vector<InteractionEvent> events;
    for (int k = 0; k < 5; ++k) events.push_back(ev("u", "i" + std::to_string(k), k * 1000));
    const auto log = sessionize(events, 1'000'000);
    REQUIRE(log.sessions.size() == 1);
    CHECK(log.sessions[0].items.size() == 5);
}

TEST_CASE("interleaved users give one timestamp-sorted session each") {
    const auto log = sessionize({ev("a", "x3", 30), ev("b", "y1", 5), ev("a", "x1", 10), ev("b", "y2", 6),
                                 ev("a", "x2", 20)},
                                1'000'000);
    REQUIRE(log.sessions.size() == 2);
    CHECK(log.sessions[0].user == "a");
    CHECK(log.session_items(0) == std::vector<std::string>{"x1", "x2", "x3"});
    CHECK(log.session_items(1) == std::vector<std::string>{"y1", "y2"});
}

TEST_CASE("sessionize rejects a non-positive gap and accepts empty input") {
    CHECK_THROWS_AS(sessionize({}, 0), ValidationError);
    CHECK(sessionize({}, 10).sessions.empty());
}

TEST_CASE("concatenated sessions reproduce each user's events minus singletons") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<InteractionEvent> events;
        const int n = 5 + static_cast<int>(uniform_index(rng, 60));
        for (int k = 0; k < n; ++k)
            events.push_back(ev("u" + std::to_string(uniform_index(rng, 4)), "i" + std::to_string(uniform_index(rng, 9)),
                                static_cast<std::int64_t>(k) * 100 + static_cast<std::int64_t>(uniform_index(rng, 500))));
        const std::int64_t gap = 150;
        const auto log = sessionize(events, gap);

        // Oracle: sort each user's events, cut at gaps, drop runs of length one.
        std::map<std::string, std::vector<InteractionEvent>> per_user;
        for (const auto& e : events) per_user[e.user_id].push_back(e);
        std::map<std::string, std::vector<std::string>> expected;
        for (auto& [u, es] : per_user) {
            std::stable_sort(es.begin(), es.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
            std::vector<std::string> run{es[0].item_id};
            for (std::size_t k = 1; k <= es.size(); ++k) {
                if (k == es.size() || es[k].timestamp - es[k - 1].timestamp > gap) {
                    if (run.size() >= 2) expected[u].insert(expected[u].end(), run.begin(), run.end());
                    run.clear();
                }
                if (k < es.size()) run.push_back(es[k].item_id);
            }
        }
        std::map<std::string, std::vector<std::string>> got;
        for (std::size_t i = 0; i < log.sessions.size(); ++i) {
            CHECK(log.sessions[i].items.size() >= 2);
            const auto items = log.session_items(i);
            got[log.sessions[i].user].insert(got[log.sessions[i].user].end(), items.begin(), items.end());
        }
        CHECK(got == expected);
    }
}

TEST_CASE("split by user: 4 users at fraction 0.5 gives 2 and 2") {
    const auto log = SessionizedLog::from_sequences(
        {{"u1", {"a", "b"}}, {"u2", {"a", "c"}}, {"u3", {"b", "c"}}, {"u4", {"a", "b", "c"}}});
    const auto split = split_holdout(log, 0.5, 3, log.vocab);
    std::set<std::string> train_users, test_users;
    for (const auto& s : split.train.sessions) train_users.insert(s.user);
    for (const auto& s : split.test.sessions) test_users.insert(s.user);
    CHECK(train_users.size() == 2);
    CHECK(test_users.size() == 2);
    for (const auto& u : test_users) CHECK(train_users.count(u) == 0);
}

TEST_CASE("test sessions only use train vocab intersected with synthetic vocab") {
    std::vector<std::pair<std::string, std::vector<std::string>>> seqs;
    for (int u = 0; u < 20; ++u) seqs.push_back({"u" + std::to_string(u), {"a", "b", "x", "c", "d"}});
    const auto log = SessionizedLog::from_sequences(seqs);
    const auto split = split_holdout(log, 0.3, 9, {"a", "b", "c", "d"});
    CHECK(std::find(split.common_vocab.begin(), split.common_vocab.end(), "x") == split.common_vocab.end());
    for (std::size_t i = 0; i < split.test.sessions.size(); ++i)
        for (const auto& item : split.test.session_items(i)) {
            CHECK(item != "x");
            CHECK(std::binary_search(split.common_vocab.begin(), split.common_vocab.end(), item));
        }
}

TEST_CASE("same seed gives the same split; bad fractions and empty tests are errors") {
    std::vector<std::pair<std::string, std::vector<std::string>>> seqs;
    for (int u = 0; u < 30; ++u) seqs.push_back({"u" + std::to_string(u), {"a", "b", "c"}});
    const auto log = SessionizedLog::from_sequences(seqs);
    const auto s1 = split_holdout(log, 0.2, 5, log.vocab);
    const auto s2 = split_holdout(log, 0.2, 5, log.vocab);
    CHECK(s1.train.sequences() == s2.train.sequences());
    CHECK(s1.test.sequences() == s2.test.sequences());
    std::vector<std::string> a, b;
    for (const auto& s : s1.test.sessions) a.push_back(s.user);
    for (const auto& s : s2.test.sessions) b.push_back(s.user);
    CHECK(a == b);
    CHECK_THROWS_AS(split_holdout(log, 0.0, 5, log.vocab), ValidationError);
    CHECK_THROWS_AS(split_holdout(log, 1.0, 5, log.vocab), ValidationError);
    CHECK_THROWS_AS(split_holdout(log, 0.2, 5, {"zzz"}), ValidationError);
}

TEST_CASE("sessions round-trip through json-lines") {
    oracle::TempDir dir("ingest");
    const auto log = SessionizedLog::from_sequences({{"u1", {"a", "b", "a"}}, {"u2", {"c", "b"}}, {"u3", {"z"}}});
    CHECK(log.sessions.size() == 2);
    save_sessions(log, dir / "s.jsonl");
    const auto back = load_sessions(dir / "s.jsonl");
    CHECK(back.vocab == log.vocab);
    CHECK(back.sequences() == log.sequences());
    CHECK(back.sessions[1].user == "u2");
}
