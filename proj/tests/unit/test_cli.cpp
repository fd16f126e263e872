#include "recsyn/cli.hpp"
#include "recsyn/common.hpp"

#include "support/oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>

using namespace recsyn;
namespace fs = std::filesystem;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + std::string(RECSYN_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int st = pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string last_line(const std::string& s) {
    auto end = s.find_last_not_of('\n');
    if (end == std::string::npos) return "";
    const auto start = s.rfind('\n', end);
    return s.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
}

const std::string toy = std::string(RECSYN_DATA_DIR) + "/toy";

}  // namespace

TEST_CASE("exit codes by category") {
    CHECK(exit_code_for(ErrorCategory::io) == 3);
    CHECK(exit_code_for(ErrorCategory::parse) == 4);
    CHECK(exit_code_for(ErrorCategory::validation) == 5);
    CHECK(exit_code_for(ErrorCategory::compute) == 6);
}

TEST_CASE("version lists every binary format") {
    const auto r = run("--version");
    CHECK(r.status == 0);
    for (const char* f : {"graph=1", "codebook=1", "embeddings=1"}) CHECK(r.out.find(f) != std::string::npos);
}

TEST_CASE("bad usage and bad inputs exit with categorized codes") {
    CHECK(run("").status == 2);
    CHECK(run("frobnicate").status == 2);
    CHECK(run("mine --sessions /nonexistent/x.jsonl --out /tmp/x").status == 3);
    oracle::TempDir dir("cli");
    write_text_file(dir / "bad.json", "{not json");
    const auto p = run("--config " + (dir / "bad.json").string() + " mine --sessions x --out y");
    CHECK(p.status == 4);
    CHECK(p.out.find("error[parse]") != std::string::npos);
}

TEST_CASE("config validation enumerates every violation") {
    const auto r = run("--set walks.p=-1 --set walks.q=0 --set tokenizer.beam=0 pipeline --out /tmp/never");
    CHECK(r.status == 5);
    CHECK(r.out.find("walks.p") != std::string::npos);
    CHECK(r.out.find("walks.q") != std::string::npos);
    CHECK(r.out.find("tokenizer.beam") != std::string::npos);
}

TEST_CASE("flags override environment which overrides the file") {
    oracle::TempDir dir("cli");
    const auto cfg = " --config " + toy + "/pipeline.json ";
    const auto env_only = run(cfg + "pipeline --out " + (dir / "a").string(), "RECSYN_WALKS_P=-3");
    CHECK(env_only.status == 5);
    CHECK(env_only.out.find("walks.p") != std::string::npos);
    const auto flag_wins = run(cfg + "--set walks.n_walks=50 --set sweep.enabled=false pipeline --out " + (dir / "b").string(),
                               "RECSYN_WALKS_N_WALKS=0");
    CHECK(flag_wins.status == 0);
    const auto s = nlohmann::json::parse(read_text_file(dir / "b" / "walk_report.json"));
    CHECK(s["n_walks"] == 50);
}

TEST_CASE("pipeline on the toy log writes every artifact and is reproducible") {
    oracle::TempDir dir("cli");
    const auto cfg = " --config " + toy + "/pipeline.json ";
    const auto a = run(cfg + "pipeline --out " + (dir / "a").string());
    REQUIRE(a.status == 0);
    const auto summary = nlohmann::json::parse(last_line(a.out));
    CHECK(summary["command"] == "pipeline");
    for (const char* f : {"rules.jsonl", "graph.bin", "walks.jsonl", "codebook.bin", "id_map.jsonl", "stats.json",
                          "corpus/item_text.txt", "corpus/cf.txt", "corpus/uih.txt", "mixture.txt", "sweep.txt",
                          "fit.json", "eval.json"})
        CHECK(fs::exists(dir / "a" / f));
    const auto b = run(cfg + "--threads 2 pipeline --out " + (dir / "b").string());
    REQUIRE(b.status == 0);
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir / "a");
        INFO(rel.string());
        CHECK(read_text_file(e.path()) == read_text_file(dir / "b" / rel));
    }
}

TEST_CASE("sweep prints fourteen configurations") {
    oracle::TempDir dir("cli");
    const auto cfg = " --config " + toy + "/pipeline.json --set sweep.n_walks=100 ";
    REQUIRE(run(cfg + "ingest --out " + (dir / "s.jsonl").string()).status == 0);
    REQUIRE(run(cfg + "mine --sessions " + (dir / "s.jsonl").string() + " --out " + (dir / "r.jsonl").string()).status == 0);
    REQUIRE(run(cfg + "graph --rules " + (dir / "r.jsonl").string() + " --out " + (dir / "g.bin").string()).status == 0);
    const auto r = run(cfg + "--table sweep --graph " + (dir / "g.bin").string() + " --rules " + (dir / "r.jsonl").string() +
                       " --out " + (dir / "sweep.json").string());
    REQUIRE(r.status == 0);
    const auto rows = nlohmann::json::parse(read_text_file(dir / "sweep.json"));
    CHECK(rows.size() == 14);
    CHECK(r.out.find("Gini") != std::string::npos);
}

TEST_CASE("fit on the bundled surface prints the generating coefficients") {
    const auto r = run("--table fit --curves " + toy + "/curves.csv");
    REQUIRE(r.status == 0);
    const auto s = nlohmann::json::parse(last_line(r.out));
    CHECK(s["E"].get<double>() == doctest::Approx(0.79).epsilon(0.01));
    CHECK(s["A"].get<double>() == doctest::Approx(16500).epsilon(0.01));
    CHECK(s["alpha"].get<double>() == doctest::Approx(0.511).epsilon(0.01));
    CHECK(s["B"].get<double>() == doctest::Approx(3.85).epsilon(0.01));
    CHECK(s["beta"].get<double>() == doctest::Approx(0.048).epsilon(0.01));
}

TEST_CASE("eval reports both settings") {
    oracle::TempDir dir("cli");
    write_text_file(dir / "syn.jsonl", "{\"items\":[\"A\",\"B\"]}\n");
    const auto sessions = "{\"user\":\"u1\",\"items\":[\"A\",\"B\"]}\n{\"user\":\"u2\",\"items\":[\"A\",\"C\"]}\n";
    write_text_file(dir / "train.jsonl", sessions);
    write_text_file(dir / "test.jsonl", sessions);
    const auto r = run("eval --synthetic " + (dir / "syn.jsonl").string() + " --train " + (dir / "train.jsonl").string() +
                       " --test " + (dir / "test.jsonl").string() + " --ks 1,10 --out " + (dir / "e.json").string());
    INFO(r.out);
    CHECK(r.status == 0);
    const auto rep = read_text_file(dir / "e.json");
    CHECK(rep.find("TSTR") != std::string::npos);
    CHECK(rep.find("TRTR") != std::string::npos);
}
