#pragma once

#include "recsyn/config.hpp"
#include "recsyn/corpus.hpp"
#include "recsyn/metrics.hpp"
#include "recsyn/scaling.hpp"
#include "recsyn/tokenizer.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace recsyn {

/// Rows of {"items": [...]} (walk files and session files both qualify).
Sequences load_sequences(const std::filesystem::path& path);

/// One id per line.
std::vector<std::string> load_item_ids(const std::filesystem::path& path);
void save_item_ids(const std::vector<std::string>& ids, const std::filesystem::path& path);

/// item_id<TAB>description per line.
std::map<std::string, std::string> load_descriptions(const std::filesystem::path& path);

struct TokenizeResult {
    Codebook book;
    IdMap id_map;
    double collision_rate = 0.0;
    std::vector<double> prefix_mse;  // after 1..L layers
};

TokenizeResult tokenize_items(const EmbeddingMatrix& emb, const std::vector<std::string>& ids,
                              const std::vector<std::size_t>& layers, std::size_t kmeans_iters, std::size_t beam,
                              std::uint64_t seed);
nlohmann::ordered_json tokenize_report(const TokenizeResult& r);

/// Items without a description are skipped.
std::vector<CorpusDoc> render_item_corpus(const IdMap& id_map, const std::map<std::string, std::string>& descriptions);
/// Rules whose endpoints lack a semantic id are skipped; `skipped` receives their count.
std::vector<CorpusDoc> render_cf_corpus(const RuleSet& rules, const IdMap& id_map, std::size_t* skipped = nullptr);
std::vector<CorpusDoc> render_uih_corpus(const Sequences& walks, const IdMap& id_map);

struct SweepRow {
    std::string name;
    WalkConfig config;
    bool ok = false;
    std::string error;
    GenerationReport generation;
    CorpusStats stats;
};

/// The 14 walk configurations: second order with p=0.5, q=2 over alpha_stop {0.10, 0.15, 0.20}
/// and thresholds {none, 1e-9, 2e-9, 3e-9}, plus first order at alpha_stop 0.15 with no
/// threshold and with 1e-9.
std::vector<std::pair<std::string, WalkConfig>> sweep_configs(const WalkConfig& base);

std::vector<SweepRow> run_sweep(const ItemGraph& graph, const RuleSet& rules, const IdMap* id_map,
                                const WalkConfig& base, std::uint64_t seed);
std::string sweep_json(const std::vector<SweepRow>& rows);
std::string sweep_table(const std::vector<SweepRow>& rows);

nlohmann::ordered_json generation_report_json(const GenerationReport& rep, const CorpusStats* stats);

/// Runs every stage into cfg.paths.output_dir and returns the summary object.
nlohmann::ordered_json run_pipeline(const PipelineConfig& cfg);

}  // namespace recsyn
