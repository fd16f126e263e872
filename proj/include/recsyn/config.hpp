#pragma once

#include "recsyn/eval.hpp"
#include "recsyn/graph.hpp"
#include "recsyn/rules.hpp"
#include "recsyn/walks.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace recsyn {

struct PipelineConfig {
    std::uint64_t seed = 42;
    int threads = 0;  // 0 keeps the runtime default

    struct Paths {
        std::string events;
        std::string events_format = "delimited";
        std::string embeddings;
        std::string embedding_ids;
        std::string descriptions;  // optional: item_id<TAB>description
        std::string curves;        // optional: loss curves for the fit stage
        std::string output_dir;
    } paths;

    double gap_minutes = 30.0;
    double test_fraction = 0.2;

    MiningOptions mining;
    double min_confidence = 0.0;
    double min_lift = 0.0;
    std::size_t top_k = 0;  // 0 keeps every rule

    GraphBuildOptions graph;
    WalkConfig walks;

    std::vector<std::size_t> layers{16, 16, 16};
    std::size_t kmeans_iters = 25;
    std::size_t beam = 5;

    std::uint64_t budget = 200000;
    double ratio_item_text = 0.2;
    double ratio_cf = 0.3;
    double ratio_uih = 0.5;

    std::vector<std::size_t> ks{10, 100, 1000};
    ModelKind model = ModelKind::markov;

    bool sweep = true;
    std::size_t sweep_walks = 2000;
};

/// Every key the config understands, with its default value.
nlohmann::json default_config_json();

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_env();

/// Merges defaults, then the config file (relative paths resolve against its directory), then
/// RECSYN_<SECTION>_<KEY> environment variables, then `key.path=value` overrides.
/// Unknown keys and malformed overrides are collected and reported together.
nlohmann::json layer_config(const std::optional<std::string>& config_file, const EnvLookup& env,
                            const std::vector<std::string>& overrides);

/// Converts and validates; throws ValidationError listing every violation.
/// With `require_inputs` the input paths must name existing files.
PipelineConfig config_from_json(const nlohmann::json& j, bool require_inputs);

/// Resolved config without run-local fields (threads, output_dir).
nlohmann::json config_to_json(const PipelineConfig& cfg);

WalkOrder parse_walk_order(std::string_view s);
StartPolicy parse_start_policy(std::string_view s);
WeightSource parse_weight_source(std::string_view s);

}  // namespace recsyn
