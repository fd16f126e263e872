#include "recsyn/config.hpp"

#include "recsyn/common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>

namespace recsyn {

namespace fs = std::filesystem;
using nlohmann::json;

static bool is_whole(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

json default_config_json() {
    return json{
        {"seed", 42},
        {"threads", 0},
        {"paths",
         {{"events", ""},
          {"events_format", "delimited"},
          {"embeddings", ""},
          {"embedding_ids", ""},
          {"descriptions", ""},
          {"curves", ""},
          {"output_dir", ""}}},
        {"ingest", {{"gap_minutes", 30.0}, {"test_fraction", 0.2}}},
        {"mining",
         {{"min_cooccur", 2},
          {"window", "session"},
          {"window_k", 1},
          {"order", "precedence"},
          {"min_confidence", 0.0},
          {"min_lift", 0.0},
          {"top_k", 0}}},
        {"graph", {{"weight", "confidence"}, {"symmetrize", false}}},
        {"walks",
         {{"order", "first"},
          {"p", 1.0},
          {"q", 1.0},
          {"alpha_stop", 0.15},
          {"path_conf_threshold", nullptr},
          {"min_len", 2},
          {"max_len", 50},
          {"n_walks", 1000},
          {"start_policy", "uniform"},
          {"min_accept_rate", 1e-4}}},
        {"tokenizer", {{"layers", {16, 16, 16}}, {"kmeans_iters", 25}, {"beam", 5}}},
        {"mixture", {{"budget", 200000}, {"item_text", 0.2}, {"cf", 0.3}, {"uih", 0.5}}},
        {"eval", {{"ks", {10, 100, 1000}}, {"model", "markov"}}},
        {"sweep", {{"enabled", true}, {"n_walks", 2000}}},
    };
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

namespace {

// Leaf pointers of the defaults; arrays count as leaves.
void leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) leaves(v, prefix + "/" + k, out);
    } else {
        out.push_back(prefix);
    }
}

json parse_scalar(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

void merge_into(json& base, const json& patch, const std::string& where, std::vector<std::string>& problems) {
    for (const auto& [k, v] : patch.items()) {
        const auto key = where.empty() ? k : where + "." + k;
        if (!base.contains(k)) {
            problems.push_back("unknown config key '" + key + "'");
            continue;
        }
        auto& slot = base[k];
        if (slot.is_object()) {
            if (!v.is_object()) {
                problems.push_back("config key '" + key + "' must be an object");
                continue;
            }
            merge_into(slot, v, key, problems);
        } else {
            slot = v;
        }
    }
}

std::string env_name(const std::string& pointer) {
    std::string name = "RECSYN";
    for (char c : pointer) name += c == '/' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return name;
}

void resolve_paths(json& file_cfg, const fs::path& base) {
    if (!file_cfg.contains("paths") || !file_cfg["paths"].is_object()) return;
    for (auto& [k, v] : file_cfg["paths"].items()) {
        if (k == "events_format" || !v.is_string()) continue;
        const auto s = v.get<std::string>();
        if (!s.empty() && fs::path(s).is_relative()) v = (base / s).lexically_normal().string();
    }
}

struct Reader {
    const json& j;
    std::vector<std::string>& problems;

    const json* at(const std::string& ptr) {
        const json::json_pointer p(ptr);
        if (!j.contains(p)) {
            problems.push_back(dotted(ptr) + ": missing");
            return nullptr;
        }
        return &j.at(p);
    }
    static std::string dotted(const std::string& ptr) {
        std::string s = ptr.substr(1);
        std::replace(s.begin(), s.end(), '/', '.');
        return s;
    }
    void number(const std::string& ptr, double& out) {
        if (const auto* v = at(ptr)) {
            if (v->is_number() && std::isfinite(v->get<double>()))
                out = v->get<double>();
            else
                problems.push_back(dotted(ptr) + ": expected a number");
        }
    }
    template <class U>
    void whole(const std::string& ptr, U& out) {
        if (const auto* v = at(ptr)) {
            if (is_whole(*v))
                out = static_cast<U>(v->get<std::uint64_t>());
            else
                problems.push_back(dotted(ptr) + ": expected a non-negative integer");
        }
    }
    void text(const std::string& ptr, std::string& out) {
        if (const auto* v = at(ptr)) {
            if (v->is_string())
                out = v->get<std::string>();
            else
                problems.push_back(dotted(ptr) + ": expected a string");
        }
    }
    void flag(const std::string& ptr, bool& out) {
        if (const auto* v = at(ptr)) {
            if (v->is_boolean())
                out = v->get<bool>();
            else
                problems.push_back(dotted(ptr) + ": expected true or false");
        }
    }
    void list(const std::string& ptr, std::vector<std::size_t>& out) {
        if (const auto* v = at(ptr)) {
            bool ok = v->is_array();
            std::vector<std::size_t> vals;
            if (ok)
                for (const auto& e : *v) {
                    if (!is_whole(e)) {
                        ok = false;
                        break;
                    }
                    vals.push_back(e.get<std::size_t>());
                }
            if (ok)
                out = std::move(vals);
            else
                problems.push_back(dotted(ptr) + ": expected a list of non-negative integers");
        }
    }
    template <class E, class Parse>
    void choice(const std::string& ptr, E& out, Parse parse) {
        std::string s;
        const auto before = problems.size();
        text(ptr, s);
        if (problems.size() != before) return;
        try {
            out = parse(s);
        } catch (const Error& err) {
            problems.push_back(dotted(ptr) + ": " + err.what());
        }
    }
};

}  // namespace

WalkOrder parse_walk_order(std::string_view s) {
    if (s == "first" || s == "1") return WalkOrder::first;
    if (s == "second" || s == "2") return WalkOrder::second;
    throw ValidationError("walk order must be 'first' or 'second'");
}

StartPolicy parse_start_policy(std::string_view s) {
    if (s == "uniform") return StartPolicy::uniform;
    if (s == "degree" || s == "degree_weighted") return StartPolicy::degree_weighted;
    throw ValidationError("start policy must be 'uniform' or 'degree_weighted'");
}

WeightSource parse_weight_source(std::string_view s) {
    if (s == "confidence") return WeightSource::confidence;
    if (s == "lift") return WeightSource::lift;
    if (s == "support") return WeightSource::support;
    throw ValidationError("edge weight must be 'confidence', 'lift' or 'support'");
}

json layer_config(const std::optional<std::string>& config_file, const EnvLookup& env,
                  const std::vector<std::string>& overrides) {
    json cfg = default_config_json();
    std::vector<std::string> problems;

    if (config_file) {
        json file_cfg;
        try {
            file_cfg = json::parse(read_text_file(*config_file));
        } catch (const json::parse_error& err) {
            throw ParseError("config file " + *config_file + ": " + err.what());
        }
        if (!file_cfg.is_object()) throw ParseError("config file " + *config_file + " must hold a JSON object");
        resolve_paths(file_cfg, fs::absolute(*config_file).parent_path());
        merge_into(cfg, file_cfg, "", problems);
    }

    std::vector<std::string> ptrs;
    leaves(default_config_json(), "", ptrs);
    for (const auto& ptr : ptrs)
        if (const auto v = env(env_name(ptr))) cfg[json::json_pointer(ptr)] = parse_scalar(*v);

    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) {
            problems.push_back("override '" + o + "' must look like key.path=value");
            continue;
        }
        std::string ptr = "/" + o.substr(0, eq);
        std::replace(ptr.begin(), ptr.end(), '.', '/');
        if (std::find(ptrs.begin(), ptrs.end(), ptr) == ptrs.end()) {
            problems.push_back("unknown config key '" + o.substr(0, eq) + "'");
            continue;
        }
        cfg[json::json_pointer(ptr)] = parse_scalar(o.substr(eq + 1));
    }

    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ValidationError(msg);
    }
    return cfg;
}

PipelineConfig config_from_json(const json& j, bool require_inputs) {
    PipelineConfig c;
    std::vector<std::string> problems;
    Reader r{j, problems};

    r.whole("/seed", c.seed);
    if (const auto* v = r.at("/threads")) {
        if (v->is_number_integer() && v->get<long long>() >= 0 && v->get<long long>() <= 4096)
            c.threads = v->get<int>();
        else
            problems.push_back("threads: expected an integer in [0, 4096]");
    }

    r.text("/paths/events", c.paths.events);
    r.text("/paths/events_format", c.paths.events_format);
    r.text("/paths/embeddings", c.paths.embeddings);
    r.text("/paths/embedding_ids", c.paths.embedding_ids);
    r.text("/paths/descriptions", c.paths.descriptions);
    r.text("/paths/curves", c.paths.curves);
    r.text("/paths/output_dir", c.paths.output_dir);
    if (c.paths.events_format != "delimited" && c.paths.events_format != "jsonl")
        problems.push_back("paths.events_format: must be 'delimited' or 'jsonl'");

    r.number("/ingest/gap_minutes", c.gap_minutes);
    r.number("/ingest/test_fraction", c.test_fraction);
    if (!(c.gap_minutes > 0.0)) problems.push_back("ingest.gap_minutes: must be positive");
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) problems.push_back("ingest.test_fraction: must lie in (0, 1)");

    r.whole("/mining/min_cooccur", c.mining.min_cooccur);
    if (c.mining.min_cooccur < 1) problems.push_back("mining.min_cooccur: must be at least 1");
    std::string window;
    r.text("/mining/window", window);
    std::size_t window_k = 1;
    r.whole("/mining/window_k", window_k);
    if (window == "session")
        c.mining.window = CooccurWindow::whole_session();
    else if (window == "adjacent")
        c.mining.window = CooccurWindow::adjacent(window_k);
    else
        problems.push_back("mining.window: must be 'session' or 'adjacent'");
    if (window == "adjacent" && window_k < 1) problems.push_back("mining.window_k: must be at least 1");
    std::string order;
    r.text("/mining/order", order);
    if (order == "precedence")
        c.mining.order = PairOrder::precedence;
    else if (order == "symmetric")
        c.mining.order = PairOrder::symmetric;
    else
        problems.push_back("mining.order: must be 'precedence' or 'symmetric'");
    r.number("/mining/min_confidence", c.min_confidence);
    r.number("/mining/min_lift", c.min_lift);
    r.whole("/mining/top_k", c.top_k);
    if (!(c.min_confidence >= 0.0 && c.min_confidence <= 1.0))
        problems.push_back("mining.min_confidence: must lie in [0, 1]");
    if (!(c.min_lift >= 0.0)) problems.push_back("mining.min_lift: must be non-negative");

    r.choice("/graph/weight", c.graph.weight_source, parse_weight_source);
    r.flag("/graph/symmetrize", c.graph.symmetrize);

    r.choice("/walks/order", c.walks.order, parse_walk_order);
    r.number("/walks/p", c.walks.p);
    r.number("/walks/q", c.walks.q);
    r.number("/walks/alpha_stop", c.walks.alpha_stop);
    if (const auto* v = r.at("/walks/path_conf_threshold")) {
        if (v->is_null())
            c.walks.path_conf_threshold.reset();
        else if (v->is_number())
            c.walks.path_conf_threshold = v->get<double>();
        else
            problems.push_back("walks.path_conf_threshold: expected a number or null");
    }
    r.whole("/walks/min_len", c.walks.min_len);
    r.whole("/walks/max_len", c.walks.max_len);
    r.whole("/walks/n_walks", c.walks.n_walks);
    r.choice("/walks/start_policy", c.walks.start_policy, parse_start_policy);
    r.number("/walks/min_accept_rate", c.walks.min_accept_rate);
    for (const auto& v : c.walks.violations()) {
        const auto sp = v.find(' ');
        problems.push_back("walks." + v.substr(0, sp) + ":" + v.substr(sp));
    }
    if (c.walks.n_walks < 1) problems.push_back("walks.n_walks: must be at least 1");

    r.list("/tokenizer/layers", c.layers);
    r.whole("/tokenizer/kmeans_iters", c.kmeans_iters);
    r.whole("/tokenizer/beam", c.beam);
    if (c.layers.empty()) problems.push_back("tokenizer.layers: needs at least one layer");
    if (std::find(c.layers.begin(), c.layers.end(), 0) != c.layers.end())
        problems.push_back("tokenizer.layers: every layer needs at least one code");
    if (c.kmeans_iters < 1) problems.push_back("tokenizer.kmeans_iters: must be at least 1");
    if (c.beam < 1) problems.push_back("tokenizer.beam: must be at least 1");

    r.whole("/mixture/budget", c.budget);
    r.number("/mixture/item_text", c.ratio_item_text);
    r.number("/mixture/cf", c.ratio_cf);
    r.number("/mixture/uih", c.ratio_uih);
    if (c.budget == 0) problems.push_back("mixture.budget: must be positive");
    for (double ratio : {c.ratio_item_text, c.ratio_cf, c.ratio_uih})
        if (!(ratio >= 0.0 && ratio <= 1.0)) {
            problems.push_back("mixture: every ratio must lie in [0, 1]");
            break;
        }
    if (std::abs(c.ratio_item_text + c.ratio_cf + c.ratio_uih - 1.0) > 1e-9)
        problems.push_back("mixture: item_text + cf + uih must sum to 1");

    r.list("/eval/ks", c.ks);
    if (c.ks.empty()) problems.push_back("eval.ks: needs at least one cutoff");
    for (std::size_t i = 0; i < c.ks.size(); ++i)
        if (c.ks[i] == 0 || (i > 0 && c.ks[i] <= c.ks[i - 1])) {
            problems.push_back("eval.ks: cutoffs must be positive and strictly ascending");
            break;
        }
    r.choice("/eval/model", c.model, parse_model_kind);

    r.flag("/sweep/enabled", c.sweep);
    r.whole("/sweep/n_walks", c.sweep_walks);
    if (c.sweep_walks < 1) problems.push_back("sweep.n_walks: must be at least 1");

    if (require_inputs) {
        auto need = [&](const std::string& key, const std::string& path, bool optional) {
            if (path.empty()) {
                if (!optional) problems.push_back(key + ": required");
            } else if (!fs::is_regular_file(path)) {
                problems.push_back(key + ": no such file '" + path + "'");
            }
        };
        need("paths.events", c.paths.events, false);
        need("paths.embeddings", c.paths.embeddings, false);
        need("paths.embedding_ids", c.paths.embedding_ids, false);
        need("paths.descriptions", c.paths.descriptions, true);
        need("paths.curves", c.paths.curves, true);
        if (c.paths.output_dir.empty()) problems.push_back("paths.output_dir: required");
    }

    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ValidationError(msg);
    }
    return c;
}

json config_to_json(const PipelineConfig& c) {
    json j = default_config_json();
    j.erase("threads");
    j["seed"] = c.seed;
    j["paths"].erase("output_dir");
    j["paths"]["events"] = c.paths.events;
    j["paths"]["events_format"] = c.paths.events_format;
    j["paths"]["embeddings"] = c.paths.embeddings;
    j["paths"]["embedding_ids"] = c.paths.embedding_ids;
    j["paths"]["descriptions"] = c.paths.descriptions;
    j["paths"]["curves"] = c.paths.curves;
    j["ingest"] = {{"gap_minutes", c.gap_minutes}, {"test_fraction", c.test_fraction}};
    j["mining"] = {{"min_cooccur", c.mining.min_cooccur},
                   {"window", c.mining.window.kind == CooccurWindow::Kind::whole_session ? "session" : "adjacent"},
                   {"window_k", c.mining.window.k},
                   {"order", c.mining.order == PairOrder::precedence ? "precedence" : "symmetric"},
                   {"min_confidence", c.min_confidence},
                   {"min_lift", c.min_lift},
                   {"top_k", c.top_k}};
    const char* weight = c.graph.weight_source == WeightSource::confidence ? "confidence"
                         : c.graph.weight_source == WeightSource::lift     ? "lift"
                                                                           : "support";
    j["graph"] = {{"weight", weight}, {"symmetrize", c.graph.symmetrize}};
    j["walks"] = {{"order", c.walks.order == WalkOrder::first ? "first" : "second"},
                  {"p", c.walks.p},
                  {"q", c.walks.q},
                  {"alpha_stop", c.walks.alpha_stop},
                  {"path_conf_threshold", c.walks.path_conf_threshold ? json(*c.walks.path_conf_threshold) : json()},
                  {"min_len", c.walks.min_len},
                  {"max_len", c.walks.max_len},
                  {"n_walks", c.walks.n_walks},
                  {"start_policy", c.walks.start_policy == StartPolicy::uniform ? "uniform" : "degree_weighted"},
                  {"min_accept_rate", c.walks.min_accept_rate}};
    j["tokenizer"] = {{"layers", c.layers}, {"kmeans_iters", c.kmeans_iters}, {"beam", c.beam}};
    j["mixture"] = {{"budget", c.budget}, {"item_text", c.ratio_item_text}, {"cf", c.ratio_cf}, {"uih", c.ratio_uih}};
    j["eval"] = {{"ks", c.ks}, {"model", model_kind_name(c.model)}};
    j["sweep"] = {{"enabled", c.sweep}, {"n_walks", c.sweep_walks}};
    return j;
}

}  // namespace recsyn
