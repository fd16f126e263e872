#include "recsyn/pipeline.hpp"

#include "recsyn/common.hpp"
#include "recsyn/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace recsyn {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

Sequences load_sequences(const fs::path& path) {
    const auto lines = read_lines(path);
    Sequences out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(lines[i]).at("items").get<std::vector<std::string>>());
        } catch (const nlohmann::json::exception& err) {
            throw ParseError(std::string("bad sequence row: ") + err.what(), i + 1);
        }
    }
    return out;
}

std::vector<std::string> load_item_ids(const fs::path& path) {
    std::vector<std::string> ids;
    for (const auto& line : read_lines(path)) {
        const auto t = trim(line);
        if (!t.empty()) ids.emplace_back(t);
    }
    return ids;
}

void save_item_ids(const std::vector<std::string>& ids, const fs::path& path) {
    std::string out;
    for (const auto& id : ids) out += id + "\n";
    write_text_file(path, out);
}

std::map<std::string, std::string> load_descriptions(const fs::path& path) {
    const auto lines = read_lines(path);
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto tab = lines[i].find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == lines[i].size())
            throw ParseError("expected item_id<TAB>description", i + 1);
        out[lines[i].substr(0, tab)] = lines[i].substr(tab + 1);
    }
    return out;
}

TokenizeResult tokenize_items(const EmbeddingMatrix& emb, const std::vector<std::string>& ids,
                              const std::vector<std::size_t>& layers, std::size_t kmeans_iters, std::size_t beam,
                              std::uint64_t seed) {
    if (ids.size() != emb.n_items())
        throw ValidationError(strprintf("embedding has %zu rows but the id list has %zu entries", emb.n_items(), ids.size()));
    TokenizeResult r;
    r.book = fit_rq_kmeans(emb, layers, kmeans_iters, seed);
    const auto enc = encode_all(emb, r.book, beam);
    std::vector<SemanticId> sids;
    sids.reserve(enc.size());
    for (std::size_t i = 0; i < enc.size(); ++i) {
        sids.push_back(enc[i].id);
        if (!r.id_map.emplace(ids[i], render_tokens(enc[i].id, r.book)).second)
            throw ValidationError("duplicate item id '" + ids[i] + "' in the embedding sidecar");
    }
    r.collision_rate = collision_rate(sids);
    for (std::size_t l = 1; l <= r.book.n_layers(); ++l) r.prefix_mse.push_back(prefix_reconstruction_mse(emb, r.book, enc, l));
    return r;
}

ojson tokenize_report(const TokenizeResult& r) {
    ojson j;
    std::vector<std::size_t> sizes;
    for (const auto& l : r.book.layers) sizes.push_back(l.size);
    j["layers"] = sizes;
    j["items"] = r.id_map.size();
    j["collision_rate"] = r.collision_rate;
    j["prefix_mse"] = r.prefix_mse;
    return j;
}

std::vector<CorpusDoc> render_item_corpus(const IdMap& id_map, const std::map<std::string, std::string>& descriptions) {
    std::vector<std::pair<const std::vector<std::string>*, const std::string*>> jobs;
    for (const auto& [item, tokens] : id_map)
        if (const auto it = descriptions.find(item); it != descriptions.end()) jobs.emplace_back(&tokens, &it->second);
    std::vector<CorpusDoc> out(jobs.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(jobs.size()); ++i) {
        const auto& [tokens, desc] = jobs[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = render_item_text({*tokens, *desc});
    }
    return out;
}

std::vector<CorpusDoc> render_cf_corpus(const RuleSet& rules, const IdMap& id_map, std::size_t* skipped) {
    std::vector<std::pair<const AssociationRule*, std::pair<const std::vector<std::string>*, const std::vector<std::string>*>>> jobs;
    std::size_t missing = 0;
    for (const auto& r : rules.rules) {
        const auto a = id_map.find(r.antecedent);
        const auto b = id_map.find(r.consequent);
        if (a == id_map.end() || b == id_map.end()) {
            ++missing;
            continue;
        }
        jobs.push_back({&r, {&a->second, &b->second}});
    }
    if (skipped) *skipped = missing;
    std::vector<CorpusDoc> out(jobs.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(jobs.size()); ++i) {
        const auto& [rule, toks] = jobs[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = render_cf_statement(*rule, *toks.first, *toks.second);
    }
    return out;
}

std::vector<CorpusDoc> render_uih_corpus(const Sequences& walks, const IdMap& id_map) {
    std::vector<CorpusDoc> out(walks.size());
    std::vector<std::string> errors(walks.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(walks.size()); ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            out[k] = render_uih(walks[k], id_map);
        } catch (const Error& err) {
            errors[k] = err.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw ValidationError(e);
    return out;
}

std::vector<std::pair<std::string, WalkConfig>> sweep_configs(const WalkConfig& base) {
    std::vector<std::pair<std::string, WalkConfig>> out;
    const std::vector<std::pair<const char*, std::optional<double>>> thresholds{
        {"None", std::nullopt}, {"1e-09", 1e-9}, {"2e-09", 2e-9}, {"3e-09", 3e-9}};
    for (const auto& [tname, thresh] : thresholds)
        for (const auto& [aname, alpha] : std::vector<std::pair<const char*, double>>{{"10", 0.10}, {"15", 0.15}, {"20", 0.20}}) {
            WalkConfig c = base;
            c.order = WalkOrder::second;
            c.p = 0.5;
            c.q = 2.0;
            c.alpha_stop = alpha;
            c.path_conf_threshold = thresh;
            out.emplace_back(strprintf("bfs_p05q2_a%s_thresh%s", aname, tname), c);
        }
    for (const auto& [tname, thresh] : std::vector<std::pair<const char*, std::optional<double>>>{{"None", std::nullopt}, {"1e-09", 1e-9}}) {
        WalkConfig c = base;
        c.order = WalkOrder::first;
        c.alpha_stop = 0.15;
        c.path_conf_threshold = thresh;
        out.emplace_back(std::string("1st_order_a015_thresh") + tname, c);
    }
    return out;
}

std::vector<SweepRow> run_sweep(const ItemGraph& graph, const RuleSet& rules, const IdMap* id_map,
                                const WalkConfig& base, std::uint64_t seed) {
    std::vector<SweepRow> rows;
    for (auto& [name, cfg] : sweep_configs(base)) {
        SweepRow row;
        row.name = name;
        row.config = cfg;
        row.config.seed = stage_seed(seed, "sweep:" + name);
        try {
            const auto corpus = generate_corpus_walks(graph, row.config);
            row.generation = corpus.report;
            row.stats = corpus_stats(walk_sequences(corpus.walks, graph), rules, id_map);
            row.ok = true;
        } catch (const ComputeError& err) {
            row.error = err.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ojson generation_report_json(const GenerationReport& rep, const CorpusStats* stats) {
    ojson j;
    j["n_walks"] = rep.n_walks;
    j["attempts"] = rep.attempts;
    j["accept_rate"] = rep.accept_rate;
    j["mean_len"] = rep.mean_len;
    j["unique_items"] = rep.unique_items;
    if (stats) {
        j["gini"] = stats->item_gini;
        j["token_gini"] = stats->token_gini ? ojson(*stats->token_gini) : ojson();
        j["unique_tokens"] = stats->unique_tokens ? ojson(*stats->unique_tokens) : ojson();
        j["geom_lift"] = stats->geom_lift;
    }
    return j;
}

std::string sweep_json(const std::vector<SweepRow>& rows) {
    ojson arr = ojson::array();
    for (const auto& r : rows) {
        ojson j;
        j["config"] = r.name;
        j["order"] = r.config.order == WalkOrder::first ? "first" : "second";
        j["alpha"] = r.config.alpha_stop;
        j["thresh"] = r.config.path_conf_threshold ? ojson(*r.config.path_conf_threshold) : ojson();
        if (r.ok) {
            j["length"] = r.stats.mean_length;
            j["items"] = r.stats.unique_items;
            j["gini"] = r.stats.item_gini;
            j["tokens"] = r.stats.unique_tokens ? ojson(*r.stats.unique_tokens) : ojson();
            j["total_tokens"] = r.stats.total_tokens ? ojson(*r.stats.total_tokens) : ojson();
            j["token_gini"] = r.stats.token_gini ? ojson(*r.stats.token_gini) : ojson();
            j["geom_lift"] = r.stats.geom_lift;
            j["accept_rate"] = r.generation.accept_rate;
        } else {
            j["error"] = r.error;
        }
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
    std::string out = strprintf("%-28s %6s %7s %7s %7s %6s %7s %11s %10s\n", "Config", "Alpha", "Thresh", "Length",
                                "Items", "Gini", "Tokens", "Token Gini", "Geom Lift");
    for (const auto& r : rows) {
        const std::string th = r.config.path_conf_threshold ? strprintf("%.0e", *r.config.path_conf_threshold) : "None";
        if (!r.ok) {
            out += strprintf("%-28s %6.2f %7s  failed: %s\n", r.name.c_str(), r.config.alpha_stop, th.c_str(), r.error.c_str());
            continue;
        }
        const std::string tok = r.stats.unique_tokens ? std::to_string(*r.stats.unique_tokens) : "-";
        const std::string tg = r.stats.token_gini ? strprintf("%.3f", *r.stats.token_gini) : "-";
        out += strprintf("%-28s %6.2f %7s %7.1f %7zu %6.3f %7s %11s %10.2f\n", r.name.c_str(), r.config.alpha_stop,
                         th.c_str(), r.stats.mean_length, r.stats.unique_items, r.stats.item_gini, tok.c_str(), tg.c_str(),
                         r.stats.geom_lift);
    }
    return out;
}

namespace {

std::vector<std::string> sorted_intersection(const std::vector<std::string>& a, std::vector<std::string> b) {
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    std::vector<std::string> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

ojson run_pipeline(const PipelineConfig& cfg) {
    const fs::path out = cfg.paths.output_dir;
    fs::create_directories(out);
    ojson summary;
    summary["command"] = "pipeline";

    write_text_file(out / "config.json", config_to_json(cfg).dump(2) + "\n");

    // ingest
    const auto format = cfg.paths.events_format == "jsonl" ? EventFormat::json_lines : EventFormat::delimited;
    const auto events = load_events(cfg.paths.events, format);
    const auto gap_ms = static_cast<std::int64_t>(std::llround(cfg.gap_minutes * 60'000.0));
    const auto log = sessionize(events, gap_ms);
    save_sessions(log, out / "sessions.jsonl");
    const auto split = split_holdout(log, cfg.test_fraction, stage_seed(cfg.seed, "holdout"), log.vocab);
    save_sessions(split.train, out / "train_sessions.jsonl");
    summary["events"] = events.size();
    summary["sessions"] = log.sessions.size();
    summary["train_sessions"] = split.train.sessions.size();

    // mine
    auto rules = mine_pairwise_rules(split.train, cfg.mining);
    rules = filter_rules(rules, cfg.min_confidence, cfg.min_lift, cfg.top_k == 0 ? unlimited : cfg.top_k);
    save_rules(rules, out / "rules.jsonl");
    summary["rules"] = rules.rules.size();

    // graph
    const auto built = build_graph(rules, cfg.graph);
    const auto& graph = built.graph;
    save_graph(graph, out / "graph.bin");
    dump_graph_jsonl(graph, out / "graph_edges.jsonl");
    summary["nodes"] = graph.node_count();
    summary["edges"] = graph.edge_count();

    // walk
    WalkConfig wcfg = cfg.walks;
    wcfg.seed = stage_seed(cfg.seed, "walks");
    const auto corpus = generate_corpus_walks(graph, wcfg);
    save_walks(corpus.walks, graph, out / "walks.jsonl");
    const auto walk_seqs = walk_sequences(corpus.walks, graph);
    summary["walks"] = corpus.walks.size();

    // tokenize
    const auto emb = load_embeddings(cfg.paths.embeddings);
    const auto ids = load_item_ids(cfg.paths.embedding_ids);
    const auto tok = tokenize_items(emb, ids, cfg.layers, cfg.kmeans_iters, cfg.beam, stage_seed(cfg.seed, "tokenizer"));
    save_codebook(tok.book, out / "codebook.bin");
    save_id_map(tok.id_map, out / "id_map.jsonl");
    write_text_file(out / "tokenizer_report.json", tokenize_report(tok).dump(2) + "\n");
    summary["collision_rate"] = tok.collision_rate;

    // stats
    const auto stats = corpus_stats(walk_seqs, rules, &tok.id_map);
    write_text_file(out / "stats.json", corpus_stats_json(stats));
    write_text_file(out / "walk_report.json", generation_report_json(corpus.report, &stats).dump(2) + "\n");

    // render
    std::map<std::string, std::string> descriptions;
    if (!cfg.paths.descriptions.empty()) descriptions = load_descriptions(cfg.paths.descriptions);
    std::size_t cf_skipped = 0;
    const auto item_docs = render_item_corpus(tok.id_map, descriptions);
    const auto cf_docs = render_cf_corpus(rules, tok.id_map, &cf_skipped);
    const auto uih_docs = render_uih_corpus(walk_seqs, tok.id_map);
    save_corpus(item_docs, out / "corpus" / "item_text.txt");
    save_corpus(cf_docs, out / "corpus" / "cf.txt");
    save_corpus(uih_docs, out / "corpus" / "uih.txt");
    summary["docs"] = {{"item_text", item_docs.size()}, {"cf", cf_docs.size()}, {"uih", uih_docs.size()}};

    // compose
    MixtureSpec spec;
    spec.total_token_budget = cfg.budget;
    const std::vector<std::tuple<const char*, double, const std::vector<CorpusDoc>*>> domains{
        {"item_text", cfg.ratio_item_text, &item_docs}, {"cf", cfg.ratio_cf, &cf_docs}, {"uih", cfg.ratio_uih, &uih_docs}};
    for (const auto& [name, ratio, docs] : domains)
        if (ratio > 0.0) spec.domains.push_back(MixtureDomain::from_docs(name, ratio, *docs));
    const auto mix = compose_mixture(spec, stage_seed(cfg.seed, "mixture"));
    save_mixture(mix, spec, out / "mixture.txt");
    write_text_file(out / "mixture_report.json", mixture_report_json(mix.report));
    summary["mixture_tokens"] = mix.report.total_tokens;

    // sweep
    if (cfg.sweep) {
        WalkConfig base = cfg.walks;
        base.n_walks = cfg.sweep_walks;
        const auto rows = run_sweep(graph, rules, &tok.id_map, base, stage_seed(cfg.seed, "sweep"));
        write_text_file(out / "sweep.json", sweep_json(rows));
        write_text_file(out / "sweep.txt", sweep_table(rows));
    }

    // fit
    if (!cfg.paths.curves.empty()) {
        const auto curves = load_curves(cfg.paths.curves);
        ojson fits;
        ojson per = ojson::array();
        for (const auto& c : curves) per.push_back(ojson::parse(per_model_fit_json(fit_per_model(c), c)));
        fits["per_model"] = std::move(per);
        std::set<double> sizes;
        for (const auto& c : curves) sizes.insert(c.model_size);
        fits["joint"] = sizes.size() >= 3 ? ojson::parse(joint_fit_json(fit_joint(curves))) : ojson();
        write_text_file(out / "fit.json", fits.dump(2) + "\n");
    }

    // eval
    const auto common = sorted_intersection(split.train.vocab, [&] {
        std::vector<std::string> v;
        for (const auto& s : walk_seqs) v.insert(v.end(), s.begin(), s.end());
        return v;
    }());
    const auto test = restrict_to_vocab(split.test, common);
    save_sessions(test, out / "test_sessions.jsonl");
    if (test.sessions.empty()) throw ValidationError("no held-out session survives the common-vocabulary filter");
    const auto paired = run_tstr_trtr(walk_seqs, split.train.sequences(), test.sequences(), cfg.model, cfg.ks);
    write_text_file(out / "eval.json", paired_report_json(paired));
    summary["tstr_recall"] = ojson::parse(eval_report_json(paired.tstr))["recall"];
    summary["trtr_recall"] = ojson::parse(eval_report_json(paired.trtr))["recall"];
    return summary;
}

}  // namespace recsyn
