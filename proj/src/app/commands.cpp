#include "recsyn/cli.hpp"

#include "recsyn/config.hpp"
#include "recsyn/corpus.hpp"
#include "recsyn/eval.hpp"
#include "recsyn/ingest.hpp"
#include "recsyn/metrics.hpp"
#include "recsyn/pipeline.hpp"
#include "recsyn/scaling.hpp"
#include "recsyn/tokenizer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>

namespace recsyn {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

int exit_code_for(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::io: return 3;
        case ErrorCategory::parse: return 4;
        case ErrorCategory::validation: return 5;
        case ErrorCategory::compute: return 6;
    }
    return 1;
}

std::string version_text() {
    return strprintf("recsyn 1.0.0\nformats: graph=%u codebook=%u embeddings=1 rules-jsonl=1 walks-jsonl=1 "
                     "sessions-jsonl=1 id-map-jsonl=1 corpus-text=1",
                     graph_format_version, codebook_format_version);
}

namespace {

struct Globals {
    std::optional<std::string> config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool table = false;
};

PipelineConfig resolve(const Globals& g, std::vector<std::string> extra, bool require_inputs) {
    std::vector<std::string> sets = g.sets;
    sets.insert(sets.end(), extra.begin(), extra.end());
    if (g.seed) sets.push_back("seed=" + std::to_string(*g.seed));
    if (g.threads) sets.push_back("threads=" + std::to_string(*g.threads));
    auto cfg = config_from_json(layer_config(g.config_file, process_env(), sets), require_inputs);
    if (cfg.threads > 0) set_thread_count(cfg.threads);
    return cfg;
}

void emit(const ojson& summary) { std::cout << summary.dump() << std::endl; }

EventFormat parse_format(const std::string& s) {
    if (s == "delimited" || s == "csv" || s == "tsv") return EventFormat::delimited;
    if (s == "jsonl" || s == "json_lines") return EventFormat::json_lines;
    throw ValidationError("event format must be 'delimited' or 'jsonl'");
}

std::vector<std::size_t> parse_ks(const std::string& s) {
    std::vector<std::size_t> ks;
    for (auto piece : split(s, ',')) {
        const auto t = std::string(trim(piece));
        try {
            std::size_t used = 0;
            const auto v = std::stoull(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
            ks.push_back(v);
        } catch (const std::exception&) {
            throw ValidationError("bad K value '" + t + "'");
        }
    }
    return ks;
}

std::optional<IdMap> maybe_id_map(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return load_id_map(path);
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Synthetic recommendation corpus toolkit"};
    app.set_version_flag("--version", version_text());
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_file, "JSON config file");
    app.add_option("--set", g.sets, "Override a config key: section.key=value (repeatable)");
    app.add_option("--seed", g.seed, "Global seed");
    app.add_option("--threads", g.threads, "Worker threads (outputs do not depend on it)");
    app.add_flag("--table", g.table, "Also print a human-readable table");

    std::function<void()> action;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Sessionize an event log");
    std::string in_events, in_format, in_out, in_train, in_test;
    ingest->add_option("--events", in_events, "Event log (default paths.events)");
    ingest->add_option("--format", in_format, "delimited | jsonl (default from config)");
    ingest->add_option("--out", in_out, "Sessions JSON-lines")->required();
    ingest->add_option("--train-out", in_train, "Also write a user-level train split");
    ingest->add_option("--test-out", in_test, "Also write the matching test split");
    ingest->callback([&] {
        action = [&] {
            const auto cfg = resolve(g, {}, false);
            if (in_events.empty()) in_events = cfg.paths.events;
            if (in_events.empty()) throw ValidationError("no event log: pass --events or set paths.events");
            const auto events = load_events(in_events, parse_format(in_format.empty() ? cfg.paths.events_format : in_format));
            const auto log = sessionize(events, static_cast<std::int64_t>(std::llround(cfg.gap_minutes * 60'000.0)));
            save_sessions(log, in_out);
            ojson s{{"command", "ingest"}, {"events", events.size()}, {"sessions", log.sessions.size()}, {"items", log.vocab.size()}};
            if (!in_train.empty() || !in_test.empty()) {
                const auto split = split_holdout(log, cfg.test_fraction, stage_seed(cfg.seed, "holdout"), log.vocab);
                if (!in_train.empty()) save_sessions(split.train, in_train);
                if (!in_test.empty()) save_sessions(split.test, in_test);
                s["train_sessions"] = split.train.sessions.size();
                s["test_sessions"] = split.test.sessions.size();
            }
            emit(s);
        };
    });

    // mine
    auto* mine = app.add_subcommand("mine", "Mine pairwise association rules");
    std::string mi_sessions, mi_out;
    mine->add_option("--sessions", mi_sessions, "Sessions JSON-lines")->required();
    mine->add_option("--out", mi_out, "Rules JSON-lines")->required();
    mine->callback([&] {
        action = [&] {
            const auto cfg = resolve(g, {}, false);
            auto rules = mine_pairwise_rules(load_sessions(mi_sessions), cfg.mining);
            rules = filter_rules(rules, cfg.min_confidence, cfg.min_lift, cfg.top_k == 0 ? unlimited : cfg.top_k);
            save_rules(rules, mi_out);
            emit({{"command", "mine"}, {"sessions", rules.n_sessions}, {"rules", rules.rules.size()}});
        };
    });

    // graph
    auto* graph = app.add_subcommand("graph", "Build the item graph from rules");
    std::string gr_rules, gr_out, gr_dump;
    graph->add_option("--rules", gr_rules, "Rules JSON-lines")->required();
    graph->add_option("--out", gr_out, "Binary graph file")->required();
    graph->add_option("--dump", gr_dump, "Also write edges as JSON-lines");
    graph->callback([&] {
        action = [&] {
            const auto cfg = resolve(g, {}, false);
            const auto built = build_graph(load_rules(gr_rules), cfg.graph);
            save_graph(built.graph, gr_out);
            if (!gr_dump.empty()) dump_graph_jsonl(built.graph, gr_dump);
            emit({{"command", "graph"},
                  {"nodes", built.graph.node_count()},
                  {"edges", built.graph.edge_count()},
                  {"dropped_self_loops", built.dropped_self_loops},
                  {"dropped_nonpositive", built.dropped_nonpositive}});
        };
    });

    // walk
    auto* walk = app.add_subcommand("walk", "Generate synthetic interaction histories");
    std::string wk_graph, wk_out, wk_report, wk_rules, wk_idmap;
    walk->add_option("--graph", wk_graph, "Binary graph file")->required();
    walk->add_option("--out", wk_out, "Walks JSON-lines")->required();
    walk->add_option("--report", wk_report, "Generation report JSON");
    walk->add_option("--rules", wk_rules, "Rules, to add Gini and lift to the report");
    walk->add_option("--id-map", wk_idmap, "Id map, to add token statistics");
    walk->callback([&] {
        action = [&] {
            const auto cfg = resolve(g, {}, false);
            const auto gph = load_graph(wk_graph);
            WalkConfig wc = cfg.walks;
            wc.seed = stage_seed(cfg.seed, "walks");
            const auto corpus = generate_corpus_walks(gph, wc);
            save_walks(corpus.walks, gph, wk_out);
            std::optional<CorpusStats> stats;
            if (!wk_rules.empty()) {
                const auto idm = maybe_id_map(wk_idmap);
                stats = corpus_stats(walk_sequences(corpus.walks, gph), load_rules(wk_rules), idm ? &*idm : nullptr);
            }
            const auto rep = generation_report_json(corpus.report, stats ? &*stats : nullptr);
            if (!wk_report.empty()) write_text_file(wk_report, rep.dump(2) + "\n");
            ojson s{{"command", "walk"}};
            for (const auto& [k, v] : rep.items()) s[k] = v;
            emit(s);
        };
    });

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run the 14 walk configurations and compare corpus statistics");
    std::string sw_graph, sw_rules, sw_idmap, sw_out;
    std::optional<std::size_t> sw_n;
    sweep->add_option("--graph", sw_graph, "Binary graph file")->required();
    sweep->add_option("--rules", sw_rules, "Rules JSON-lines")->required();
    sweep->add_option("--id-map", sw_idmap, "Id map for token columns");
    sweep->add_option("--out", sw_out, "Sweep JSON");
    sweep->add_option("--n-walks", sw_n, "Walks per configuration (default sweep.n_walks)");
    sweep->callback([&] {
        action = [&] {
            const auto cfg = resolve(g, {}, false);
            const auto gph = load_graph(sw_graph);
            const auto idm = maybe_id_map(sw_idmap);
            WalkConfig base = cfg.walks;
            base.n_walks = sw_n.value_or(cfg.sweep_walks);
            const auto rows = run_sweep(gph, load_rules(sw_rules), idm ? &*idm : nullptr, base, stage_seed(cfg.seed, "sweep"));
            if (!sw_out.empty()) write_text_file(sw_out, sweep_json(rows));
            if (g.table) std::cout << sweep_table(rows);
            std::size_t ok = 0;
            for (const auto& r : rows) ok += r.ok;
            emit({{"command", "sweep"}, {"configs", rows.size()}, {"succeeded", ok}});
        };
    });

    // tokenize
    auto* tokenize = app.add_subcommand("tokenize", "Mint semantic ids with residual k-means");
    std::string tk_emb, tk_ids, tk_out;
    tokenize->add_option("--embeddings", tk_emb, "Binary embedding file")->required();
    tokenize->add_option("--ids", tk_ids, "Item id sidecar, one per line")->required();
    tokenize->add_option("--out-dir", tk_out, "Output directory")->required();
    tokenize->callback([&] {
        action = [&] {
            const auto cfg = resolve(g, {}, false);
            const auto r = tokenize_items(load_embeddings(tk_emb), load_item_ids(tk_ids), cfg.layers, cfg.kmeans_iters,
                                          cfg.beam, stage_seed(cfg.seed, "tokenizer"));
            save_codebook(r.book, fs::path(tk_out) / "codebook.bin");
            save_id_map(r.id_map, fs::path(tk_out) / "id_map.jsonl");
            const auto rep = tokenize_report(r);
            write_text_file(fs::path(tk_out) / "tokenizer_report.json", rep.dump(2) + "\n");
            ojson s{{"command", "tokenize"}};
            for (const auto& [k, v] : rep.items()) s[k] = v;
            emit(s);
        };
    });

    // render
    auto* render = app.add_subcommand("render", "Render item-text, CF and UIH documents");
    std::string rd_idmap, rd_out, rd_rules, rd_walks, rd_desc;
    render->add_option("--id-map", rd_idmap, "Id map JSON-lines")->required();
    render->add_option("--out-dir", rd_out, "Output directory")->required();
    render->add_option("--rules", rd_rules, "Rules for CF statements");
    render->add_option("--walks", rd_walks, "Walks for interaction histories");
    render->add_option("--descriptions", rd_desc, "item_id<TAB>description file");
    render->callback([&] {
        action = [&] {
            resolve(g, {}, false);
            const auto idm = load_id_map(rd_idmap);
            ojson s{{"command", "render"}};
            if (!rd_desc.empty()) {
                const auto docs = render_item_corpus(idm, load_descriptions(rd_desc));
                save_corpus(docs, fs::path(rd_out) / "item_text.txt");
                s["item_text"] = docs.size();
            }
            if (!rd_rules.empty()) {
                std::size_t skipped = 0;
                const auto docs = render_cf_corpus(load_rules(rd_rules), idm, &skipped);
                save_corpus(docs, fs::path(rd_out) / "cf.txt");
                s["cf"] = docs.size();
                s["cf_skipped"] = skipped;
            }
            if (!rd_walks.empty()) {
                const auto docs = render_uih_corpus(load_sequences(rd_walks), idm);
                save_corpus(docs, fs::path(rd_out) / "uih.txt");
                s["uih"] = docs.size();
            }
            emit(s);
        };
    });

    // compose
    auto* compose = app.add_subcommand("compose", "Interleave corpora into a token-budgeted mixture");
    std::vector<std::string> cp_domains;
    std::optional<std::uint64_t> cp_budget;
    std::string cp_out, cp_report;
    compose->add_option("--domain", cp_domains, "name=path:ratio (repeatable)")->required();
    compose->add_option("--budget", cp_budget, "Token budget (default mixture.budget)");
    compose->add_option("--out", cp_out, "Mixed corpus")->required();
    compose->add_option("--report", cp_report, "Mixture report JSON");
    compose->callback([&] {
        action = [&] {
            const auto cfg = resolve(g, {}, false);
            MixtureSpec spec;
            spec.total_token_budget = cp_budget.value_or(cfg.budget);
            for (const auto& d : cp_domains) {
                const auto eq = d.find('=');
                const auto colon = d.rfind(':');
                if (eq == std::string::npos || colon == std::string::npos || colon < eq)
                    throw ValidationError("domain '" + d + "' must look like name=path:ratio");
                double ratio = 0.0;
                try {
                    ratio = std::stod(d.substr(colon + 1));
                } catch (const std::exception&) {
                    throw ValidationError("domain '" + d + "' has a bad ratio");
                }
                spec.domains.push_back(MixtureDomain::from_docs(d.substr(0, eq), ratio, load_corpus(d.substr(eq + 1, colon - eq - 1))));
            }
            const auto mix = compose_mixture(spec, stage_seed(cfg.seed, "mixture"));
            save_mixture(mix, spec, cp_out);
            if (!cp_report.empty()) write_text_file(cp_report, mixture_report_json(mix.report));
            ojson s{{"command", "compose"}, {"documents", mix.stream.size()}, {"tokens", mix.report.total_tokens}};
            ojson rep = ojson::object();
            for (const auto& d : mix.report.domains) rep[d.name] = {{"share", d.realized_share}, {"repeats", d.repeats}};
            s["domains"] = rep;
            emit(s);
        };
    });

    // stats
    auto* stats = app.add_subcommand("stats", "Corpus fidelity statistics for a walk file");
    std::string st_walks, st_rules, st_idmap, st_out;
    stats->add_option("--walks", st_walks, "Walks JSON-lines")->required();
    stats->add_option("--rules", st_rules, "Rules JSON-lines")->required();
    stats->add_option("--id-map", st_idmap, "Id map for token statistics");
    stats->add_option("--out", st_out, "Stats JSON");
    stats->callback([&] {
        action = [&] {
            resolve(g, {}, false);
            const auto idm = maybe_id_map(st_idmap);
            const auto s = corpus_stats(load_sequences(st_walks), load_rules(st_rules), idm ? &*idm : nullptr);
            const auto js = corpus_stats_json(s);
            if (!st_out.empty()) write_text_file(st_out, js);
            ojson line{{"command", "stats"}};
            for (const auto& [k, v] : ojson::parse(js).items()) line[k] = v;
            emit(line);
        };
    });

    // fit
    auto* fit = app.add_subcommand("fit", "Fit per-model and joint scaling laws to loss curves");
    std::string ft_curves, ft_out;
    bool ft_log = false;
    std::optional<double> ft_huber;
    fit->add_option("--curves", ft_curves, "Curves: delimited (model_params,tokens,loss) or JSON-lines")->required();
    fit->add_option("--out", ft_out, "Fit JSON");
    fit->add_flag("--log", ft_log, "Take ln of the values first (perplexity input)");
    fit->add_option("--huber", ft_huber, "Use a Huber objective with this delta");
    fit->callback([&] {
        action = [&] {
            resolve(g, {}, false);
            FitOptions opt;
            opt.log_transform = ft_log;
            if (ft_huber) {
                opt.objective = FitObjective::huber;
                opt.huber_delta = *ft_huber;
            }
            const auto curves = load_curves(ft_curves);
            ojson out;
            ojson per = ojson::array();
            std::string table = strprintf("%-12s %10s %12s %8s %10s\n", "N", "L_inf", "A", "alpha", "rmse");
            for (const auto& c : curves) {
                const auto f = fit_per_model(c, opt);
                per.push_back(ojson::parse(per_model_fit_json(f, c)));
                table += strprintf("%-12g %10.4f %12.5g %8.4f %10.3g\n", c.model_size, f.L_inf, f.A, f.alpha, f.rmse);
            }
            out["per_model"] = per;
            std::set<double> sizes;
            for (const auto& c : curves) sizes.insert(c.model_size);
            ojson s{{"command", "fit"}, {"curves", curves.size()}};
            if (sizes.size() >= 3) {
                const auto jf = fit_joint(curves, opt);
                out["joint"] = ojson::parse(joint_fit_json(jf));
                s["E"] = jf.E;
                s["A"] = jf.A;
                s["alpha"] = jf.alpha;
                s["B"] = jf.B;
                s["beta"] = jf.beta;
                const auto t = tradeoff_coefficients(jf);
                table += strprintf("joint: E=%.4g A=%.5g alpha=%.4g B=%.5g beta=%.4g  alphaA=%.4g betaB=%.4g\n", jf.E, jf.A,
                                   jf.alpha, jf.B, jf.beta, t.alpha_A, t.beta_B);
            } else {
                out["joint"] = nullptr;
            }
            if (!ft_out.empty()) write_text_file(ft_out, out.dump(2) + "\n");
            if (g.table) std::cout << table;
            emit(s);
        };
    });

    // eval
    auto* eval = app.add_subcommand("eval", "Paired TSTR / TRTR Recall@K");
    std::string ev_syn, ev_train, ev_test, ev_model, ev_ks, ev_out;
    eval->add_option("--synthetic", ev_syn, "Synthetic sequences (walks)")->required();
    eval->add_option("--train", ev_train, "Real training sessions")->required();
    eval->add_option("--test", ev_test, "Real held-out sessions")->required();
    eval->add_option("--model", ev_model, "markov | item_knn | popularity (default eval.model)");
    eval->add_option("--ks", ev_ks, "Comma-separated cutoffs (default eval.ks)");
    eval->add_option("--out", ev_out, "Report JSON");
    eval->callback([&] {
        action = [&] {
            const auto cfg = resolve(g, {}, false);
            const auto kind = ev_model.empty() ? cfg.model : parse_model_kind(ev_model);
            const auto ks = ev_ks.empty() ? cfg.ks : parse_ks(ev_ks);
            const auto paired = run_tstr_trtr(load_sequences(ev_syn), load_sequences(ev_train), load_sequences(ev_test), kind, ks);
            if (!ev_out.empty()) write_text_file(ev_out, paired_report_json(paired));
            if (g.table) {
                std::cout << strprintf("%-8s", "K");
                for (auto k : ks) std::cout << strprintf(" %10zu", k);
                std::cout << "\n";
                for (const auto* r : {&paired.tstr, &paired.trtr}) {
                    std::cout << strprintf("%-8s", r->setting.c_str());
                    for (auto k : ks) std::cout << strprintf(" %10.4f", r->recall_at.at(k));
                    std::cout << "\n";
                }
            }
            ojson s{{"command", "eval"}, {"model", model_kind_name(kind)}, {"n", paired.tstr.n_predictions}};
            s["tstr"] = ojson::parse(eval_report_json(paired.tstr))["recall"];
            s["trtr"] = ojson::parse(eval_report_json(paired.trtr))["recall"];
            emit(s);
        };
    });

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage end to end");
    std::string pl_out;
    pipeline->add_option("--out", pl_out, "Output directory (overrides paths.output_dir)");
    pipeline->callback([&] {
        action = [&] {
            std::vector<std::string> extra;
            if (!pl_out.empty()) extra.push_back("paths.output_dir=\"" + pl_out + "\"");
            const auto cfg = resolve(g, extra, true);
            emit(run_pipeline(cfg));
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        if (action) action();
        return 0;
    } catch (const Error& err) {
        std::cerr << "error[" << category_name(err.category()) << "]: " << err.what() << "\n";
        return exit_code_for(err.category());
    } catch (const std::exception& err) {
        std::cerr << "error[internal]: " << err.what() << "\n";
        return 1;
    }
}

}  // namespace recsyn
