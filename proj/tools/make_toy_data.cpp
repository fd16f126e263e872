// Writes a small deterministic dataset for the end-to-end pipeline.
//
//   make_toy_data <out-dir> [--seed N]
//
// Items live in a handful of latent topics. Users pick a favourite topic and browse mostly
// within it, so mined rules have real structure and embeddings agree with behaviour.

#include "recsyn/common.hpp"
#include "recsyn/pipeline.hpp"
#include "recsyn/scaling.hpp"
#include "recsyn/tokenizer.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace recsyn;

namespace {

constexpr std::size_t n_topics = 6;
constexpr std::size_t items_per_topic = 30;
constexpr std::size_t n_users = 400;
constexpr std::size_t dim = 16;

const char* const topic_names[n_topics] = {"Kitchen", "Garden", "Jewelry", "Books", "Outdoor", "Toys"};
const char* const adjectives[] = {"handmade", "compact", "vintage", "durable", "lightweight", "classic", "deluxe", "eco"};
const char* const nouns[n_topics] = {"pan", "planter", "bracelet", "novel", "tent", "puzzle"};

double normal(Rng& rng) {
    const double u1 = std::max(uniform01(rng), 1e-300);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::string item_name(std::size_t i) { return strprintf("item%03zu", i); }

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_toy_data <out-dir> [--seed N]\n";
        return 2;
    }
    const fs::path out = argv[1];
    std::uint64_t seed = 7;
    if (argc >= 4 && std::string(argv[2]) == "--seed") seed = std::stoull(argv[3]);
    try {
        fs::create_directories(out);
        const std::size_t n_items = n_topics * items_per_topic;

        // Embeddings: topic centre plus unit noise.
        Rng erng(derive_seed(seed, {1}));
        std::vector<std::vector<double>> centres(n_topics, std::vector<double>(dim));
        for (auto& c : centres)
            for (auto& x : c) x = 3.0 * normal(erng);
        std::vector<double> data;
        data.reserve(n_items * dim);
        std::vector<std::string> ids;
        std::string desc;
        for (std::size_t i = 0; i < n_items; ++i) {
            const std::size_t t = i / items_per_topic;
            ids.push_back(item_name(i));
            for (std::size_t d = 0; d < dim; ++d) data.push_back(centres[t][d] + normal(erng));
            desc += item_name(i) + "\t" + strprintf("%s %s no. %zu, by Shop%zu in Home › %s", adjectives[i % 8], nouns[t],
                                                    i % items_per_topic, i % 11, topic_names[t]) + "\n";
        }
        save_embeddings(EmbeddingMatrix(n_items, dim, std::move(data)), out / "embeddings.bin");
        save_item_ids(ids, out / "embedding_ids.txt");
        write_text_file(out / "descriptions.tsv", desc);

        // Events: sessions of 3-8 items, 90% within the favourite topic with a Zipf-ish item choice.
        Rng urng(derive_seed(seed, {2}));
        std::string events = "user_id,item_id,timestamp,action\n";
        const char* const actions[] = {"view", "view", "view", "like", "purchase"};
        for (std::size_t u = 0; u < n_users; ++u) {
            const std::size_t fav = uniform_index(urng, n_topics);
            std::int64_t ts = 1'700'000'000'000LL + static_cast<std::int64_t>(uniform_index(urng, 86'400'000));
            const std::size_t n_sessions = 1 + uniform_index(urng, 3);
            for (std::size_t s = 0; s < n_sessions; ++s) {
                const std::size_t len = 3 + uniform_index(urng, 6);
                std::size_t prev = fav * items_per_topic;
                for (std::size_t k = 0; k < len; ++k) {
                    const std::size_t topic = uniform01(urng) < 0.9 ? fav : uniform_index(urng, n_topics);
                    std::size_t pick;
                    if (topic == fav && k > 0 && uniform01(urng) < 0.5) {
                        pick = fav * items_per_topic + (prev % items_per_topic + 1) % items_per_topic;
                    } else {
                        const double r = uniform01(urng);
                        pick = topic * items_per_topic + static_cast<std::size_t>(items_per_topic * r * r);
                    }
                    prev = pick;
                    events += strprintf("u%03zu,%s,%lld,%s\n", u, item_name(pick).c_str(), static_cast<long long>(ts),
                                        actions[uniform_index(urng, 5)]);
                    ts += 30'000 + static_cast<std::int64_t>(uniform_index(urng, 300'000));
                }
                ts += 3 * 3'600'000;
            }
        }
        write_text_file(out / "events.csv", events);

        // Noiseless loss surface from a known joint law over four model sizes and eight token counts.
        std::vector<LossCurve> curves;
        for (double n : {0.6e9, 1.7e9, 4e9, 8e9}) {
            LossCurve c;
            c.model_size = n;
            for (int k = 0; k < 8; ++k) {
                const double d = 1.28e9 * std::pow(2.0, k);
                c.points.push_back({d, 0.79 + 16500.0 / std::pow(n, 0.511) + 3.85 / std::pow(d, 0.048)});
            }
            curves.push_back(std::move(c));
        }
        save_curves_csv(curves, out / "curves.csv");

        nlohmann::ordered_json cfg;
        cfg["seed"] = 42;
        cfg["paths"] = {{"events", "events.csv"},
                        {"events_format", "delimited"},
                        {"embeddings", "embeddings.bin"},
                        {"embedding_ids", "embedding_ids.txt"},
                        {"descriptions", "descriptions.tsv"},
                        {"curves", "curves.csv"}};
        cfg["walks"] = {{"n_walks", 600}};
        cfg["tokenizer"] = {{"layers", {8, 8, 8}}, {"kmeans_iters", 20}, {"beam", 5}};
        cfg["mixture"] = {{"budget", 60000}};
        cfg["eval"] = {{"ks", {5, 10, 50}}};
        cfg["sweep"] = {{"enabled", true}, {"n_walks", 300}};
        write_text_file(out / "pipeline.json", cfg.dump(2) + "\n");

        std::cout << "wrote toy data to " << out.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
