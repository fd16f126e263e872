#include "recsyn/tokenizer.hpp"

#include "recsyn/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace recsyn {

namespace {

constexpr std::string_view codebook_magic = "RSYNCDBK";

double sq_dist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return s;
}

std::size_t count_distinct_rows(const std::vector<double>& pts, std::size_t n, std::size_t d) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto row_less = [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(pts.begin() + a * d, pts.begin() + (a + 1) * d, pts.begin() + b * d,
                                            pts.begin() + (b + 1) * d);
    };
    std::sort(order.begin(), order.end(), row_less);
    std::size_t distinct = n > 0 ? 1 : 0;
    for (std::size_t i = 1; i < n; ++i)
        if (row_less(order[i - 1], order[i])) ++distinct;
    return distinct;
}

// Nearest centroid per row, ties to the lower index.
void assign_rows(const std::vector<double>& pts, std::size_t n, std::size_t d, const std::vector<double>& cent,
                 std::size_t k, std::vector<std::uint32_t>& assign, std::vector<double>& dist) {
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double dd = sq_dist(&pts[i * d], &cent[c * d], d);
            if (dd < best) {
                best = dd;
                arg = static_cast<std::uint32_t>(c);
            }
        }
        assign[i] = arg;
        dist[i] = best;
    }
}

std::vector<double> kmeans_plus_plus(const std::vector<double>& pts, std::size_t n, std::size_t d, std::size_t k,
                                     Rng& rng) {
    std::vector<double> cent(k * d);
    std::vector<double> closest(n, std::numeric_limits<double>::infinity());
    std::size_t pick = static_cast<std::size_t>(uniform_index(rng, n));
    for (std::size_t c = 0; c < k; ++c) {
        std::copy_n(pts.begin() + pick * d, d, cent.begin() + c * d);
        if (c + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            closest[i] = std::min(closest[i], sq_dist(&pts[i * d], &cent[c * d], d));
            total += closest[i];
        }
        const double target = uniform01(rng) * total;
        double acc = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            acc += closest[i];
            if (closest[i] > 0.0 && target < acc) {
                pick = i;
                break;
            }
        }
        if (pick == n) {
            // rounding pushed target past the tail: take the last point not yet chosen
            for (std::size_t i = n; i-- > 0;)
                if (closest[i] > 0.0) {
                    pick = i;
                    break;
                }
        }
    }
    return cent;
}

std::vector<double> kmeans(const std::vector<double>& pts, std::size_t n, std::size_t d, std::size_t k,
                           std::size_t iters, Rng& rng) {
    auto cent = kmeans_plus_plus(pts, n, d, k, rng);
    std::vector<std::uint32_t> assign(n, 0), prev(n, std::numeric_limits<std::uint32_t>::max());
    std::vector<double> dist(n, 0.0);
    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);

    for (std::size_t it = 0; it < iters; ++it) {
        assign_rows(pts, n, d, cent, k, assign, dist);
        if (assign == prev) break;
        prev = assign;

        // ordered reduction: sums accumulate in row order regardless of threads
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = assign[i];
            ++counts[c];
            for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += pts[i * d + j];
        }
        std::vector<bool> used(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (std::size_t j = 0; j < d; ++j)
                    cent[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
                continue;
            }
            // empty cluster: reseed from the farthest unused point
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (!used[i] && (far == n || dist[i] > dist[far])) far = i;
            used[far] = true;
            dist[far] = 0.0;
            std::copy_n(pts.begin() + far * d, d, cent.begin() + c * d);
        }
    }
    return cent;
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t n_items, std::size_t dim, std::vector<double> data)
    : n_(n_items), dim_(dim), data_(std::move(data)) {
    if (dim_ == 0) throw ValidationError("embedding dim must be positive");
    if (data_.size() != n_ * dim_) throw ValidationError("embedding data size does not match n * dim");
    for (double v : data_)
        if (!std::isfinite(v)) throw ValidationError("embedding contains a non-finite value");
}

std::vector<std::size_t> Codebook::layer_offsets() const {
    std::vector<std::size_t> off(layers.size(), 0);
    for (std::size_t l = 1; l < layers.size(); ++l) off[l] = off[l - 1] + layers[l - 1].size;
    return off;
}

std::size_t Codebook::vocabulary_size() const {
    std::size_t total = 0;
    for (const auto& l : layers) total += l.size;
    return total;
}

Codebook fit_rq_kmeans(const EmbeddingMatrix& emb, const std::vector<std::size_t>& layer_sizes,
                       std::size_t kmeans_iters, std::uint64_t seed) {
    if (layer_sizes.empty()) throw ValidationError("need at least one codebook layer");
    if (kmeans_iters < 1) throw ValidationError("kmeans_iters must be at least 1");
    const std::size_t n = emb.n_items();
    const std::size_t d = emb.dim();
    for (auto k : layer_sizes)
        if (k == 0 || k > n)
            throw ValidationError(strprintf("layer size %zu must lie in [1, n_items=%zu]", k, n));

    Codebook book;
    book.dim = d;
    std::vector<double> residual = emb.data();
    std::vector<std::uint32_t> assign(n);
    std::vector<double> dist(n);

    for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
        const std::size_t k = layer_sizes[l];
        const std::size_t distinct = count_distinct_rows(residual, n, d);
        if (k > distinct)
            throw ValidationError(
                strprintf("layer %zu asks for %zu codes but only %zu distinct residual points remain", l, k, distinct));
        Rng rng(derive_seed(seed, {l}));
        CodebookLayer layer{k, kmeans(residual, n, d, k, kmeans_iters, rng)};
        assign_rows(residual, n, d, layer.centroids, k, assign, dist);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) residual[i * d + j] -= layer.centroids[assign[i] * d + j];
        book.layers.push_back(std::move(layer));
    }
    return book;
}

Encoding encode(std::span<const double> row, const Codebook& book, std::size_t beam) {
    if (beam < 1) throw ValidationError("beam must be at least 1");
    if (row.size() != book.dim) throw ValidationError("row dimension does not match codebook");
    const std::size_t d = book.dim;

    struct Path {
        double dist;
        std::vector<std::uint32_t> codes;
        std::vector<double> residual;
    };
    struct Candidate {
        double dist;
        std::size_t parent;
        std::uint32_t code;
    };

    std::vector<Path> paths;
    paths.push_back({0.0, {}, std::vector<double>(row.begin(), row.end())});
    std::vector<Candidate> cand;
    for (const auto& layer : book.layers) {
        cand.clear();
        for (std::size_t p = 0; p < paths.size(); ++p)
            for (std::size_t k = 0; k < layer.size; ++k)
                cand.push_back({sq_dist(paths[p].residual.data(), &layer.centroids[k * d], d), p,
                                static_cast<std::uint32_t>(k)});
        // paths are kept sorted, so (dist, parent, code) orders ties lexicographically by code sequence
        const std::size_t keep = std::min(beam, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                          [](const Candidate& a, const Candidate& b) {
                              if (a.dist != b.dist) return a.dist < b.dist;
                              if (a.parent != b.parent) return a.parent < b.parent;
                              return a.code < b.code;
                          });
        std::vector<Path> next;
        next.reserve(keep);
        for (std::size_t i = 0; i < keep; ++i) {
            const auto& c = cand[i];
            Path np{c.dist, paths[c.parent].codes, paths[c.parent].residual};
            np.codes.push_back(c.code);
            for (std::size_t j = 0; j < d; ++j) np.residual[j] -= layer.centroids[c.code * d + j];
            next.push_back(std::move(np));
        }
        paths = std::move(next);
    }
    // report the residual of the actual reconstruction rather than the accumulated estimate
    const auto& best = paths.front();
    double res = 0.0;
    for (double v : best.residual) res += v * v;
    if (beam > 1) {
        // pruning can drop the greedy path mid-search
        auto greedy = encode(row, book, 1);
        if (greedy.residual_sq < res) return greedy;
    }
    return {SemanticId{best.codes}, res};
}

std::vector<Encoding> encode_all(const EmbeddingMatrix& emb, const Codebook& book, std::size_t beam) {
    std::vector<Encoding> out(emb.n_items());
#pragma omp parallel for schedule(dynamic, 32)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(out.size()); ++i)
        out[static_cast<std::size_t>(i)] = encode(emb.row(static_cast<std::size_t>(i)), book, beam);
    return out;
}

std::vector<double> decode(const SemanticId& id, const Codebook& book, std::size_t n_layers) {
    const std::size_t use = std::min(n_layers, book.n_layers());
    if (id.codes.size() != book.n_layers()) throw ValidationError("semantic id length does not match codebook");
    std::vector<double> out(book.dim, 0.0);
    for (std::size_t l = 0; l < use; ++l) {
        const auto& layer = book.layers[l];
        if (id.codes[l] >= layer.size)
            throw ValidationError(strprintf("code %u out of range for layer %zu (K=%zu)", id.codes[l], l, layer.size));
        const auto c = layer.centroid(id.codes[l], book.dim);
        for (std::size_t j = 0; j < book.dim; ++j) out[j] += c[j];
    }
    return out;
}

double collision_rate(const std::vector<SemanticId>& ids) {
    if (ids.empty()) throw ValidationError("collision rate of an empty id list");
    std::vector<SemanticId> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    return static_cast<double>(ids.size() - distinct) / static_cast<double>(ids.size());
}

double prefix_reconstruction_mse(const EmbeddingMatrix& emb, const Codebook& book,
                                 const std::vector<Encoding>& encodings, std::size_t n_layers) {
    double total = 0.0;
    for (std::size_t i = 0; i < emb.n_items(); ++i) {
        const auto rec = decode(encodings[i].id, book, n_layers);
        total += sq_dist(emb.row(i).data(), rec.data(), emb.dim());
    }
    return total / static_cast<double>(emb.n_items());
}

std::vector<std::string> render_tokens(const SemanticId& id, const Codebook& book) {
    if (id.codes.size() != book.n_layers()) throw ValidationError("semantic id length does not match codebook");
    const auto off = book.layer_offsets();
    std::vector<std::string> out;
    out.reserve(id.codes.size());
    for (std::size_t l = 0; l < id.codes.size(); ++l) {
        if (id.codes[l] >= book.layers[l].size) throw ValidationError("code out of range");
        out.push_back("REC" + std::to_string(off[l] + id.codes[l]));
    }
    return out;
}

SemanticId parse_tokens(const std::vector<std::string>& tokens, const Codebook& book) {
    if (tokens.size() != book.n_layers()) throw ParseError("token count does not match codebook layers");
    const auto off = book.layer_offsets();
    SemanticId id;
    for (std::size_t l = 0; l < tokens.size(); ++l) {
        const auto& t = tokens[l];
        if (t.size() < 4 || t.compare(0, 3, "REC") != 0) throw ParseError("not a REC token: " + t);
        std::size_t global = 0;
        try {
            std::size_t used = 0;
            global = std::stoull(t.substr(3), &used);
            if (used != t.size() - 3) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw ParseError("not a REC token: " + t);
        }
        if (global < off[l] || global >= off[l] + book.layers[l].size)
            throw ParseError(strprintf("token %s does not belong to layer %zu", t.c_str(), l));
        id.codes.push_back(static_cast<std::uint32_t>(global - off[l]));
    }
    return id;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
    BinaryReader r(read_text_file(path));
    const auto n = r.get_u64();
    const auto dim = r.get_u64();
    if (dim == 0) throw ParseError("embedding dim must be positive");
    if (r.remaining() != n * dim * 4) throw ParseError("embedding payload size does not match header");
    std::vector<double> data(n * dim);
    for (auto& v : data) v = r.get_f32();
    try {
        return EmbeddingMatrix(n, dim, std::move(data));
    } catch (const ValidationError& err) {
        throw ParseError(err.what());
    }
}

void save_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path) {
    BinaryWriter w;
    w.put_u64(emb.n_items());
    w.put_u64(emb.dim());
    for (double v : emb.data()) w.put_f32(static_cast<float>(v));
    write_text_file(path, w.buffer());
}

void save_codebook(const Codebook& book, const std::filesystem::path& path) {
    BinaryWriter w;
    w.put_bytes(codebook_magic);
    w.put_u32(codebook_format_version);
    w.put_u64(book.dim);
    w.put_u32(static_cast<std::uint32_t>(book.n_layers()));
    for (const auto& layer : book.layers) {
        w.put_u64(layer.size);
        for (double v : layer.centroids) w.put_f64(v);
    }
    write_text_file(path, w.buffer());
}

Codebook load_codebook(const std::filesystem::path& path) {
    BinaryReader r(read_text_file(path));
    if (r.get_bytes(codebook_magic.size()) != codebook_magic) throw ParseError("not a codebook file (bad magic)");
    if (const auto version = r.get_u32(); version != codebook_format_version)
        throw ParseError("unsupported codebook version " + std::to_string(version));
    Codebook book;
    book.dim = r.get_u64();
    const auto n_layers = r.get_u32();
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        CodebookLayer layer;
        layer.size = r.get_u64();
        if (layer.size == 0) throw ParseError("empty codebook layer");
        layer.centroids.resize(layer.size * book.dim);
        for (auto& v : layer.centroids) v = r.get_f64();
        book.layers.push_back(std::move(layer));
    }
    if (!r.at_end()) throw ParseError("trailing bytes after codebook");
    return book;
}

void save_id_map(const IdMap& map, const std::filesystem::path& path) {
    std::string out;
    for (const auto& [item, tokens] : map) {
        nlohmann::json row = {{"item", item}, {"tokens", tokens}};
        out += row.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

IdMap load_id_map(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    IdMap map;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            const auto row = nlohmann::json::parse(lines[i]);
            map[row.at("item").get<std::string>()] = row.at("tokens").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& err) {
            throw ParseError(std::string("bad id-map row: ") + err.what(), i + 1);
        }
    }
    return map;
}

}  // namespace recsyn
