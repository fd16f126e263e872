#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace recsyn {

/// Row-major item embeddings; row i belongs to item i.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::size_t n_items, std::size_t dim, std::vector<double> data);

    std::size_t n_items() const noexcept { return n_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

struct CodebookLayer {
    std::size_t size = 0;            // K_l
    std::vector<double> centroids;   // size * dim, row-major

    std::span<const double> centroid(std::size_t k, std::size_t dim) const {
        return {centroids.data() + k * dim, dim};
    }
};

struct Codebook {
    std::size_t dim = 0;
    std::vector<CodebookLayer> layers;

    std::size_t n_layers() const noexcept { return layers.size(); }
    /// First global token index of each layer in the flat REC vocabulary.
    std::vector<std::size_t> layer_offsets() const;
    std::size_t vocabulary_size() const;
};

/// One code per layer, in layer order.
struct SemanticId {
    std::vector<std::uint32_t> codes;
    friend auto operator<=>(const SemanticId&, const SemanticId&) = default;
};

struct Encoding {
    SemanticId id;
    double residual_sq = 0.0;  // squared norm of the final residual
};

/// Layer-by-layer k-means (k-means++ init, Lloyd updates) on greedy residuals.
/// Throws ValidationError when a layer asks for more codes than distinct residual points.
Codebook fit_rq_kmeans(const EmbeddingMatrix& emb, const std::vector<std::size_t>& layer_sizes,
                       std::size_t kmeans_iters, std::uint64_t seed);

/// Beam search over layer-wise codes keeping the `beam` best partial paths by residual;
/// ties prefer the lexicographically smaller code sequence. beam == 1 is greedy, and wider
/// beams fall back to the greedy path when it ends with a smaller residual.
Encoding encode(std::span<const double> row, const Codebook& book, std::size_t beam);
std::vector<Encoding> encode_all(const EmbeddingMatrix& emb, const Codebook& book, std::size_t beam);

/// Sum of the addressed centroids over the first `n_layers` layers (all by default).
std::vector<double> decode(const SemanticId& id, const Codebook& book, std::size_t n_layers = SIZE_MAX);

/// (n - distinct) / n over the given ids.
double collision_rate(const std::vector<SemanticId>& ids);

/// Mean squared reconstruction error of the training rows using only the first `n_layers`.
double prefix_reconstruction_mse(const EmbeddingMatrix& emb, const Codebook& book,
                                 const std::vector<Encoding>& encodings, std::size_t n_layers);

/// "REC{offset_l + code}" per layer.
std::vector<std::string> render_tokens(const SemanticId& id, const Codebook& book);
SemanticId parse_tokens(const std::vector<std::string>& tokens, const Codebook& book);

inline constexpr std::uint32_t codebook_format_version = 1;

/// Header (u64 n, u64 dim) then n*dim little-endian f32; item ids in a one-per-line sidecar.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingMatrix& emb, const std::filesystem::path& path);

void save_codebook(const Codebook& book, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

using IdMap = std::map<std::string, std::vector<std::string>>;

/// JSON-lines {"item": str, "tokens": [...]}.
void save_id_map(const IdMap& map, const std::filesystem::path& path);
IdMap load_id_map(const std::filesystem::path& path);

}  // namespace recsyn
