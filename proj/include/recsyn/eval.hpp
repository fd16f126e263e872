#pragma once

#include "recsyn/ingest.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace recsyn {

using Sequences = std::vector<std::vector<std::string>>;

enum class ModelKind { markov, item_knn, popularity };

const char* model_kind_name(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

/// Ranks trained items as next-item candidates for a prefix. Rankings hold no duplicates and
/// only trained items; score ties go to the smaller item.
class NextItemModel {
public:
    virtual ~NextItemModel() = default;
    virtual std::vector<std::string> rank(const std::vector<std::string>& prefix, std::size_t k) const = 0;
    virtual const std::vector<std::string>& vocabulary() const = 0;
};

/// markov: P(b | a) from transition counts, popularity backoff for unseen or exhausted states.
/// item_knn: cosine over session co-occurrence with the last item, popularity backoff.
/// popularity: global occurrence counts.
std::unique_ptr<NextItemModel> train_baseline(ModelKind kind, const Sequences& sequences);

struct EvalReport {
    std::string setting;
    std::map<std::size_t, double> recall_at;
    std::size_t n_predictions = 0;
    std::size_t n_skipped = 0;
};

/// Leave-last-out: predict each session's final item from the rest. Sessions shorter than 2
/// are skipped and counted. `ks` must be non-empty and strictly ascending.
EvalReport recall_at_k(const NextItemModel& model, const Sequences& test, const std::vector<std::size_t>& ks,
                       const std::string& setting = "");

struct PairedReport {
    EvalReport tstr;
    EvalReport trtr;
};

PairedReport run_tstr_trtr(const Sequences& synthetic, const Sequences& real_train, const Sequences& real_test,
                           ModelKind kind, const std::vector<std::size_t>& ks);

/// {"setting": ..., "recall": {"10": f, ...}, "n": int}
std::string eval_report_json(const EvalReport& report);
std::string paired_report_json(const PairedReport& report);

}  // namespace recsyn
