#include "recsyn/eval.hpp"

#include "recsyn/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace recsyn {

namespace {

using Index = std::uint32_t;

struct Vocab {
    std::vector<std::string> items;  // sorted

    explicit Vocab(const Sequences& seqs) {
        for (const auto& s : seqs) items.insert(items.end(), s.begin(), s.end());
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
    }
    std::optional<Index> find(const std::string& item) const {
        const auto it = std::lower_bound(items.begin(), items.end(), item);
        if (it == items.end() || *it != item) return std::nullopt;
        return static_cast<Index>(it - items.begin());
    }
};

// (score desc, index asc)
template <class Score>
void sort_by_score(std::vector<std::pair<Index, Score>>& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
}

class BaseModel : public NextItemModel {
public:
    explicit BaseModel(const Sequences& seqs) : vocab_(seqs) {
        if (vocab_.items.size() < 2) throw ValidationError("a baseline needs at least two distinct items");
        std::vector<std::pair<Index, std::uint64_t>> pop(vocab_.items.size());
        for (Index i = 0; i < pop.size(); ++i) pop[i] = {i, 0};
        for (const auto& s : seqs)
            for (const auto& item : s) ++pop[*vocab_.find(item)].second;
        sort_by_score(pop);
        for (const auto& [i, c] : pop) popular_.push_back(i);
    }

    const std::vector<std::string>& vocabulary() const override { return vocab_.items; }

protected:
    // Appends popularity order, skipping already-ranked items, until k items are listed.
    std::vector<std::string> finish(std::vector<Index> head, std::size_t k) const {
        k = std::min(k, vocab_.items.size());
        std::vector<bool> seen(vocab_.items.size(), false);
        std::vector<std::string> out;
        out.reserve(k);
        for (auto i : head) {
            if (out.size() == k) break;
            seen[i] = true;
            out.push_back(vocab_.items[i]);
        }
        for (auto i : popular_) {
            if (out.size() == k) break;
            if (!seen[i]) out.push_back(vocab_.items[i]);
        }
        return out;
    }

    Vocab vocab_;
    std::vector<Index> popular_;
};

class PopularityModel final : public BaseModel {
public:
    using BaseModel::BaseModel;
    std::vector<std::string> rank(const std::vector<std::string>&, std::size_t k) const override { return finish({}, k); }
};

class MarkovModel final : public BaseModel {
public:
    explicit MarkovModel(const Sequences& seqs) : BaseModel(seqs), next_(vocab_.items.size()) {
        std::vector<std::unordered_map<Index, std::uint64_t>> counts(vocab_.items.size());
        for (const auto& s : seqs)
            for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[*vocab_.find(s[i])][*vocab_.find(s[i + 1])];
        for (std::size_t a = 0; a < counts.size(); ++a) {
            std::vector<std::pair<Index, std::uint64_t>> row(counts[a].begin(), counts[a].end());
            sort_by_score(row);
            for (const auto& [b, c] : row) next_[a].push_back(b);
        }
    }

    std::vector<std::string> rank(const std::vector<std::string>& prefix, std::size_t k) const override {
        if (prefix.empty()) return finish({}, k);
        const auto last = vocab_.find(prefix.back());
        return finish(last ? next_[*last] : std::vector<Index>{}, k);
    }

private:
    std::vector<std::vector<Index>> next_;
};

class ItemKnnModel final : public BaseModel {
public:
    explicit ItemKnnModel(const Sequences& seqs) : BaseModel(seqs), neighbors_(vocab_.items.size()) {
        const auto n = vocab_.items.size();
        std::vector<std::uint64_t> occ(n, 0);
        std::vector<std::unordered_map<Index, std::uint64_t>> co(n);
        for (const auto& s : seqs) {
            std::vector<Index> set;
            for (const auto& item : s) set.push_back(*vocab_.find(item));
            std::sort(set.begin(), set.end());
            set.erase(std::unique(set.begin(), set.end()), set.end());
            for (auto a : set) ++occ[a];
            for (std::size_t i = 0; i < set.size(); ++i)
                for (std::size_t j = i + 1; j < set.size(); ++j) {
                    ++co[set[i]][set[j]];
                    ++co[set[j]][set[i]];
                }
        }
        for (std::size_t a = 0; a < n; ++a) {
            std::vector<std::pair<Index, double>> row;
            row.reserve(co[a].size());
            for (const auto& [b, c] : co[a])
                row.emplace_back(b, static_cast<double>(c) / std::sqrt(static_cast<double>(occ[a]) * static_cast<double>(occ[b])));
            sort_by_score(row);
            for (const auto& [b, s] : row) neighbors_[a].push_back(b);
        }
    }

    std::vector<std::string> rank(const std::vector<std::string>& prefix, std::size_t k) const override {
        if (prefix.empty()) return finish({}, k);
        const auto last = vocab_.find(prefix.back());
        return finish(last ? neighbors_[*last] : std::vector<Index>{}, k);
    }

private:
    std::vector<std::vector<Index>> neighbors_;
};

}  // namespace

const char* model_kind_name(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::markov: return "markov";
        case ModelKind::item_knn: return "item_knn";
        case ModelKind::popularity: return "popularity";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "markov") return ModelKind::markov;
    if (name == "item_knn" || name == "itemknn") return ModelKind::item_knn;
    if (name == "popularity") return ModelKind::popularity;
    throw ValidationError("unknown model kind '" + std::string(name) + "' (markov, item_knn, popularity)");
}

std::unique_ptr<NextItemModel> train_baseline(ModelKind kind, const Sequences& sequences) {
    if (sequences.empty()) throw ValidationError("cannot train a baseline on no sequences");
    switch (kind) {
        case ModelKind::markov: return std::make_unique<MarkovModel>(sequences);
        case ModelKind::item_knn: return std::make_unique<ItemKnnModel>(sequences);
        case ModelKind::popularity: return std::make_unique<PopularityModel>(sequences);
    }
    throw ValidationError("unknown model kind");
}

EvalReport recall_at_k(const NextItemModel& model, const Sequences& test, const std::vector<std::size_t>& ks,
                       const std::string& setting) {
    if (ks.empty()) throw ValidationError("K list is empty");
    for (std::size_t i = 0; i < ks.size(); ++i)
        if (ks[i] == 0 || (i > 0 && ks[i] <= ks[i - 1]))
            throw ValidationError("K list must be positive and strictly ascending");
    if (test.empty()) throw ValidationError("test set is empty");

    const std::size_t kmax = ks.back();
    constexpr std::size_t skipped = static_cast<std::size_t>(-2);
    constexpr std::size_t missed = static_cast<std::size_t>(-1);
    std::vector<std::size_t> rank_of(test.size(), missed);
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(test.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto& s = test[i];
        if (s.size() < 2) {
            rank_of[i] = skipped;
            continue;
        }
        const std::vector<std::string> prefix(s.begin(), s.end() - 1);
        const auto ranked = model.rank(prefix, kmax);
        const auto it = std::find(ranked.begin(), ranked.end(), s.back());
        if (it != ranked.end()) rank_of[i] = static_cast<std::size_t>(it - ranked.begin());
    }

    EvalReport rep;
    rep.setting = setting;
    std::vector<std::size_t> hits(ks.size(), 0);
    for (auto r : rank_of) {
        if (r == skipped) {
            ++rep.n_skipped;
            continue;
        }
        ++rep.n_predictions;
        if (r == missed) continue;
        for (std::size_t j = 0; j < ks.size(); ++j)
            if (r < ks[j]) ++hits[j];
    }
    if (rep.n_predictions == 0) throw ValidationError("no test session has at least two items");
    for (std::size_t j = 0; j < ks.size(); ++j)
        rep.recall_at[ks[j]] = static_cast<double>(hits[j]) / static_cast<double>(rep.n_predictions);
    return rep;
}

PairedReport run_tstr_trtr(const Sequences& synthetic, const Sequences& real_train, const Sequences& real_test,
                           ModelKind kind, const std::vector<std::size_t>& ks) {
    const auto syn = train_baseline(kind, synthetic);
    const auto real = train_baseline(kind, real_train);
    return {recall_at_k(*syn, real_test, ks, "TSTR"), recall_at_k(*real, real_test, ks, "TRTR")};
}

namespace {
nlohmann::ordered_json report_object(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["setting"] = r.setting;
    nlohmann::ordered_json rec = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.recall_at) rec[std::to_string(k)] = v;
    j["recall"] = std::move(rec);
    j["n"] = r.n_predictions;
    j["skipped"] = r.n_skipped;
    return j;
}
}  // namespace

std::string eval_report_json(const EvalReport& report) { return report_object(report).dump(2) + "\n"; }

std::string paired_report_json(const PairedReport& report) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    j.push_back(report_object(report.tstr));
    j.push_back(report_object(report.trtr));
    return j.dump(2) + "\n";
}

}  // namespace recsyn
