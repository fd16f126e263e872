#pragma once

#include "recsyn/rules.hpp"
#include "recsyn/tokenizer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace recsyn {

enum class DocKind { item_text, cf_statement, uih };

const char* doc_kind_name(DocKind kind) noexcept;

using TokenCounter = std::function<std::size_t(std::string_view)>;

struct CorpusDoc {
    DocKind kind = DocKind::item_text;
    std::string text;
    std::size_t token_count = 0;
};

struct ItemTextParts {
    std::vector<std::string> tokens;
    std::string description;
    friend bool operator==(const ItemTextParts&, const ItemTextParts&) = default;
};

/// Numbers are kept as printed: percent with 1 decimal, confidence 3, lift 2.
struct CfParts {
    std::vector<std::string> a_tokens;
    std::vector<std::string> b_tokens;
    double percent = 0.0;
    double confidence = 0.0;
    double lift = 0.0;
    friend bool operator==(const CfParts&, const CfParts&) = default;
};

struct UihParts {
    std::vector<std::vector<std::string>> groups;
    friend bool operator==(const UihParts&, const UihParts&) = default;
};

// Counter defaults to whitespace tokens when empty.
CorpusDoc render_item_text(const ItemTextParts& parts, const TokenCounter& counter = {});
CorpusDoc render_cf(const CfParts& parts, const TokenCounter& counter = {});
CorpusDoc render_cf_statement(const AssociationRule& rule, const std::vector<std::string>& a_tokens,
                              const std::vector<std::string>& b_tokens, const TokenCounter& counter = {});
CorpusDoc render_uih(const UihParts& parts, const TokenCounter& counter = {});
/// Looks every item up in the id map; throws ValidationError on a missing item.
CorpusDoc render_uih(const std::vector<std::string>& items, const IdMap& id_map, const TokenCounter& counter = {});

ItemTextParts parse_item_text(std::string_view text);
CfParts parse_cf(std::string_view text);
UihParts parse_uih(std::string_view text);

/// Kind of a rendered line, or ParseError when it matches no grammar.
DocKind detect_kind(std::string_view text);

struct MixtureDomain {
    std::string name;
    double ratio = 0.0;
    double unique_tokens = 0.0;  // taken from docs when they are present
    std::vector<CorpusDoc> docs;

    static MixtureDomain from_docs(std::string name, double ratio, std::vector<CorpusDoc> docs);
};

struct MixtureSpec {
    std::vector<MixtureDomain> domains;
    std::uint64_t total_token_budget = 0;

    std::vector<std::string> violations() const;
    void validate() const;
};

/// Sets domain `index` to `ratio` and rescales the others so the total stays 1.
MixtureSpec with_ratio(const MixtureSpec& spec, std::size_t index, double ratio);

/// budget * ratio_d / unique_tokens_d per domain.
std::vector<double> estimate_repeats(const MixtureSpec& spec);

struct DomainReport {
    std::string name;
    double ratio = 0.0;
    double target_tokens = 0.0;
    std::uint64_t realized_tokens = 0;
    double realized_share = 0.0;
    double unique_tokens = 0.0;
    double repeats = 0.0;
    std::size_t epochs = 0;
};

struct MixtureReport {
    std::uint64_t total_tokens = 0;
    std::vector<DomainReport> domains;
};

struct MixedDoc {
    std::size_t domain = 0;
    std::size_t doc = 0;
};

struct Mixture {
    std::vector<MixedDoc> stream;
    MixtureReport report;
};

/// Interleaves domains, always feeding the one furthest behind its target share (ties go to
/// the lower index). A domain stops once another document would move it away from its
/// target. Exhausted domains restart with a fresh seeded shuffle.
Mixture compose_mixture(const MixtureSpec& spec, std::uint64_t seed);

/// One document per line, newlines escaped.
void save_corpus(const std::vector<CorpusDoc>& docs, const std::filesystem::path& path);
std::vector<CorpusDoc> load_corpus(const std::filesystem::path& path, const TokenCounter& counter = {});
void save_mixture(const Mixture& mix, const MixtureSpec& spec, const std::filesystem::path& path);
std::string mixture_report_json(const MixtureReport& report);

}  // namespace recsyn
