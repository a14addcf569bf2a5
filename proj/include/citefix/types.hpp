#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace citefix {

// ---------------------------------------------------------------------------
// Calendar month

struct YearMonth {
    int year = 0;
    int month = 0;  // 1..12

    auto operator<=>(const YearMonth&) const = default;

    // Months since year 0, used for schedule arithmetic.
    int index() const { return year * 12 + (month - 1); }

    static YearMonth from_index(int idx) {
        YearMonth ym;
        ym.year = idx / 12;
        ym.month = idx % 12 + 1;
        return ym;
    }

    // Parses "YYYY-MM"; throws ConfigError on malformed input.
    static YearMonth parse(const std::string& s);
    std::string str() const;
};

// ---------------------------------------------------------------------------
// refparse

enum class SourceFormat { Plain, LatexBbl, JatsXml, Preparsed };

struct RawReference {
    std::string paper_id;
    std::uint32_t index_in_paper = 0;
    std::string text;
    SourceFormat source_format = SourceFormat::Plain;
};

struct ParsedReference {
    RawReference raw;
    std::optional<std::string> title;
    std::optional<std::string> title_norm;  // present iff title is
    std::vector<std::string> authors;
    std::optional<int> year;
    std::optional<std::string> venue;
    double parse_confidence = 0.0;  // found fields among {title, year, authors} / 3
};

// ---------------------------------------------------------------------------
// bibindex

struct CatalogRecord {
    std::string record_id;
    std::string title_norm;
    std::optional<int> year;
    std::optional<std::string> venue;
    std::vector<std::string> author_ids;
    std::uint64_t n_citations = 0;
};

// Sparse term-weight vector; ordered map keeps serialization deterministic.
using TermVector = std::map<std::string, double>;

enum class Gender { Male, Female, Unknown };

struct AuthorProfile {
    std::string author_id;
    std::string name;
    std::uint32_t n_pubs_pre_cutoff = 0;
    std::uint32_t n_pubs_total = 0;
    std::uint64_t n_citations = 0;
    Gender gender_label = Gender::Unknown;
    TermVector term_profile;
};

struct IngestReport {
    std::uint64_t read = 0;
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;  // duplicate ids, first wins
    std::uint64_t malformed = 0;
};

// ---------------------------------------------------------------------------
// matcher

enum class VerdictStatus {
    Matched = 0,
    NonAcademic = 1,
    MatchedAfterRetitle = 2,
    ExternallyVerified = 3,
    CitationOnly = 4,
    Unmatched = 5,
};

constexpr int kNumVerdictStatuses = 6;

const char* to_string(VerdictStatus s);
std::optional<VerdictStatus> verdict_status_from_string(const std::string& s);

struct Verdict {
    std::string paper_id;          // provenance of the judged reference
    std::uint32_t ref_index = 0;
    VerdictStatus status = VerdictStatus::Unmatched;
    std::optional<std::string> matched_record_id;
    std::optional<double> similarity;
    int stage = 0;  // 1..4, the deciding funnel stage
};

struct FunnelReport {
    std::uint64_t total = 0;
    std::array<std::uint64_t, kNumVerdictStatuses> by_status{};
    // Share of references still unresolved after stages 1..3 (stage 4 is terminal).
    std::array<double, 3> unresolved_after_stage{};
    std::uint64_t classifier_failures = 0;
    std::uint64_t external_failures = 0;

    std::uint64_t count(VerdictStatus s) const {
        return by_status[static_cast<int>(s)];
    }
};

enum class LookupOutcome { RecordFound, CitedByMultiple, NotFound };

struct ExternalLookupResult {
    std::string query_title_norm;
    LookupOutcome outcome = LookupOutcome::NotFound;
    std::uint32_t evidence_count = 0;
    std::int64_t fetched_at = 0;  // unix seconds; 0 for stubbed/replayed results
};

// ---------------------------------------------------------------------------
// estimator

enum class ModerationLabel { Accepted, Rejected };

struct PaperRecord {
    std::string paper_id;
    std::string corpus;
    std::string field;
    std::optional<std::string> subfield;
    YearMonth month;
    std::uint32_t team_size = 1;
    std::vector<std::string> author_ids;
    std::optional<double> llm_use_score;
    std::optional<ModerationLabel> moderation_label;
    std::optional<std::string> journal_id;
    std::optional<std::string> published_link;
};

struct MonthlySeries {
    YearMonth month;
    std::uint64_t n_total = 0;
    std::uint64_t n_unmatched = 0;
    double unmatched_rate = 0.0;  // u_t
    double baseline = 0.0;        // b
    double excess_rate = 0.0;     // max(0, u_t - b)
    double excess_count = 0.0;    // excess_rate * n_total
    bool low_sample = false;
};

struct MixtureWeights {
    YearMonth month;
    double p = 0.0;  // P(hallucinated | unmatched in this month)
    double q = 1.0;  // 1 - p
};

struct RegressionResult {
    std::vector<std::string> names;
    std::vector<double> estimates;    // NaN for dropped columns
    std::vector<double> std_errors;   // NaN for dropped columns
    std::vector<std::string> dropped; // collinear columns removed from the fit
    std::uint64_t n_obs = 0;
    double residual_variance = 0.0;
};

// ---------------------------------------------------------------------------
// cohort

struct CohortPair {
    std::string treated;
    std::string control;
    std::vector<std::string> keys_used;
    bool with_replacement = false;  // control cell was exhausted
};

struct Attribution {
    std::string paper_id;            // citing paper
    std::uint32_t ref_index = 0;
    std::string cited_name;
    std::optional<std::string> resolved_author;
    std::optional<double> cosine_to_profile;
};

struct DeltaStat {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t n_a = 0;  // sample sizes behind the contrast
    std::uint64_t n_b = 0;
    bool defined = true;
};

struct BeneficiaryStats {
    DeltaStat profile_match_rate;   // relative delta of resolution rates
    DeltaStat mean_publications;    // relative delta, e.g. +0.688 = 68.8% more
    DeltaStat mean_citations;       // relative delta
    DeltaStat male_share;           // percentage-point delta in [-100, 100]
    DeltaStat team_size;            // absolute delta of mean cited-team size
    DeltaStat hierarchy;            // percentage-point delta of first-last hierarchy
};

}  // namespace citefix
