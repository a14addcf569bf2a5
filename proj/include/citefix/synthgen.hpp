#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "citefix/io.hpp"
#include "citefix/types.hpp"

namespace citefix::synthgen {

struct SynthConfig {
    std::uint64_t seed = 20250801;

    // Catalog
    std::uint32_t n_catalog_records = 10000;
    std::uint32_t n_authors = 2500;
    std::uint32_t n_same_name_pairs = 20;  // same-name author pairs with distinct vocabularies
    std::uint32_t vocab_size = 50000;
    double zipf_exponent = 1.05;
    double zipf_offset = 25.0;
    double lognormal_mu = 1.0;     // author productivity
    double lognormal_sigma = 1.0;
    int catalog_year_lo = 1990;
    int catalog_year_hi = 2024;
    int cutoff_year = 2022;  // "prior publications" boundary

    // Corpus
    YearMonth first_month{2021, 12};
    std::uint32_t n_months = 48;
    std::uint32_t refs_per_month = 5000;
    double refs_per_paper_mean = 25.0;
    double quoted_render_share = 0.8;  // remaining refs use the unquoted sentence style
    std::vector<std::string> fields{"cs", "bio"};

    // Planted signal
    double baseline_noise_rate = 0.015;
    std::vector<double> hallucination_schedule;  // per month; empty = all zero
    double typo_rate = 0.01;                     // capped so title similarity stays >= 0.97
    double margin_max_similarity = 0.70;         // fabrications vs nearest catalog title
    double noise_margin_max_similarity = 0.80;   // baseline noise vs nearest catalog title
    double fabricated_invented_name_share = 0.3; // cited names matching no profile
    double beneficiary_bias = 1.0;               // productivity exponent for fabricated creditees
    double citation_only_share = 0.0;            // fabrications drawn from a shared title pool
    std::array<double, 5> teamsize_gradient{1, 1, 1, 1, 1};  // buckets 1,2,3-4,5-9,10+

    // Moderation plant; accepted_volume < 0 disables labels.
    double moderation_accepted_volume = -1.0;
    double moderation_rejected_ratio = 4.0;

    // Preprint/published persistence plant.
    std::uint32_t n_linked_pairs = 0;
    double persistence_share = 0.85;

    // LLM-use score plant: score = clamp(base + gain * paper fab share + noise).
    double llm_use_base = 0.1;
    double llm_use_gain = 3.0;
    double llm_use_noise = 0.05;

    // Linear 0 -> peak ramp after n_pre zero months.
    static std::vector<double> ramp_schedule(std::uint32_t n_pre, std::uint32_t n_ramp, double peak);
    // Configuration used by the end-to-end recovery gate: 12 flat months
    // followed by a 36-month ramp to 2%.
    static SynthConfig recovery_default();
};

struct SynthCatalog {
    std::vector<CatalogRecord> records;
    std::vector<AuthorProfile> profiles;
    std::vector<double> productivity_weights;  // raw lognormal draws, profile order
};

enum class RefLabel { Real, BaselineNoise, Fabricated };

const char* to_string(RefLabel label);

struct GroundTruth {
    struct Entry {
        std::string paper_id;
        std::uint32_t ref_index = 0;
        YearMonth month;
        RefLabel label = RefLabel::Real;
        std::string record_id;  // cited catalog record for Real entries
    };
    struct MonthTruth {
        YearMonth month;
        std::uint64_t n_total = 0;
        std::uint64_t n_noise = 0;
        std::uint64_t n_fabricated = 0;
        double noise_rate = 0.0;
        double fabricated_rate = 0.0;
    };
    std::vector<Entry> entries;
    std::vector<MonthTruth> months;
};

struct SynthCorpus {
    std::vector<io::RawCorpusPaper> papers;
    GroundTruth truth;
    std::vector<std::pair<std::string, std::string>> links;  // preprint -> published
};

// Deterministic per (config.seed); titles are 4-10 tokens from a
// Zipf-Mandelbrot vocabulary, author productivity lognormal, per-author
// vocabulary tilts for disambiguation tests.
SynthCatalog gen_catalog(const SynthConfig& cfg);

// Renders reference strings for planted labels: Real references cite catalog
// records with bounded typos; BaselineNoise titles are in-vocabulary but
// margin-checked out of catalog; Fabricated titles come from a held-out
// vocabulary with a brute-force-verified similarity margin. Raises
// ConfigError when the margin cannot be achieved.
SynthCorpus gen_corpus(const SynthConfig& cfg, const SynthCatalog& catalog);

// Dump writers matching the bibindex ingest schema.
void save_catalog_dump(const std::string& path, const std::vector<CatalogRecord>& records);
void save_author_dump(const std::string& path, const std::vector<AuthorProfile>& profiles);
void save_ground_truth(const std::string& path, const GroundTruth& truth);
GroundTruth load_ground_truth(const std::string& path);

// ---------------------------------------------------------------------------
// Recovery scoring

struct RecoveryTolerances {
    double excess_abs = 0.003;    // |excess - planted fabricated rate|, absolute
    double baseline_abs = 0.002;  // |b - planted noise rate|
    double real_matched_min = 0.99;
    double fabricated_unmatched_min = 0.95;
    std::uint64_t fabricated_matched_max = 0;
};

struct RecoveryReport {
    double baseline_error = 0.0;
    double max_monthly_excess_error = 0.0;
    double real_matched_share = 0.0;
    double fabricated_unmatched_share = 0.0;
    std::uint64_t fabricated_matched = 0;
    // label (Real, BaselineNoise, Fabricated) x verdict status counts
    std::array<std::array<std::uint64_t, kNumVerdictStatuses>, 3> confusion{};
    bool pass = false;
    std::vector<std::string> failures;
};

// Compares pipeline estimates against planted truth; months present in the
// truth and the series must agree exactly (DataError otherwise).
RecoveryReport evaluate_recovery(const GroundTruth& truth,
                                 const std::vector<MonthlySeries>& series, double baseline,
                                 YearMonth baseline_end, const std::vector<Verdict>& verdicts,
                                 const RecoveryTolerances& tol);

void save_recovery_report(const std::string& path, const RecoveryReport& report);

}  // namespace citefix::synthgen
