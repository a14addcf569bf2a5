#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "citefix/bibindex.hpp"
#include "citefix/estimator.hpp"
#include "citefix/types.hpp"

namespace citefix::cohort {

using estimator::PaperTable;
using estimator::SeriesOptions;

// ---------------------------------------------------------------------------
// Matched controls

struct MatchKeys {
    bool month = true;
    bool field = true;
    bool subfield = false;
    bool ref_count_band = false;
    std::uint32_t band_width = 10;
};

struct ControlMatchResult {
    std::vector<CohortPair> pairs;
    std::vector<std::string> unmatched_treated;  // no eligible control, reported not dropped
};

// Exact matching on the selected keys; uniform seeded selection without
// replacement per key cell until exhausted, then with replacement (flagged).
ControlMatchResult match_controls(const std::vector<std::string>& treated,
                                  const std::vector<std::string>& pool, const PaperTable& papers,
                                  const std::unordered_map<std::string, std::uint32_t>& ref_counts,
                                  const MatchKeys& keys, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Citer productivity (last-author prior publications)

struct ProductivityStats {
    double treated_mean_prior = 0.0;
    double control_mean_prior = 0.0;
    double relative_gap = 0.0;  // (control - treated) / control
    double treated_zero_share = 0.0;
    double control_zero_share = 0.0;
    double treated_growth = 0.0;  // post-cutoff output / prior output
    double control_growth = 0.0;
    double growth_ratio = 0.0;  // treated_growth / control_growth
    std::uint64_t n_treated = 0;
    std::uint64_t n_control = 0;
    std::uint64_t unresolved = 0;
};

ProductivityStats citer_productivity(const std::vector<CohortPair>& pairs,
                                     const PaperTable& papers,
                                     const bibindex::AuthorDirectory& authors);

// ---------------------------------------------------------------------------
// Team-size gradient

struct TeamSizeBucket {
    std::string label;
    std::uint32_t lo = 1;
    std::uint32_t hi = 0;  // 0 = open-ended
    double normalized_rate = 0.0;
    bool defined = false;
    std::uint64_t n_refs = 0;
};

// Excess rate per team-size bucket divided by the corpus-wide excess rate.
std::vector<TeamSizeBucket> teamsize_rates(const std::vector<Verdict>& verdicts,
                                           const PaperTable& papers,
                                           YearMonth baseline_end = estimator::kDefaultBaselineEnd,
                                           const SeriesOptions& opts = {});

// ---------------------------------------------------------------------------
// Cited-author attribution

// Embedding port; the default maps titles to tf-idf term vectors.
class PaperEmbedder {
public:
    virtual ~PaperEmbedder() = default;
    virtual TermVector paper_vector(const std::vector<std::string>& titles) const = 0;
    virtual TermVector profile_vector(const AuthorProfile& profile) const = 0;
};

class TfidfEmbedder : public PaperEmbedder {
public:
    static TfidfEmbedder build(const std::vector<AuthorProfile>& profiles);
    TermVector paper_vector(const std::vector<std::string>& titles) const override;
    TermVector profile_vector(const AuthorProfile& profile) const override;
    double idf(const std::string& term) const;

private:
    std::unordered_map<std::string, double> idf_;
    double default_idf_ = 0.0;
};

double cosine(const TermVector& a, const TermVector& b);

struct AttributionRecord : Attribution {
    std::uint32_t name_index = 0;  // position in the cited author list
};

// Resolves each cited name to the surname-compatible profile maximizing
// cosine(citing-paper vector, profile vector), iff that cosine >= tau.
std::vector<AttributionRecord> attribute_cited_authors(const ParsedReference& ref,
                                                       const TermVector& citing_vector,
                                                       const bibindex::AuthorDirectory& authors,
                                                       const PaperEmbedder& embedder, double tau);

// ---------------------------------------------------------------------------
// Beneficiary statistics

BeneficiaryStats beneficiary_stats(const std::vector<AttributionRecord>& hallucinated,
                                   const std::vector<AttributionRecord>& control,
                                   const bibindex::AuthorDirectory& authors);

// ---------------------------------------------------------------------------
// Mixture regression  y = a + g_category + d_t + beta*p + theta*q + e

struct MixtureObservation {
    double y = 0.0;
    std::string category;
    YearMonth month;
    bool unmatched = false;  // matched references carry p = q = 0
};

struct MixtureRegressionResult {
    RegressionResult fit;
    std::optional<double> beta;        // coefficient on p (absent if dropped)
    std::optional<double> beta_se;
    std::optional<double> theta;       // coefficient on q
    std::optional<double> theta_se;
};

MixtureRegressionResult mixture_regression(const std::vector<MixtureObservation>& obs,
                                           const std::vector<MixtureWeights>& weights,
                                           bool include_month_effects = true);

// ---------------------------------------------------------------------------
// Systemic metrics

struct LeakageStats {
    double leakage = 0.0;     // unmatched in accepted / unmatched in labeled
    double rate_ratio = 0.0;  // unmatched rate rejected / accepted
    bool ratio_defined = false;
    std::uint64_t unmatched_accepted = 0;
    std::uint64_t unmatched_rejected = 0;
    std::uint64_t refs_accepted = 0;
    std::uint64_t refs_rejected = 0;
    std::uint64_t papers_unlabeled = 0;
};

LeakageStats screening_leakage(const std::vector<Verdict>& verdicts, const PaperTable& papers,
                               const SeriesOptions& opts = {});

struct PersistenceStats {
    double share = 0.0;
    bool defined = false;
    std::uint64_t persisted = 0;
    std::uint64_t unmatched_in_linked_preprints = 0;
    std::uint64_t preprints_linked = 0;
    std::uint64_t preprints_unlinked = 0;
};

// Among unmatched references in linked preprints, share whose normalized
// title reappears unmatched in the published version's reference list.
PersistenceStats persistence(const std::vector<Verdict>& preprint_verdicts,
                             const std::vector<ParsedReference>& preprint_refs,
                             const std::vector<Verdict>& published_verdicts,
                             const std::vector<ParsedReference>& published_refs,
                             const std::vector<std::pair<std::string, std::string>>& links,
                             const SeriesOptions& opts = {});

struct DecileRate {
    int decile = 0;  // 1 = lowest impact
    double excess_rate = 0.0;
    std::uint64_t n_refs = 0;
    std::uint64_t n_journals = 0;
    double mean_impact = 0.0;
};

// Journals ranked by impact score, split into 10 equal-count deciles (ties by
// journal_id); per-decile excess over a common pre-window baseline.
std::vector<DecileRate> journal_decile_rates(const std::vector<Verdict>& verdicts,
                                             const PaperTable& papers,
                                             const std::map<std::string, double>& impact,
                                             YearMonth baseline_end = estimator::kDefaultBaselineEnd,
                                             const SeriesOptions& opts = {});

}  // namespace citefix::cohort
