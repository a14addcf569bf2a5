#pragma once

#include <Eigen/Dense>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "citefix/types.hpp"

namespace citefix::estimator {

using PaperTable = std::unordered_map<std::string, PaperRecord>;

struct SeriesOptions {
    std::set<VerdictStatus> unmatched_statuses{VerdictStatus::Unmatched};
    std::uint64_t low_sample_threshold = 100;
};

constexpr YearMonth kDefaultBaselineEnd{2022, 11};

// One entry per calendar month present, ordered; rates only (baseline and
// excess fields are filled by apply_excess). Verdicts referencing unknown
// papers raise DataError.
std::vector<MonthlySeries> monthly_series(const std::vector<Verdict>& verdicts,
                                          const PaperTable& papers,
                                          const SeriesOptions& opts = {});

// Reference-weighted pre-window unmatched rate: sum(n_unmatched)/sum(n_total)
// over months <= window_end. Requires >= 3 such months.
double baseline_rate(const std::vector<MonthlySeries>& series, YearMonth window_end);

// Fills baseline, excess_rate = max(0, u - b) and excess_count = rate * n.
void apply_excess(std::vector<MonthlySeries>& series, double baseline);

// Sum of monthly excess counts per calendar year.
std::map<int, double> annual_excess_totals(const std::vector<MonthlySeries>& series);

// p_t = clamp((u_t - b)/u_t, 0, 1) for months past the baseline window,
// 0 inside it; q = 1 - p exactly.
std::vector<MixtureWeights> mixture_weights(const std::vector<MonthlySeries>& series,
                                            double baseline, YearMonth window_end);

// ---------------------------------------------------------------------------
// Least squares

struct OlsOptions {
    bool allow_drop = false;  // drop collinear columns instead of raising
};

// Weighted least squares via column-pivoted QR (never raw normal equations).
// Rank-deficient designs either raise DataError naming the collinear columns
// or, with allow_drop, report them in RegressionResult::dropped.
RegressionResult solve_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd* weights = nullptr,
                           const std::vector<std::string>* names = nullptr,
                           const OlsOptions& opts = {});

struct RateRegression {
    std::vector<YearMonth> months;
    std::vector<double> delta;      // re-centered month effects
    std::vector<double> std_error;  // classical, from micro-data residuals
    double center = 0.0;            // reference-weighted baseline-window mean
    RegressionResult fit;           // underlying weighted fit on collapsed cells
};

// Per-reference unmatched indicator regressed on month and field indicators,
// collapsed to (month, field) cells (algebraically identical coefficients,
// micro-data classical standard errors). delta is re-centered so the
// reference-weighted mean over the baseline window is zero; with a single
// field this makes delta_t == u_t - b exactly.
RateRegression rate_regression(const std::vector<Verdict>& verdicts, const PaperTable& papers,
                               YearMonth baseline_end = kDefaultBaselineEnd,
                               const SeriesOptions& opts = {});

// ---------------------------------------------------------------------------
// Distributions and breakdowns

struct ShareDistribution {
    std::vector<std::string> periods;            // e.g. "2023-H1"
    std::vector<std::string> bin_labels;         // "0", "(0,0.1]", ...
    std::vector<std::vector<double>> fractions;  // periods x bins
    std::vector<std::uint64_t> papers_per_period;
    std::vector<double> delta_pp;  // last period minus first, per bin
};

// Per-paper share of unmatched references, bucketed into the zero bin plus
// bins partitioning (0, 1]; periods are calendar half-years.
ShareDistribution paper_share_distribution(const std::vector<Verdict>& verdicts,
                                           const PaperTable& papers,
                                           const std::vector<double>& bin_edges = {0.1, 0.5, 1.0},
                                           const SeriesOptions& opts = {});

struct FieldStats {
    std::string field;
    bool rate_defined = false;
    double excess_rate = 0.0;
    double excess_count = 0.0;
    std::uint64_t n_total_year = 0;
    bool low_sample = false;
};

// Field-specific baselines; excess of the target year; descending by rate.
std::vector<FieldStats> field_breakdown(const std::vector<Verdict>& verdicts,
                                        const PaperTable& papers, int target_year,
                                        YearMonth baseline_end = kDefaultBaselineEnd,
                                        const SeriesOptions& opts = {});

struct PearsonResult {
    double r = 0.0;
    double p_value = 1.0;
    std::uint64_t n = 0;
};

// Pearson correlation with the two-sided p-value from the t transform with
// n-2 degrees of freedom. Zero variance raises DataError.
PearsonResult pearson(const std::vector<std::pair<double, double>>& pairs);

// Unit-level (rate, llm_use_score) correlation.
PearsonResult correlate_llm_use(const std::vector<std::pair<double, double>>& unit_scores);

}  // namespace citefix::estimator
