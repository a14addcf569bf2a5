#include "citefix/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "citefix/errors.hpp"

namespace citefix::estimator {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MonthAgg {
    std::uint64_t n_total = 0;
    std::uint64_t n_unmatched = 0;
};

bool is_unmatched(const Verdict& v, const SeriesOptions& opts) {
    return opts.unmatched_statuses.count(v.status) > 0;
}

const PaperRecord& paper_of(const Verdict& v, const PaperTable& papers) {
    auto it = papers.find(v.paper_id);
    if (it == papers.end()) {
        throw DataError("verdict references unknown paper \"" + v.paper_id + "\"");
    }
    return it->second;
}

}  // namespace

std::vector<MonthlySeries> monthly_series(const std::vector<Verdict>& verdicts,
                                          const PaperTable& papers, const SeriesOptions& opts) {
    std::map<YearMonth, MonthAgg> agg;
    for (const auto& v : verdicts) {
        const PaperRecord& paper = paper_of(v, papers);
        MonthAgg& a = agg[paper.month];
        ++a.n_total;
        if (is_unmatched(v, opts)) ++a.n_unmatched;
    }
    std::vector<MonthlySeries> out;
    out.reserve(agg.size());
    for (const auto& [month, a] : agg) {
        MonthlySeries s;
        s.month = month;
        s.n_total = a.n_total;
        s.n_unmatched = a.n_unmatched;
        s.unmatched_rate =
            a.n_total > 0 ? static_cast<double>(a.n_unmatched) / static_cast<double>(a.n_total) : 0.0;
        s.low_sample = a.n_total < opts.low_sample_threshold;
        out.push_back(s);
    }
    return out;
}

double baseline_rate(const std::vector<MonthlySeries>& series, YearMonth window_end) {
    std::uint64_t n_total = 0;
    std::uint64_t n_unmatched = 0;
    std::size_t months = 0;
    for (const auto& s : series) {
        if (s.month > window_end) continue;
        ++months;
        n_total += s.n_total;
        n_unmatched += s.n_unmatched;
    }
    if (months < 3 || n_total == 0) {
        throw DataError("baseline window through " + window_end.str() + " has " +
                        std::to_string(months) + " months; need >= 3 with data");
    }
    return static_cast<double>(n_unmatched) / static_cast<double>(n_total);
}

void apply_excess(std::vector<MonthlySeries>& series, double baseline) {
    for (auto& s : series) {
        s.baseline = baseline;
        s.excess_rate = std::max(0.0, s.unmatched_rate - baseline);
        s.excess_count = s.excess_rate * static_cast<double>(s.n_total);
    }
}

std::map<int, double> annual_excess_totals(const std::vector<MonthlySeries>& series) {
    std::map<int, double> out;
    for (const auto& s : series) out[s.month.year] += s.excess_count;
    return out;
}

std::vector<MixtureWeights> mixture_weights(const std::vector<MonthlySeries>& series,
                                            double baseline, YearMonth window_end) {
    std::vector<MixtureWeights> out;
    out.reserve(series.size());
    for (const auto& s : series) {
        MixtureWeights w;
        w.month = s.month;
        if (s.month > window_end && s.unmatched_rate > 0.0) {
            w.p = std::clamp((s.unmatched_rate - baseline) / s.unmatched_rate, 0.0, 1.0);
        } else {
            w.p = 0.0;  // baseline-window months carry no hallucination mass
        }
        w.q = 1.0 - w.p;
        out.push_back(w);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Least squares

namespace {

struct OlsCore {
    Eigen::VectorXd beta;          // kept columns only
    Eigen::MatrixXd cov_unscaled;  // (X'WX)^-1 on kept columns
    std::vector<int> kept;
    std::vector<int> dropped;
    double rss = 0.0;
    int rank = 0;
};

OlsCore solve_core(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::VectorXd* weights, bool allow_drop,
                   const std::vector<std::string>& names) {
    const auto n = X.rows();
    const auto k = X.cols();
    if (n < k) {
        throw ConfigError("least squares needs n >= k (" + std::to_string(n) + " rows, " +
                          std::to_string(k) + " columns)");
    }
    if (!X.allFinite() || !y.allFinite()) throw ConfigError("design matrix or response not finite");

    Eigen::MatrixXd Xw = X;
    Eigen::VectorXd yw = y;
    if (weights) {
        if (weights->size() != n) throw ConfigError("weight vector length mismatch");
        const Eigen::ArrayXd sw = weights->array().sqrt();
        Xw.array().colwise() *= sw;
        yw.array() *= sw;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());

    OlsCore core;
    core.rank = rank;
    if (rank < k) {
        const auto& perm = qr.colsPermutation().indices();
        std::vector<int> dropped;
        for (int i = rank; i < k; ++i) dropped.push_back(perm[i]);
        std::sort(dropped.begin(), dropped.end());
        if (!allow_drop) {
            std::string msg = "rank-deficient design; collinear columns:";
            for (int d : dropped) msg += " " + names[d];
            throw DataError(msg);
        }
        core.dropped = dropped;
        std::vector<bool> is_dropped(k, false);
        for (int d : dropped) is_dropped[d] = true;
        for (int i = 0; i < k; ++i) {
            if (!is_dropped[i]) core.kept.push_back(i);
        }
        Eigen::MatrixXd Xk(n, static_cast<Eigen::Index>(core.kept.size()));
        for (std::size_t i = 0; i < core.kept.size(); ++i) Xk.col(i) = Xw.col(core.kept[i]);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr2(Xk);
        qr2.setThreshold(1e-10);
        core.beta = qr2.solve(yw);
        const Eigen::VectorXd resid = yw - Xk * core.beta;
        core.rss = resid.squaredNorm();
        core.cov_unscaled = (Xk.transpose() * Xk).ldlt().solve(
            Eigen::MatrixXd::Identity(Xk.cols(), Xk.cols()));
        return core;
    }

    core.kept.resize(k);
    for (int i = 0; i < k; ++i) core.kept[i] = i;
    core.beta = qr.solve(yw);
    const Eigen::VectorXd resid = yw - Xw * core.beta;
    core.rss = resid.squaredNorm();
    core.cov_unscaled =
        (Xw.transpose() * Xw).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    return core;
}

std::vector<std::string> default_names(Eigen::Index k, const std::vector<std::string>* names) {
    if (names) {
        if (static_cast<Eigen::Index>(names->size()) != k) {
            throw ConfigError("column name count disagrees with design matrix");
        }
        return *names;
    }
    std::vector<std::string> out;
    out.reserve(k);
    for (Eigen::Index i = 0; i < k; ++i) out.push_back("x" + std::to_string(i));
    return out;
}

}  // namespace

RegressionResult solve_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd* weights, const std::vector<std::string>* names,
                           const OlsOptions& opts) {
    const auto k = X.cols();
    const std::vector<std::string> colnames = default_names(k, names);
    const OlsCore core = solve_core(X, y, weights, opts.allow_drop, colnames);

    RegressionResult out;
    out.names = colnames;
    out.n_obs = static_cast<std::uint64_t>(X.rows());
    const auto dof = static_cast<double>(X.rows()) - core.rank;
    out.residual_variance = dof > 0 ? core.rss / dof : 0.0;
    out.estimates.assign(k, kNaN);
    out.std_errors.assign(k, kNaN);
    for (std::size_t i = 0; i < core.kept.size(); ++i) {
        out.estimates[core.kept[i]] = core.beta(static_cast<Eigen::Index>(i));
        const double var = out.residual_variance * core.cov_unscaled(i, i);
        out.std_errors[core.kept[i]] = var > 0 ? std::sqrt(var) : 0.0;
    }
    for (int d : core.dropped) out.dropped.push_back(colnames[d]);
    return out;
}

RateRegression rate_regression(const std::vector<Verdict>& verdicts, const PaperTable& papers,
                               YearMonth baseline_end, const SeriesOptions& opts) {
    // Collapse to (month, field) cells; identical coefficients, tiny designs.
    struct Cell {
        std::uint64_t n = 0;
        std::uint64_t unmatched = 0;
    };
    std::map<std::pair<YearMonth, std::string>, Cell> cells;
    for (const auto& v : verdicts) {
        const PaperRecord& paper = paper_of(v, papers);
        Cell& c = cells[{paper.month, paper.field}];
        ++c.n;
        if (is_unmatched(v, opts)) ++c.unmatched;
    }
    if (cells.empty()) throw DataError("rate regression on an empty verdict set");

    std::vector<YearMonth> months;
    std::vector<std::string> fields;
    for (const auto& [key, cell] : cells) {
        months.push_back(key.first);
        fields.push_back(key.second);
    }
    std::sort(months.begin(), months.end());
    months.erase(std::unique(months.begin(), months.end()), months.end());
    std::sort(fields.begin(), fields.end());
    fields.erase(std::unique(fields.begin(), fields.end()), fields.end());

    std::map<YearMonth, int> month_col;
    for (std::size_t i = 0; i < months.size(); ++i) month_col[months[i]] = static_cast<int>(i);
    std::map<std::string, int> field_col;  // first field is the reference level
    for (std::size_t i = 1; i < fields.size(); ++i) {
        field_col[fields[i]] = static_cast<int>(months.size() + i - 1);
    }
    const int k = static_cast<int>(months.size() + fields.size() - 1);

    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells.size()), k);
    Eigen::VectorXd y(static_cast<Eigen::Index>(cells.size()));
    Eigen::VectorXd w(static_cast<Eigen::Index>(cells.size()));
    std::uint64_t n_micro = 0;
    double within_rss = 0.0;  // binary outcome: sum_i (y_i - ybar_cell)^2 = n p (1-p)
    Eigen::Index row = 0;
    for (const auto& [key, cell] : cells) {
        X(row, month_col[key.first]) = 1.0;
        if (auto it = field_col.find(key.second); it != field_col.end()) X(row, it->second) = 1.0;
        const double p = static_cast<double>(cell.unmatched) / static_cast<double>(cell.n);
        y(row) = p;
        w(row) = static_cast<double>(cell.n);
        within_rss += static_cast<double>(cell.n) * p * (1.0 - p);
        n_micro += cell.n;
        ++row;
    }

    std::vector<std::string> names;
    for (const auto& m : months) names.push_back("month_" + m.str());
    for (std::size_t i = 1; i < fields.size(); ++i) names.push_back("field_" + fields[i]);

    const OlsCore core = solve_core(X, y, &w, /*allow_drop=*/false, names);

    // Micro-data residual variance: collapsed weighted RSS recovers the
    // between-cell part; the within-cell part is added back analytically.
    const double rss_micro = core.rss + within_rss;
    const double dof = static_cast<double>(n_micro) - core.rank;
    const double sigma2 = dof > 0 ? rss_micro / dof : 0.0;

    RateRegression out;
    out.months = months;
    out.fit.names = names;
    out.fit.n_obs = n_micro;
    out.fit.residual_variance = sigma2;
    out.fit.estimates.assign(k, kNaN);
    out.fit.std_errors.assign(k, kNaN);
    for (std::size_t i = 0; i < core.kept.size(); ++i) {
        out.fit.estimates[core.kept[i]] = core.beta(static_cast<Eigen::Index>(i));
        const double var = sigma2 * core.cov_unscaled(i, i);
        out.fit.std_errors[core.kept[i]] = var > 0 ? std::sqrt(var) : 0.0;
    }

    // Reference-weighted re-centering over the baseline window.
    std::map<YearMonth, std::uint64_t> month_n;
    for (const auto& [key, cell] : cells) month_n[key.first] += cell.n;
    double wsum = 0.0;
    double wcoef = 0.0;
    for (std::size_t i = 0; i < months.size(); ++i) {
        if (months[i] > baseline_end) continue;
        const double mw = static_cast<double>(month_n[months[i]]);
        wsum += mw;
        wcoef += mw * out.fit.estimates[i];
    }
    out.center = wsum > 0 ? wcoef / wsum : 0.0;
    out.delta.reserve(months.size());
    out.std_error.reserve(months.size());
    for (std::size_t i = 0; i < months.size(); ++i) {
        out.delta.push_back(out.fit.estimates[i] - out.center);
        out.std_error.push_back(out.fit.std_errors[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distributions and breakdowns

namespace {

std::string half_year_label(YearMonth m) {
    return std::to_string(m.year) + (m.month <= 6 ? "-H1" : "-H2");
}

std::string edge_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

ShareDistribution paper_share_distribution(const std::vector<Verdict>& verdicts,
                                           const PaperTable& papers,
                                           const std::vector<double>& bin_edges,
                                           const SeriesOptions& opts) {
    if (bin_edges.empty() || bin_edges.back() != 1.0 ||
        !std::is_sorted(bin_edges.begin(), bin_edges.end())) {
        throw ConfigError("share bins must be sorted edges ending at 1.0");
    }
    struct PaperAgg {
        YearMonth month;
        std::uint64_t n = 0;
        std::uint64_t unmatched = 0;
    };
    std::unordered_map<std::string, PaperAgg> agg;
    for (const auto& v : verdicts) {
        const PaperRecord& paper = paper_of(v, papers);
        PaperAgg& a = agg[v.paper_id];
        a.month = paper.month;
        ++a.n;
        if (is_unmatched(v, opts)) ++a.unmatched;
    }

    const std::size_t n_bins = bin_edges.size() + 1;  // zero bin + (0,1] partition
    std::map<std::string, std::vector<std::uint64_t>> periods;
    for (const auto& [paper_id, a] : agg) {
        if (a.n == 0) continue;
        const double share = static_cast<double>(a.unmatched) / static_cast<double>(a.n);
        std::size_t bin = 0;
        if (share > 0) {
            bin = 1;
            while (bin - 1 < bin_edges.size() && share > bin_edges[bin - 1]) ++bin;
        }
        auto& counts = periods[half_year_label(a.month)];
        if (counts.empty()) counts.assign(n_bins, 0);
        ++counts[bin];
    }

    ShareDistribution out;
    out.bin_labels.push_back("0");
    double lo = 0.0;
    for (double hi : bin_edges) {
        out.bin_labels.push_back("(" + edge_label(lo) + "," + edge_label(hi) + "]");
        lo = hi;
    }
    for (const auto& [label, counts] : periods) {
        out.periods.push_back(label);
        std::uint64_t total = 0;
        for (auto c : counts) total += c;
        out.papers_per_period.push_back(total);
        std::vector<double> fr(n_bins, 0.0);
        for (std::size_t i = 0; i < n_bins; ++i) {
            fr[i] = total > 0 ? static_cast<double>(counts[i]) / static_cast<double>(total) : 0.0;
        }
        out.fractions.push_back(std::move(fr));
    }
    if (!out.fractions.empty()) {
        out.delta_pp.assign(n_bins, 0.0);
        for (std::size_t i = 0; i < n_bins; ++i) {
            out.delta_pp[i] = (out.fractions.back()[i] - out.fractions.front()[i]) * 100.0;
        }
    }
    return out;
}

std::vector<FieldStats> field_breakdown(const std::vector<Verdict>& verdicts,
                                        const PaperTable& papers, int target_year,
                                        YearMonth baseline_end, const SeriesOptions& opts) {
    struct FieldAgg {
        std::uint64_t base_n = 0;
        std::uint64_t base_u = 0;
        std::uint64_t year_n = 0;
        std::uint64_t year_u = 0;
    };
    std::map<std::string, FieldAgg> agg;
    for (const auto& v : verdicts) {
        const PaperRecord& paper = paper_of(v, papers);
        FieldAgg& a = agg[paper.field];
        const bool u = is_unmatched(v, opts);
        if (paper.month <= baseline_end) {
            ++a.base_n;
            if (u) ++a.base_u;
        }
        if (paper.month.year == target_year) {
            ++a.year_n;
            if (u) ++a.year_u;
        }
    }
    std::vector<FieldStats> out;
    for (const auto& [field, a] : agg) {
        FieldStats fs;
        fs.field = field;
        fs.n_total_year = a.year_n;
        fs.low_sample = a.year_n < opts.low_sample_threshold || a.base_n < opts.low_sample_threshold;
        if (a.year_n > 0 && a.base_n > 0) {
            const double b = static_cast<double>(a.base_u) / static_cast<double>(a.base_n);
            const double u = static_cast<double>(a.year_u) / static_cast<double>(a.year_n);
            fs.rate_defined = true;
            fs.excess_rate = std::max(0.0, u - b);
            fs.excess_count = fs.excess_rate * static_cast<double>(a.year_n);
        }
        out.push_back(std::move(fs));
    }
    std::sort(out.begin(), out.end(), [](const FieldStats& a, const FieldStats& b) {
        if (a.rate_defined != b.rate_defined) return a.rate_defined;
        if (a.excess_rate != b.excess_rate) return a.excess_rate > b.excess_rate;
        return a.field < b.field;
    });
    return out;
}

PearsonResult pearson(const std::vector<std::pair<double, double>>& pairs) {
    const std::size_t n = pairs.size();
    if (n < 3) throw ConfigError("Pearson correlation needs >= 3 observations");
    double sx = 0;
    double sy = 0;
    for (const auto& [x, y] : pairs) {
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw ConfigError("Pearson correlation requires finite values");
        }
        sx += x;
        sy += y;
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0;
    double syy = 0;
    double sxy = 0;
    for (const auto& [x, y] : pairs) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DataError("correlation undefined: zero variance in an input variable");
    }
    PearsonResult out;
    out.n = n;
    out.r = sxy / std::sqrt(sxx * syy);
    const double df = static_cast<double>(n) - 2.0;
    const double r2 = std::min(out.r * out.r, 1.0);
    if (r2 >= 1.0) {
        out.p_value = 0.0;
    } else {
        const double t = std::fabs(out.r) * std::sqrt(df / (1.0 - r2));
        boost::math::students_t dist(df);
        out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    }
    return out;
}

PearsonResult correlate_llm_use(const std::vector<std::pair<double, double>>& unit_scores) {
    return pearson(unit_scores);
}

}  // namespace citefix::estimator
