#include "citefix/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "citefix/errors.hpp"
#include "citefix/text.hpp"

namespace citefix::cohort {

namespace {

const PaperRecord& paper_of(const std::string& paper_id, const PaperTable& papers) {
    auto it = papers.find(paper_id);
    if (it == papers.end()) throw DataError("unknown paper \"" + paper_id + "\"");
    return it->second;
}

bool is_unmatched(const Verdict& v, const SeriesOptions& opts) {
    return opts.unmatched_statuses.count(v.status) > 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Matched controls

namespace {

std::string cell_key(const PaperRecord& p, const MatchKeys& keys, std::uint32_t ref_count,
                     std::vector<std::string>* used) {
    std::string key;
    if (keys.month) {
        key += p.month.str();
        if (used) used->push_back("month");
    }
    if (keys.field) {
        key += '|';
        key += p.field;
        if (used) used->push_back("field");
    }
    if (keys.subfield) {
        key += '|';
        key += p.subfield.value_or("");
        if (used) used->push_back("subfield");
    }
    if (keys.ref_count_band) {
        key += '|';
        key += std::to_string(ref_count / std::max<std::uint32_t>(1, keys.band_width));
        if (used) used->push_back("ref_count_band");
    }
    return key;
}

}  // namespace

ControlMatchResult match_controls(const std::vector<std::string>& treated,
                                  const std::vector<std::string>& pool, const PaperTable& papers,
                                  const std::unordered_map<std::string, std::uint32_t>& ref_counts,
                                  const MatchKeys& keys, std::uint64_t seed) {
    if (pool.empty()) throw DataError("control pool is empty");
    auto count_of = [&ref_counts](const std::string& id) -> std::uint32_t {
        auto it = ref_counts.find(id);
        return it == ref_counts.end() ? 0 : it->second;
    };

    std::unordered_map<std::string, std::vector<std::string>> cells;
    for (const auto& id : pool) {
        cells[cell_key(paper_of(id, papers), keys, count_of(id), nullptr)].push_back(id);
    }
    for (auto& [key, members] : cells) std::sort(members.begin(), members.end());

    std::vector<std::string> ordered_treated = treated;
    std::sort(ordered_treated.begin(), ordered_treated.end());

    std::mt19937_64 rng(seed);
    std::unordered_map<std::string, std::vector<std::string>> remaining = cells;

    ControlMatchResult out;
    for (const auto& id : ordered_treated) {
        std::vector<std::string> used;
        const std::string key = cell_key(paper_of(id, papers), keys, count_of(id), &used);
        auto cell_it = cells.find(key);
        if (cell_it == cells.end()) {
            out.unmatched_treated.push_back(id);
            continue;
        }
        CohortPair pair;
        pair.treated = id;
        pair.keys_used = std::move(used);
        auto& rem = remaining[key];
        if (!rem.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, rem.size() - 1);
            const std::size_t i = pick(rng);
            pair.control = rem[i];
            rem.erase(rem.begin() + static_cast<std::ptrdiff_t>(i));
        } else {  // cell exhausted: sample with replacement, flagged
            const auto& full = cell_it->second;
            std::uniform_int_distribution<std::size_t> pick(0, full.size() - 1);
            pair.control = full[pick(rng)];
            pair.with_replacement = true;
        }
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Citer productivity

ProductivityStats citer_productivity(const std::vector<CohortPair>& pairs,
                                     const PaperTable& papers,
                                     const bibindex::AuthorDirectory& authors) {
    ProductivityStats out;
    double t_prior = 0;
    double c_prior = 0;
    double t_post = 0;
    double c_post = 0;
    std::uint64_t t_zero = 0;
    std::uint64_t c_zero = 0;

    auto resolve = [&](const std::string& paper_id) -> const AuthorProfile* {
        const PaperRecord& p = paper_of(paper_id, papers);
        if (p.author_ids.empty()) return nullptr;
        return authors.by_id(p.author_ids.back());  // last author
    };

    for (const auto& pair : pairs) {
        const AuthorProfile* t = resolve(pair.treated);
        const AuthorProfile* c = resolve(pair.control);
        if (!t || !c) {
            ++out.unresolved;
            continue;
        }
        ++out.n_treated;
        ++out.n_control;
        t_prior += t->n_pubs_pre_cutoff;
        c_prior += c->n_pubs_pre_cutoff;
        t_post += t->n_pubs_total - t->n_pubs_pre_cutoff;
        c_post += c->n_pubs_total - c->n_pubs_pre_cutoff;
        if (t->n_pubs_pre_cutoff == 0) ++t_zero;
        if (c->n_pubs_pre_cutoff == 0) ++c_zero;
    }
    if (out.n_treated == 0) return out;

    const double nt = static_cast<double>(out.n_treated);
    const double nc = static_cast<double>(out.n_control);
    out.treated_mean_prior = t_prior / nt;
    out.control_mean_prior = c_prior / nc;
    if (out.control_mean_prior > 0) {
        out.relative_gap = (out.control_mean_prior - out.treated_mean_prior) / out.control_mean_prior;
    }
    out.treated_zero_share = static_cast<double>(t_zero) / nt;
    out.control_zero_share = static_cast<double>(c_zero) / nc;
    if (t_prior > 0) out.treated_growth = t_post / t_prior;
    if (c_prior > 0) out.control_growth = c_post / c_prior;
    if (out.control_growth > 0) out.growth_ratio = out.treated_growth / out.control_growth;
    return out;
}

// ---------------------------------------------------------------------------
// Team-size gradient

std::vector<TeamSizeBucket> teamsize_rates(const std::vector<Verdict>& verdicts,
                                           const PaperTable& papers, YearMonth baseline_end,
                                           const SeriesOptions& opts) {
    std::vector<TeamSizeBucket> buckets = {
        {"1", 1, 1}, {"2", 2, 2}, {"3-4", 3, 4}, {"5-9", 5, 9}, {"10+", 10, 0}};

    struct Agg {
        std::uint64_t base_n = 0, base_u = 0, post_n = 0, post_u = 0;
    };
    std::vector<Agg> agg(buckets.size());
    Agg corpus;

    auto bucket_of = [&buckets](std::uint32_t team) -> std::size_t {
        for (std::size_t i = 0; i < buckets.size(); ++i) {
            if (team >= buckets[i].lo && (buckets[i].hi == 0 || team <= buckets[i].hi)) return i;
        }
        return buckets.size() - 1;
    };

    for (const auto& v : verdicts) {
        const PaperRecord& p = paper_of(v.paper_id, papers);
        const bool u = is_unmatched(v, opts);
        const bool pre = p.month <= baseline_end;
        Agg& a = agg[bucket_of(p.team_size)];
        if (pre) {
            ++a.base_n;
            ++corpus.base_n;
            if (u) {
                ++a.base_u;
                ++corpus.base_u;
            }
        } else {
            ++a.post_n;
            ++corpus.post_n;
            if (u) {
                ++a.post_u;
                ++corpus.post_u;
            }
        }
    }

    auto excess = [](const Agg& a, double fallback_baseline) -> std::optional<double> {
        if (a.post_n == 0) return std::nullopt;
        const double b = a.base_n > 0
                             ? static_cast<double>(a.base_u) / static_cast<double>(a.base_n)
                             : fallback_baseline;
        const double u = static_cast<double>(a.post_u) / static_cast<double>(a.post_n);
        return std::max(0.0, u - b);
    };

    const double corpus_b =
        corpus.base_n > 0 ? static_cast<double>(corpus.base_u) / static_cast<double>(corpus.base_n)
                          : 0.0;
    const auto corpus_excess = excess(corpus, corpus_b);
    for (std::size_t i = 0; i < buckets.size(); ++i) {
        buckets[i].n_refs = agg[i].base_n + agg[i].post_n;
        const auto e = excess(agg[i], corpus_b);
        if (e && corpus_excess && *corpus_excess > 0) {
            buckets[i].normalized_rate = *e / *corpus_excess;
            buckets[i].defined = true;
        }
    }
    return buckets;
}

// ---------------------------------------------------------------------------
// Attribution

TfidfEmbedder TfidfEmbedder::build(const std::vector<AuthorProfile>& profiles) {
    TfidfEmbedder emb;
    std::unordered_map<std::string, std::uint32_t> df;
    for (const auto& p : profiles) {
        for (const auto& [term, w] : p.term_profile) {
            if (w > 0) ++df[term];
        }
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, profiles.size()));
    for (const auto& [term, d] : df) {
        emb.idf_[term] = std::log(1.0 + n / static_cast<double>(d));
    }
    emb.default_idf_ = std::log(1.0 + n);
    return emb;
}

double TfidfEmbedder::idf(const std::string& term) const {
    auto it = idf_.find(term);
    return it == idf_.end() ? default_idf_ : it->second;
}

TermVector TfidfEmbedder::paper_vector(const std::vector<std::string>& titles) const {
    TermVector counts;
    for (const auto& title : titles) {
        for (const auto& tok : text::tokens(text::normalize_title_or_empty(title))) {
            counts[tok] += 1.0;
        }
    }
    TermVector out;
    for (const auto& [term, c] : counts) out[term] = c * idf(term);
    return out;
}

TermVector TfidfEmbedder::profile_vector(const AuthorProfile& profile) const {
    TermVector out;
    for (const auto& [term, c] : profile.term_profile) {
        if (c > 0) out[term] = c * idf(term);
    }
    return out;
}

double cosine(const TermVector& a, const TermVector& b) {
    double dot = 0;
    double na = 0;
    double nb = 0;
    for (const auto& [t, w] : a) na += w * w;
    for (const auto& [t, w] : b) nb += w * w;
    if (na == 0 || nb == 0) return 0.0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        const int c = ia->first.compare(ib->first);
        if (c == 0) {
            dot += ia->second * ib->second;
            ++ia;
            ++ib;
        } else if (c < 0) {
            ++ia;
        } else {
            ++ib;
        }
    }
    return dot / std::sqrt(na * nb);
}

std::vector<AttributionRecord> attribute_cited_authors(const ParsedReference& ref,
                                                       const TermVector& citing_vector,
                                                       const bibindex::AuthorDirectory& authors,
                                                       const PaperEmbedder& embedder, double tau) {
    std::vector<AttributionRecord> out;
    for (std::uint32_t i = 0; i < ref.authors.size(); ++i) {
        AttributionRecord att;
        att.paper_id = ref.raw.paper_id;
        att.ref_index = ref.raw.index_in_paper;
        att.cited_name = ref.authors[i];
        att.name_index = i;
        const AuthorProfile* best = nullptr;
        double best_cos = -2.0;
        for (const AuthorProfile* cand : authors.lookup(att.cited_name)) {
            const double c = cosine(citing_vector, embedder.profile_vector(*cand));
            if (c > best_cos) {  // candidates arrive in author_id order; first max wins
                best_cos = c;
                best = cand;
            }
        }
        if (best && best_cos >= tau) {
            att.resolved_author = best->author_id;
            att.cosine_to_profile = best_cos;
        }
        out.push_back(std::move(att));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Beneficiary statistics

namespace {

struct SetSummary {
    std::uint64_t n_names = 0;
    std::uint64_t n_resolved = 0;
    // Over resolved attributions:
    std::vector<double> pubs;
    std::vector<double> cites;
    std::uint64_t male = 0;
    std::uint64_t gendered = 0;
    // Per reference:
    std::vector<double> team_sizes;
    std::uint64_t hier_greater = 0;
    std::uint64_t hier_comparable = 0;
};

SetSummary summarize(const std::vector<AttributionRecord>& set,
                     const bibindex::AuthorDirectory& authors) {
    SetSummary s;
    std::map<std::pair<std::string, std::uint32_t>, std::vector<const AttributionRecord*>> by_ref;
    for (const auto& a : set) {
        ++s.n_names;
        by_ref[{a.paper_id, a.ref_index}].push_back(&a);
        if (!a.resolved_author) continue;
        ++s.n_resolved;
        const AuthorProfile* p = authors.by_id(*a.resolved_author);
        if (!p) continue;
        s.pubs.push_back(static_cast<double>(p->n_pubs_pre_cutoff));
        s.cites.push_back(static_cast<double>(p->n_citations));
        if (p->gender_label != Gender::Unknown) {
            ++s.gendered;
            if (p->gender_label == Gender::Male) ++s.male;
        }
    }
    for (auto& [key, atts] : by_ref) {
        std::sort(atts.begin(), atts.end(),
                  [](const AttributionRecord* a, const AttributionRecord* b) {
                      return a->name_index < b->name_index;
                  });
        s.team_sizes.push_back(static_cast<double>(atts.size()));
        if (atts.size() < 2) continue;  // hierarchy undefined on single-author refs
        const AttributionRecord* first = atts.front();
        const AttributionRecord* last = atts.back();
        if (!first->resolved_author || !last->resolved_author) continue;
        const AuthorProfile* fp = authors.by_id(*first->resolved_author);
        const AuthorProfile* lp = authors.by_id(*last->resolved_author);
        if (!fp || !lp) continue;
        if (lp->n_pubs_pre_cutoff == fp->n_pubs_pre_cutoff) continue;  // ties excluded
        ++s.hier_comparable;
        if (lp->n_pubs_pre_cutoff > fp->n_pubs_pre_cutoff) ++s.hier_greater;
    }
    return s;
}

struct MeanVar {
    double mean = 0.0;
    double var_of_mean = 0.0;
    std::uint64_t n = 0;
};

MeanVar mean_var(const std::vector<double>& xs) {
    MeanVar mv;
    mv.n = xs.size();
    if (xs.empty()) return mv;
    double sum = 0;
    for (double x : xs) sum += x;
    mv.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0;
        for (double x : xs) ss += (x - mv.mean) * (x - mv.mean);
        mv.var_of_mean = ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size());
    }
    return mv;
}

MeanVar share_var(std::uint64_t hits, std::uint64_t n) {
    MeanVar mv;
    mv.n = n;
    if (n == 0) return mv;
    mv.mean = static_cast<double>(hits) / static_cast<double>(n);
    mv.var_of_mean = mv.mean * (1.0 - mv.mean) / static_cast<double>(n);
    return mv;
}

// Relative delta A/B - 1 with a first-order (delta method) standard error.
DeltaStat relative_delta(const MeanVar& a, const MeanVar& b) {
    DeltaStat d;
    d.n_a = a.n;
    d.n_b = b.n;
    if (a.n == 0 || b.n == 0 || b.mean == 0.0) {
        d.defined = false;
        return d;
    }
    d.value = a.mean / b.mean - 1.0;
    const double var = a.var_of_mean / (b.mean * b.mean) +
                       a.mean * a.mean * b.var_of_mean / std::pow(b.mean, 4);
    d.std_error = std::sqrt(std::max(0.0, var));
    return d;
}

DeltaStat pp_delta(const MeanVar& a, const MeanVar& b) {
    DeltaStat d;
    d.n_a = a.n;
    d.n_b = b.n;
    if (a.n == 0 || b.n == 0) {
        d.defined = false;
        return d;
    }
    d.value = (a.mean - b.mean) * 100.0;
    d.std_error = 100.0 * std::sqrt(a.var_of_mean + b.var_of_mean);
    return d;
}

DeltaStat abs_delta(const MeanVar& a, const MeanVar& b) {
    DeltaStat d;
    d.n_a = a.n;
    d.n_b = b.n;
    if (a.n == 0 || b.n == 0) {
        d.defined = false;
        return d;
    }
    d.value = a.mean - b.mean;
    d.std_error = std::sqrt(a.var_of_mean + b.var_of_mean);
    return d;
}

}  // namespace

BeneficiaryStats beneficiary_stats(const std::vector<AttributionRecord>& hallucinated,
                                   const std::vector<AttributionRecord>& control,
                                   const bibindex::AuthorDirectory& authors) {
    if (hallucinated.empty() || control.empty()) {
        throw ConfigError("beneficiary_stats requires non-empty attribution sets");
    }
    const SetSummary h = summarize(hallucinated, authors);
    const SetSummary c = summarize(control, authors);

    BeneficiaryStats out;
    out.profile_match_rate =
        relative_delta(share_var(h.n_resolved, h.n_names), share_var(c.n_resolved, c.n_names));
    out.mean_publications = relative_delta(mean_var(h.pubs), mean_var(c.pubs));
    out.mean_citations = relative_delta(mean_var(h.cites), mean_var(c.cites));
    if (h.gendered == 0 || c.gendered == 0) {
        out.male_share.defined = false;  // all-UNKNOWN labels: reported absent
    } else {
        out.male_share = pp_delta(share_var(h.male, h.gendered), share_var(c.male, c.gendered));
    }
    out.team_size = abs_delta(mean_var(h.team_sizes), mean_var(c.team_sizes));
    out.hierarchy = pp_delta(share_var(h.hier_greater, std::max<std::uint64_t>(1, h.hier_comparable)),
                             share_var(c.hier_greater, std::max<std::uint64_t>(1, c.hier_comparable)));
    if (h.hier_comparable == 0 && c.hier_comparable == 0) out.hierarchy.defined = false;
    return out;
}

// ---------------------------------------------------------------------------
// Mixture regression

MixtureRegressionResult mixture_regression(const std::vector<MixtureObservation>& obs,
                                           const std::vector<MixtureWeights>& weights,
                                           bool include_month_effects) {
    if (obs.empty()) throw ConfigError("mixture regression on an empty observation set");
    std::map<YearMonth, std::pair<double, double>> pq;
    for (const auto& w : weights) pq[w.month] = {w.p, w.q};

    std::vector<std::string> categories;
    std::vector<YearMonth> months;
    for (const auto& o : obs) {
        categories.push_back(o.category);
        months.push_back(o.month);
        if (pq.find(o.month) == pq.end()) {
            throw DataError("no mixture weights for month " + o.month.str());
        }
    }
    std::sort(categories.begin(), categories.end());
    categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
    std::sort(months.begin(), months.end());
    months.erase(std::unique(months.begin(), months.end()), months.end());

    std::vector<std::string> names{"intercept"};
    std::map<std::string, int> cat_col;
    for (std::size_t i = 1; i < categories.size(); ++i) {
        cat_col[categories[i]] = static_cast<int>(names.size());
        names.push_back("cat_" + categories[i]);
    }
    std::map<YearMonth, int> month_col;
    if (include_month_effects) {
        for (std::size_t i = 1; i < months.size(); ++i) {
            month_col[months[i]] = static_cast<int>(names.size());
            names.push_back("month_" + months[i].str());
        }
    }
    const int p_col = static_cast<int>(names.size());
    names.push_back("p");
    const int q_col = static_cast<int>(names.size());
    names.push_back("q");

    const auto k = static_cast<Eigen::Index>(names.size());
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), k);
    Eigen::VectorXd y(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& o = obs[i];
        const auto row = static_cast<Eigen::Index>(i);
        X(row, 0) = 1.0;
        if (auto it = cat_col.find(o.category); it != cat_col.end()) X(row, it->second) = 1.0;
        if (include_month_effects) {
            if (auto it = month_col.find(o.month); it != month_col.end()) X(row, it->second) = 1.0;
        }
        if (o.unmatched) {
            const auto& [p, q] = pq[o.month];
            X(row, p_col) = p;
            X(row, q_col) = q;
        }
        y(row) = o.y;
    }

    estimator::OlsOptions opts;
    opts.allow_drop = true;  // collinearity (e.g. constant p_t) is diagnosed, not fatal
    MixtureRegressionResult out;
    out.fit = estimator::solve_ols(X, y, nullptr, &names, opts);
    if (std::isfinite(out.fit.estimates[p_col])) {
        out.beta = out.fit.estimates[p_col];
        out.beta_se = out.fit.std_errors[p_col];
    }
    if (std::isfinite(out.fit.estimates[q_col])) {
        out.theta = out.fit.estimates[q_col];
        out.theta_se = out.fit.std_errors[q_col];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Systemic metrics

LeakageStats screening_leakage(const std::vector<Verdict>& verdicts, const PaperTable& papers,
                               const SeriesOptions& opts) {
    LeakageStats out;
    std::unordered_map<std::string, bool> unlabeled_seen;
    for (const auto& v : verdicts) {
        const PaperRecord& p = paper_of(v.paper_id, papers);
        if (!p.moderation_label) {
            if (unlabeled_seen.emplace(v.paper_id, true).second) ++out.papers_unlabeled;
            continue;
        }
        const bool u = is_unmatched(v, opts);
        if (*p.moderation_label == ModerationLabel::Accepted) {
            ++out.refs_accepted;
            if (u) ++out.unmatched_accepted;
        } else {
            ++out.refs_rejected;
            if (u) ++out.unmatched_rejected;
        }
    }
    const std::uint64_t total_u = out.unmatched_accepted + out.unmatched_rejected;
    if (total_u > 0) {
        out.leakage = static_cast<double>(out.unmatched_accepted) / static_cast<double>(total_u);
    }
    if (out.refs_accepted > 0 && out.refs_rejected > 0 && out.unmatched_accepted > 0) {
        const double ra =
            static_cast<double>(out.unmatched_accepted) / static_cast<double>(out.refs_accepted);
        const double rr =
            static_cast<double>(out.unmatched_rejected) / static_cast<double>(out.refs_rejected);
        out.rate_ratio = rr / ra;
        out.ratio_defined = true;
    }
    return out;
}

PersistenceStats persistence(const std::vector<Verdict>& preprint_verdicts,
                             const std::vector<ParsedReference>& preprint_refs,
                             const std::vector<Verdict>& published_verdicts,
                             const std::vector<ParsedReference>& published_refs,
                             const std::vector<std::pair<std::string, std::string>>& links,
                             const SeriesOptions& opts) {
    auto title_of = [](const std::vector<ParsedReference>& refs) {
        std::unordered_map<std::string, std::unordered_map<std::uint32_t, std::string>> out;
        for (const auto& r : refs) {
            if (r.title_norm) out[r.raw.paper_id][r.raw.index_in_paper] = *r.title_norm;
        }
        return out;
    };
    const auto pre_titles = title_of(preprint_refs);
    const auto pub_titles = title_of(published_refs);

    // Unmatched titles per published paper.
    std::unordered_map<std::string, std::unordered_map<std::string, bool>> pub_unmatched;
    for (const auto& v : published_verdicts) {
        if (!is_unmatched(v, opts)) continue;
        auto pit = pub_titles.find(v.paper_id);
        if (pit == pub_titles.end()) continue;
        auto tit = pit->second.find(v.ref_index);
        if (tit == pit->second.end()) continue;
        pub_unmatched[v.paper_id][tit->second] = true;
    }

    std::unordered_map<std::string, std::string> link_map(links.begin(), links.end());
    std::unordered_map<std::string, bool> linked_present;

    PersistenceStats out;
    for (const auto& v : preprint_verdicts) {
        auto lit = link_map.find(v.paper_id);
        if (lit == link_map.end()) {
            if (linked_present.emplace(v.paper_id, false).second) ++out.preprints_unlinked;
            continue;
        }
        if (linked_present.emplace(v.paper_id, true).second) ++out.preprints_linked;
        if (!is_unmatched(v, opts)) continue;
        auto pit = pre_titles.find(v.paper_id);
        if (pit == pre_titles.end()) continue;
        auto tit = pit->second.find(v.ref_index);
        if (tit == pit->second.end()) continue;
        ++out.unmatched_in_linked_preprints;
        auto uit = pub_unmatched.find(lit->second);
        if (uit != pub_unmatched.end() && uit->second.count(tit->second) > 0) ++out.persisted;
    }
    if (out.unmatched_in_linked_preprints > 0) {
        out.share = static_cast<double>(out.persisted) /
                    static_cast<double>(out.unmatched_in_linked_preprints);
        out.defined = true;
    }
    return out;
}

std::vector<DecileRate> journal_decile_rates(const std::vector<Verdict>& verdicts,
                                             const PaperTable& papers,
                                             const std::map<std::string, double>& impact,
                                             YearMonth baseline_end, const SeriesOptions& opts) {
    std::vector<std::pair<std::string, double>> journals(impact.begin(), impact.end());
    if (journals.size() < 10) {
        throw DataError("journal deciles need >= 10 scored journals, got " +
                        std::to_string(journals.size()));
    }
    std::sort(journals.begin(), journals.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;  // ties broken by journal_id
    });
    std::unordered_map<std::string, int> decile_of;
    const std::size_t j = journals.size();
    for (std::size_t i = 0; i < j; ++i) {
        decile_of[journals[i].first] = static_cast<int>(i * 10 / j) + 1;
    }

    struct Agg {
        std::uint64_t post_n = 0, post_u = 0, journals = 0;
        double impact_sum = 0;
    };
    std::vector<Agg> agg(10);
    for (std::size_t i = 0; i < j; ++i) {
        Agg& a = agg[static_cast<std::size_t>(decile_of[journals[i].first] - 1)];
        ++a.journals;
        a.impact_sum += journals[i].second;
    }

    std::uint64_t base_n = 0;
    std::uint64_t base_u = 0;
    for (const auto& v : verdicts) {
        const PaperRecord& p = paper_of(v.paper_id, papers);
        if (!p.journal_id) continue;
        auto dit = decile_of.find(*p.journal_id);
        if (dit == decile_of.end()) continue;
        const bool u = is_unmatched(v, opts);
        if (p.month <= baseline_end) {  // common baseline over all scored journals
            ++base_n;
            if (u) ++base_u;
            continue;
        }
        Agg& a = agg[static_cast<std::size_t>(dit->second - 1)];
        ++a.post_n;
        if (u) ++a.post_u;
    }
    const double b = base_n > 0 ? static_cast<double>(base_u) / static_cast<double>(base_n) : 0.0;

    std::vector<DecileRate> out;
    for (int d = 0; d < 10; ++d) {
        DecileRate r;
        r.decile = d + 1;
        r.n_refs = agg[d].post_n;
        r.n_journals = agg[d].journals;
        r.mean_impact = agg[d].journals > 0 ? agg[d].impact_sum / agg[d].journals : 0.0;
        if (agg[d].post_n > 0) {
            const double u = static_cast<double>(agg[d].post_u) / static_cast<double>(agg[d].post_n);
            r.excess_rate = std::max(0.0, u - b);
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace citefix::cohort
