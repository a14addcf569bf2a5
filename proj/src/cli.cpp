#include "citefix/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "citefix/bibindex.hpp"
#include "citefix/cohort.hpp"
#include "citefix/errors.hpp"
#include "citefix/estimator.hpp"
#include "citefix/io.hpp"
#include "citefix/matcher.hpp"
#include "citefix/refparse.hpp"
#include "citefix/synthgen.hpp"
#include "citefix/text.hpp"

namespace citefix::cli {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTolerance = 3;

struct CommonFlags {
    std::string catalog;
    std::string corpus;
    std::string authors;
    std::string out;
    std::string config;
    std::string cache_dir;
    std::string baseline_end = "2022-11";
    double sim_threshold = 0.95;
    double sim_threshold_year = 0.90;
    unsigned candidates_k = 50;
    double tau = 0.3;
    std::uint64_t seed = 1;
    bool replay = false;
    unsigned workers = 0;  // 0 = hardware concurrency
    bool include_citation_only = false;
    std::string journal_scores;
};

// Config file values fill in flags the user did not set explicitly.
void apply_config_file(CLI::App* cmd, CommonFlags& f) {
    if (f.config.empty()) return;
    json j = json::parse(io::read_file(f.config), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("config file is not a JSON object: " + f.config);
    }
    auto unset = [cmd](const std::string& flag) {
        const CLI::Option* o = cmd->get_option_no_throw("--" + flag);
        return o != nullptr && o->count() == 0;
    };
    if (j.contains("catalog") && unset("catalog")) f.catalog = j["catalog"].get<std::string>();
    if (j.contains("corpus") && unset("corpus")) f.corpus = j["corpus"].get<std::string>();
    if (j.contains("authors") && unset("authors")) f.authors = j["authors"].get<std::string>();
    if (j.contains("out") && unset("out")) f.out = j["out"].get<std::string>();
    if (j.contains("cache-dir") && unset("cache-dir")) f.cache_dir = j["cache-dir"].get<std::string>();
    if (j.contains("baseline-end") && unset("baseline-end")) {
        f.baseline_end = j["baseline-end"].get<std::string>();
    }
    if (j.contains("sim-threshold") && unset("sim-threshold")) {
        f.sim_threshold = j["sim-threshold"].get<double>();
    }
    if (j.contains("sim-threshold-year") && unset("sim-threshold-year")) {
        f.sim_threshold_year = j["sim-threshold-year"].get<double>();
    }
    if (j.contains("candidates-k") && unset("candidates-k")) {
        f.candidates_k = j["candidates-k"].get<unsigned>();
    }
    if (j.contains("tau") && unset("tau")) f.tau = j["tau"].get<double>();
    if (j.contains("seed") && unset("seed")) f.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("replay") && unset("replay")) f.replay = j["replay"].get<bool>();
    if (j.contains("workers") && unset("workers")) f.workers = j["workers"].get<unsigned>();
    if (j.contains("include-citation-only") && unset("include-citation-only")) {
        f.include_citation_only = j["include-citation-only"].get<bool>();
    }
    if (j.contains("journal-scores") && unset("journal-scores")) {
        f.journal_scores = j["journal-scores"].get<std::string>();
    }
}

void validate_flags(const CommonFlags& f) {
    if (f.sim_threshold <= 0 || f.sim_threshold > 1 || f.sim_threshold_year <= 0 ||
        f.sim_threshold_year > 1) {
        throw ConfigError("similarity thresholds must lie in (0, 1]");
    }
    if (f.candidates_k < 1) throw ConfigError("candidates-k must be >= 1");
    if (f.tau < -1 || f.tau > 1) throw ConfigError("tau must lie in [-1, 1]");
    YearMonth::parse(f.baseline_end);
}

// Every stage echoes its effective configuration (with input hashes) for
// provenance; report joins on these.
void echo_config(const std::string& subcommand, const CommonFlags& f,
                 const std::vector<std::pair<std::string, std::string>>& inputs) {
    json j;
    j["subcommand"] = subcommand;
    j["baseline_end"] = f.baseline_end;
    j["sim_threshold"] = f.sim_threshold;
    j["sim_threshold_year"] = f.sim_threshold_year;
    j["candidates_k"] = f.candidates_k;
    j["tau"] = f.tau;
    j["seed"] = f.seed;
    j["replay"] = f.replay;
    j["include_citation_only"] = f.include_citation_only;
    json in;
    for (const auto& [name, path] : inputs) {
        if (!path.empty() && io::file_exists(path)) {
            in[name] = {{"path", path}, {"hash", io::hash_hex(io::file_hash(path))}};
        }
    }
    j["inputs"] = std::move(in);
    io::atomic_write(f.out + "/config_" + subcommand + ".json", j.dump(2) + "\n");
}

matcher::MatchConfig match_config(const CommonFlags& f) {
    matcher::MatchConfig cfg;
    cfg.sim_threshold = f.sim_threshold;
    cfg.sim_threshold_year = f.sim_threshold_year;
    cfg.candidates_k = f.candidates_k;
    return cfg;
}

estimator::SeriesOptions series_options(const CommonFlags& f) {
    estimator::SeriesOptions opts;
    if (f.include_citation_only) {
        opts.unmatched_statuses.insert(VerdictStatus::CitationOnly);
    }
    return opts;
}

void require_input(const std::string& path, const std::string& hint) {
    if (!io::file_exists(path)) {
        throw DataError("missing input " + path + " (" + hint + ")");
    }
}

// ---------------------------------------------------------------------------
// Stage implementations

int cmd_ingest(const CommonFlags& f) {
    io::ensure_dir(f.out);
    require_input(f.catalog, "catalog dump");
    std::ifstream cat(f.catalog);
    auto ingested = bibindex::ingest_catalog(cat);
    bibindex::IngestedAuthors authors;
    if (!f.authors.empty()) {
        require_input(f.authors, "author dump");
        std::ifstream au(f.authors);
        authors = bibindex::ingest_authors(au);
    }
    bibindex::save_snapshot(f.out + "/snapshot.cfix", ingested.records, authors.profiles);
    json j;
    j["catalog"] = {{"read", ingested.report.read},
                    {"accepted", ingested.report.accepted},
                    {"rejected", ingested.report.rejected},
                    {"malformed", ingested.report.malformed}};
    j["authors"] = {{"read", authors.report.read},
                    {"accepted", authors.report.accepted},
                    {"rejected", authors.report.rejected},
                    {"malformed", authors.report.malformed}};
    io::atomic_write(f.out + "/ingest_report.json", j.dump(2) + "\n");
    echo_config("ingest", f, {{"catalog", f.catalog}, {"authors", f.authors}});
    return kExitOk;
}

int cmd_parse(const CommonFlags& f) {
    io::ensure_dir(f.out);
    require_input(f.corpus, "corpus file");
    const io::Corpus corpus = io::load_corpus(f.corpus);
    io::save_parsed_refs(f.out + "/parsed_refs.jsonl", corpus.refs);
    echo_config("parse", f, {{"corpus", f.corpus}});
    return kExitOk;
}

int cmd_verify(const CommonFlags& f) {
    io::ensure_dir(f.out);
    require_input(f.corpus, "corpus file");
    require_input(f.catalog, "snapshot from `ingest`");
    const io::Corpus corpus = io::load_corpus(f.corpus);
    const bibindex::Snapshot snap = bibindex::load_snapshot(f.catalog);
    const auto index = bibindex::TitleIndex::build(snap.records);

    matcher::NullLookup null_lookup;
    std::unique_ptr<matcher::CachedLookup> cached;
    matcher::VerifyPorts ports;
    if (!f.cache_dir.empty()) {
        io::ensure_dir(f.cache_dir);
        cached = std::make_unique<matcher::CachedLookup>(
            f.replay ? nullptr : std::make_unique<matcher::NullLookup>(),
            f.cache_dir + "/external_lookup_cache.jsonl", f.replay);
        ports.external = cached.get();
    } else if (f.replay) {
        throw ConfigError("--replay requires --cache-dir");
    } else {
        ports.external = &null_lookup;
    }

    auto [verdicts, report] = matcher::verify_corpus(corpus.refs, index, ports, match_config(f),
                                                     f.workers);
    io::save_verdicts(f.out + "/verdicts.jsonl", verdicts);
    io::save_funnel(f.out + "/funnel.json", report);
    echo_config("verify", f, {{"corpus", f.corpus}, {"catalog", f.catalog}});
    return kExitOk;
}

std::string csv_bool(bool b) { return b ? "true" : "false"; }

void write_estimate_tables(const CommonFlags& f, const io::Corpus& corpus,
                           const std::vector<Verdict>& verdicts) {
    const auto papers = io::paper_table(corpus.papers);
    const auto opts = series_options(f);
    const YearMonth window_end = YearMonth::parse(f.baseline_end);

    auto series = estimator::monthly_series(verdicts, papers, opts);
    const double b = estimator::baseline_rate(series, window_end);
    estimator::apply_excess(series, b);

    std::string csv = "month,n_total,n_unmatched,unmatched_rate,baseline,excess_rate,excess_count,low_sample\n";
    for (const auto& s : series) {
        csv += s.month.str() + "," + std::to_string(s.n_total) + "," +
               std::to_string(s.n_unmatched) + "," + io::format_rate(s.unmatched_rate) + "," +
               io::format_rate(s.baseline) + "," + io::format_rate(s.excess_rate) + "," +
               io::format_rate(s.excess_count) + "," + csv_bool(s.low_sample) + "\n";
    }
    io::atomic_write(f.out + "/monthly_series.csv", csv);

    csv = "year,excess_total\n";
    for (const auto& [year, total] : estimator::annual_excess_totals(series)) {
        csv += std::to_string(year) + "," + io::format_rate(total) + "\n";
    }
    io::atomic_write(f.out + "/annual_excess.csv", csv);

    csv = "month,p,q\n";
    for (const auto& w : estimator::mixture_weights(series, b, window_end)) {
        csv += w.month.str() + "," + io::format_rate(w.p) + "," + io::format_rate(w.q) + "\n";
    }
    io::atomic_write(f.out + "/mixture_weights.csv", csv);

    const auto reg = estimator::rate_regression(verdicts, papers, window_end, opts);
    csv = "month,delta,std_error\n";
    for (std::size_t i = 0; i < reg.months.size(); ++i) {
        csv += reg.months[i].str() + "," + io::format_rate(reg.delta[i]) + "," +
               io::format_rate(reg.std_error[i]) + "\n";
    }
    io::atomic_write(f.out + "/rate_regression.csv", csv);

    json rj;
    rj["center"] = reg.center;
    rj["n_obs"] = reg.fit.n_obs;
    rj["residual_variance"] = reg.fit.residual_variance;
    json coeffs = json::array();
    for (std::size_t i = 0; i < reg.fit.names.size(); ++i) {
        coeffs.push_back({{"name", reg.fit.names[i]},
                          {"estimate", reg.fit.estimates[i]},
                          {"std_error", reg.fit.std_errors[i]}});
    }
    rj["coefficients"] = std::move(coeffs);
    rj["dropped"] = reg.fit.dropped;
    io::atomic_write(f.out + "/regression_report.json", rj.dump(2) + "\n");

    const auto shares = estimator::paper_share_distribution(verdicts, papers, {0.1, 0.5, 1.0}, opts);
    csv = "period,bin,fraction,n_papers\n";
    for (std::size_t p = 0; p < shares.periods.size(); ++p) {
        for (std::size_t bin = 0; bin < shares.bin_labels.size(); ++bin) {
            csv += shares.periods[p] + "," + io::csv_field(shares.bin_labels[bin]) + "," +
                   io::format_rate(shares.fractions[p][bin]) + "," +
                   std::to_string(shares.papers_per_period[p]) + "\n";
        }
    }
    io::atomic_write(f.out + "/paper_shares.csv", csv);

    csv = "bin,delta_pp\n";
    for (std::size_t bin = 0; bin < shares.delta_pp.size(); ++bin) {
        csv += io::csv_field(shares.bin_labels[bin]) + "," + io::format_rate(shares.delta_pp[bin]) +
               "\n";
    }
    io::atomic_write(f.out + "/paper_share_deltas.csv", csv);

    int target_year = 0;
    for (const auto& s : series) target_year = std::max(target_year, s.month.year);
    const auto fields = estimator::field_breakdown(verdicts, papers, target_year, window_end, opts);
    csv = "field,rate_defined,excess_rate,excess_count,n_total_year,low_sample\n";
    for (const auto& fs : fields) {
        csv += io::csv_field(fs.field) + "," + csv_bool(fs.rate_defined) + "," +
               io::format_rate(fs.excess_rate) + "," + io::format_rate(fs.excess_count) + "," +
               std::to_string(fs.n_total_year) + "," + csv_bool(fs.low_sample) + "\n";
    }
    io::atomic_write(f.out + "/field_breakdown.csv", csv);

    // LLM-use correlation at subfield and paper level.
    struct UnitAgg {
        std::uint64_t n = 0, u = 0;
        double score_sum = 0;
        std::uint64_t scored = 0;
    };
    std::map<std::string, UnitAgg> subfields;
    std::unordered_map<std::string, UnitAgg> per_paper;
    for (const auto& v : verdicts) {
        auto it = papers.find(v.paper_id);
        const PaperRecord& p = it->second;
        const bool u = opts.unmatched_statuses.count(v.status) > 0;
        UnitAgg& sa = subfields[p.subfield.value_or(p.field)];
        ++sa.n;
        if (u) ++sa.u;
        UnitAgg& pa = per_paper[v.paper_id];
        ++pa.n;
        if (u) ++pa.u;
    }
    for (auto& [key, agg] : subfields) {
        agg.score_sum = 0;
        agg.scored = 0;
    }
    std::map<std::string, std::pair<double, std::uint64_t>> subfield_scores;
    for (const auto& p : corpus.papers) {
        if (!p.llm_use_score) continue;
        auto& [sum, count] = subfield_scores[p.subfield.value_or(p.field)];
        sum += *p.llm_use_score;
        ++count;
    }
    csv = "level,r,p_value,n\n";
    std::vector<std::pair<double, double>> sub_pairs;
    for (const auto& [key, agg] : subfields) {
        auto sit = subfield_scores.find(key);
        if (sit == subfield_scores.end() || sit->second.second == 0 || agg.n == 0) continue;
        sub_pairs.emplace_back(static_cast<double>(agg.u) / static_cast<double>(agg.n),
                               sit->second.first / static_cast<double>(sit->second.second));
    }
    try {
        if (sub_pairs.size() >= 3) {
            const auto r = estimator::correlate_llm_use(sub_pairs);
            csv += "subfield," + io::format_rate(r.r) + "," + io::format_rate(r.p_value) + "," +
                   std::to_string(r.n) + "\n";
        }
        std::vector<std::pair<double, double>> paper_pairs;
        for (const auto& p : corpus.papers) {
            if (!p.llm_use_score) continue;
            auto it = per_paper.find(p.paper_id);
            if (it == per_paper.end() || it->second.n == 0) continue;
            paper_pairs.emplace_back(
                static_cast<double>(it->second.u) / static_cast<double>(it->second.n),
                *p.llm_use_score);
        }
        if (paper_pairs.size() >= 3) {
            const auto r = estimator::correlate_llm_use(paper_pairs);
            csv += "paper," + io::format_rate(r.r) + "," + io::format_rate(r.p_value) + "," +
                   std::to_string(r.n) + "\n";
        }
    } catch (const DataError&) {
        // zero-variance degenerate corpora simply omit the correlation rows
    }
    io::atomic_write(f.out + "/llm_correlation.csv", csv);
}

int cmd_estimate(const CommonFlags& f) {
    io::ensure_dir(f.out);
    require_input(f.corpus, "corpus file");
    require_input(f.out + "/verdicts.jsonl", "run `verify` first");
    const io::Corpus corpus = io::load_corpus(f.corpus);
    const auto verdicts = io::load_verdicts(f.out + "/verdicts.jsonl");
    write_estimate_tables(f, corpus, verdicts);
    echo_config("estimate", f, {{"corpus", f.corpus}, {"verdicts", f.out + "/verdicts.jsonl"}});
    return kExitOk;
}

void append_stat(std::string& csv, const std::string& stat, const std::string& group,
                 const DeltaStat& d) {
    csv += stat + "," + group + "," + (d.defined ? io::format_rate(d.value) : "") + "," +
           (d.defined ? io::format_rate(d.std_error) : "") + "," + std::to_string(d.n_a) + "," +
           std::to_string(d.n_b) + "," + csv_bool(d.defined) + "\n";
}

int cmd_cohort(const CommonFlags& f) {
    io::ensure_dir(f.out);
    require_input(f.corpus, "corpus file");
    require_input(f.catalog, "snapshot from `ingest`");
    require_input(f.out + "/verdicts.jsonl", "run `verify` first");
    const io::Corpus corpus = io::load_corpus(f.corpus);
    const auto verdicts = io::load_verdicts(f.out + "/verdicts.jsonl");
    const bibindex::Snapshot snap = bibindex::load_snapshot(f.catalog);
    const auto authors = bibindex::AuthorDirectory::build(snap.profiles);
    const auto papers = io::paper_table(corpus.papers);
    const auto opts = series_options(f);
    const YearMonth window_end = YearMonth::parse(f.baseline_end);

    // Treated = papers with >= 1 unmatched reference; pool = 0 unmatched.
    std::unordered_map<std::string, std::uint32_t> ref_counts;
    std::unordered_map<std::string, std::uint32_t> unmatched_counts;
    for (const auto& v : verdicts) {
        ++ref_counts[v.paper_id];
        if (opts.unmatched_statuses.count(v.status) > 0) ++unmatched_counts[v.paper_id];
    }
    std::vector<std::string> treated;
    std::vector<std::string> pool;
    for (const auto& p : corpus.papers) {
        if (ref_counts.find(p.paper_id) == ref_counts.end()) continue;
        if (unmatched_counts[p.paper_id] > 0) {
            treated.push_back(p.paper_id);
        } else {
            pool.push_back(p.paper_id);
        }
    }

    std::string csv = "treated,control,with_replacement\n";
    std::string prod_csv = "statistic,group,value,stderr,n\n";
    if (!treated.empty() && !pool.empty()) {
        cohort::MatchKeys keys;
        const auto matched =
            cohort::match_controls(treated, pool, papers, ref_counts, keys, f.seed);
        for (const auto& pair : matched.pairs) {
            csv += pair.treated + "," + pair.control + "," + csv_bool(pair.with_replacement) + "\n";
        }
        std::string um = "paper_id\n";
        for (const auto& id : matched.unmatched_treated) um += id + "\n";
        io::atomic_write(f.out + "/unmatched_treated.csv", um);

        const auto prod = cohort::citer_productivity(matched.pairs, papers, authors);
        auto add = [&prod_csv](const std::string& stat, const std::string& group, double value,
                               std::uint64_t n) {
            prod_csv += stat + "," + group + "," + io::format_rate(value) + ",," +
                        std::to_string(n) + "\n";
        };
        add("mean_prior_publications", "treated", prod.treated_mean_prior, prod.n_treated);
        add("mean_prior_publications", "control", prod.control_mean_prior, prod.n_control);
        add("relative_gap", "treated_vs_control", prod.relative_gap, prod.n_treated);
        add("zero_prior_share", "treated", prod.treated_zero_share, prod.n_treated);
        add("zero_prior_share", "control", prod.control_zero_share, prod.n_control);
        add("growth_ratio", "treated_vs_control", prod.growth_ratio, prod.n_treated);
        add("unresolved_pairs", "both", static_cast<double>(prod.unresolved), prod.unresolved);
    }
    io::atomic_write(f.out + "/cohort_pairs.csv", csv);
    io::atomic_write(f.out + "/productivity.csv", prod_csv);

    const auto buckets = cohort::teamsize_rates(verdicts, papers, window_end, opts);
    csv = "bucket,normalized_rate,n_refs,defined\n";
    for (const auto& b : buckets) {
        csv += b.label + "," + io::format_rate(b.normalized_rate) + "," +
               std::to_string(b.n_refs) + "," + csv_bool(b.defined) + "\n";
    }
    io::atomic_write(f.out + "/teamsize.csv", csv);

    // Attribution sets: unmatched references vs matched references sampled
    // from the same month/field, plus valid co-cited references from papers
    // containing hallucinations.
    const auto embedder = cohort::TfidfEmbedder::build(snap.profiles);
    std::unordered_map<std::string, std::vector<const ParsedReference*>> refs_by_paper;
    std::unordered_map<std::string, const ParsedReference*> ref_by_key;
    for (const auto& r : corpus.refs) {
        refs_by_paper[r.raw.paper_id].push_back(&r);
        ref_by_key[r.raw.paper_id + "\x1f" + std::to_string(r.raw.index_in_paper)] = &r;
    }
    std::unordered_map<std::string, TermVector> paper_vectors;
    auto paper_vector = [&](const std::string& paper_id) -> const TermVector& {
        auto it = paper_vectors.find(paper_id);
        if (it == paper_vectors.end()) {
            std::vector<std::string> titles;
            for (const ParsedReference* r : refs_by_paper[paper_id]) {
                if (r->title) titles.push_back(*r->title);
            }
            it = paper_vectors.emplace(paper_id, embedder.paper_vector(titles)).first;
        }
        return it->second;
    };

    std::vector<const Verdict*> unmatched_refs;
    std::map<std::pair<YearMonth, std::string>, std::vector<const Verdict*>> matched_by_cell;
    std::unordered_map<std::string, bool> paper_has_unmatched;
    for (const auto& v : verdicts) {
        const PaperRecord& p = papers.at(v.paper_id);
        if (opts.unmatched_statuses.count(v.status) > 0) {
            unmatched_refs.push_back(&v);
            paper_has_unmatched[v.paper_id] = true;
        } else if (v.status == VerdictStatus::Matched ||
                   v.status == VerdictStatus::MatchedAfterRetitle) {
            matched_by_cell[{p.month, p.field}].push_back(&v);
        }
    }

    std::mt19937_64 rng(f.seed ^ 0xa5a5a5a5ull);
    auto attributions_of = [&](const std::vector<const Verdict*>& set) {
        std::vector<cohort::AttributionRecord> atts;
        for (const Verdict* v : set) {
            auto it = ref_by_key.find(v->paper_id + "\x1f" + std::to_string(v->ref_index));
            if (it == ref_by_key.end() || it->second->authors.empty()) continue;
            auto one = cohort::attribute_cited_authors(*it->second, paper_vector(v->paper_id),
                                                       authors, embedder, f.tau);
            atts.insert(atts.end(), one.begin(), one.end());
        }
        return atts;
    };

    std::vector<const Verdict*> control_refs;
    for (const Verdict* v : unmatched_refs) {
        const PaperRecord& p = papers.at(v->paper_id);
        auto cit = matched_by_cell.find({p.month, p.field});
        if (cit == matched_by_cell.end() || cit->second.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, cit->second.size() - 1);
        control_refs.push_back(cit->second[pick(rng)]);
    }
    std::vector<const Verdict*> cocited_refs;
    for (const auto& v : verdicts) {
        if ((v.status == VerdictStatus::Matched || v.status == VerdictStatus::MatchedAfterRetitle) &&
            paper_has_unmatched.count(v.paper_id) > 0) {
            cocited_refs.push_back(&v);
        }
    }

    csv = "statistic,group,value,stderr,n_a,n_b,defined\n";
    const auto hall_atts = attributions_of(unmatched_refs);
    const auto ctrl_atts = attributions_of(control_refs);
    if (!hall_atts.empty() && !ctrl_atts.empty()) {
        const auto stats = cohort::beneficiary_stats(hall_atts, ctrl_atts, authors);
        append_stat(csv, "profile_match_rate", "hallucinated_vs_control", stats.profile_match_rate);
        append_stat(csv, "mean_publications", "hallucinated_vs_control", stats.mean_publications);
        append_stat(csv, "mean_citations", "hallucinated_vs_control", stats.mean_citations);
        append_stat(csv, "male_share_pp", "hallucinated_vs_control", stats.male_share);
        append_stat(csv, "team_size", "hallucinated_vs_control", stats.team_size);
        append_stat(csv, "hierarchy_pp", "hallucinated_vs_control", stats.hierarchy);
        const auto co_atts = attributions_of(cocited_refs);
        if (!co_atts.empty()) {
            const auto co = cohort::beneficiary_stats(co_atts, ctrl_atts, authors);
            append_stat(csv, "profile_match_rate", "cocited_vs_control", co.profile_match_rate);
            append_stat(csv, "mean_publications", "cocited_vs_control", co.mean_publications);
            append_stat(csv, "mean_citations", "cocited_vs_control", co.mean_citations);
            append_stat(csv, "male_share_pp", "cocited_vs_control", co.male_share);
            append_stat(csv, "team_size", "cocited_vs_control", co.team_size);
            append_stat(csv, "hierarchy_pp", "cocited_vs_control", co.hierarchy);
        }
    }
    io::atomic_write(f.out + "/beneficiary.csv", csv);

    // Mixture regression: y = log(1 + prior pubs of the first resolved
    // credited author); category = paper field.
    {
        auto series = estimator::monthly_series(verdicts, papers, opts);
        json mj;
        try {
            const double b = estimator::baseline_rate(series, window_end);
            estimator::apply_excess(series, b);
            const auto weights = estimator::mixture_weights(series, b, window_end);
            std::map<std::pair<std::string, std::uint32_t>, const cohort::AttributionRecord*>
                first_resolved;
            auto collect = [&first_resolved](const std::vector<cohort::AttributionRecord>& atts) {
                for (const auto& a : atts) {
                    if (!a.resolved_author) continue;
                    auto key = std::make_pair(a.paper_id, a.ref_index);
                    auto it = first_resolved.find(key);
                    if (it == first_resolved.end() || a.name_index < it->second->name_index) {
                        first_resolved[key] = &a;
                    }
                }
            };
            collect(hall_atts);
            collect(ctrl_atts);
            std::vector<cohort::MixtureObservation> obs;
            for (const auto& [key, att] : first_resolved) {
                const AuthorProfile* prof = authors.by_id(*att->resolved_author);
                if (!prof) continue;
                cohort::MixtureObservation o;
                o.y = std::log(1.0 + static_cast<double>(prof->n_pubs_pre_cutoff));
                const PaperRecord& p = papers.at(key.first);
                o.category = p.field;
                o.month = p.month;
                const Verdict* v = nullptr;
                for (const Verdict& cand : verdicts) {
                    if (cand.paper_id == key.first && cand.ref_index == key.second) {
                        v = &cand;
                        break;
                    }
                }
                o.unmatched = v != nullptr && opts.unmatched_statuses.count(v->status) > 0;
                obs.push_back(std::move(o));
            }
            if (obs.size() >= 4) {
                const auto mix = cohort::mixture_regression(obs, weights, true);
                mj["beta"] = mix.beta ? json(*mix.beta) : json(nullptr);
                mj["beta_se"] = mix.beta_se ? json(*mix.beta_se) : json(nullptr);
                mj["theta"] = mix.theta ? json(*mix.theta) : json(nullptr);
                mj["theta_se"] = mix.theta_se ? json(*mix.theta_se) : json(nullptr);
                mj["dropped"] = mix.fit.dropped;
                mj["n_obs"] = mix.fit.n_obs;
            } else {
                mj["skipped"] = "too few resolved attributions";
            }
        } catch (const DataError& e) {
            mj["skipped"] = e.what();
        }
        io::atomic_write(f.out + "/mixture_regression.json", mj.dump(2) + "\n");
    }

    const auto leak = cohort::screening_leakage(verdicts, papers, opts);
    csv = "statistic,value\n";
    csv += "leakage," + io::format_rate(leak.leakage) + "\n";
    csv += "rate_ratio," + (leak.ratio_defined ? io::format_rate(leak.rate_ratio) : "") + "\n";
    csv += "unmatched_accepted," + std::to_string(leak.unmatched_accepted) + "\n";
    csv += "unmatched_rejected," + std::to_string(leak.unmatched_rejected) + "\n";
    csv += "refs_accepted," + std::to_string(leak.refs_accepted) + "\n";
    csv += "refs_rejected," + std::to_string(leak.refs_rejected) + "\n";
    csv += "papers_unlabeled," + std::to_string(leak.papers_unlabeled) + "\n";
    io::atomic_write(f.out + "/leakage.csv", csv);

    // Persistence from published_link metadata.
    std::vector<std::pair<std::string, std::string>> links;
    for (const auto& p : corpus.papers) {
        if (p.published_link) links.emplace_back(p.paper_id, *p.published_link);
    }
    const auto pers = cohort::persistence(verdicts, corpus.refs, verdicts, corpus.refs, links, opts);
    csv = "statistic,value\n";
    csv += "share," + (pers.defined ? io::format_rate(pers.share) : "") + "\n";
    csv += "persisted," + std::to_string(pers.persisted) + "\n";
    csv += "unmatched_in_linked_preprints," + std::to_string(pers.unmatched_in_linked_preprints) +
           "\n";
    csv += "preprints_linked," + std::to_string(pers.preprints_linked) + "\n";
    csv += "preprints_unlinked," + std::to_string(pers.preprints_unlinked) + "\n";
    io::atomic_write(f.out + "/persistence.csv", csv);

    if (!f.journal_scores.empty()) {
        require_input(f.journal_scores, "journal scores");
        std::map<std::string, double> impact;
        std::ifstream in(f.journal_scores);
        std::string line;
        while (std::getline(in, line)) {
            if (citefix::text::trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) throw DataError("malformed journal score line");
            impact[j.at("journal_id").get<std::string>()] = j.at("score").get<double>();
        }
        const auto deciles = cohort::journal_decile_rates(verdicts, papers, impact, window_end, opts);
        csv = "decile,excess_rate,n_refs,n_journals,mean_impact\n";
        for (const auto& d : deciles) {
            csv += std::to_string(d.decile) + "," + io::format_rate(d.excess_rate) + "," +
                   std::to_string(d.n_refs) + "," + std::to_string(d.n_journals) + "," +
                   io::format_rate(d.mean_impact) + "\n";
        }
        io::atomic_write(f.out + "/journal_deciles.csv", csv);
    }

    echo_config("cohort", f,
                {{"corpus", f.corpus},
                 {"catalog", f.catalog},
                 {"verdicts", f.out + "/verdicts.jsonl"}});
    return kExitOk;
}

synthgen::SynthConfig synth_config_from(const CommonFlags& f) {
    synthgen::SynthConfig cfg = synthgen::SynthConfig::recovery_default();
    if (!f.config.empty()) {
        json j = json::parse(io::read_file(f.config), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ConfigError("synth config is not a JSON object: " + f.config);
        }
        if (j.contains("n_catalog_records")) cfg.n_catalog_records = j["n_catalog_records"];
        if (j.contains("n_authors")) cfg.n_authors = j["n_authors"];
        if (j.contains("vocab_size")) cfg.vocab_size = j["vocab_size"];
        if (j.contains("first_month")) {
            cfg.first_month = YearMonth::parse(j["first_month"].get<std::string>());
        }
        if (j.contains("n_months")) cfg.n_months = j["n_months"];
        if (j.contains("refs_per_month")) cfg.refs_per_month = j["refs_per_month"];
        if (j.contains("refs_per_paper_mean")) cfg.refs_per_paper_mean = j["refs_per_paper_mean"];
        if (j.contains("baseline_noise_rate")) cfg.baseline_noise_rate = j["baseline_noise_rate"];
        if (j.contains("hallucination_schedule")) {
            cfg.hallucination_schedule = j["hallucination_schedule"].get<std::vector<double>>();
        }
        if (j.contains("typo_rate")) cfg.typo_rate = j["typo_rate"];
        if (j.contains("beneficiary_bias")) cfg.beneficiary_bias = j["beneficiary_bias"];
        if (j.contains("citation_only_share")) cfg.citation_only_share = j["citation_only_share"];
        if (j.contains("moderation_accepted_volume")) {
            cfg.moderation_accepted_volume = j["moderation_accepted_volume"];
        }
        if (j.contains("moderation_rejected_ratio")) {
            cfg.moderation_rejected_ratio = j["moderation_rejected_ratio"];
        }
        if (j.contains("n_linked_pairs")) cfg.n_linked_pairs = j["n_linked_pairs"];
        if (j.contains("persistence_share")) cfg.persistence_share = j["persistence_share"];
        if (j.contains("teamsize_gradient")) {
            const auto g = j["teamsize_gradient"].get<std::vector<double>>();
            if (g.size() != cfg.teamsize_gradient.size()) {
                throw ConfigError("teamsize_gradient needs 5 bucket weights");
            }
            std::copy(g.begin(), g.end(), cfg.teamsize_gradient.begin());
        }
    }
    cfg.seed = f.seed;
    return cfg;
}

void echo_synth_config(const std::string& path, const synthgen::SynthConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["n_catalog_records"] = cfg.n_catalog_records;
    j["n_authors"] = cfg.n_authors;
    j["vocab_size"] = cfg.vocab_size;
    j["first_month"] = cfg.first_month.str();
    j["n_months"] = cfg.n_months;
    j["refs_per_month"] = cfg.refs_per_month;
    j["refs_per_paper_mean"] = cfg.refs_per_paper_mean;
    j["baseline_noise_rate"] = cfg.baseline_noise_rate;
    j["hallucination_schedule"] = cfg.hallucination_schedule;
    j["typo_rate"] = cfg.typo_rate;
    j["beneficiary_bias"] = cfg.beneficiary_bias;
    j["citation_only_share"] = cfg.citation_only_share;
    j["moderation_accepted_volume"] = cfg.moderation_accepted_volume;
    j["moderation_rejected_ratio"] = cfg.moderation_rejected_ratio;
    j["n_linked_pairs"] = cfg.n_linked_pairs;
    j["persistence_share"] = cfg.persistence_share;
    io::atomic_write(path, j.dump(2) + "\n");
}

int cmd_synth(const CommonFlags& f) {
    io::ensure_dir(f.out);
    const auto cfg = synth_config_from(f);
    const auto catalog = synthgen::gen_catalog(cfg);
    const auto corpus = synthgen::gen_corpus(cfg, catalog);
    synthgen::save_catalog_dump(f.out + "/catalog.jsonl", catalog.records);
    synthgen::save_author_dump(f.out + "/authors.jsonl", catalog.profiles);
    io::save_raw_corpus(f.out + "/corpus.jsonl", corpus.papers);
    synthgen::save_ground_truth(f.out + "/ground_truth.jsonl", corpus.truth);
    echo_synth_config(f.out + "/synth_config.json", cfg);
    return kExitOk;
}

int cmd_check(const CommonFlags& f) {
    io::ensure_dir(f.out);
    CommonFlags stage = f;

    const int synth_rc = cmd_synth(stage);
    if (synth_rc != kExitOk) return synth_rc;

    stage.catalog = f.out + "/catalog.jsonl";
    stage.authors = f.out + "/authors.jsonl";
    const int ingest_rc = cmd_ingest(stage);
    if (ingest_rc != kExitOk) return ingest_rc;

    stage.catalog = f.out + "/snapshot.cfix";
    stage.corpus = f.out + "/corpus.jsonl";
    const int verify_rc = cmd_verify(stage);
    if (verify_rc != kExitOk) return verify_rc;

    const int estimate_rc = cmd_estimate(stage);
    if (estimate_rc != kExitOk) return estimate_rc;

    const auto truth = synthgen::load_ground_truth(f.out + "/ground_truth.jsonl");
    const io::Corpus corpus = io::load_corpus(stage.corpus);
    const auto verdicts = io::load_verdicts(f.out + "/verdicts.jsonl");
    const auto papers = io::paper_table(corpus.papers);
    const auto opts = series_options(stage);
    const YearMonth window_end = YearMonth::parse(stage.baseline_end);
    auto series = estimator::monthly_series(verdicts, papers, opts);
    const double b = estimator::baseline_rate(series, window_end);
    estimator::apply_excess(series, b);

    synthgen::RecoveryTolerances tol;
    const auto report = synthgen::evaluate_recovery(truth, series, b, window_end, verdicts, tol);
    synthgen::save_recovery_report(f.out + "/recovery_report.json", report);
    std::cout << "baseline_error=" << report.baseline_error
              << " max_excess_error=" << report.max_monthly_excess_error
              << " real_matched=" << report.real_matched_share
              << " fabricated_unmatched=" << report.fabricated_unmatched_share
              << " fabricated_matched=" << report.fabricated_matched << "\n";
    if (!report.pass) {
        for (const auto& msg : report.failures) std::cerr << "check: " << msg << "\n";
        return kExitTolerance;
    }
    std::cout << "check: PASS\n";
    return kExitOk;
}

int cmd_report(const CommonFlags& f) {
    require_input(f.out + "/funnel.json", "run the pipeline first");
    static const char* kTables[] = {
        "funnel.json",          "verdicts.jsonl",        "monthly_series.csv",
        "annual_excess.csv",    "mixture_weights.csv",   "rate_regression.csv",
        "regression_report.json", "paper_shares.csv",    "paper_share_deltas.csv",
        "field_breakdown.csv",  "llm_correlation.csv",   "cohort_pairs.csv",
        "productivity.csv",     "teamsize.csv",          "beneficiary.csv",
        "mixture_regression.json", "leakage.csv",        "persistence.csv",
        "journal_deciles.csv",  "recovery_report.json",  "ingest_report.json",
    };
    json manifest;
    for (const char* name : kTables) {
        const std::string path = f.out + "/" + name;
        if (!io::file_exists(path)) continue;
        manifest[name] = {{"hash", io::hash_hex(io::file_hash(path))}};
    }
    // Tie tables to the stage configurations (which carry input hashes).
    for (const char* cfg : {"config_ingest.json", "config_parse.json", "config_verify.json",
                            "config_estimate.json", "config_cohort.json", "synth_config.json"}) {
        const std::string path = f.out + "/" + cfg;
        if (!io::file_exists(path)) continue;
        manifest[cfg] = {{"hash", io::hash_hex(io::file_hash(path))}};
    }
    json j;
    j["manifest"] = std::move(manifest);
    j["funnel"] = json::parse(io::read_file(f.out + "/funnel.json"));
    if (io::file_exists(f.out + "/recovery_report.json")) {
        j["recovery"] = json::parse(io::read_file(f.out + "/recovery_report.json"));
    }
    io::atomic_write(f.out + "/report.json", j.dump(2) + "\n");
    return kExitOk;
}

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--catalog", f.catalog, "catalog dump or snapshot path");
    cmd->add_option("--corpus", f.corpus, "corpus file (papers with references)");
    cmd->add_option("--authors", f.authors, "author dump path");
    cmd->add_option("--baseline-end", f.baseline_end, "baseline window end, YYYY-MM");
    cmd->add_option("--sim-threshold", f.sim_threshold, "similarity acceptance threshold");
    cmd->add_option("--sim-threshold-year", f.sim_threshold_year,
                    "relaxed threshold when years agree within 1");
    cmd->add_option("--candidates-k", f.candidates_k, "retrieval candidate count");
    cmd->add_option("--tau", f.tau, "attribution cosine threshold");
    cmd->add_option("--seed", f.seed, "seed for all randomness");
    cmd->add_option("--cache-dir", f.cache_dir, "external-lookup cache directory");
    cmd->add_flag("--replay", f.replay, "forbid live external lookups; error on cache miss");
    cmd->add_option("--workers", f.workers, "worker threads (default: all cores)");
    cmd->add_option("--out", f.out, "output directory")->required();
    cmd->add_option("--config", f.config, "JSON config file (flags override)");
    cmd->add_flag("--include-citation-only", f.include_citation_only,
                  "count CITATION_ONLY verdicts as unmatched");
    cmd->add_option("--journal-scores", f.journal_scores,
                    "per-journal impact scores (jsonl: journal_id, score)");
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"citefix: citation verification and hallucination-audit toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const CommonFlags&);
    };
    static const Sub subs[] = {
        {"ingest", "build a catalog snapshot from dumps", cmd_ingest},
        {"parse", "parse corpus references into structured fields", cmd_parse},
        {"verify", "run the verification funnel over a corpus", cmd_verify},
        {"estimate", "compute rates, baselines, excess and regressions", cmd_estimate},
        {"cohort", "matched-control and structural analyses", cmd_cohort},
        {"synth", "generate a synthetic catalog and corpus", cmd_synth},
        {"check", "synthetic end-to-end recovery gate", cmd_check},
        {"report", "join stage outputs into one consolidated report", cmd_report},
    };
    std::vector<CLI::App*> cmds;
    for (const auto& sub : subs) {
        CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
        add_common_flags(cmd, flags);
        cmds.push_back(cmd);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::cerr << app.help() << "\n" << e.what() << "\n";
        return kExitUsage;
    }

    try {
        for (std::size_t i = 0; i < cmds.size(); ++i) {
            if (cmds[i]->parsed()) {
                apply_config_file(cmds[i], flags);
                validate_flags(flags);
                return subs[i].fn(flags);
            }
        }
        std::cerr << app.help() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace citefix::cli
