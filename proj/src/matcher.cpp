#include "citefix/matcher.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "citefix/errors.hpp"
#include "citefix/refparse.hpp"
#include "citefix/strsim.hpp"
#include "citefix/text.hpp"

namespace citefix::matcher {

namespace {

using nlohmann::json;

// Sorted unique tokens of the query mapped to index token ids where known;
// unknown tokens keep a per-token sentinel so they still count in the union.
struct QueryTokens {
    std::vector<std::uint32_t> known_ids;  // sorted
    std::size_t total_unique = 0;
};

QueryTokens make_query_tokens(std::string_view title_norm, const bibindex::TitleIndex& index) {
    QueryTokens qt;
    auto toks = text::tokens(title_norm);
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
    qt.total_unique = toks.size();
    for (const auto& tok : toks) {
        if (auto id = index.token_id(tok)) qt.known_ids.push_back(*id);
    }
    std::sort(qt.known_ids.begin(), qt.known_ids.end());
    return qt;
}

double jaccard_against_record(const QueryTokens& qt, const std::vector<std::uint32_t>& rec_tokens) {
    std::size_t shared = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < qt.known_ids.size() && j < rec_tokens.size()) {
        if (qt.known_ids[i] == rec_tokens[j]) {
            ++shared;
            ++i;
            ++j;
        } else if (qt.known_ids[i] < rec_tokens[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = qt.total_unique + rec_tokens.size() - shared;
    if (uni == 0) return 0.0;
    return static_cast<double>(shared) / static_cast<double>(uni);
}

}  // namespace

std::optional<TitleMatch> match_title(const ParsedReference& parsed,
                                      const std::vector<bibindex::ScoredCandidate>& candidates,
                                      const bibindex::TitleIndex& index, const MatchConfig& cfg) {
    if (!parsed.title_norm) return std::nullopt;
    const std::string& query = *parsed.title_norm;
    const std::u32string query_runes = text::decode_utf8(query);
    const QueryTokens qt = make_query_tokens(query, index);
    const double accept_floor = std::min(cfg.sim_threshold, cfg.sim_threshold_year);

    std::optional<TitleMatch> best;
    bool best_year_match = false;
    std::uint64_t best_citations = 0;

    for (const auto& cand : candidates) {
        const CatalogRecord& rec = index.record(cand.record);
        const double jac = jaccard_against_record(qt, index.record_tokens(cand.record));
        const auto& rec_runes = index.title_runes(cand.record);
        const double len_bound = strsim::length_similarity_bound(query_runes.size(), rec_runes.size());
        if (std::max(jac, len_bound) < accept_floor) continue;  // cannot be accepted

        double sim = jac;
        const std::size_t maxlen = std::max(query_runes.size(), rec_runes.size());
        if (len_bound > jac && maxlen > 0) {
            const std::size_t dist = strsim::levenshtein_distance(
                std::u32string_view(query_runes), std::u32string_view(rec_runes));
            sim = std::max(sim, 1.0 - static_cast<double>(dist) / static_cast<double>(maxlen));
        }

        const bool years_present = parsed.year && rec.year;
        const bool year_close = years_present && std::abs(*parsed.year - *rec.year) <= cfg.year_slack;
        const bool accepted = sim >= cfg.sim_threshold || (sim >= cfg.sim_threshold_year && year_close);
        if (!accepted) continue;

        const bool year_match = years_present && *parsed.year == *rec.year;
        bool take = false;
        if (!best) {
            take = true;
        } else if (sim != best->similarity) {
            take = sim > best->similarity;
        } else if (year_match != best_year_match) {
            take = year_match;
        } else if (rec.n_citations != best_citations) {
            take = rec.n_citations > best_citations;
        } else {
            take = rec.record_id < best->record_id;
        }
        if (take) {
            best = TitleMatch{cand.record, rec.record_id, sim};
            best_year_match = year_match;
            best_citations = rec.n_citations;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Rule classifier

RuleClassifierConfig RuleClassifierConfig::defaults() {
    RuleClassifierConfig cfg;
    cfg.scholarly_domains = {
        "arxiv.org",    "doi.org",        "biorxiv.org",     "medrxiv.org", "ssrn.com",
        "ncbi.nlm.nih.gov", "pubmed.gov", "openalex.org",    "semanticscholar.org",
        "springer.com", "nature.com",     "sciencedirect.com", "ieee.org",  "acm.org",
        "wiley.com",    "jstor.org",      "pnas.org",        "science.org", "elsevier.com",
    };
    cfg.nonscholarly_domains = {
        "twitter.com",  "x.com",      "facebook.com", "youtube.com",  "reddit.com",
        "medium.com",   "substack.com", "wikipedia.org", "nytimes.com", "bbc.com",
        "cnn.com",      "forbes.com", "theguardian.com", "washingtonpost.com",
        "news.example.com",
    };
    cfg.nonacademic_patterns = {
        "retrieved from", "accessed ",       "accessed:",      "available at",
        "available from", "available online", "github.com",    "gitlab.com",
        "zenodo.org",     "[software]",       "[dataset]",     "computer software",
        "software version", "press release",  "blog post",     "white paper",
        "news release",   "working group note",
    };
    return cfg;
}

namespace {

// Hosts of http(s) URLs in the text, lowercased.
std::vector<std::string> extract_url_hosts(std::string_view s) {
    std::vector<std::string> hosts;
    const std::string lowered = text::lower_ascii(s);
    std::size_t pos = 0;
    while ((pos = lowered.find("http", pos)) != std::string::npos) {
        std::size_t h = pos + 4;
        if (h < lowered.size() && lowered[h] == 's') ++h;
        if (lowered.compare(h, 3, "://") != 0) {
            pos += 4;
            continue;
        }
        h += 3;
        std::size_t e = h;
        while (e < lowered.size() && (std::isalnum(static_cast<unsigned char>(lowered[e])) ||
                                      lowered[e] == '.' || lowered[e] == '-')) {
            ++e;
        }
        if (e > h) hosts.push_back(lowered.substr(h, e - h));
        pos = e;
    }
    return hosts;
}

bool host_matches(const std::string& host, const std::vector<std::string>& domains) {
    for (const auto& d : domains) {
        if (host == d) return true;
        if (host.size() > d.size() && host.compare(host.size() - d.size() - 1, 1, ".") == 0 &&
            host.compare(host.size() - d.size(), d.size(), d) == 0) {
            return true;
        }
    }
    return false;
}

}  // namespace

bool RuleClassifier::is_academic(const ParsedReference& ref) {
    if (!ref.title_norm) return false;
    for (const auto& host : extract_url_hosts(ref.raw.text)) {
        if (host_matches(host, cfg_.scholarly_domains)) continue;
        if (host_matches(host, cfg_.nonscholarly_domains)) return false;
    }
    if (!ref.year && ref.authors.empty()) return false;
    const std::string lowered = text::lower_ascii(ref.raw.text);
    for (const auto& pat : cfg_.nonacademic_patterns) {
        if (lowered.find(pat) != std::string::npos) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Cached external lookup

namespace {

const char* outcome_str(LookupOutcome o) {
    switch (o) {
        case LookupOutcome::RecordFound: return "RECORD_FOUND";
        case LookupOutcome::CitedByMultiple: return "CITED_BY_MULTIPLE";
        case LookupOutcome::NotFound: return "NOT_FOUND";
    }
    return "NOT_FOUND";
}

std::optional<LookupOutcome> outcome_from(const std::string& s) {
    if (s == "RECORD_FOUND") return LookupOutcome::RecordFound;
    if (s == "CITED_BY_MULTIPLE") return LookupOutcome::CitedByMultiple;
    if (s == "NOT_FOUND") return LookupOutcome::NotFound;
    return std::nullopt;
}

}  // namespace

CachedLookup::CachedLookup(std::unique_ptr<ExternalLookup> inner, std::string cache_path,
                           bool replay, double max_calls_per_sec)
    : inner_(std::move(inner)),
      cache_path_(std::move(cache_path)),
      replay_(replay),
      min_interval_sec_(max_calls_per_sec > 0 ? 1.0 / max_calls_per_sec : 0.0),
      tokens_(1.0) {
    std::ifstream in(cache_path_);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        ExternalLookupResult r;
        try {
            r.query_title_norm = j.at("query_title_norm").get<std::string>();
            const auto o = outcome_from(j.at("outcome").get<std::string>());
            if (!o) continue;
            r.outcome = *o;
            r.evidence_count = j.value("evidence_count", 0u);
            r.fetched_at = j.value("fetched_at", static_cast<std::int64_t>(0));
        } catch (const std::exception&) {
            continue;
        }
        cache_[r.query_title_norm] = r;
    }
}

ExternalLookupResult CachedLookup::lookup(const std::string& title_norm) {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(title_norm); it != cache_.end()) {
        ++hits_;
        return it->second;
    }
    ++misses_;
    if (replay_) {
        throw DataError("replay mode forbids live external lookups; cache miss for \"" +
                        title_norm + "\"");
    }
    if (!inner_) {
        throw DataError("no external lookup port configured");
    }
    // Token bucket: one token per min_interval.
    if (min_interval_sec_ > 0) {
        const auto now = std::chrono::steady_clock::now().time_since_epoch();
        const std::int64_t now_us = std::chrono::duration_cast<std::chrono::microseconds>(now).count();
        if (last_refill_us_ > 0) {
            tokens_ += (now_us - last_refill_us_) / 1e6 / min_interval_sec_;
            if (tokens_ > 1.0) tokens_ = 1.0;
        }
        last_refill_us_ = now_us;
        if (tokens_ < 1.0) {
            const auto wait_us = static_cast<std::int64_t>((1.0 - tokens_) * min_interval_sec_ * 1e6);
            std::this_thread::sleep_for(std::chrono::microseconds(wait_us));
            last_refill_us_ += wait_us;
        }
        tokens_ -= 1.0;
    }
    ExternalLookupResult r = inner_->lookup(title_norm);
    r.query_title_norm = title_norm;
    cache_[title_norm] = r;
    json j;
    j["query_title_norm"] = r.query_title_norm;
    j["outcome"] = outcome_str(r.outcome);
    j["evidence_count"] = r.evidence_count;
    j["fetched_at"] = r.fetched_at;
    std::ofstream out(cache_path_, std::ios::app);
    if (out) out << j.dump() << '\n';
    return r;
}

// ---------------------------------------------------------------------------
// Cross-reference index

CrossRefIndex CrossRefIndex::build(const std::vector<ParsedReference>& refs) {
    CrossRefIndex idx;
    for (const auto& ref : refs) {
        if (!ref.title_norm) continue;
        idx.citers_[*ref.title_norm].push_back(ref.raw.paper_id);
    }
    for (auto& [title, papers] : idx.citers_) {
        std::sort(papers.begin(), papers.end());
        papers.erase(std::unique(papers.begin(), papers.end()), papers.end());
    }
    return idx;
}

std::size_t CrossRefIndex::citing_papers(std::string_view title_norm,
                                         std::string_view exclude_paper) const {
    auto it = citers_.find(std::string(title_norm));
    if (it == citers_.end()) return 0;
    std::size_t n = it->second.size();
    if (std::binary_search(it->second.begin(), it->second.end(), std::string(exclude_paper))) --n;
    return n;
}

bool detect_citation_only(std::string_view title_norm, const CrossRefIndex& crossref,
                          std::string_view current_paper, const bibindex::TitleIndex& index) {
    if (index.has_exact_title(title_norm)) return false;
    return crossref.citing_papers(title_norm, current_paper) >= 2;
}

// ---------------------------------------------------------------------------
// Funnel

Verdict verify_reference(const ParsedReference& parsed, const bibindex::TitleIndex& index,
                         const CrossRefIndex& crossref, const VerifyPorts& ports,
                         const MatchConfig& cfg, bibindex::QueryWorkspace& ws,
                         StageCounters& counters) {
    Verdict v;
    v.paper_id = parsed.raw.paper_id;
    v.ref_index = parsed.raw.index_in_paper;

    // Stage 1: retrieval + string-similarity match.
    if (parsed.title_norm) {
        const auto candidates = index.query_ids(*parsed.title_norm, cfg.candidates_k, ws);
        if (auto m = match_title(parsed, candidates, index, cfg)) {
            v.status = VerdictStatus::Matched;
            v.matched_record_id = m->record_id;
            v.similarity = m->similarity;
            v.stage = 1;
            return v;
        }
    }

    // Stage 2: non-academic filter. Port failures keep the reference in the
    // pool (conservative) and are counted.
    static RuleClassifier default_classifier;
    ReferenceClassifier* classifier = ports.classifier ? ports.classifier : &default_classifier;
    bool academic = true;
    try {
        academic = classifier->is_academic(parsed);
    } catch (const std::exception&) {
        ++counters.classifier_failures;
    }
    if (!academic) {
        v.status = VerdictStatus::NonAcademic;
        v.stage = 2;
        return v;
    }

    // Stage 3: title re-extraction retry.
    const ParsedReference* effective = &parsed;
    refparse::RetitleResult rt = refparse::retitle(parsed);
    if (rt.changed && rt.ref.title_norm) {
        const auto candidates = index.query_ids(*rt.ref.title_norm, cfg.candidates_k, ws);
        if (auto m = match_title(rt.ref, candidates, index, cfg)) {
            v.status = VerdictStatus::MatchedAfterRetitle;
            v.matched_record_id = m->record_id;
            v.similarity = m->similarity;
            v.stage = 3;
            return v;
        }
        effective = &rt.ref;
    }

    // Stage 4: external lookup, then citation-only detection.
    v.stage = 4;
    const std::string* title = nullptr;
    if (effective->title_norm) {
        title = &*effective->title_norm;
    } else if (parsed.title_norm) {
        title = &*parsed.title_norm;
    }
    if (title && ports.external) {
        try {
            const ExternalLookupResult r = ports.external->lookup(*title);
            if (r.outcome == LookupOutcome::RecordFound ||
                r.outcome == LookupOutcome::CitedByMultiple) {
                v.status = VerdictStatus::ExternallyVerified;
                return v;
            }
        } catch (const std::exception&) {
            ++counters.external_failures;  // falls through to the local decision
        }
    }
    if (title && detect_citation_only(*title, crossref, parsed.raw.paper_id, index)) {
        v.status = VerdictStatus::CitationOnly;
        return v;
    }
    v.status = VerdictStatus::Unmatched;
    return v;
}

std::pair<std::vector<Verdict>, FunnelReport> verify_corpus(
    const std::vector<ParsedReference>& refs, const bibindex::TitleIndex& index,
    const VerifyPorts& ports, const MatchConfig& cfg, unsigned workers) {
    // Stable processing order: (paper_id, index_in_paper).
    std::vector<std::uint32_t> order(refs.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&refs](std::uint32_t a, std::uint32_t b) {
        const auto& ra = refs[a].raw;
        const auto& rb = refs[b].raw;
        if (ra.paper_id != rb.paper_id) return ra.paper_id < rb.paper_id;
        return ra.index_in_paper < rb.index_in_paper;
    });

    const CrossRefIndex crossref = CrossRefIndex::build(refs);

    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, std::max<std::size_t>(1, refs.size()));

    std::vector<Verdict> verdicts(refs.size());
    std::vector<StageCounters> counters(workers);

    auto run_chunk = [&](unsigned w) {
        bibindex::QueryWorkspace ws = index.make_workspace();
        for (std::size_t slot = w; slot < order.size(); slot += workers) {
            verdicts[slot] = verify_reference(refs[order[slot]], index, crossref, ports, cfg, ws,
                                              counters[w]);
        }
    };
    if (workers == 1) {
        run_chunk(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run_chunk, w);
        for (auto& t : threads) t.join();
    }

    FunnelReport report;
    report.total = verdicts.size();
    for (const auto& v : verdicts) ++report.by_status[static_cast<int>(v.status)];
    for (const auto& c : counters) {
        report.classifier_failures += c.classifier_failures;
        report.external_failures += c.external_failures;
    }
    if (report.total > 0) {
        const double total = static_cast<double>(report.total);
        const double after1 = total - static_cast<double>(report.count(VerdictStatus::Matched));
        const double after2 = after1 - static_cast<double>(report.count(VerdictStatus::NonAcademic));
        const double after3 =
            after2 - static_cast<double>(report.count(VerdictStatus::MatchedAfterRetitle));
        report.unresolved_after_stage = {after1 / total, after2 / total, after3 / total};
    }
    return {std::move(verdicts), report};
}

}  // namespace citefix::matcher
