#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "citefix/bibindex.hpp"
#include "citefix/types.hpp"

namespace citefix::matcher {

struct MatchConfig {
    double sim_threshold = 0.95;       // unconditional acceptance
    double sim_threshold_year = 0.90;  // acceptance when years agree within year_slack
    int year_slack = 1;
    std::size_t candidates_k = 50;
};

struct TitleMatch {
    std::uint32_t record = 0;  // internal id
    std::string record_id;
    double similarity = 0.0;
};

// Similarity = max(levenshtein_similarity, token_jaccard) against each
// candidate; accept at sim >= sim_threshold, or sim >= sim_threshold_year
// with both years present and |delta| <= year_slack. Among acceptable
// candidates the highest similarity wins; ties broken by year match, then
// higher n_citations, then ascending record_id.
std::optional<TitleMatch> match_title(const ParsedReference& parsed,
                                      const std::vector<bibindex::ScoredCandidate>& candidates,
                                      const bibindex::TitleIndex& index, const MatchConfig& cfg);

// ---------------------------------------------------------------------------
// Ports

// Stage-2 reference-class port. Throwing implementations are treated as
// ACADEMIC (the reference stays in the pool) and the failure is counted.
class ReferenceClassifier {
public:
    virtual ~ReferenceClassifier() = default;
    virtual bool is_academic(const ParsedReference& ref) = 0;
};

struct RuleClassifierConfig {
    std::vector<std::string> scholarly_domains;
    std::vector<std::string> nonscholarly_domains;
    std::vector<std::string> nonacademic_patterns;  // lowercase substrings
    static RuleClassifierConfig defaults();
};

// Deterministic offline rule set: NON_ACADEMIC iff title absent, or a URL to
// a non-scholarly domain appears, or neither year nor author block was found,
// or a software/dataset/news pattern matches.
class RuleClassifier : public ReferenceClassifier {
public:
    RuleClassifier() : cfg_(RuleClassifierConfig::defaults()) {}
    explicit RuleClassifier(RuleClassifierConfig cfg) : cfg_(std::move(cfg)) {}
    bool is_academic(const ParsedReference& ref) override;

private:
    RuleClassifierConfig cfg_;
};

// Stage-4 external lookup port.
class ExternalLookup {
public:
    virtual ~ExternalLookup() = default;
    virtual ExternalLookupResult lookup(const std::string& title_norm) = 0;
};

// No-op stub: every query resolves NOT_FOUND.
class NullLookup : public ExternalLookup {
public:
    ExternalLookupResult lookup(const std::string& title_norm) override {
        return {title_norm, LookupOutcome::NotFound, 0, 0};
    }
};

// Persistent-cache wrapper: cache hits bypass the inner port; live calls are
// rate limited and appended to the cache file. In replay mode live calls are
// forbidden and a cache miss raises DataError.
class CachedLookup : public ExternalLookup {
public:
    CachedLookup(std::unique_ptr<ExternalLookup> inner, std::string cache_path, bool replay,
                 double max_calls_per_sec = 10.0);
    ExternalLookupResult lookup(const std::string& title_norm) override;
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }

private:
    std::unique_ptr<ExternalLookup> inner_;
    std::string cache_path_;
    bool replay_;
    double min_interval_sec_;
    double tokens_;
    std::int64_t last_refill_us_ = 0;
    std::unordered_map<std::string, ExternalLookupResult> cache_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
    std::mutex mu_;  // the one serialized resource in the pipeline
};

// ---------------------------------------------------------------------------
// Cross-reference index (normalized title -> distinct citing papers)

class CrossRefIndex {
public:
    static CrossRefIndex build(const std::vector<ParsedReference>& refs);
    // Distinct citing papers for the title, excluding `exclude_paper`.
    std::size_t citing_papers(std::string_view title_norm, std::string_view exclude_paper) const;

private:
    std::unordered_map<std::string, std::vector<std::string>> citers_;  // sorted unique
};

// True iff the title matches no catalog record exactly and appears in the
// reference lists of >= 2 distinct papers other than `current_paper`.
bool detect_citation_only(std::string_view title_norm, const CrossRefIndex& crossref,
                          std::string_view current_paper, const bibindex::TitleIndex& index);

// ---------------------------------------------------------------------------
// Funnel

struct VerifyPorts {
    ReferenceClassifier* classifier = nullptr;  // null -> built-in rule set
    ExternalLookup* external = nullptr;         // null -> NOT_FOUND stub
};

struct StageCounters {
    std::uint64_t classifier_failures = 0;
    std::uint64_t external_failures = 0;
};

Verdict verify_reference(const ParsedReference& parsed, const bibindex::TitleIndex& index,
                         const CrossRefIndex& crossref, const VerifyPorts& ports,
                         const MatchConfig& cfg, bibindex::QueryWorkspace& ws,
                         StageCounters& counters);

// Runs the funnel over a corpus; verdicts come back in (paper_id,
// index_in_paper) order regardless of worker count.
std::pair<std::vector<Verdict>, FunnelReport> verify_corpus(
    const std::vector<ParsedReference>& refs, const bibindex::TitleIndex& index,
    const VerifyPorts& ports, const MatchConfig& cfg, unsigned workers = 0);

}  // namespace citefix::matcher
