#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "citefix/types.hpp"

namespace citefix::bibindex {

// ---------------------------------------------------------------------------
// Catalog / author dump ingestion (line-delimited JSON, see README formats)

struct IngestedCatalog {
    std::vector<CatalogRecord> records;
    IngestReport report;
};

struct IngestedAuthors {
    std::vector<AuthorProfile> profiles;
    IngestReport report;
};

// Malformed lines are counted and skipped; duplicate record ids rejected
// (first wins). An optional {"schema": ...} header line is validated and
// raises SchemaError on mismatch.
IngestedCatalog ingest_catalog(std::istream& in);
IngestedAuthors ingest_authors(std::istream& in);

// Content hash over records, independent of dump formatting.
std::uint64_t catalog_content_hash(const std::vector<CatalogRecord>& records);

// ---------------------------------------------------------------------------
// Title index

struct ScoredCandidate {
    std::uint32_t record = 0;  // dense internal id (records sorted by record_id)
    double score = 0.0;
};

// Per-caller scratch buffers for queries; one per worker thread.
struct QueryWorkspace {
    std::vector<double> score;
    std::vector<std::uint32_t> stamp;
    std::vector<std::uint32_t> touched;
    std::uint32_t epoch = 0;
};

class TitleIndex {
public:
    // pre: records non-empty. Records are sorted by record_id internally, so
    // the build is deterministic for any input ordering.
    static TitleIndex build(std::vector<CatalogRecord> records);

    // Candidates scored by sum of idf(token) = ln(1 + N/df) over shared
    // indexed tokens; top-k by score, ties by ascending record_id. Records
    // whose title_norm equals the query are always included (exact-equality
    // fallback for stop-word-only titles).
    std::vector<ScoredCandidate> query_ids(std::string_view title_norm, std::size_t k,
                                           QueryWorkspace& ws) const;
    std::vector<std::pair<std::string, double>> query(std::string_view title_norm,
                                                      std::size_t k) const;

    const CatalogRecord& record(std::uint32_t id) const { return records_[id]; }
    const std::u32string& title_runes(std::uint32_t id) const { return title_runes_[id]; }
    // Sorted unique token ids of a record's title (all tokens, indexed or not).
    const std::vector<std::uint32_t>& record_tokens(std::uint32_t id) const {
        return record_tokens_[id];
    }
    std::optional<std::uint32_t> token_id(std::string_view token) const;
    bool has_exact_title(std::string_view title_norm) const;

    std::size_t size() const { return records_.size(); }
    std::uint64_t catalog_hash() const { return catalog_hash_; }
    std::uint32_t df(std::string_view token) const;

    QueryWorkspace make_workspace() const;

private:
    std::vector<CatalogRecord> records_;
    std::vector<std::u32string> title_runes_;
    std::vector<std::vector<std::uint32_t>> record_tokens_;
    std::unordered_map<std::string, std::uint32_t> token_ids_;
    std::vector<std::vector<std::uint32_t>> postings_;  // indexed tokens only
    std::vector<double> idf_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> exact_;
    std::uint64_t catalog_hash_ = 0;
};

// ---------------------------------------------------------------------------
// Author lookup

struct PersonName {
    std::string surname_norm;
    std::string initials;  // lowercase given-name initials, in order
};

PersonName parse_person_name(std::string_view name);

class AuthorDirectory {
public:
    static AuthorDirectory build(std::vector<AuthorProfile> profiles);

    // All profiles whose normalized surname matches and whose given-initials
    // are prefix-compatible (missing initials match anything); ordered by
    // author_id.
    std::vector<const AuthorProfile*> lookup(std::string_view name) const;
    const AuthorProfile* by_id(std::string_view author_id) const;
    const std::vector<AuthorProfile>& profiles() const { return profiles_; }

private:
    std::vector<AuthorProfile> profiles_;  // sorted by author_id
    std::unordered_map<std::string, std::vector<std::uint32_t>> by_surname_;
    std::unordered_map<std::string, std::uint32_t> by_id_;
};

// Spec-shaped convenience over a profile list.
std::vector<const AuthorProfile*> lookup_author(const AuthorDirectory& directory,
                                                std::string_view name);

// ---------------------------------------------------------------------------
// Snapshot persistence (single versioned binary file, magic "CFIX1")

struct Snapshot {
    std::vector<CatalogRecord> records;
    std::vector<AuthorProfile> profiles;
    std::uint64_t catalog_hash = 0;
};

void save_snapshot(const std::string& path, const std::vector<CatalogRecord>& records,
                   const std::vector<AuthorProfile>& profiles);
Snapshot load_snapshot(const std::string& path);

}  // namespace citefix::bibindex
