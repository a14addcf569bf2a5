#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "citefix/types.hpp"

namespace citefix::io {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t file_hash(const std::string& path);
std::string hash_hex(std::uint64_t h);

// Writes content to a temp file in the same directory, then renames it over
// the target, so interrupted runs never leave truncated tables.
void atomic_write(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);  // DataError if unreadable
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

// Fixed-point rate formatting used by every CSV output (6 decimals).
std::string format_rate(double value);
std::string csv_field(std::string_view s);

// ---------------------------------------------------------------------------
// Corpus file: one JSON object per line, paper metadata plus its references.
// Reference entries are either raw ({"text", "format"}) or preparsed
// ({"title", "authors", "year", "venue"}).

struct Corpus {
    std::vector<PaperRecord> papers;
    std::vector<ParsedReference> refs;  // parsed, grouped by paper in file order
};

Corpus load_corpus(const std::string& path);

// Raw corpus as emitted by the synthetic generator.
struct RawCorpusPaper {
    PaperRecord meta;
    std::vector<std::string> reference_texts;
};

void save_raw_corpus(const std::string& path, const std::vector<RawCorpusPaper>& papers);

std::unordered_map<std::string, PaperRecord> paper_table(const std::vector<PaperRecord>& papers);

// ---------------------------------------------------------------------------
// Verdicts: line-delimited {paper_id, ref_index, status, matched_record_id,
// similarity, stage}.

void save_verdicts(const std::string& path, const std::vector<Verdict>& verdicts);
std::vector<Verdict> load_verdicts(const std::string& path);

void save_funnel(const std::string& path, const FunnelReport& report);

void save_parsed_refs(const std::string& path, const std::vector<ParsedReference>& refs);

}  // namespace citefix::io
