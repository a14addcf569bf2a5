#include "citefix/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "citefix/errors.hpp"
#include "citefix/refparse.hpp"
#include "citefix/text.hpp"

namespace citefix::io {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kFnvPrime = 1099511628211ull;

SourceFormat format_from(const std::string& s) {
    if (s == "PLAIN") return SourceFormat::Plain;
    if (s == "LATEX_BBL") return SourceFormat::LatexBbl;
    if (s == "JATS_XML") return SourceFormat::JatsXml;
    if (s == "PREPARSED") return SourceFormat::Preparsed;
    throw DataError("unknown reference format: \"" + s + "\"");
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t file_hash(const std::string& path) { return fnv1a64(read_file(path)); }

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

void atomic_write(const std::string& path, std::string_view content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw DataError("cannot finalize: " + path);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw DataError("cannot create directory " + path + ": " + ec.message());
}

std::string format_rate(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// ---------------------------------------------------------------------------
// Corpus

namespace {

PaperRecord paper_from_json(const json& j) {
    PaperRecord p;
    p.paper_id = j.at("paper_id").get<std::string>();
    p.corpus = j.value("corpus", std::string("default"));
    p.field = j.value("field", std::string("unknown"));
    if (j.contains("subfield") && !j.at("subfield").is_null()) {
        p.subfield = j.at("subfield").get<std::string>();
    }
    p.month = YearMonth::parse(j.at("month").get<std::string>());
    if (j.contains("author_ids")) {
        p.author_ids = j.at("author_ids").get<std::vector<std::string>>();
    }
    p.team_size = j.contains("team_size") ? j.at("team_size").get<std::uint32_t>()
                                          : static_cast<std::uint32_t>(p.author_ids.size());
    if (!p.author_ids.empty() && p.team_size != p.author_ids.size()) {
        throw DataError("paper " + p.paper_id + ": team_size disagrees with author_ids length");
    }
    if (p.team_size == 0) p.team_size = 1;
    if (j.contains("llm_use_score") && !j.at("llm_use_score").is_null()) {
        p.llm_use_score = j.at("llm_use_score").get<double>();
    }
    if (j.contains("moderation_label") && !j.at("moderation_label").is_null()) {
        const auto m = j.at("moderation_label").get<std::string>();
        if (m == "ACCEPTED") {
            p.moderation_label = ModerationLabel::Accepted;
        } else if (m == "REJECTED") {
            p.moderation_label = ModerationLabel::Rejected;
        } else {
            throw DataError("paper " + p.paper_id + ": unknown moderation label \"" + m + "\"");
        }
    }
    if (j.contains("journal_id") && !j.at("journal_id").is_null()) {
        p.journal_id = j.at("journal_id").get<std::string>();
    }
    if (j.contains("published_link") && !j.at("published_link").is_null()) {
        p.published_link = j.at("published_link").get<std::string>();
    }
    return p;
}

json paper_to_json(const PaperRecord& p) {
    json j;
    j["paper_id"] = p.paper_id;
    j["corpus"] = p.corpus;
    j["field"] = p.field;
    if (p.subfield) j["subfield"] = *p.subfield;
    j["month"] = p.month.str();
    j["team_size"] = p.team_size;
    if (!p.author_ids.empty()) j["author_ids"] = p.author_ids;
    if (p.llm_use_score) j["llm_use_score"] = *p.llm_use_score;
    if (p.moderation_label) {
        j["moderation_label"] =
            *p.moderation_label == ModerationLabel::Accepted ? "ACCEPTED" : "REJECTED";
    }
    if (p.journal_id) j["journal_id"] = *p.journal_id;
    if (p.published_link) j["published_link"] = *p.published_link;
    return j;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus: " + path);
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed corpus line");
        }
        PaperRecord paper;
        try {
            paper = paper_from_json(j);
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        std::uint32_t index = 0;
        if (j.contains("references")) {
            for (const auto& r : j.at("references")) {
                if (r.contains("text")) {
                    RawReference raw;
                    raw.paper_id = paper.paper_id;
                    raw.index_in_paper = index++;
                    raw.text = r.at("text").get<std::string>();
                    raw.source_format = format_from(r.value("format", std::string("PLAIN")));
                    if (text::trim(raw.text).empty()) {
                        throw DataError(path + ":" + std::to_string(lineno) +
                                        ": empty reference text");
                    }
                    corpus.refs.push_back(refparse::parse_reference(raw));
                } else {
                    ParsedReference ref;
                    ref.raw.paper_id = paper.paper_id;
                    ref.raw.index_in_paper = index++;
                    ref.raw.source_format = SourceFormat::Preparsed;
                    if (r.contains("title") && !r.at("title").is_null()) {
                        const auto title = r.at("title").get<std::string>();
                        const std::string norm = text::normalize_title_or_empty(title);
                        if (!norm.empty()) {
                            ref.title = title;
                            ref.title_norm = norm;
                        }
                    }
                    if (r.contains("authors")) {
                        ref.authors = r.at("authors").get<std::vector<std::string>>();
                    }
                    if (r.contains("year") && !r.at("year").is_null()) {
                        ref.year = r.at("year").get<int>();
                    }
                    if (r.contains("venue") && !r.at("venue").is_null()) {
                        ref.venue = r.at("venue").get<std::string>();
                    }
                    std::string rendered;
                    for (const auto& a : ref.authors) {
                        rendered += a;
                        rendered += ", ";
                    }
                    if (ref.title) rendered += "\"" + *ref.title + ",\" ";
                    if (ref.venue) rendered += *ref.venue + ", ";
                    if (ref.year) rendered += std::to_string(*ref.year);
                    ref.raw.text = text::trim(rendered).empty() ? "(preparsed)" : rendered;
                    int found = 0;
                    if (ref.title) ++found;
                    if (ref.year) ++found;
                    if (!ref.authors.empty()) ++found;
                    ref.parse_confidence = found / 3.0;
                    corpus.refs.push_back(std::move(ref));
                }
            }
        }
        corpus.papers.push_back(std::move(paper));
    }
    return corpus;
}

void save_raw_corpus(const std::string& path, const std::vector<RawCorpusPaper>& papers) {
    std::string buf;
    for (const auto& paper : papers) {
        json j = paper_to_json(paper.meta);
        json refs = json::array();
        for (const auto& text : paper.reference_texts) {
            refs.push_back({{"text", text}, {"format", "PLAIN"}});
        }
        j["references"] = std::move(refs);
        buf += j.dump();
        buf += '\n';
    }
    atomic_write(path, buf);
}

std::unordered_map<std::string, PaperRecord> paper_table(const std::vector<PaperRecord>& papers) {
    std::unordered_map<std::string, PaperRecord> out;
    out.reserve(papers.size());
    for (const auto& p : papers) out[p.paper_id] = p;
    return out;
}

// ---------------------------------------------------------------------------
// Verdicts

void save_verdicts(const std::string& path, const std::vector<Verdict>& verdicts) {
    std::string buf;
    for (const auto& v : verdicts) {
        json j;
        j["paper_id"] = v.paper_id;
        j["ref_index"] = v.ref_index;
        j["status"] = to_string(v.status);
        j["matched_record_id"] = v.matched_record_id ? json(*v.matched_record_id) : json(nullptr);
        j["similarity"] = v.similarity ? json(*v.similarity) : json(nullptr);
        j["stage"] = v.stage;
        buf += j.dump();
        buf += '\n';
    }
    atomic_write(path, buf);
}

std::vector<Verdict> load_verdicts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open verdicts: " + path);
    std::vector<Verdict> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed verdict line");
        }
        Verdict v;
        try {
            v.paper_id = j.at("paper_id").get<std::string>();
            v.ref_index = j.at("ref_index").get<std::uint32_t>();
            const auto status = verdict_status_from_string(j.at("status").get<std::string>());
            if (!status) throw DataError("unknown verdict status");
            v.status = *status;
            if (j.contains("matched_record_id") && !j.at("matched_record_id").is_null()) {
                v.matched_record_id = j.at("matched_record_id").get<std::string>();
            }
            if (j.contains("similarity") && !j.at("similarity").is_null()) {
                v.similarity = j.at("similarity").get<double>();
            }
            v.stage = j.at("stage").get<int>();
        } catch (const json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(std::move(v));
    }
    return out;
}

void save_funnel(const std::string& path, const FunnelReport& report) {
    json j;
    j["total"] = report.total;
    json statuses;
    for (int s = 0; s < kNumVerdictStatuses; ++s) {
        statuses[to_string(static_cast<VerdictStatus>(s))] = report.by_status[s];
    }
    j["by_status"] = std::move(statuses);
    j["unresolved_after_stage"] = {report.unresolved_after_stage[0],
                                   report.unresolved_after_stage[1],
                                   report.unresolved_after_stage[2]};
    j["classifier_failures"] = report.classifier_failures;
    j["external_failures"] = report.external_failures;
    atomic_write(path, j.dump(2) + "\n");
}

void save_parsed_refs(const std::string& path, const std::vector<ParsedReference>& refs) {
    std::string buf;
    for (const auto& r : refs) {
        json j;
        j["paper_id"] = r.raw.paper_id;
        j["index"] = r.raw.index_in_paper;
        j["title"] = r.title ? json(*r.title) : json(nullptr);
        j["title_norm"] = r.title_norm ? json(*r.title_norm) : json(nullptr);
        j["authors"] = r.authors;
        j["year"] = r.year ? json(*r.year) : json(nullptr);
        j["venue"] = r.venue ? json(*r.venue) : json(nullptr);
        j["parse_confidence"] = r.parse_confidence;
        buf += j.dump();
        buf += '\n';
    }
    atomic_write(path, buf);
}

}  // namespace citefix::io
