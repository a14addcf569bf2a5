#include "citefix/bibindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>

#include <json.hpp>

#include "citefix/errors.hpp"
#include "citefix/text.hpp"

namespace citefix::bibindex {

namespace {

using nlohmann::json;

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;
constexpr std::string_view kCatalogSchema = "citefix-catalog-1";
constexpr std::string_view kAuthorSchema = "citefix-authors-1";

std::uint64_t fnv_mix(std::uint64_t h, std::string_view s) {
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    h ^= 0xFF;
    h *= kFnvPrime;
    return h;
}

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xFF;
        h *= kFnvPrime;
    }
    return h;
}

// Returns true when the first line is a schema header; validates it.
bool check_schema_header(const json& j, std::string_view expected) {
    if (!j.is_object() || !j.contains("schema")) return false;
    const auto declared = j.at("schema").get<std::string>();
    if (declared != expected) {
        throw SchemaError("dump declares schema \"" + declared + "\", expected \"" +
                          std::string(expected) + "\"");
    }
    return true;
}

}  // namespace

IngestedCatalog ingest_catalog(std::istream& in) {
    IngestedCatalog out;
    std::unordered_map<std::string, bool> seen;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        ++out.report.read;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++out.report.malformed;
            continue;
        }
        if (first) {
            first = false;
            if (check_schema_header(j, kCatalogSchema)) {
                --out.report.read;
                continue;
            }
        }
        try {
            CatalogRecord rec;
            rec.record_id = j.at("record_id").get<std::string>();
            const auto title = j.at("title").get<std::string>();
            rec.title_norm = text::normalize_title(title);
            if (j.contains("year") && !j.at("year").is_null()) rec.year = j.at("year").get<int>();
            if (j.contains("venue") && !j.at("venue").is_null()) {
                rec.venue = j.at("venue").get<std::string>();
            }
            if (j.contains("author_ids")) {
                rec.author_ids = j.at("author_ids").get<std::vector<std::string>>();
            }
            if (j.contains("n_citations") && !j.at("n_citations").is_null()) {
                rec.n_citations = j.at("n_citations").get<std::uint64_t>();
            }
            if (rec.record_id.empty()) {
                ++out.report.malformed;
                continue;
            }
            if (!seen.emplace(rec.record_id, true).second) {
                ++out.report.rejected;
                continue;
            }
            out.records.push_back(std::move(rec));
            ++out.report.accepted;
        } catch (const SchemaError&) {
            throw;
        } catch (const std::exception&) {
            ++out.report.malformed;
        }
    }
    return out;
}

IngestedAuthors ingest_authors(std::istream& in) {
    IngestedAuthors out;
    std::unordered_map<std::string, bool> seen;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        ++out.report.read;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++out.report.malformed;
            continue;
        }
        if (first) {
            first = false;
            if (check_schema_header(j, kAuthorSchema)) {
                --out.report.read;
                continue;
            }
        }
        try {
            AuthorProfile p;
            p.author_id = j.at("author_id").get<std::string>();
            p.name = j.at("name").get<std::string>();
            p.n_pubs_pre_cutoff = j.at("n_pubs_pre_cutoff").get<std::uint32_t>();
            p.n_pubs_total = j.at("n_pubs_total").get<std::uint32_t>();
            p.n_citations = j.at("n_citations").get<std::uint64_t>();
            if (j.contains("gender_label") && !j.at("gender_label").is_null()) {
                const auto g = j.at("gender_label").get<std::string>();
                if (g == "M") {
                    p.gender_label = Gender::Male;
                } else if (g == "F") {
                    p.gender_label = Gender::Female;
                }
            }
            if (p.author_id.empty() || p.n_pubs_pre_cutoff > p.n_pubs_total) {
                ++out.report.malformed;
                continue;
            }
            if (j.contains("paper_titles")) {
                for (const auto& t : j.at("paper_titles")) {
                    const std::string norm = text::normalize_title_or_empty(t.get<std::string>());
                    for (const auto& tok : text::tokens(norm)) {
                        p.term_profile[tok] += 1.0;
                    }
                }
            }
            if (!seen.emplace(p.author_id, true).second) {
                ++out.report.rejected;
                continue;
            }
            out.profiles.push_back(std::move(p));
            ++out.report.accepted;
        } catch (const SchemaError&) {
            throw;
        } catch (const std::exception&) {
            ++out.report.malformed;
        }
    }
    return out;
}

std::uint64_t catalog_content_hash(const std::vector<CatalogRecord>& records) {
    std::uint64_t h = kFnvOffset;
    for (const auto& r : records) {
        h = fnv_mix(h, r.record_id);
        h = fnv_mix(h, r.title_norm);
        h = fnv_mix(h, static_cast<std::uint64_t>(r.year ? *r.year + 10000 : 0));
        h = fnv_mix(h, r.venue ? *r.venue : std::string_view(""));
        for (const auto& a : r.author_ids) h = fnv_mix(h, a);
        h = fnv_mix(h, r.n_citations);
    }
    return h;
}

// ---------------------------------------------------------------------------
// TitleIndex

TitleIndex TitleIndex::build(std::vector<CatalogRecord> records) {
    if (records.empty()) throw ConfigError("build_index requires a non-empty catalog");
    std::sort(records.begin(), records.end(),
              [](const CatalogRecord& a, const CatalogRecord& b) { return a.record_id < b.record_id; });

    TitleIndex idx;
    idx.catalog_hash_ = catalog_content_hash(records);
    idx.records_ = std::move(records);
    const auto n = static_cast<std::uint32_t>(idx.records_.size());
    idx.title_runes_.reserve(n);
    idx.record_tokens_.reserve(n);

    for (std::uint32_t id = 0; id < n; ++id) {
        const auto& rec = idx.records_[id];
        idx.title_runes_.push_back(text::decode_utf8(rec.title_norm));
        idx.exact_[rec.title_norm].push_back(id);

        auto toks = text::tokens(rec.title_norm);
        std::sort(toks.begin(), toks.end());
        toks.erase(std::unique(toks.begin(), toks.end()), toks.end());

        std::vector<std::uint32_t> ids;
        ids.reserve(toks.size());
        for (auto& tok : toks) {
            const bool indexed = text::rune_count(tok) >= 2;
            auto [it, inserted] = idx.token_ids_.emplace(std::move(tok), idx.postings_.size());
            if (inserted) idx.postings_.emplace_back();
            if (indexed) idx.postings_[it->second].push_back(id);
            ids.push_back(it->second);
        }
        std::sort(ids.begin(), ids.end());
        idx.record_tokens_.push_back(std::move(ids));
    }

    idx.idf_.resize(idx.postings_.size(), 0.0);
    for (std::size_t t = 0; t < idx.postings_.size(); ++t) {
        if (!idx.postings_[t].empty()) {
            idx.idf_[t] = std::log(1.0 + static_cast<double>(n) /
                                             static_cast<double>(idx.postings_[t].size()));
        }
    }
    return idx;
}

QueryWorkspace TitleIndex::make_workspace() const {
    QueryWorkspace ws;
    ws.score.assign(records_.size(), 0.0);
    ws.stamp.assign(records_.size(), 0);
    ws.epoch = 0;
    return ws;
}

std::optional<std::uint32_t> TitleIndex::token_id(std::string_view token) const {
    auto it = token_ids_.find(std::string(token));
    if (it == token_ids_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t TitleIndex::df(std::string_view token) const {
    auto id = token_id(token);
    return id ? static_cast<std::uint32_t>(postings_[*id].size()) : 0;
}

bool TitleIndex::has_exact_title(std::string_view title_norm) const {
    return exact_.find(std::string(title_norm)) != exact_.end();
}

std::vector<ScoredCandidate> TitleIndex::query_ids(std::string_view title_norm, std::size_t k,
                                                   QueryWorkspace& ws) const {
    std::vector<ScoredCandidate> out;
    if (k == 0 || title_norm.empty()) return out;
    if (ws.score.size() != records_.size()) {
        ws = make_workspace();
    }
    if (++ws.epoch == 0) {  // stamp wrap-around
        std::fill(ws.stamp.begin(), ws.stamp.end(), 0);
        ws.epoch = 1;
    }
    ws.touched.clear();
    const std::uint32_t epoch = ws.epoch;

    auto touch = [&ws, epoch](std::uint32_t id, double add) {
        if (ws.stamp[id] != epoch) {
            ws.stamp[id] = epoch;
            ws.score[id] = 0.0;
            ws.touched.push_back(id);
        }
        ws.score[id] += add;
    };

    auto qtoks = text::tokens(title_norm);
    std::sort(qtoks.begin(), qtoks.end());
    qtoks.erase(std::unique(qtoks.begin(), qtoks.end()), qtoks.end());
    for (const auto& tok : qtoks) {
        auto it = token_ids_.find(tok);
        if (it == token_ids_.end()) continue;
        const auto& posting = postings_[it->second];
        if (posting.empty()) continue;
        const double idf = idf_[it->second];
        for (const std::uint32_t id : posting) touch(id, idf);
    }
    // Exact-equality fallback keeps titles with no indexable tokens findable.
    if (auto it = exact_.find(std::string(title_norm)); it != exact_.end()) {
        for (const std::uint32_t id : it->second) touch(id, 0.0);
    }

    if (ws.touched.empty()) return out;
    auto better = [&ws](std::uint32_t a, std::uint32_t b) {
        if (ws.score[a] != ws.score[b]) return ws.score[a] > ws.score[b];
        return a < b;  // records sorted by record_id, so id order == record_id order
    };
    if (ws.touched.size() > k) {
        std::nth_element(ws.touched.begin(), ws.touched.begin() + k - 1, ws.touched.end(), better);
        ws.touched.resize(k);
    }
    std::sort(ws.touched.begin(), ws.touched.end(), better);
    out.reserve(ws.touched.size());
    for (const std::uint32_t id : ws.touched) out.push_back({id, ws.score[id]});
    return out;
}

std::vector<std::pair<std::string, double>> TitleIndex::query(std::string_view title_norm,
                                                              std::size_t k) const {
    QueryWorkspace ws = make_workspace();
    std::vector<std::pair<std::string, double>> out;
    for (const auto& c : query_ids(title_norm, k, ws)) {
        out.emplace_back(records_[c.record].record_id, c.score);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Author lookup

PersonName parse_person_name(std::string_view name) {
    PersonName out;
    const std::string trimmed = text::trim(name);
    std::string surname_part;
    std::string given_part;
    const std::size_t comma = trimmed.find(',');
    if (comma != std::string::npos) {
        surname_part = text::trim(trimmed.substr(0, comma));
        given_part = text::trim(trimmed.substr(comma + 1));
    } else {
        const auto toks = text::tokens(trimmed);
        if (toks.empty()) return out;
        // Last token is the surname; attach preceding lowercase particles.
        std::size_t s = toks.size() - 1;
        static const char* kParticles[] = {"van", "de", "der", "den", "la", "le",
                                           "von", "di", "da", "del", "dos", "bin", "al"};
        while (s > 0) {
            const std::string low = text::lower_ascii(toks[s - 1]);
            bool particle = false;
            for (const char* p : kParticles) {
                if (low == p) particle = true;
            }
            if (!particle) break;
            --s;
        }
        for (std::size_t i = s; i < toks.size(); ++i) {
            if (!surname_part.empty()) surname_part += ' ';
            surname_part += toks[i];
        }
        for (std::size_t i = 0; i < s; ++i) {
            if (!given_part.empty()) given_part += ' ';
            given_part += toks[i];
        }
    }
    out.surname_norm = text::normalize_title_or_empty(surname_part);
    for (const auto& tok : text::tokens(text::normalize_title_or_empty(given_part))) {
        out.initials += tok[0];
    }
    return out;
}

AuthorDirectory AuthorDirectory::build(std::vector<AuthorProfile> profiles) {
    std::sort(profiles.begin(), profiles.end(),
              [](const AuthorProfile& a, const AuthorProfile& b) { return a.author_id < b.author_id; });
    AuthorDirectory dir;
    dir.profiles_ = std::move(profiles);
    for (std::uint32_t i = 0; i < dir.profiles_.size(); ++i) {
        const PersonName pn = parse_person_name(dir.profiles_[i].name);
        if (!pn.surname_norm.empty()) dir.by_surname_[pn.surname_norm].push_back(i);
        dir.by_id_[dir.profiles_[i].author_id] = i;
    }
    return dir;
}

const AuthorProfile* AuthorDirectory::by_id(std::string_view author_id) const {
    auto it = by_id_.find(std::string(author_id));
    return it == by_id_.end() ? nullptr : &profiles_[it->second];
}

std::vector<const AuthorProfile*> AuthorDirectory::lookup(std::string_view name) const {
    std::vector<const AuthorProfile*> out;
    const PersonName query = parse_person_name(name);
    if (query.surname_norm.empty()) return out;
    auto it = by_surname_.find(query.surname_norm);
    if (it == by_surname_.end()) return out;
    for (const std::uint32_t i : it->second) {
        const PersonName cand = parse_person_name(profiles_[i].name);
        const std::size_t common = std::min(query.initials.size(), cand.initials.size());
        bool compatible = true;
        for (std::size_t j = 0; j < common; ++j) {
            if (query.initials[j] != cand.initials[j]) {
                compatible = false;
                break;
            }
        }
        if (compatible) out.push_back(&profiles_[i]);
    }
    return out;  // by_surname_ lists are in author_id order already
}

std::vector<const AuthorProfile*> lookup_author(const AuthorDirectory& directory,
                                                std::string_view name) {
    return directory.lookup(name);
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

constexpr char kMagic[5] = {'C', 'F', 'I', 'X', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (i * 8)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (i * 8)) & 0xFF));
}

void put_str(std::string& buf, std::string_view s) {
    put_u32(buf, static_cast<std::uint32_t>(s.size()));
    buf.append(s.data(), s.size());
}

void put_f64(std::string& buf, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(buf, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (pos + n > buf.size()) throw SchemaError("truncated snapshot file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (i * 8);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (i * 8);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
};

}  // namespace

void save_snapshot(const std::string& path, const std::vector<CatalogRecord>& records,
                   const std::vector<AuthorProfile>& profiles) {
    std::string buf;
    buf.append(kMagic, 5);
    put_u32(buf, kVersion);
    put_u64(buf, catalog_content_hash(records));
    put_u64(buf, records.size());
    for (const auto& r : records) {
        put_str(buf, r.record_id);
        put_str(buf, r.title_norm);
        put_u32(buf, r.year ? static_cast<std::uint32_t>(*r.year) : 0xFFFFFFFFu);
        put_str(buf, r.venue ? *r.venue : std::string());
        buf.push_back(r.venue ? 1 : 0);
        put_u32(buf, static_cast<std::uint32_t>(r.author_ids.size()));
        for (const auto& a : r.author_ids) put_str(buf, a);
        put_u64(buf, r.n_citations);
    }
    put_u64(buf, profiles.size());
    for (const auto& p : profiles) {
        put_str(buf, p.author_id);
        put_str(buf, p.name);
        put_u32(buf, p.n_pubs_pre_cutoff);
        put_u32(buf, p.n_pubs_total);
        put_u64(buf, p.n_citations);
        buf.push_back(p.gender_label == Gender::Male ? 'M'
                      : p.gender_label == Gender::Female ? 'F'
                                                         : 'U');
        put_u32(buf, static_cast<std::uint32_t>(p.term_profile.size()));
        for (const auto& [term, w] : p.term_profile) {
            put_str(buf, term);
            put_f64(buf, w);
        }
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write snapshot: " + path);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw DataError("cannot finalize snapshot: " + path);
    }
}

Snapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open snapshot: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 5 || std::memcmp(buf.data(), kMagic, 5) != 0) {
        throw SchemaError("not a snapshot file (bad magic): " + path);
    }
    Reader r{buf, 5};
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw SchemaError("unsupported snapshot version " + std::to_string(version));
    }
    Snapshot snap;
    snap.catalog_hash = r.u64();
    const std::uint64_t n_records = r.u64();
    snap.records.reserve(n_records);
    for (std::uint64_t i = 0; i < n_records; ++i) {
        CatalogRecord rec;
        rec.record_id = r.str();
        rec.title_norm = r.str();
        const std::uint32_t year = r.u32();
        if (year != 0xFFFFFFFFu) rec.year = static_cast<int>(year);
        std::string venue = r.str();
        r.need(1);
        const bool has_venue = buf[r.pos++] != 0;
        if (has_venue) rec.venue = std::move(venue);
        const std::uint32_t n_authors = r.u32();
        rec.author_ids.reserve(n_authors);
        for (std::uint32_t a = 0; a < n_authors; ++a) rec.author_ids.push_back(r.str());
        rec.n_citations = r.u64();
        snap.records.push_back(std::move(rec));
    }
    const std::uint64_t n_profiles = r.u64();
    snap.profiles.reserve(n_profiles);
    for (std::uint64_t i = 0; i < n_profiles; ++i) {
        AuthorProfile p;
        p.author_id = r.str();
        p.name = r.str();
        p.n_pubs_pre_cutoff = r.u32();
        p.n_pubs_total = r.u32();
        p.n_citations = r.u64();
        r.need(1);
        const char g = buf[r.pos++];
        p.gender_label = g == 'M' ? Gender::Male : g == 'F' ? Gender::Female : Gender::Unknown;
        const std::uint32_t n_terms = r.u32();
        for (std::uint32_t t = 0; t < n_terms; ++t) {
            std::string term = r.str();
            p.term_profile[std::move(term)] = r.f64();
        }
        snap.profiles.push_back(std::move(p));
    }
    if (catalog_content_hash(snap.records) != snap.catalog_hash) {
        throw SchemaError("snapshot is stale or corrupt (catalog hash mismatch): " + path);
    }
    return snap;
}

}  // namespace citefix::bibindex
