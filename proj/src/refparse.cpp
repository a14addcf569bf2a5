#include "citefix/refparse.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>

#include "citefix/errors.hpp"

namespace citefix::refparse {

namespace {

using text::trim;

int current_year() {
    static const int year = [] {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        return tm.tm_year + 1900;
    }();
    return year;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

// ---------------------------------------------------------------------------
// extract_bibliography

std::vector<RawReference> extract_plain(std::string_view doc, const std::string& paper_id) {
    std::vector<RawReference> out;
    std::size_t start = 0;
    std::uint32_t index = 0;
    while (start <= doc.size()) {
        std::size_t nl = doc.find('\n', start);
        std::string_view line = doc.substr(start, nl == std::string_view::npos ? doc.size() - start : nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        std::string t = trim(line);
        if (!t.empty()) {
            out.push_back({paper_id, index++, std::move(t), SourceFormat::Plain});
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

// Skips a balanced {...} group starting at doc[pos] == '{'. Returns the index
// one past the closing brace, or npos if unbalanced.
std::size_t skip_braced(std::string_view doc, std::size_t pos) {
    int depth = 0;
    for (std::size_t i = pos; i < doc.size(); ++i) {
        if (doc[i] == '{') {
            ++depth;
        } else if (doc[i] == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::size_t skip_bracketed(std::string_view doc, std::size_t pos) {
    int depth = 0;
    for (std::size_t i = pos; i < doc.size(); ++i) {
        if (doc[i] == '[') {
            ++depth;
        } else if (doc[i] == ']') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::vector<RawReference> extract_latex_bbl(std::string_view doc, const std::string& paper_id) {
    static constexpr std::string_view kBegin = "\\begin{thebibliography}";
    static constexpr std::string_view kEnd = "\\end{thebibliography}";
    static constexpr std::string_view kItem = "\\bibitem";

    std::string_view body = doc;
    std::size_t body_offset = 0;
    const std::size_t begin_pos = doc.find(kBegin);
    if (begin_pos != std::string_view::npos) {
        const std::size_t end_pos = doc.find(kEnd, begin_pos);
        if (end_pos == std::string_view::npos) {
            throw StructuralParseError("unclosed thebibliography environment", begin_pos);
        }
        std::size_t content_start = begin_pos + kBegin.size();
        // Optional widest-label argument {99}.
        while (content_start < end_pos && std::isspace(static_cast<unsigned char>(doc[content_start]))) {
            ++content_start;
        }
        if (content_start < end_pos && doc[content_start] == '{') {
            const std::size_t after = skip_braced(doc, content_start);
            if (after != std::string_view::npos && after <= end_pos) content_start = after;
        }
        body = doc.substr(content_start, end_pos - content_start);
        body_offset = content_start;
    }

    std::vector<RawReference> out;
    std::uint32_t index = 0;
    std::size_t pos = body.find(kItem);
    while (pos != std::string_view::npos) {
        std::size_t cursor = pos + kItem.size();
        bool header_ok = true;
        while (cursor < body.size() && std::isspace(static_cast<unsigned char>(body[cursor]))) ++cursor;
        if (cursor < body.size() && body[cursor] == '[') {
            const std::size_t after = skip_bracketed(body, cursor);
            if (after == std::string_view::npos) {
                throw StructuralParseError("unbalanced \\bibitem label", body_offset + cursor);
            }
            cursor = after;
            while (cursor < body.size() && std::isspace(static_cast<unsigned char>(body[cursor]))) ++cursor;
        }
        if (cursor < body.size() && body[cursor] == '{') {
            const std::size_t after = skip_braced(body, cursor);
            if (after == std::string_view::npos) {
                throw StructuralParseError("unbalanced \\bibitem key", body_offset + cursor);
            }
            cursor = after;
        } else {
            header_ok = false;  // no {key}: keep the item body as plain text
        }
        const std::size_t next = body.find(kItem, pos + kItem.size());
        const std::size_t item_end = next == std::string_view::npos ? body.size() : next;
        std::string item = trim(body.substr(cursor, item_end - cursor));
        if (!item.empty()) {
            out.push_back({paper_id, index++, std::move(item),
                           header_ok ? SourceFormat::LatexBbl : SourceFormat::Plain});
        }
        pos = next;
    }
    return out;
}

void append_entity(std::string_view ent, std::string& out) {
    if (ent == "amp") {
        out += '&';
    } else if (ent == "lt") {
        out += '<';
    } else if (ent == "gt") {
        out += '>';
    } else if (ent == "quot") {
        out += '"';
    } else if (ent == "apos") {
        out += '\'';
    } else if (!ent.empty() && ent[0] == '#') {
        char32_t cp = 0;
        if (ent.size() > 2 && (ent[1] == 'x' || ent[1] == 'X')) {
            for (std::size_t i = 2; i < ent.size(); ++i) {
                cp = cp * 16 + (is_digit(ent[i]) ? ent[i] - '0' : (std::tolower(ent[i]) - 'a' + 10));
            }
        } else {
            for (std::size_t i = 1; i < ent.size(); ++i) cp = cp * 10 + (ent[i] - '0');
        }
        out += text::encode_utf8(std::u32string(1, cp));
    } else {
        out += '&';
        out += ent;
        out += ';';
    }
}

// Inner text of an XML fragment: tags removed, entities decoded, whitespace
// runs collapsed to single spaces.
std::string xml_inner_text(std::string_view xml) {
    std::string out;
    out.reserve(xml.size());
    bool in_tag = false;
    bool pending_space = false;
    for (std::size_t i = 0; i < xml.size(); ++i) {
        const char c = xml[i];
        if (in_tag) {
            if (c == '>') in_tag = false;
            continue;
        }
        if (c == '<') {
            in_tag = true;
            continue;
        }
        if (c == '&') {
            const std::size_t semi = xml.find(';', i);
            if (semi != std::string_view::npos && semi - i <= 10) {
                if (pending_space && !out.empty()) out += ' ';
                pending_space = false;
                append_entity(xml.substr(i + 1, semi - i - 1), out);
                i = semi;
                continue;
            }
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = true;
        } else {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

// Finds the next opening tag with the given name; returns the offset of '<'
// or npos. Matches "<name>" and "<name attr...>".
std::size_t find_open_tag(std::string_view doc, std::string_view name, std::size_t from) {
    std::size_t pos = from;
    const std::string needle = "<" + std::string(name);
    while ((pos = doc.find(needle, pos)) != std::string_view::npos) {
        const std::size_t after = pos + needle.size();
        if (after < doc.size() && (std::isspace(static_cast<unsigned char>(doc[after])) ||
                                   doc[after] == '>' || doc[after] == '/')) {
            return pos;
        }
        pos += needle.size();
    }
    return std::string_view::npos;
}

std::vector<RawReference> extract_jats(std::string_view doc, const std::string& paper_id) {
    const std::size_t list_open = find_open_tag(doc, "ref-list", 0);
    if (list_open == std::string_view::npos) {
        throw StructuralParseError("no <ref-list> element found", 0);
    }
    const std::size_t list_open_end = doc.find('>', list_open);
    if (list_open_end == std::string_view::npos) {
        throw StructuralParseError("unterminated <ref-list> tag", list_open);
    }
    const std::size_t list_close = doc.find("</ref-list>", list_open_end);
    if (list_close == std::string_view::npos) {
        throw StructuralParseError("unclosed <ref-list> element", list_open);
    }

    std::vector<RawReference> out;
    std::uint32_t index = 0;
    std::size_t pos = list_open_end + 1;
    while (true) {
        const std::size_t ref_open = find_open_tag(doc.substr(0, list_close), "ref", pos);
        if (ref_open == std::string_view::npos) break;
        const std::size_t ref_open_end = doc.find('>', ref_open);
        if (ref_open_end == std::string_view::npos || ref_open_end > list_close) {
            throw StructuralParseError("unterminated <ref> tag", ref_open);
        }
        if (doc[ref_open_end - 1] == '/') {  // self-closing, empty entry
            pos = ref_open_end + 1;
            continue;
        }
        const std::size_t ref_close = doc.find("</ref>", ref_open_end);
        if (ref_close == std::string_view::npos || ref_close > list_close) {
            throw StructuralParseError("unclosed <ref> element", ref_open);
        }
        std::string item = trim(xml_inner_text(doc.substr(ref_open_end + 1, ref_close - ref_open_end - 1)));
        if (!item.empty()) {
            out.push_back({paper_id, index++, std::move(item), SourceFormat::JatsXml});
        }
        pos = ref_close + 6;
    }
    return out;
}

// ---------------------------------------------------------------------------
// parse_reference

struct QuotedSpan {
    std::size_t begin = 0;  // byte offset of content start
    std::size_t end = 0;    // byte offset one past content end
    std::size_t open_len = 0;
    std::size_t close_len = 0;
};

// Quote pairs recognized as title delimiters: ASCII "...", typographic
// U+201C/U+201D, and LaTeX ``...''.
std::vector<QuotedSpan> quoted_spans(std::string_view s) {
    std::vector<QuotedSpan> spans;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t open_len = 0;
        std::string_view closer;
        if (s.compare(i, 2, "``") == 0) {
            open_len = 2;
            closer = "''";
        } else if (s[i] == '"') {
            open_len = 1;
            closer = "\"";
        } else if (s.compare(i, 3, "\xE2\x80\x9C") == 0) {  // U+201C
            open_len = 3;
            closer = "\xE2\x80\x9D";                        // U+201D
        }
        if (open_len == 0) {
            ++i;
            continue;
        }
        const std::size_t content = i + open_len;
        const std::size_t close = s.find(closer, content);
        if (close == std::string_view::npos) {
            ++i;
            continue;
        }
        spans.push_back({content, close, open_len, closer.size()});
        i = close + closer.size();
    }
    return spans;
}

bool has_letter(std::string_view s) {
    for (char c : s) {
        if (std::isalpha(static_cast<unsigned char>(c))) return true;
    }
    // Non-ASCII runes count as letters for this purpose.
    for (char c : s) {
        if (static_cast<unsigned char>(c) >= 0x80) return true;
    }
    return false;
}

std::string strip_outer_punct(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    auto is_strippable = [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '.' || c == ';' ||
               c == ':' || c == '(' || c == ')' || c == '[' || c == ']';
    };
    while (b < e && is_strippable(s[b])) ++b;
    while (e > b && is_strippable(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// Leading "[12]" or "7." enumeration markers.
std::string_view strip_enumeration(std::string_view s) {
    std::string_view t = s;
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    if (!t.empty() && t.front() == '[') {
        std::size_t j = 1;
        while (j < t.size() && is_digit(t[j])) ++j;
        if (j > 1 && j < t.size() && t[j] == ']') {
            t.remove_prefix(j + 1);
            while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
            return t;
        }
    }
    std::size_t j = 0;
    while (j < t.size() && is_digit(t[j])) ++j;
    if (j > 0 && j <= 3 && j + 1 < t.size() && t[j] == '.' &&
        std::isspace(static_cast<unsigned char>(t[j + 1]))) {
        t.remove_prefix(j + 1);
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
        return t;
    }
    return t;
}

bool is_initial_token(std::string_view tok) {
    // "A." "A.B." "A.-B." "A" (single uppercase letter, optionally dotted/chained)
    if (tok.empty() || tok.size() > 8) return false;
    std::size_t i = 0;
    bool any = false;
    while (i < tok.size()) {
        if (!is_upper(tok[i])) return false;
        any = true;
        ++i;
        if (i < tok.size() && tok[i] == '.') ++i;
        if (i < tok.size() && tok[i] == '-') ++i;
    }
    return any;
}

bool is_name_particle(std::string_view tok) {
    static const char* kParticles[] = {"van", "de",  "der", "den", "la", "le",  "von", "di",
                                       "da",  "del", "dos", "bin", "al", "ter", "ten"};
    for (const char* p : kParticles) {
        if (tok == p) return true;
    }
    return false;
}

bool is_capitalized_word(std::string_view tok) {
    if (tok.empty()) return false;
    if (!is_upper(tok[0]) && !(static_cast<unsigned char>(tok[0]) >= 0x80)) return false;
    for (char c : tok) {
        if (is_digit(c)) return false;
    }
    return true;
}

std::vector<std::string> split_name_pieces(std::string_view block) {
    std::string s(block);
    auto replace_all = [&s](std::string_view from, std::string_view to) {
        std::size_t pos = 0;
        while ((pos = s.find(from, pos)) != std::string::npos) {
            s.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all(" and ", ",");
    replace_all(" & ", ",");
    replace_all(";", ",");
    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        std::string piece = trim(s.substr(start, comma == std::string::npos ? s.size() - start : comma - start));
        if (!piece.empty()) pieces.push_back(std::move(piece));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return pieces;
}

bool piece_is_nameish(std::string_view piece) {
    const auto toks = text::tokens(std::string(piece));
    if (toks.empty() || toks.size() > 5) return false;
    bool any_substantial = false;
    for (const auto& tok : toks) {
        if (is_initial_token(tok)) continue;
        if (is_name_particle(tok)) continue;
        if (is_capitalized_word(tok)) {
            any_substantial = true;
            continue;
        }
        return false;
    }
    return any_substantial || toks.size() == 1;
}

bool looks_like_author_block(std::string_view block) {
    if (block.empty() || block.size() > 300) return false;
    const std::string lowered = text::lower_ascii(block);
    if (lowered.find("et al") != std::string::npos) return true;
    auto pieces = split_name_pieces(block);
    if (pieces.empty()) return false;
    bool any_initial = false;
    for (const auto& piece : pieces) {
        if (piece == "et al." || piece == "et al") continue;
        if (!piece_is_nameish(piece)) return false;
        for (const auto& tok : text::tokens(piece)) {
            if (is_initial_token(tok)) any_initial = true;
        }
    }
    if (any_initial) return true;
    // All-capitalized multi-token pieces ("John Smith, Jane Doe").
    std::size_t multi = 0;
    for (const auto& piece : pieces) {
        const auto toks = text::tokens(piece);
        if (toks.size() >= 2) ++multi;
    }
    return multi == pieces.size() && !pieces.empty();
}

std::vector<std::string> parse_authors(std::string_view block) {
    std::vector<std::string> out;
    auto pieces = split_name_pieces(strip_outer_punct(block));
    // Rejoin "Surname" + "A. B." comma pairs.
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const auto toks = text::tokens(pieces[i]);
        bool all_initials = !toks.empty();
        for (const auto& t : toks) {
            if (!is_initial_token(t)) all_initials = false;
        }
        if (all_initials && !out.empty()) {
            out.back() += ", " + pieces[i];
            continue;
        }
        std::string lowered = text::lower_ascii(pieces[i]);
        if (lowered == "et al." || lowered == "et al" || lowered == "others") continue;
        bool has_digit = std::any_of(pieces[i].begin(), pieces[i].end(), [](char c) { return is_digit(c); });
        if (has_digit || !piece_is_nameish(pieces[i])) continue;
        out.push_back(pieces[i]);
        if (out.size() >= 50) break;
    }
    return out;
}

// Sentence segmentation that does not break on name initials or common
// bibliographic abbreviations.
std::vector<std::pair<std::size_t, std::size_t>> split_sentences(std::string_view s) {
    std::vector<std::pair<std::size_t, std::size_t>> segs;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '.') continue;
        if (i + 1 < s.size() && !std::isspace(static_cast<unsigned char>(s[i + 1]))) continue;
        // Token immediately before the period.
        std::size_t tb = i;
        while (tb > start && !std::isspace(static_cast<unsigned char>(s[tb - 1]))) --tb;
        std::string_view tok = s.substr(tb, i - tb);
        if (tok.size() == 1 && is_upper(tok[0])) continue;  // initial "A."
        if (!tok.empty() && tok.back() == '.') {
            std::string_view inner = tok.substr(0, tok.size() - 1);
            if (inner.size() == 1 && is_upper(inner[0])) continue;  // "A.B."
        }
        static const char* kAbbrev[] = {"al",  "Jr", "Sr",  "Proc", "Vol", "vol", "No",
                                        "no",  "pp", "ed",  "eds",  "Ed",  "Eds", "St",
                                        "Int", "J",  "Conf", "Trans", "Ann", "Rev"};
        bool abbrev = false;
        for (const char* a : kAbbrev) {
            if (tok == a) abbrev = true;
        }
        if (abbrev) continue;
        if (i > start) segs.emplace_back(start, i);
        start = i + 1;
        while (start < s.size() && std::isspace(static_cast<unsigned char>(s[start]))) ++start;
        i = start == 0 ? 0 : start - 1;
    }
    if (start < s.size()) {
        const std::string tail = trim(s.substr(start));
        if (!tail.empty()) segs.emplace_back(start, s.size());
    }
    return segs;
}

std::string clean_venue(std::string_view raw, int year) {
    std::string v = strip_outer_punct(raw);
    if (year > 0) {
        // Cut at the year token if it survived into the span.
        const std::string ytok = std::to_string(year);
        const std::size_t ypos = v.find(ytok);
        if (ypos != std::string::npos) v = strip_outer_punct(std::string_view(v).substr(0, ypos));
    }
    if (!v.empty() && v.size() >= 2) {
        const std::string lowered = text::lower_ascii(v);
        if (lowered.rfind("in ", 0) == 0) v = strip_outer_punct(std::string_view(v).substr(3));
        else if (lowered.rfind("in:", 0) == 0) v = strip_outer_punct(std::string_view(v).substr(3));
    }
    if (v.empty() || !has_letter(v)) return {};
    if (v.size() > 160) return {};
    return v;
}

void set_title(ParsedReference& ref, std::string title) {
    title = strip_outer_punct(title);
    if (title.empty()) {
        ref.title.reset();
        ref.title_norm.reset();
        return;
    }
    std::string norm = normalize_title_or_empty(title);
    if (norm.empty()) {
        ref.title.reset();
        ref.title_norm.reset();
        return;
    }
    ref.title = std::move(title);
    ref.title_norm = std::move(norm);
}

void finish_confidence(ParsedReference& ref) {
    int found = 0;
    if (ref.title) ++found;
    if (ref.year) ++found;
    if (!ref.authors.empty()) ++found;
    ref.parse_confidence = found / 3.0;
}

}  // namespace

int find_year(std::string_view s) {
    const int max_year = current_year() + 1;
    if (s.size() < 4) return 0;
    for (std::size_t end = s.size(); end >= 4; --end) {
        const std::size_t i = end - 4;
        if (!is_digit(s[i]) || !is_digit(s[i + 1]) || !is_digit(s[i + 2]) || !is_digit(s[i + 3])) {
            continue;
        }
        if (i > 0 && is_alnum(s[i - 1])) continue;
        if (end < s.size() && is_alnum(s[end])) continue;
        const int y = (s[i] - '0') * 1000 + (s[i + 1] - '0') * 100 + (s[i + 2] - '0') * 10 + (s[i + 3] - '0');
        if (y >= 1500 && y <= max_year) return y;
    }
    return 0;
}

std::vector<RawReference> extract_bibliography(std::string_view document, SourceFormat format,
                                               const std::string& paper_id) {
    // Strip a UTF-8 BOM if present.
    if (document.size() >= 3 && document.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        document.remove_prefix(3);
    }
    switch (format) {
        case SourceFormat::Plain: return extract_plain(document, paper_id);
        case SourceFormat::LatexBbl: return extract_latex_bbl(document, paper_id);
        case SourceFormat::JatsXml: return extract_jats(document, paper_id);
        case SourceFormat::Preparsed:
            throw ConfigError("PREPARSED corpora carry structured fields; nothing to extract");
    }
    throw ConfigError("unknown source format");
}

ParsedReference parse_reference(const RawReference& raw) {
    ParsedReference ref;
    ref.raw = raw;

    const std::string_view body = strip_enumeration(raw.text);
    const int year = find_year(body);
    if (year > 0) ref.year = year;

    const auto spans = quoted_spans(body);
    const QuotedSpan* best = nullptr;
    for (const auto& span : spans) {
        std::string_view content = body.substr(span.begin, span.end - span.begin);
        if (!has_letter(content)) continue;
        if (!best || span.end - span.begin > best->end - best->begin) best = &span;
    }

    if (best) {
        set_title(ref, std::string(body.substr(best->begin, best->end - best->begin)));
        const std::string_view before = body.substr(0, best->begin - best->open_len);
        const std::string_view after = body.substr(best->end + best->close_len);
        ref.authors = parse_authors(before);
        const std::string venue = clean_venue(after, year);
        if (!venue.empty()) ref.venue = venue;
        finish_confidence(ref);
        return ref;
    }

    const auto segs = split_sentences(body);
    std::size_t author_seg = segs.size();
    for (std::size_t i = 0; i < segs.size() && i < 2; ++i) {
        std::string_view seg = body.substr(segs[i].first, segs[i].second - segs[i].first);
        if (looks_like_author_block(seg)) {
            author_seg = i;
            break;
        }
    }
    if (author_seg < segs.size()) {
        ref.authors = parse_authors(body.substr(segs[author_seg].first,
                                                segs[author_seg].second - segs[author_seg].first));
        // Title = next segment with some substance.
        for (std::size_t i = author_seg + 1; i < segs.size(); ++i) {
            std::string_view seg = body.substr(segs[i].first, segs[i].second - segs[i].first);
            const std::string candidate = strip_outer_punct(seg);
            if (!has_letter(candidate)) continue;
            if (text::tokens(candidate).size() < 2) continue;
            set_title(ref, candidate);
            if (i + 1 < segs.size()) {
                std::string_view vseg = body.substr(segs[i + 1].first, segs[i + 1].second - segs[i + 1].first);
                const std::string venue = clean_venue(vseg, year);
                if (!venue.empty()) ref.venue = venue;
            }
            break;
        }
    }
    finish_confidence(ref);
    return ref;
}

RetitleResult retitle(const ParsedReference& parsed) {
    if (!parsed.title || !parsed.title_norm) return {parsed, false};

    const std::string_view body = strip_enumeration(parsed.raw.text);
    const std::string& current = *parsed.title_norm;

    auto apply = [&parsed, &current](std::string candidate,
                                     std::optional<std::string> venue) -> std::optional<RetitleResult> {
        candidate = strip_outer_punct(candidate);
        if (candidate.empty() || !has_letter(candidate)) return std::nullopt;
        const std::string norm = normalize_title_or_empty(candidate);
        if (norm.empty() || norm == current) return std::nullopt;
        ParsedReference next = parsed;
        next.title = candidate;
        next.title_norm = norm;
        if (venue && !next.venue) next.venue = venue;
        finish_confidence(next);
        return RetitleResult{std::move(next), true};
    };

    // Hypothesis 1: next-longest quoted span.
    auto spans = quoted_spans(body);
    if (spans.size() >= 2) {
        std::sort(spans.begin(), spans.end(), [](const QuotedSpan& a, const QuotedSpan& b) {
            return a.end - a.begin > b.end - b.begin;
        });
        for (std::size_t i = 1; i < spans.size(); ++i) {
            std::string content(body.substr(spans[i].begin, spans[i].end - spans[i].begin));
            if (auto r = apply(std::move(content), std::nullopt)) return *r;
        }
    }

    // Hypothesis 2: venue mis-captured into the title; shrink to the
    // pre-venue span at the last comma.
    const std::size_t comma = parsed.title->rfind(", ");
    if (comma != std::string::npos && comma > 0) {
        std::string head = parsed.title->substr(0, comma);
        std::string tail = strip_outer_punct(parsed.title->substr(comma + 1));
        if (text::tokens(head).size() >= 2) {
            std::optional<std::string> venue;
            if (has_letter(tail)) venue = tail;
            if (auto r = apply(std::move(head), venue)) return *r;
        }
    }

    // Hypothesis 3: span after the year token ("Author A. 2020. Title. Venue.").
    if (parsed.year) {
        const std::string ytok = std::to_string(*parsed.year);
        const std::size_t ypos = body.find(ytok);
        if (ypos != std::string_view::npos) {
            std::string_view rest = body.substr(ypos + ytok.size());
            std::size_t b = 0;
            while (b < rest.size() && (std::isspace(static_cast<unsigned char>(rest[b])) ||
                                       rest[b] == '.' || rest[b] == ',' || rest[b] == ')' ||
                                       rest[b] == ':' || rest[b] == ';')) {
                ++b;
            }
            rest = rest.substr(b);
            const std::size_t stop = rest.find(". ");
            std::string candidate(stop == std::string_view::npos ? rest : rest.substr(0, stop));
            if (text::tokens(candidate).size() >= 2) {
                if (auto r = apply(std::move(candidate), std::nullopt)) return *r;
            }
        }
    }

    return {parsed, false};
}

}  // namespace citefix::refparse
