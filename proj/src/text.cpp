#include "citefix/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>

#include "citefix/errors.hpp"

namespace citefix::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

}  // namespace

std::u32string decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    const auto n = s.size();
    while (i < n) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        int len = 0;
        char32_t cp = 0;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + len > n) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) ||
            (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(const std::u32string& s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::size_t rune_count(std::string_view s) {
    std::size_t count = 0;
    for (char c : s) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++count;
    }
    return count;
}

namespace {

// Compatibility mapping for accented Latin forms, ligatures, and fullwidth
// characters. Everything maps to lowercase ASCII sequences; codepoints not in
// the table pass through the letter/punctuation classification below.
const std::unordered_map<char32_t, const char*>& latin_fold_table() {
    static const std::unordered_map<char32_t, const char*> table = [] {
        std::unordered_map<char32_t, const char*> t;
        auto put = [&t](std::u32string_view cps, const char* to) {
            for (char32_t cp : cps) t[cp] = to;
        };
        put(U"ÀÁÂÃÄÅàáâãäåĀāĂăĄąǍǎǞǟǠǡǺǻȀȁȂȃȦȧ", "a");
        put(U"Ææǣǽ", "ae");
        put(U"ÇçĆćĈĉĊċČč", "c");
        put(U"ÐðĎďĐđ", "d");
        put(U"ÈÉÊËèéêëĒēĔĕĖėĘęĚěȄȅȆȇȨȩ", "e");
        put(U"ĜĝĞğĠġĢģǤǥǦǧǴǵ", "g");
        put(U"ĤĥĦħȞȟ", "h");
        put(U"ÌÍÎÏìíîïĨĩĪīĬĭĮįİıǏǐȈȉȊȋ", "i");
        put(U"Ĳĳ", "ij");
        put(U"Ĵĵǰȷ", "j");
        put(U"ĶķĸǨǩ", "k");
        put(U"ĹĺĻļĽľĿŀŁł", "l");
        put(U"ÑñŃńŅņŇňŉǸǹ", "n");
        put(U"ŊŋƝƞ", "n");
        put(U"ÒÓÔÕÖØòóôõöøŌōŎŏŐőƠơǑǒǪǫǬǭǾǿȌȍȎȏȪȫȬȭȮȯȰȱ", "o");
        put(U"Œœ", "oe");
        put(U"ŔŕŖŗŘřȐȑȒȓ", "r");
        put(U"ŚśŜŝŞşŠšșȘ", "s");
        put(U"ß", "ss");
        put(U"ŢţŤťŦŧțȚ", "t");
        put(U"Þþ", "th");
        put(U"ÙÚÛÜùúûüŨũŪūŬŭŮůŰűŲųƯưǓǔǕǖǗǘǙǚǛǜȔȕȖȗ", "u");
        put(U"ŴŵẀẁẂẃẄẅ", "w");
        put(U"ÝýÿŶŷŸȲȳ", "y");
        put(U"ŹźŻżŽž", "z");
        put(U"ƒ", "f");
        // Latin ligature block.
        t[0xFB00] = "ff";
        t[0xFB01] = "fi";
        t[0xFB02] = "fl";
        t[0xFB03] = "ffi";
        t[0xFB04] = "ffl";
        t[0xFB05] = "st";
        t[0xFB06] = "st";
        // Ordinal indicators and superscript digits.
        t[0xAA] = "a";
        t[0xBA] = "o";
        t[0xB9] = "1";
        t[0xB2] = "2";
        t[0xB3] = "3";
        return t;
    }();
    return table;
}

bool is_combining_mark(char32_t cp) {
    return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0x1AB0 && cp <= 0x1AFF) ||
           (cp >= 0x20D0 && cp <= 0x20FF) || (cp >= 0xFE20 && cp <= 0xFE2F);
}

// Non-ASCII codepoints treated as punctuation/symbols (mapped to space).
bool is_symbol_or_punct(char32_t cp) {
    if (cp >= 0xA0 && cp <= 0xBF) return true;  // latin-1 punctuation/symbols
    if (cp == 0xD7 || cp == 0xF7) return true;  // multiplication/division signs
    if (cp >= 0x2000 && cp <= 0x206F) return true;   // general punctuation
    if (cp >= 0x2070 && cp <= 0x2BFF) return true;   // super/sub, currency, arrows, math, symbols
    if (cp >= 0x2E00 && cp <= 0x2E7F) return true;   // supplemental punctuation
    if (cp >= 0x3000 && cp <= 0x303F) return true;   // CJK symbols and punctuation
    if (cp >= 0xFE30 && cp <= 0xFE6F) return true;   // vertical/small form punctuation
    if (cp >= 0xFFE0 && cp <= 0xFFFF) return true;   // specials, incl. U+FFFD
    return false;
}

char32_t simple_lower(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;  // Greek
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;                 // Cyrillic
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

void normalize_into(std::string_view title, std::u32string& out) {
    const std::u32string runes = decode_utf8(title);
    const auto& fold = latin_fold_table();
    out.clear();
    out.reserve(runes.size());
    bool pending_space = false;
    auto push = [&out, &pending_space](char32_t cp) {
        if (pending_space && !out.empty()) out.push_back(U' ');
        pending_space = false;
        out.push_back(cp);
    };
    for (char32_t cp : runes) {
        if (auto it = fold.find(cp); it != fold.end()) {
            for (const char* p = it->second; *p; ++p) push(static_cast<char32_t>(*p));
            continue;
        }
        if (is_combining_mark(cp)) continue;
        cp = simple_lower(cp);
        const bool alnum_ascii = (cp >= U'a' && cp <= U'z') || (cp >= U'0' && cp <= U'9');
        if (alnum_ascii) {
            push(cp);
        } else if (cp < 0x80 || is_symbol_or_punct(cp)) {
            pending_space = true;  // ASCII punctuation/space or known symbol
        } else {
            push(cp);  // other scripts kept verbatim, untransliterated
        }
    }
}

}  // namespace

std::string normalize_title(std::string_view title) {
    std::u32string out;
    normalize_into(title, out);
    if (out.empty()) {
        throw EmptyTitleError("title is empty after normalization: \"" + std::string(title) + "\"");
    }
    return encode_utf8(out);
}

std::string normalize_title_or_empty(std::string_view title) {
    std::u32string out;
    normalize_into(title, out);
    return encode_utf8(out);
}

std::vector<std::string> tokens(std::string_view normalized) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < normalized.size()) {
        while (i < normalized.size() && normalized[i] == ' ') ++i;
        std::size_t j = i;
        while (j < normalized.size() && normalized[j] != ' ') ++j;
        if (j > i) out.emplace_back(normalized.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string> index_tokens(std::string_view normalized, std::size_t min_runes) {
    std::vector<std::string> out = tokens(normalized);
    std::erase_if(out, [min_runes](const std::string& t) { return rune_count(t) < min_runes; });
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace citefix::text
