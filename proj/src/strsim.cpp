#include "citefix/strsim.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>

#include "citefix/text.hpp"

namespace citefix::strsim {

namespace {

// Myers bit-vector edit distance, blocked for patterns longer than 64 runes.
// The pattern is virtually padded to a block multiple with a sentinel that
// matches nothing; each pad row adds exactly one to the final distance, so
// the true distance is the padded score minus the pad width.
std::size_t myers_distance(std::u32string_view pattern, std::u32string_view txt) {
    const std::size_t m = pattern.size();
    const std::size_t n = txt.size();
    const std::size_t blocks = (m + 63) / 64;
    const std::size_t padded = blocks * 64;

    // Eq masks per pattern character. ASCII fast path, map for the rest.
    std::array<std::uint64_t, 128> ascii_eq{};
    std::vector<std::uint64_t> ascii_eq_wide;
    std::unordered_map<char32_t, std::vector<std::uint64_t>> wide_eq;
    const bool single = blocks == 1;
    if (!single) ascii_eq_wide.assign(128 * blocks, 0);
    for (std::size_t i = 0; i < m; ++i) {
        const char32_t c = pattern[i];
        const std::uint64_t bit = 1ull << (i % 64);
        if (single && c < 128) {
            ascii_eq[c] |= bit;
        } else if (c < 128) {
            ascii_eq_wide[c * blocks + i / 64] |= bit;
        } else {
            auto& v = wide_eq[c];
            if (v.empty()) v.assign(blocks, 0);
            v[i / 64] |= bit;
        }
    }

    std::size_t score = padded;

    if (single) {
        std::uint64_t vp = ~0ull;
        std::uint64_t vn = 0;
        const std::uint64_t top = 1ull << 63;
        for (std::size_t j = 0; j < n; ++j) {
            const char32_t c = txt[j];
            std::uint64_t eq = 0;
            if (c < 128) {
                eq = ascii_eq[c];
            } else if (auto it = wide_eq.find(c); it != wide_eq.end()) {
                eq = it->second[0];
            }
            const std::uint64_t xv = eq | vn;
            const std::uint64_t xh = (((eq & vp) + vp) ^ vp) | eq;
            std::uint64_t ph = vn | ~(xh | vp);
            std::uint64_t mh = vp & xh;
            if (ph & top) ++score;
            if (mh & top) --score;
            ph = (ph << 1) | 1;  // top row of the distance matrix grows with j
            mh <<= 1;
            vp = mh | ~(xv | ph);
            vn = ph & xv;
        }
        return score - (padded - m);
    }

    std::vector<std::uint64_t> vp(blocks, ~0ull);
    std::vector<std::uint64_t> vn(blocks, 0);
    const std::uint64_t top = 1ull << 63;
    for (std::size_t j = 0; j < n; ++j) {
        const char32_t c = txt[j];
        const std::uint64_t* eqs = nullptr;
        if (c < 128) {
            eqs = &ascii_eq_wide[c * blocks];
        } else if (auto it = wide_eq.find(c); it != wide_eq.end()) {
            eqs = it->second.data();
        }
        int hin = 1;  // boundary row D[0][j] = j
        for (std::size_t b = 0; b < blocks; ++b) {
            std::uint64_t eq = eqs ? eqs[b] : 0;
            const std::uint64_t xv = eq | vn[b];
            if (hin < 0) eq |= 1;
            const std::uint64_t xh = (((eq & vp[b]) + vp[b]) ^ vp[b]) | eq;
            std::uint64_t ph = vn[b] | ~(xh | vp[b]);
            std::uint64_t mh = vp[b] & xh;
            int hout = 0;
            if (ph & top) hout = 1;
            if (mh & top) hout = -1;
            ph <<= 1;
            mh <<= 1;
            if (hin > 0) ph |= 1;
            if (hin < 0) mh |= 1;
            vp[b] = mh | ~(xv | ph);
            vn[b] = ph & xv;
            hin = hout;
        }
        score += hin;
    }
    return score - (padded - m);
}

}  // namespace

std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b) {
    if (a.empty()) return b.size();
    if (b.empty()) return a.size();
    if (a == b) return 0;
    // Pattern = shorter side keeps the block count minimal.
    return a.size() <= b.size() ? myers_distance(a, b) : myers_distance(b, a);
}

std::size_t levenshtein_distance(std::string_view a, std::string_view b) {
    const std::u32string ua = text::decode_utf8(a);
    const std::u32string ub = text::decode_utf8(b);
    return levenshtein_distance(ua, ub);
}

double levenshtein_similarity(std::string_view a, std::string_view b) {
    const std::u32string ua = text::decode_utf8(a);
    const std::u32string ub = text::decode_utf8(b);
    const std::size_t maxlen = std::max(ua.size(), ub.size());
    if (maxlen == 0) return 1.0;
    const std::size_t d = levenshtein_distance(std::u32string_view(ua), std::u32string_view(ub));
    return 1.0 - static_cast<double>(d) / static_cast<double>(maxlen);
}

std::vector<std::string> unique_tokens(std::string_view normalized) {
    std::vector<std::string> toks = text::tokens(normalized);
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
    return toks;
}

double token_jaccard_sorted(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t shared = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const int c = a[i].compare(b[j]);
        if (c == 0) {
            ++shared;
            ++i;
            ++j;
        } else if (c < 0) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - shared;
    return static_cast<double>(shared) / static_cast<double>(uni);
}

double token_jaccard(std::string_view a, std::string_view b) {
    return token_jaccard_sorted(unique_tokens(a), unique_tokens(b));
}

double title_similarity(std::string_view a, std::string_view b) {
    return std::max(levenshtein_similarity(a, b), token_jaccard(a, b));
}

double length_similarity_bound(std::size_t len_a, std::size_t len_b) {
    const std::size_t maxlen = std::max(len_a, len_b);
    if (maxlen == 0) return 1.0;
    const std::size_t diff = len_a > len_b ? len_a - len_b : len_b - len_a;
    return 1.0 - static_cast<double>(diff) / static_cast<double>(maxlen);
}

}  // namespace citefix::strsim
