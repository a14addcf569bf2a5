#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace citefix::strsim {

// Rune-level Levenshtein distance (unit costs), exact for any pair.
// Bit-parallel (Myers) over 64-bit blocks.
std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein_distance(std::string_view a, std::string_view b);

// 1 - distance / max(rune lengths); 1.0 for two empty strings.
double levenshtein_similarity(std::string_view a, std::string_view b);

// Jaccard overlap of the unique whitespace-split tokens.
double token_jaccard(std::string_view a, std::string_view b);
// Variant over pre-sorted, duplicate-free token vectors (hot path).
double token_jaccard_sorted(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Matching similarity between two normalized titles:
// max(levenshtein_similarity, token_jaccard).
double title_similarity(std::string_view a, std::string_view b);

// Upper bound on levenshtein_similarity from rune lengths alone
// (distance >= |len_a - len_b|); used to skip hopeless candidates.
double length_similarity_bound(std::size_t len_a, std::size_t len_b);

// Sorted unique tokens of a normalized string.
std::vector<std::string> unique_tokens(std::string_view normalized);

}  // namespace citefix::strsim
