#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace citefix::text {

// UTF-8 decoding with U+FFFD replacement for invalid sequences.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(const std::u32string& s);
std::size_t rune_count(std::string_view s);

// Canonical title normalization: compatibility decomposition of accented
// Latin forms, diacritic stripping, lowercasing, every non-alphanumeric rune
// replaced by a space, whitespace collapsed and trimmed. Idempotent.
// Throws EmptyTitleError when nothing survives (pure punctuation input).
std::string normalize_title(std::string_view title);

// Non-throwing variant; returns empty string instead of throwing.
std::string normalize_title_or_empty(std::string_view title);

// Whitespace-split tokens of an already-normalized string.
std::vector<std::string> tokens(std::string_view normalized);

// Tokens with at least `min_runes` runes (index vocabulary rule).
std::vector<std::string> index_tokens(std::string_view normalized, std::size_t min_runes = 2);

std::string trim(std::string_view s);
std::string lower_ascii(std::string_view s);

}  // namespace citefix::text
