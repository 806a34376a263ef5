#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace causal_rag::text {

// ASCII whitespace only; UTF-8 multibyte sequences pass through untouched.
bool is_space(char c);

std::string trim(std::string_view s);

// Collapses runs of whitespace to a single space and trims both ends.
std::string collapse_whitespace(std::string_view s);

std::string to_lower(std::string_view s);

// Lowercase + collapse_whitespace.
std::string normalize(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

// Lowercased whitespace tokens with ASCII punctuation stripped from token
// edges only ("weapons," -> "weapons", "troglitazone-induced" intact).
// Tokens that are pure punctuation disappear.
std::vector<std::string> phrase_tokens(std::string_view s);

// Case-insensitive substring test after normalizing both sides.
bool contains_normalized(std::string_view haystack, std::string_view needle);

// Decodes UTF-8 into code points. Invalid bytes map to themselves so that
// malformed input still yields a deterministic sequence.
std::u32string utf8_to_code_points(std::string_view s);

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::uint64_t fnv1a64(std::string_view s);

// Current UTC instant as 2024-01-31T12:34:56Z.
std::string utc_timestamp();

}  // namespace causal_rag::text
