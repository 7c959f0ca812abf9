#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace spandet::utf8 {

// Character positions everywhere in this library count Unicode code points.
// Invalid byte sequences decode to U+FFFD, one code point per bad byte.
std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);
std::size_t length(std::string_view s);

/// Code points [begin, end) of s, re-encoded.
std::string substr(std::string_view s, std::size_t begin, std::size_t end);

bool is_space(char32_t c);
bool is_punct(char32_t c);

}  // namespace spandet::utf8
