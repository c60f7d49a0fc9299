#ifndef DETECTLAB_TEXT_HPP
#define DETECTLAB_TEXT_HPP

#include <string>
#include <string_view>
#include <vector>

namespace detectlab::text {

// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD, one per byte.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

bool is_space(char32_t cp);
bool is_digit(char32_t cp);
// ASCII punctuation plus the General Punctuation block and a few typographic marks.
bool is_punct(char32_t cp);

// True when the text contains at least one non-whitespace code point.
bool has_content(std::string_view s);

std::size_t length(std::string_view s);

}  // namespace detectlab::text

#endif  // DETECTLAB_TEXT_HPP
