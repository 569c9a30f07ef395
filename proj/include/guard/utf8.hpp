#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace guard::utf8 {

// One decoded code point plus its byte extent in the source string.
struct CodePoint {
    char32_t value = 0;
    size_t offset = 0;  // byte offset of the first byte
    size_t size = 0;    // encoded length in bytes
};

// Decodes a UTF-8 string into code points with byte positions. Invalid
// sequences are consumed one byte at a time and reported as U+FFFD so that
// offsets always cover the whole input.
std::vector<CodePoint> decode(std::string_view text);

// Encodes a single code point as UTF-8.
std::string encode(char32_t cp);

std::string encode(const std::u32string& cps);

// Decodes to bare code point values (no positions).
std::u32string to_u32(std::string_view text);

}  // namespace guard::utf8
