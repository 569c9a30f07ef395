#include "guard/utf8.hpp"

namespace guard::utf8 {

std::vector<CodePoint> decode(std::string_view text) {
    std::vector<CodePoint> out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        unsigned char b0 = static_cast<unsigned char>(text[i]);
        size_t len = 1;
        char32_t cp = 0xFFFD;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0 && i + 1 < text.size() &&
                   (text[i + 1] & 0xC0) == 0x80) {
            cp = static_cast<char32_t>(b0 & 0x1F) << 6 |
                 (static_cast<unsigned char>(text[i + 1]) & 0x3F);
            len = 2;
            if (cp < 0x80) cp = 0xFFFD;  // overlong
        } else if ((b0 & 0xF0) == 0xE0 && i + 2 < text.size() &&
                   (text[i + 1] & 0xC0) == 0x80 && (text[i + 2] & 0xC0) == 0x80) {
            cp = static_cast<char32_t>(b0 & 0x0F) << 12 |
                 (static_cast<unsigned char>(text[i + 1]) & 0x3F) << 6 |
                 (static_cast<unsigned char>(text[i + 2]) & 0x3F);
            len = 3;
            if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
        } else if ((b0 & 0xF8) == 0xF0 && i + 3 < text.size() &&
                   (text[i + 1] & 0xC0) == 0x80 && (text[i + 2] & 0xC0) == 0x80 &&
                   (text[i + 3] & 0xC0) == 0x80) {
            cp = static_cast<char32_t>(b0 & 0x07) << 18 |
                 (static_cast<unsigned char>(text[i + 1]) & 0x3F) << 12 |
                 (static_cast<unsigned char>(text[i + 2]) & 0x3F) << 6 |
                 (static_cast<unsigned char>(text[i + 3]) & 0x3F);
            len = 4;
            if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
        }
        out.push_back({cp, i, len});
        i += len;
    }
    return out;
}

std::string encode(char32_t cp) {
    std::string out;
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
    return out;
}

std::string encode(const std::u32string& cps) {
    std::string out;
    for (char32_t cp : cps) out += encode(cp);
    return out;
}

std::u32string to_u32(std::string_view text) {
    std::u32string out;
    for (const auto& cp : decode(text)) out.push_back(cp.value);
    return out;
}

}  // namespace guard::utf8
