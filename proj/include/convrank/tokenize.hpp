#pragma once

// Tokenization for evidence sentences: split on Unicode whitespace, strip
// leading/trailing ASCII punctuation, lowercase (ASCII). The corpus marker
// token [REF] stands for a citation and must survive as-is.

#include <string>
#include <string_view>
#include <vector>

namespace convrank {

namespace detail {

// Decodes one UTF-8 code point at s[i]; advances i. Malformed bytes are
// returned as-is (one byte, one "code point").
inline char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const unsigned char c0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = c0;
    if ((c0 & 0xE0) == 0xC0) {
        len = 2;
        cp = c0 & 0x1F;
    } else if ((c0 & 0xF0) == 0xE0) {
        len = 3;
        cp = c0 & 0x0F;
    } else if ((c0 & 0xF8) == 0xF0) {
        len = 4;
        cp = c0 & 0x07;
    }
    if (i + len > s.size()) len = 1, cp = c0;
    for (std::size_t k = 1; k < len; ++k) {
        const unsigned char ck = static_cast<unsigned char>(s[i + k]);
        if ((ck & 0xC0) != 0x80) {  // malformed: emit lead byte alone
            len = 1;
            cp = c0;
            break;
        }
        cp = (cp << 6) | (ck & 0x3F);
    }
    i += len;
    return cp;
}

inline bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

inline bool is_ascii_punct(char c) {
    const unsigned char u = static_cast<unsigned char>(c);
    return (u >= '!' && u <= '/') || (u >= ':' && u <= '@') || (u >= '[' && u <= '`') ||
           (u >= '{' && u <= '~');
}

}  // namespace detail

inline constexpr std::string_view kRefToken = "[REF]";

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;

    auto flush = [&](std::string_view raw) {
        if (raw.empty()) return;
        // The [REF] marker is bracketed punctuation on purpose; emit it
        // verbatim even when stuck to surrounding punctuation ("[REF],").
        if (raw.find(kRefToken) != std::string_view::npos) {
            tokens.emplace_back(kRefToken);
            return;
        }
        while (!raw.empty() && detail::is_ascii_punct(raw.front())) raw.remove_prefix(1);
        while (!raw.empty() && detail::is_ascii_punct(raw.back())) raw.remove_suffix(1);
        if (raw.empty()) return;
        std::string tok(raw);
        for (char& c : tok) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        tokens.push_back(std::move(tok));
    };

    std::size_t i = 0;
    std::size_t word_start = 0;
    while (i < text.size()) {
        const std::size_t at = i;
        const char32_t cp = detail::next_codepoint(text, i);
        if (detail::is_unicode_space(cp)) {
            flush(text.substr(word_start, at - word_start));
            word_start = i;
        }
    }
    flush(text.substr(word_start));
    return tokens;
}

}  // namespace convrank
