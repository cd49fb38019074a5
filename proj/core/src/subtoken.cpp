#include "memgauge/subtoken.hpp"

#include <cctype>

namespace memgauge {

namespace {

inline bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_word(char c) { return is_lower(c) || is_upper(c) || is_digit(c); }
inline char to_lower(char c) { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }

} // namespace

std::vector<std::string> split_subtokens(const std::string& token) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            out.push_back(current);
            current.clear();
        }
    };
    char prev = '\0';
    for (char c : token) {
        if (!is_word(c)) {
            flush();
            prev = '\0';
            continue;
        }
        if (!current.empty()) {
            const bool camel = is_lower(prev) && is_upper(c);
            const bool letter_digit = is_digit(prev) != is_digit(c);
            if (camel || letter_digit) flush();
        }
        current.push_back(to_lower(c));
        prev = c;
    }
    flush();
    if (out.empty() && !token.empty()) {
        out.push_back(token); // pure punctuation keeps itself
    }
    return out;
}

std::string normalized_form(const std::string& token) {
    std::string joined;
    for (const auto& part : split_subtokens(token)) joined += part;
    return joined;
}

} // namespace memgauge
