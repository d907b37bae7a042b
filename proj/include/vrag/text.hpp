#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the parsers. ASCII-only case folding; UTF-8
// multibyte sequences pass through untouched.
namespace vrag::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool is_space(char c);
bool is_word_char(char c);
std::vector<std::string> split_lines(std::string_view s);

/// Fixed-point rendering, e.g. fixed(0.7, 2) == "0.70".
std::string fixed(double value, int decimals);

/// Rounds num/den to `decimals` places with ties going to the even digit,
/// using exact integer arithmetic. `den` must be positive.
double round_ratio_half_even(long long num, long long den, int decimals);

}  // namespace vrag::text
