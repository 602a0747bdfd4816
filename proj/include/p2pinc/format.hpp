#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace p2pinc {

/// Shortest decimal text that parses back to exactly `value`.
[[nodiscard]] inline std::string format_double(double value) {
    char buffer[64];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    if (ec != std::errc{}) {
        throw std::runtime_error("failed to format floating-point value");
    }
    return std::string(buffer, end);
}

/// Parses a whole token as a double; throws std::invalid_argument otherwise.
[[nodiscard]] inline double parse_double(std::string_view text) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace p2pinc
