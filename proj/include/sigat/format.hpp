#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace sigat {

// 17 significant digits: parsing the text back yields the same double.
std::string format_real(double value);
std::optional<double> parse_real(std::string_view text);
std::optional<unsigned long long> parse_count(std::string_view text);

}  // namespace sigat
