#pragma once

// Small text helpers shared by the readers and writers.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rtgam::detail {

std::string trim(std::string_view s);
std::vector<std::string> split_csv(std::string_view line);
// Strict decimal parse of the whole field; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view field);
bool is_missing(std::string_view field);  // empty or NA
std::string format_number(double value);

}  // namespace rtgam::detail
