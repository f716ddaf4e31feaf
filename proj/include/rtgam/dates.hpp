#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace rtgam {

using Date = std::chrono::sys_days;

// Parses YYYY-MM-DD. Returns nullopt for anything else, including impossible
// calendar days such as 2020-02-30.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);

inline Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

inline int days_between(Date from, Date to) { return (to - from).count(); }

struct StudyWindow {
  Date start = make_date(2020, 2, 24);
  Date end = make_date(2020, 8, 1);

  bool contains(Date d) const { return d >= start && d <= end; }
};

}  // namespace rtgam
