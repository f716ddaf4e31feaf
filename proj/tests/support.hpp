#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rtgam/panel.hpp"
#include "rtgam/rt_estimator.hpp"

namespace rtgam::testing {

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rtgam_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// One province-day with unremarkable covariates.
inline ObservationRow row(const std::string& province, Date date, double cases = 10, double tests = 100,
                          double temp = 15, double hum = 60, double pm = 30, double mob = 10) {
  ObservationRow r;
  r.date = date;
  r.province = province;
  r.region = "r";
  r.new_cases = cases;
  r.new_tests = tests;
  r.temperature_c = temp;
  r.humidity_pct = hum;
  r.pm25 = pm;
  r.mobility_decrease_pct = mob;
  return r;
}

// R_t series aligned with a panel province, all flags Ok.
inline RtSeries rt_series(const Panel& panel, const std::string& province, const std::vector<double>& values) {
  RtSeries s;
  s.province = province;
  for (const auto& r : panel.rows_for(province)) s.dates.push_back(r.date);
  s.rt = values;
  s.flags.assign(values.size(), RtFlag::Ok);
  return s;
}

}  // namespace rtgam::testing
