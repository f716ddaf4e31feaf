#include "rtgam/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "rtgam/error.hpp"
#include "rtgam/rt_estimator.hpp"
#include "text.hpp"

namespace rtgam {

namespace {

using detail::is_missing;
using detail::parse_double;
using detail::split_csv;
using detail::trim;

// Line-oriented reader that validates the header and hands each data line to
// `on_row` with its 1-based line number.
template <typename OnRow>
void read_table(std::istream& in, const char* source, const char* header, OnRow on_row) {
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    if (!have_header) {
      auto got = split_csv(stripped);
      auto want = split_csv(header);
      if (got != want)
        throw Error(ErrorCode::Parse, std::string(source) + ": header mismatch at line " +
                                          std::to_string(number) + ": expected '" + header +
                                          "'");
      have_header = true;
      continue;
    }
    on_row(split_csv(stripped), number);
  }
  if (!have_header) throw Error(ErrorCode::Parse, std::string(source) + ": missing header row");
}

// Numeric field parse shared by the three sources. Returns false (after
// recording a diagnostic) when the row must be rejected.
bool numeric_field(const std::string& field, const char* name, const char* source,
                   std::size_t line, const IngestConfig& config, RawSources& out, double& value,
                   bool allow_missing) {
  if (is_missing(field)) {
    if (allow_missing) {
      value = std::nan("");
      return true;
    }
    out.diagnostics.push_back({line, source, std::string("missing ") + name});
    return false;
  }
  auto parsed = parse_double(field);
  if (!parsed) {
    if (config.strict)
      throw Error(ErrorCode::Parse, std::string(source) + " line " + std::to_string(line) +
                                        ": cannot parse " + name + " '" + field + "'");
    out.diagnostics.push_back({line, source, std::string("unparsable ") + name + " '" + field + "'"});
    return false;
  }
  value = *parsed;
  return true;
}

bool date_field(const std::string& field, const char* source, std::size_t line, RawSources& out,
                Date& value) {
  auto d = parse_date(field);
  if (!d) {
    out.diagnostics.push_back({line, source, "invalid date '" + field + "'"});
    return false;
  }
  value = *d;
  return true;
}

bool field_count(const std::vector<std::string>& fields, std::size_t want, const char* source,
                 std::size_t line, RawSources& out) {
  if (fields.size() == want) return true;
  out.diagnostics.push_back({line, source,
                             "expected " + std::to_string(want) + " fields, found " +
                                 std::to_string(fields.size())});
  return false;
}

bool is_count(double v) { return v >= 0 && std::floor(v) == v; }

}  // namespace

void parse_cases(std::istream& in, const IngestConfig& config, RawSources& out) {
  constexpr const char* source = "cases";
  read_table(in, source, kCasesHeader, [&](const std::vector<std::string>& f, std::size_t line) {
    if (!field_count(f, 5, source, line, out)) return;
    CaseRecord r;
    r.line = line;
    if (!date_field(f[0], source, line, out, r.date)) return;
    if (f[1].empty()) {
      out.diagnostics.push_back({line, source, "empty province"});
      return;
    }
    r.province = f[1];
    r.region = f[2];
    if (!numeric_field(f[3], "new_cases", source, line, config, out, r.new_cases, false)) return;
    if (!numeric_field(f[4], "new_tests", source, line, config, out, r.new_tests, false)) return;
    if (!is_count(r.new_cases)) {
      out.diagnostics.push_back({line, source, "new_cases is not a non-negative count"});
      return;
    }
    if (!is_count(r.new_tests)) {
      out.diagnostics.push_back({line, source, "new_tests is not a non-negative count"});
      return;
    }
    out.cases.push_back(std::move(r));
  });
}

void parse_environment(std::istream& in, const IngestConfig& config, RawSources& out) {
  constexpr const char* source = "environment";
  read_table(in, source, kEnvironmentHeader,
             [&](const std::vector<std::string>& f, std::size_t line) {
               if (!field_count(f, 5, source, line, out)) return;
               EnvironmentRecord r;
               r.line = line;
               if (!date_field(f[0], source, line, out, r.date)) return;
               if (f[1].empty()) {
                 out.diagnostics.push_back({line, source, "empty province"});
                 return;
               }
               r.province = f[1];
               if (!numeric_field(f[2], "temperature_c", source, line, config, out,
                                  r.temperature_c, true))
                 return;
               if (!numeric_field(f[3], "humidity_pct", source, line, config, out,
                                  r.humidity_pct, true))
                 return;
               if (!numeric_field(f[4], "pm25", source, line, config, out, r.pm25, true)) return;
               if (r.humidity_pct < 0 || r.humidity_pct > 100) {
                 out.diagnostics.push_back({line, source, "humidity out of range"});
                 return;
               }
               if (r.pm25 < 0) {
                 out.diagnostics.push_back({line, source, "pm25 negative"});
                 return;
               }
               out.environment.push_back(std::move(r));
             });
}

void parse_mobility(std::istream& in, const IngestConfig& config, RawSources& out) {
  constexpr const char* source = "mobility";
  read_table(in, source, kMobilityHeader,
             [&](const std::vector<std::string>& f, std::size_t line) {
               if (!field_count(f, 3, source, line, out)) return;
               MobilityRecord r;
               r.line = line;
               if (!date_field(f[0], source, line, out, r.date)) return;
               if (f[1].empty()) {
                 out.diagnostics.push_back({line, source, "empty province"});
                 return;
               }
               r.province = f[1];
               if (!numeric_field(f[2], "mobility_decrease_pct", source, line, config, out,
                                  r.mobility_decrease_pct, true))
                 return;
               if (r.mobility_decrease_pct > 100) {
                 out.diagnostics.push_back({line, source, "mobility decrease above 100%"});
                 return;
               }
               out.mobility.push_back(std::move(r));
             });
}

RawSources ingest_sources(const std::filesystem::path& case_file,
                          const std::filesystem::path& environment_file,
                          const std::filesystem::path& mobility_file, const IngestConfig& config) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
    return in;
  };
  RawSources out;
  {
    auto in = open(case_file);
    parse_cases(in, config, out);
  }
  {
    auto in = open(environment_file);
    parse_environment(in, config, out);
  }
  {
    auto in = open(mobility_file);
    parse_mobility(in, config, out);
  }
  return out;
}

// ---------------------------------------------------------------------------

Panel::Panel(std::vector<ObservationRow> rows, StudyWindow window)
    : rows_(std::move(rows)), window_(window) {
  std::stable_sort(rows_.begin(), rows_.end(), [](const ObservationRow& a, const ObservationRow& b) {
    return std::tie(a.province, a.date) < std::tie(b.province, b.date);
  });
  offsets_.push_back(0);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (r.province.empty()) throw Error(ErrorCode::Data, "panel row with empty province");
    if (i > 0 && rows_[i - 1].province == r.province && rows_[i - 1].date == r.date)
      throw Error(ErrorCode::Data, "duplicate panel row for " + r.province + " on " +
                                       format_date(r.date));
    if (!window_.contains(r.date))
      throw Error(ErrorCode::Data, "row outside study window for " + r.province + " on " +
                                       format_date(r.date));
    if (!(r.new_cases >= 0) || !(r.new_tests >= 0))
      throw Error(ErrorCode::Data, "negative count for " + r.province + " on " + format_date(r.date));
    if (!(r.humidity_pct >= 0 && r.humidity_pct <= 100))
      throw Error(ErrorCode::Data, "humidity out of range for " + r.province + " on " +
                                       format_date(r.date));
    if (!(r.pm25 >= 0))
      throw Error(ErrorCode::Data, "negative pm25 for " + r.province + " on " + format_date(r.date));
    if (!std::isfinite(r.temperature_c) || !std::isfinite(r.mobility_decrease_pct))
      throw Error(ErrorCode::Data, "missing field for " + r.province + " on " + format_date(r.date));
    if (i == 0 || rows_[i - 1].province != r.province) {
      if (i > 0) offsets_.push_back(i);
      provinces_.push_back(r.province);
    }
  }
  if (!rows_.empty()) offsets_.push_back(rows_.size());
}

std::span<const ObservationRow> Panel::rows_for(const std::string& province) const {
  auto it = std::lower_bound(provinces_.begin(), provinces_.end(), province);
  if (it == provinces_.end() || *it != province)
    throw Error(ErrorCode::InvalidArgument, "province not in panel: " + province);
  const auto i = static_cast<std::size_t>(it - provinces_.begin());
  return std::span<const ObservationRow>(rows_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

bool Panel::contains(const std::string& province) const {
  return std::binary_search(provinces_.begin(), provinces_.end(), province);
}

Panel Panel::subset(std::span<const std::string> provinces) const {
  std::set<std::string> keep(provinces.begin(), provinces.end());
  std::vector<ObservationRow> rows;
  for (const auto& r : rows_)
    if (keep.count(r.province)) rows.push_back(r);
  return Panel(std::move(rows), window_);
}

Panel Panel::without(const std::string& province) const {
  std::vector<ObservationRow> rows;
  rows.reserve(rows_.size());
  for (const auto& r : rows_)
    if (r.province != province) rows.push_back(r);
  return Panel(std::move(rows), window_);
}

// ---------------------------------------------------------------------------

namespace {

template <typename Record>
std::map<std::pair<std::string, Date>, const Record*> index_by_key(
    const std::vector<Record>& records, const char* source) {
  std::map<std::pair<std::string, Date>, const Record*> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.emplace(std::make_pair(r.province, r.date), &r);
    if (!inserted)
      throw Error(ErrorCode::Data, std::string("duplicate (province, date) key in ") + source +
                                       ": " + r.province + " " + format_date(r.date) +
                                       " at lines " + std::to_string(it->second->line) + " and " +
                                       std::to_string(r.line));
  }
  return index;
}

// Fills interior NaN runs of length <= max_gap by linear interpolation in the
// day index. Edge runs and longer runs stay NaN.
void interpolate_gaps(std::vector<double>& v, int max_gap) {
  const std::size_t n = v.size();
  std::size_t i = 0;
  while (i < n) {
    if (!std::isnan(v[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && std::isnan(v[j])) ++j;
    const bool interior = i > 0 && j < n;
    if (interior && static_cast<int>(j - i) <= max_gap) {
      const double a = v[i - 1], b = v[j];
      const double span = static_cast<double>(j - i + 1);
      for (std::size_t k = i; k < j; ++k) v[k] = a + (b - a) * static_cast<double>(k - i + 1) / span;
    }
    i = j;
  }
}

}  // namespace

Panel build_panel(const RawSources& raw, const PanelConfig& config,
                  std::vector<Diagnostic>* diagnostics) {
  auto note = [&](std::string reason) {
    if (diagnostics) diagnostics->push_back({0, "panel", std::move(reason)});
  };
  if (config.window.end < config.window.start)
    throw Error(ErrorCode::InvalidArgument, "study window ends before it starts");

  const auto cases = index_by_key(raw.cases, "cases");
  const auto env = index_by_key(raw.environment, "environment");
  const auto mob = index_by_key(raw.mobility, "mobility");

  std::map<std::string, std::vector<const CaseRecord*>> by_province;
  for (const auto& [key, rec] : cases)
    if (config.window.contains(key.second)) by_province[key.first].push_back(rec);

  std::vector<ObservationRow> rows;
  for (const auto& [province, records] : by_province) {
    const double cumulative = std::accumulate(
        records.begin(), records.end(), 0.0,
        [](double acc, const CaseRecord* r) { return acc + r->new_cases; });
    if (!(cumulative > config.case_threshold)) {
      note("province " + province + ": cumulative cases " + detail::format_number(cumulative) +
           " not above threshold " + detail::format_number(config.case_threshold));
      continue;
    }
    const Date first = records.front()->date;
    const Date last = records.back()->date;
    const auto days = static_cast<std::size_t>(days_between(first, last) + 1);

    std::vector<double> cases_v(days, std::nan("")), tests_v(days, std::nan(""));
    std::vector<double> temp(days, std::nan("")), hum(days, std::nan("")), pm(days, std::nan(""));
    std::vector<double> mobility(days, std::nan(""));
    for (std::size_t t = 0; t < days; ++t) {
      const Date d = first + std::chrono::days{static_cast<int>(t)};
      const auto key = std::make_pair(province, d);
      if (auto it = cases.find(key); it != cases.end()) {
        cases_v[t] = it->second->new_cases;
        tests_v[t] = it->second->new_tests;
      }
      if (auto it = env.find(key); it != env.end()) {
        temp[t] = it->second->temperature_c;
        hum[t] = it->second->humidity_pct;
        pm[t] = it->second->pm25;
      }
      if (auto it = mob.find(key); it != mob.end()) mobility[t] = it->second->mobility_decrease_pct;
    }

    std::size_t missing = 0;
    for (std::size_t t = 0; t < days; ++t)
      if (std::isnan(cases_v[t]) || std::isnan(temp[t]) || std::isnan(hum[t]) ||
          std::isnan(pm[t]) || std::isnan(mobility[t]))
        ++missing;
    const double frac = static_cast<double>(missing) / static_cast<double>(days);
    if (frac > config.max_missing_frac) {
      note("province " + province + ": " + detail::format_number(100.0 * frac) +
           "% of days missing a field, above max_missing_frac " +
           detail::format_number(config.max_missing_frac));
      continue;
    }

    interpolate_gaps(temp, config.max_interpolation_gap);
    interpolate_gaps(hum, config.max_interpolation_gap);
    interpolate_gaps(pm, config.max_interpolation_gap);

    const std::string& region = records.front()->region;
    std::size_t kept = 0;
    for (std::size_t t = 0; t < days; ++t) {
      if (std::isnan(cases_v[t]) || std::isnan(temp[t]) || std::isnan(hum[t]) ||
          std::isnan(pm[t]) || std::isnan(mobility[t]))
        continue;
      ObservationRow r;
      r.date = first + std::chrono::days{static_cast<int>(t)};
      r.province = province;
      r.region = region;
      r.new_cases = cases_v[t];
      r.new_tests = tests_v[t];
      r.temperature_c = temp[t];
      r.humidity_pct = hum[t];
      r.pm25 = pm[t];
      r.mobility_decrease_pct = mobility[t];
      rows.push_back(std::move(r));
      ++kept;
    }
    if (kept < days)
      note("province " + province + ": dropped " + std::to_string(days - kept) +
           " day(s) with unrecoverable gaps");
  }
  if (rows.empty()) throw Error(ErrorCode::Data, "no provinces qualify");
  return Panel(std::move(rows), config.window);
}

// ---------------------------------------------------------------------------

VariableSummary describe(std::string name, std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::Data, "cannot summarize empty variable " + name);
  VariableSummary s;
  s.name = std::move(name);
  s.n = values.size();
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  s.mean = std::clamp(mean, s.min, s.max);
  s.sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  return s;
}

SummaryTable summarize_panel(const Panel& panel, const std::vector<RtSeries>* rt) {
  if (panel.empty()) throw Error(ErrorCode::Data, "cannot summarize an empty panel");
  const auto& rows = panel.rows();
  auto column = [&](auto field) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.*field);
    return v;
  };
  SummaryTable table;
  table.push_back(describe("new_cases", column(&ObservationRow::new_cases)));
  table.push_back(describe("new_tests", column(&ObservationRow::new_tests)));
  table.push_back(describe("temperature_c", column(&ObservationRow::temperature_c)));
  table.push_back(describe("humidity_pct", column(&ObservationRow::humidity_pct)));
  table.push_back(describe("pm25", column(&ObservationRow::pm25)));
  table.push_back(describe("mobility_decrease_pct", column(&ObservationRow::mobility_decrease_pct)));
  if (rt) {
    std::vector<double> values;
    for (const auto& province : panel.provinces()) {
      const RtSeries* series = find_series(*rt, province);
      if (!series) continue;
      std::map<Date, std::size_t> at;
      for (std::size_t i = 0; i < series->dates.size(); ++i) at[series->dates[i]] = i;
      for (const auto& r : panel.rows_for(province)) {
        auto it = at.find(r.date);
        if (it != at.end() && series->usable(it->second)) values.push_back(series->rt[it->second]);
      }
    }
    table.push_back(describe("rt", values));
  }
  return table;
}

}  // namespace rtgam
