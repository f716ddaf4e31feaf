#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rtgam/dates.hpp"

namespace rtgam {

struct RtSeries;

// A rejected or suspicious input line. `line` is 1-based and counts the
// header; 0 means the diagnostic is not tied to a single line.
struct Diagnostic {
  std::size_t line = 0;
  std::string source;
  std::string reason;
};

struct CaseRecord {
  Date date;
  std::string province;
  std::string region;
  double new_cases = 0;
  double new_tests = 0;
  std::size_t line = 0;
};

struct EnvironmentRecord {
  Date date;
  std::string province;
  double temperature_c = 0;
  double humidity_pct = 0;
  double pm25 = 0;
  std::size_t line = 0;
};

struct MobilityRecord {
  Date date;
  std::string province;
  double mobility_decrease_pct = 0;
  std::size_t line = 0;
};

struct RawSources {
  std::vector<CaseRecord> cases;
  std::vector<EnvironmentRecord> environment;
  std::vector<MobilityRecord> mobility;
  std::vector<Diagnostic> diagnostics;
};

struct IngestConfig {
  // When set, an unparsable numeric field aborts ingestion with the line
  // number instead of becoming a diagnostic.
  bool strict = false;
};

inline constexpr const char* kCasesHeader = "date,province,region,new_cases,new_tests";
inline constexpr const char* kEnvironmentHeader = "date,province,temperature_c,humidity_pct,pm25";
inline constexpr const char* kMobilityHeader = "date,province,mobility_decrease_pct";

void parse_cases(std::istream& in, const IngestConfig& config, RawSources& out);
void parse_environment(std::istream& in, const IngestConfig& config, RawSources& out);
void parse_mobility(std::istream& in, const IngestConfig& config, RawSources& out);

RawSources ingest_sources(const std::filesystem::path& case_file,
                          const std::filesystem::path& environment_file,
                          const std::filesystem::path& mobility_file,
                          const IngestConfig& config = {});

// One joined province-day with every analysis field present.
struct ObservationRow {
  Date date;
  std::string province;
  std::string region;
  double new_cases = 0;
  double new_tests = 0;
  double temperature_c = 0;
  double humidity_pct = 0;
  double pm25 = 0;
  double mobility_decrease_pct = 0;
};

// Rows ordered by province then date. Construction validates the ordering and
// value-range invariants; the cumulative-case threshold is applied by
// build_panel, not here, so synthetic or pre-filtered panels can be loaded.
class Panel {
 public:
  Panel() = default;
  Panel(std::vector<ObservationRow> rows, StudyWindow window);

  const std::vector<ObservationRow>& rows() const { return rows_; }
  const std::vector<std::string>& provinces() const { return provinces_; }
  const StudyWindow& window() const { return window_; }
  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return rows_.size(); }

  std::span<const ObservationRow> rows_for(const std::string& province) const;
  bool contains(const std::string& province) const;

  // Keeps only the listed provinces (order of the panel is preserved).
  Panel subset(std::span<const std::string> provinces) const;
  Panel without(const std::string& province) const;

 private:
  std::vector<ObservationRow> rows_;
  std::vector<std::string> provinces_;
  std::vector<std::size_t> offsets_;  // provinces_.size() + 1 entries
  StudyWindow window_;
};

struct PanelConfig {
  double case_threshold = 2000;
  StudyWindow window;
  double max_missing_frac = 0.2;
  int max_interpolation_gap = 3;
};

Panel build_panel(const RawSources& raw, const PanelConfig& config,
                  std::vector<Diagnostic>* diagnostics = nullptr);

struct VariableSummary {
  std::string name;
  double mean = 0;
  double sd = 0;  // sample SD, n - 1 denominator
  double min = 0;
  double max = 0;
  std::size_t n = 0;
};

using SummaryTable = std::vector<VariableSummary>;

VariableSummary describe(std::string name, std::span<const double> values);

// Pools every province-day. When `rt` is given, an "rt" row is appended using
// the usable (defined, non-provisional) estimates on panel dates.
SummaryTable summarize_panel(const Panel& panel, const std::vector<RtSeries>* rt = nullptr);

}  // namespace rtgam
