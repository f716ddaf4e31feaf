#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtgam/dates.hpp"

namespace rtgam {

class Panel;

// Discrete generation interval over lags 1..max_lag; weights()[s - 1] is the
// probability of lag s.
struct GenerationInterval {
  double mean_days = 0;
  double sd_days = 0;
  std::vector<double> weights;

  int max_lag() const { return static_cast<int>(weights.size()); }
  double weight(int lag) const { return weights[static_cast<std::size_t>(lag - 1)]; }
  double discretized_mean() const;
};

// Gamma(mean, sd) integrated over unit bins centered on each lag; lag 1
// collects [0, 1.5]. Renormalized to sum to one over 1..max_lag.
GenerationInterval discretize_generation_interval(double mean_days, double sd_days, int max_lag);

// Infection-to-report delay. onset_to_report[d] and combined[d] are the
// probabilities of a lag of d days, starting at d = 0.
struct DelayModel {
  int incubation_days = 5;
  std::vector<double> onset_to_report;
  std::vector<double> combined;

  int max_delay() const { return static_cast<int>(combined.size()) - 1; }
  double mean() const;
};

// Point-mass incubation convolved with a discretized lognormal onset delay.
DelayModel make_delay_model(int incubation_days, double onset_mean, double onset_sd,
                            int max_onset_delay);
// Whole delay concentrated on one lag (onset delay is a point mass at 0).
DelayModel point_mass_delay(int lag_days);

struct AdjustedIncidence {
  std::vector<double> values;
  std::vector<bool> floored;  // tests below the floor on that day
  double median_tests = 0;
  double test_floor = 0;
};

// 1st percentile of the nonzero test counts, at least 1.
double default_test_floor(std::span<const double> tests);

AdjustedIncidence adjust_for_testing(std::span<const double> cases, std::span<const double> tests,
                                     double test_floor);

struct InfectionSeries {
  std::vector<double> values;
  std::vector<bool> provisional;
};

InfectionSeries shift_to_infection_dates(std::span<const double> adjusted, const DelayModel& delay);

enum class RtFlag : std::uint8_t { Ok, Undefined, Clipped, Provisional };

const char* to_string(RtFlag flag);
std::optional<RtFlag> parse_rt_flag(std::string_view text);

struct RtEstimate {
  std::vector<double> rt;  // NaN where undefined
  std::vector<RtFlag> flags;
};

inline constexpr double kRtMin = 0.01;
inline constexpr double kRtMax = 10.0;

// Renewal ratio over a centered window of half-width `smoothing_half_width`:
// R_t = sum_h I_{t+h} / sum_h sum_s w_s I_{t+h-s}. Days without a full
// max_lag history are undefined.
RtEstimate estimate_rt(std::span<const double> infections, const GenerationInterval& gi,
                       int smoothing_half_width);

struct RtConfig {
  double gi_mean = 4.7;
  double gi_sd = 2.9;
  int gi_max_lag = 20;
  int incubation_days = 5;
  double delay_mean = 5.0;
  double delay_sd = 3.0;
  int delay_max = 21;
  int half_width = 3;
  // Absent means default_test_floor() per province.
  std::optional<double> test_floor;
};

struct RtSeries {
  std::string province;
  std::vector<Date> dates;
  std::vector<double> rt;
  std::vector<RtFlag> flags;
  std::vector<double> adjusted_incidence;
  RtConfig config;
  double test_floor = 0;

  bool usable(std::size_t i) const {
    return flags[i] == RtFlag::Ok || flags[i] == RtFlag::Clipped;
  }
};

using RtSet = std::vector<RtSeries>;

const RtSeries* find_series(const RtSet& set, const std::string& province);

// Full per-province pipeline: test adjustment, back-shift to infection dates,
// renewal ratio. Runs of consecutive panel dates are estimated independently.
RtSeries estimate_province(const Panel& panel, const std::string& province, const RtConfig& config);
RtSet estimate_all(const Panel& panel, const RtConfig& config, int jobs = 1);

}  // namespace rtgam
