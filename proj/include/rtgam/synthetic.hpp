#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtgam/dates.hpp"
#include "rtgam/panel.hpp"
#include "rtgam/rt_estimator.hpp"

namespace rtgam {

inline constexpr double kIncidenceOverflow = 1e12;

// Forward renewal model. Days 0..max_lag-1 hold seed_cases; afterwards
// I_t = R_t * sum_s w_s I_{t-s}, Poisson-sampled when `poisson` is set.
std::vector<double> simulate_epidemic(std::span<const double> rt_path,
                                      const GenerationInterval& gi, double seed_cases,
                                      bool poisson = false, std::uint64_t seed = 0);

// Uncentered ground-truth shapes on the log R scale: increasing-saturating
// mobility, decreasing-then-flat temperature, humidity bump below 50 %,
// PM2.5 flat up to ~70 then rising.
double true_effect_raw(std::string_view covariate, double x);

struct TrueEffect {
  std::string name;
  double centering = 0;  // sample mean of the raw shape over the drawn panel
  bool zero = false;

  double operator()(double x) const { return zero ? 0.0 : true_effect_raw(name, x) - centering; }
};

struct ScenarioSpec {
  int provinces = 23;
  int days = 160;
  Date start = make_date(2020, 2, 24);
  // Empty: evenly spaced over [-intercept_spread, intercept_spread].
  std::vector<double> intercepts;
  double intercept_spread = 0.15;
  double noise_sd = 0.05;
  std::uint64_t seed = 1;
  bool zero_effects = false;
  GenerationInterval gi = discretize_generation_interval(4.7, 2.9, 20);
  DelayModel delay = make_delay_model(5, 5.0, 3.0, 21);
  bool constant_tests = false;
  double base_tests = 1000;
  double seed_cases = 200;
};

struct Scenario {
  Panel panel;
  RtSet truth;  // generating R_t on every panel day, all flags Ok
  std::vector<TrueEffect> effects;  // mobility, temperature, humidity, pm25
  std::vector<double> intercepts;
  std::vector<double> log_rt;  // aligned with panel.rows()
  // 1 - noise variance / sample variance of log R_t.
  double explained_fraction = 0;
};

Scenario simulate_panel(const ScenarioSpec& spec);

}  // namespace rtgam
