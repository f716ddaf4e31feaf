#include "rtgam/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "rtgam/error.hpp"
#include "rtgam/gam_engine.hpp"

namespace rtgam {

std::vector<double> simulate_epidemic(std::span<const double> rt_path, const GenerationInterval& gi,
                                      double seed_cases, bool poisson, std::uint64_t seed) {
  if (!(seed_cases > 0)) throw Error(ErrorCode::InvalidArgument, "seed cases must be positive");
  if (std::any_of(rt_path.begin(), rt_path.end(), [](double r) { return !(r > 0); }))
    throw Error(ErrorCode::InvalidArgument, "R_t path must be positive");
  const auto n = rt_path.size();
  const auto lags = static_cast<std::size_t>(gi.max_lag());
  std::mt19937_64 rng(seed);
  std::vector<double> incidence(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    if (t < lags) {
      incidence[t] = seed_cases;
      continue;
    }
    double pressure = 0;
    for (std::size_t s = 1; s <= lags; ++s) pressure += gi.weights[s - 1] * incidence[t - s];
    double mean = rt_path[t] * pressure;
    if (mean > kIncidenceOverflow)
      throw Error(ErrorCode::Numeric, "simulated incidence exceeds 1e12 on day " + std::to_string(t));
    if (poisson) mean = static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
    incidence[t] = mean;
  }
  return incidence;
}

double true_effect_raw(std::string_view covariate, double x) {
  if (covariate == "mobility") return 0.3 * (1.0 - std::exp(-(x + 10.0) / 12.0));
  if (covariate == "temperature") return 0.3 / (1.0 + std::exp((x - 15.0) / 3.5));
  if (covariate == "humidity") return 0.15 * std::exp(-((x - 40.0) / 20.0) * ((x - 40.0) / 20.0));
  if (covariate == "pm25") return 0.032 * std::log1p(std::exp((x - 70.0) / 8.0));
  throw Error(ErrorCode::InvalidArgument, "unknown covariate: " + std::string(covariate));
}

namespace {

double smoothstep(double x, double a, double b) {
  const double t = std::clamp((x - a) / (b - a), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double round_to(double v, double step) { return std::round(v / step) * step; }

// Stationary AR(1) with the given marginal standard deviation.
class Ar1 {
 public:
  Ar1(double phi, double sd) : phi_(phi), innovation_(sd * std::sqrt(1.0 - phi * phi)), sd_(sd) {}
  double next(std::mt19937_64& rng, std::normal_distribution<double>& z) {
    state_ = started_ ? phi_ * state_ + innovation_ * z(rng) : sd_ * z(rng);
    started_ = true;
    return state_;
  }

 private:
  double phi_, innovation_, sd_;
  double state_ = 0;
  bool started_ = false;
};

}  // namespace

Scenario simulate_panel(const ScenarioSpec& spec) {
  if (spec.provinces < 1 || spec.days < 2)
    throw Error(ErrorCode::InvalidArgument, "scenario needs at least one province and two days");
  if (!(spec.noise_sd >= 0)) throw Error(ErrorCode::InvalidArgument, "noise SD must be >= 0");
  if (!spec.intercepts.empty() && spec.intercepts.size() != static_cast<std::size_t>(spec.provinces))
    throw Error(ErrorCode::InvalidArgument, "one intercept per province required");
  if (spec.days <= spec.delay.max_delay() || spec.days <= spec.gi.max_lag())
    throw Error(ErrorCode::InvalidArgument, "scenario shorter than the delay or generation support");

  const auto n_prov = static_cast<std::size_t>(spec.provinces);
  const auto days = static_cast<std::size_t>(spec.days);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);

  Scenario out;
  out.intercepts = spec.intercepts;
  if (out.intercepts.empty())
    for (std::size_t i = 0; i < n_prov; ++i)
      out.intercepts.push_back(n_prov == 1 ? 0.0
                                           : spec.intercept_spread *
                                                 (2.0 * static_cast<double>(i) / static_cast<double>(n_prov - 1) - 1.0));

  const std::vector<std::string> names{"mobility", "temperature", "humidity", "pm25"};
  std::vector<ObservationRow> rows;
  rows.reserve(n_prov * days);
  for (std::size_t p = 0; p < n_prov; ++p) {
    char province[16], region[16];
    std::snprintf(province, sizeof province, "prov%02zu", p + 1);
    std::snprintf(region, sizeof region, "region%zu", p % 6 + 1);
    const double temp_offset = 1.5 * z(rng);
    const double hum_offset = 5.0 * z(rng);
    const double pm_offset = 0.15 * z(rng);
    const double mob_offset = 3.0 * z(rng);
    Ar1 temp_noise(0.85, 3.0), hum_noise(0.75, 14.0), pm_noise(0.75, 0.45), mob_noise(0.8, 4.0);
    for (std::size_t t = 0; t < days; ++t) {
      const double frac = static_cast<double>(t) / static_cast<double>(days - 1);
      const double td = static_cast<double>(t);
      ObservationRow r;
      r.date = spec.start + std::chrono::days{static_cast<int>(t)};
      r.province = province;
      r.region = region;
      r.temperature_c = round_to(std::clamp(7.0 + 22.0 * frac + temp_offset + temp_noise.next(rng, z), 0.5, 36.0), 0.1);
      r.humidity_pct = round_to(std::clamp(66.0 - 8.0 * frac + hum_offset + hum_noise.next(rng, z), 11.5, 100.0), 0.1);
      r.pm25 = round_to(std::clamp(std::exp(std::log(45.0) + pm_offset - 0.25 * frac + pm_noise.next(rng, z)), 5.0, 172.0), 0.1);
      const double lockdown = 35.0 * smoothstep(td, 10.0, 25.0) * (1.0 - 0.7 * smoothstep(td, 70.0, 130.0));
      r.mobility_decrease_pct = round_to(std::clamp(lockdown + mob_offset + mob_noise.next(rng, z), -9.0, 47.0), 0.1);
      rows.push_back(std::move(r));
    }
  }

  for (const auto& name : names) {
    TrueEffect e;
    e.name = name;
    e.zero = spec.zero_effects;
    if (!e.zero) {
      double acc = 0;
      for (const auto& r : rows) acc += true_effect_raw(name, covariate_value(r, name));
      e.centering = acc / static_cast<double>(rows.size());
    }
    out.effects.push_back(e);
  }

  out.log_rt.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double v = out.intercepts[i / days] + spec.noise_sd * z(rng);
    for (const auto& e : out.effects) v += e(covariate_value(rows[i], e.name));
    out.log_rt[i] = v;
  }

  const auto& delay = spec.delay.combined;
  for (std::size_t p = 0; p < n_prov; ++p) {
    const std::size_t base = p * days;
    std::vector<double> rt(days);
    for (std::size_t t = 0; t < days; ++t) rt[t] = std::exp(out.log_rt[base + t]);
    const std::vector<double> infections = simulate_epidemic(rt, spec.gi, spec.seed_cases);

    std::vector<double> reports(days, 0.0);
    for (std::size_t t = 0; t < days; ++t)
      for (std::size_t d = 0; d < delay.size() && d <= t; ++d) reports[t] += infections[t - d] * delay[d];

    std::vector<double> tests(days, spec.base_tests);
    if (!spec.constant_tests)
      for (std::size_t t = 0; t < days; ++t) {
        const double frac = static_cast<double>(t) / static_cast<double>(days - 1);
        const double weekday = (t % 7 == 5 || t % 7 == 6) ? 0.75 : 1.0;
        tests[t] = std::round(spec.base_tests * (1.0 + 0.6 * frac) * weekday * std::exp(0.1 * z(rng)));
      }
    std::vector<double> sorted = tests;
    std::sort(sorted.begin(), sorted.end());
    const double median = days % 2 ? sorted[days / 2] : 0.5 * (sorted[days / 2 - 1] + sorted[days / 2]);

    RtSeries truth;
    truth.province = rows[base].province;
    for (std::size_t t = 0; t < days; ++t) {
      auto& r = rows[base + t];
      r.new_tests = tests[t];
      r.new_cases = std::round(reports[t] * tests[t] / median);
      truth.dates.push_back(r.date);
      truth.rt.push_back(rt[t]);
      truth.flags.push_back(RtFlag::Ok);
      truth.adjusted_incidence.push_back(reports[t]);
    }
    out.truth.push_back(std::move(truth));
  }

  double mean = 0;
  for (double v : out.log_rt) mean += v;
  mean /= static_cast<double>(out.log_rt.size());
  double var = 0;
  for (double v : out.log_rt) var += (v - mean) * (v - mean);
  var /= static_cast<double>(out.log_rt.size() - 1);
  out.explained_fraction = var > 0 ? 1.0 - spec.noise_sd * spec.noise_sd / var : 0.0;

  StudyWindow window{spec.start, spec.start + std::chrono::days{spec.days - 1}};
  out.panel = Panel(std::move(rows), window);
  return out;
}

}  // namespace rtgam
