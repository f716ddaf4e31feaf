#include "rtgam/rt_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "parallel.hpp"
#include "rtgam/error.hpp"
#include "rtgam/panel.hpp"

namespace rtgam {

namespace {

void normalize(std::vector<double>& w, const char* what) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0)) throw Error(ErrorCode::Numeric, std::string(what) + " has no mass on its support");
  for (double& x : w) x /= total;
}

double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

double GenerationInterval::discretized_mean() const {
  double m = 0;
  for (int s = 1; s <= max_lag(); ++s) m += s * weight(s);
  return m;
}

GenerationInterval discretize_generation_interval(double mean_days, double sd_days, int max_lag) {
  if (!(mean_days > 0) || !(sd_days > 0))
    throw Error(ErrorCode::InvalidArgument, "generation interval mean and sd must be positive");
  if (max_lag < 1 || max_lag < 2.0 * mean_days)
    throw Error(ErrorCode::InvalidArgument, "generation interval max_lag must be at least 2 x mean");
  const double shape = (mean_days / sd_days) * (mean_days / sd_days);
  const double scale = sd_days * sd_days / mean_days;
  auto cdf = [&](double x) { return x <= 0 ? 0.0 : boost::math::gamma_p(shape, x / scale); };

  GenerationInterval gi;
  gi.mean_days = mean_days;
  gi.sd_days = sd_days;
  gi.weights.resize(static_cast<std::size_t>(max_lag));
  for (int s = 1; s <= max_lag; ++s) {
    const double lo = s == 1 ? 0.0 : s - 0.5;
    gi.weights[static_cast<std::size_t>(s - 1)] = cdf(s + 0.5) - cdf(lo);
  }
  normalize(gi.weights, "generation interval");
  return gi;
}

double DelayModel::mean() const {
  double m = 0;
  for (std::size_t d = 0; d < combined.size(); ++d) m += static_cast<double>(d) * combined[d];
  return m;
}

DelayModel make_delay_model(int incubation_days, double onset_mean, double onset_sd,
                            int max_onset_delay) {
  if (incubation_days < 0) throw Error(ErrorCode::InvalidArgument, "incubation must be >= 0 days");
  if (!(onset_mean > 0) || !(onset_sd > 0) || max_onset_delay < 0)
    throw Error(ErrorCode::InvalidArgument, "onset delay mean/sd must be positive");
  const double sigma2 = std::log1p(onset_sd * onset_sd / (onset_mean * onset_mean));
  const double mu = std::log(onset_mean) - 0.5 * sigma2;
  const boost::math::lognormal_distribution<double> dist(mu, std::sqrt(sigma2));
  auto cdf = [&](double x) { return x <= 0 ? 0.0 : boost::math::cdf(dist, x); };

  DelayModel m;
  m.incubation_days = incubation_days;
  m.onset_to_report.resize(static_cast<std::size_t>(max_onset_delay) + 1);
  for (int d = 0; d <= max_onset_delay; ++d)
    m.onset_to_report[static_cast<std::size_t>(d)] = cdf(d + 0.5) - cdf(d - 0.5);
  normalize(m.onset_to_report, "onset delay");
  m.combined.assign(static_cast<std::size_t>(incubation_days), 0.0);
  m.combined.insert(m.combined.end(), m.onset_to_report.begin(), m.onset_to_report.end());
  return m;
}

DelayModel point_mass_delay(int lag_days) {
  if (lag_days < 0) throw Error(ErrorCode::InvalidArgument, "delay must be >= 0 days");
  DelayModel m;
  m.incubation_days = lag_days;
  m.onset_to_report = {1.0};
  m.combined.assign(static_cast<std::size_t>(lag_days), 0.0);
  m.combined.push_back(1.0);
  return m;
}

double default_test_floor(std::span<const double> tests) {
  std::vector<double> nonzero;
  for (double t : tests)
    if (t > 0) nonzero.push_back(t);
  if (nonzero.empty()) return 1.0;
  std::sort(nonzero.begin(), nonzero.end());
  const double h = 0.01 * static_cast<double>(nonzero.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, nonzero.size() - 1);
  const double q = nonzero[lo] + (h - static_cast<double>(lo)) * (nonzero[hi] - nonzero[lo]);
  return std::max(1.0, q);
}

AdjustedIncidence adjust_for_testing(std::span<const double> cases, std::span<const double> tests,
                                     double test_floor) {
  if (cases.size() != tests.size())
    throw Error(ErrorCode::InvalidArgument, "cases and tests differ in length");
  if (!(test_floor >= 1)) throw Error(ErrorCode::InvalidArgument, "test floor must be >= 1");
  if (std::all_of(tests.begin(), tests.end(), [](double t) { return t == 0; }))
    throw Error(ErrorCode::Data, "test series is entirely zero");

  AdjustedIncidence out;
  out.test_floor = test_floor;
  std::vector<double> floored(tests.size());
  out.floored.resize(tests.size());
  for (std::size_t t = 0; t < tests.size(); ++t) {
    out.floored[t] = tests[t] < test_floor;
    floored[t] = std::max(tests[t], test_floor);
  }
  out.median_tests = median(floored);
  out.values.resize(cases.size());
  for (std::size_t t = 0; t < cases.size(); ++t)
    out.values[t] = cases[t] / floored[t] * out.median_tests;
  return out;
}

InfectionSeries shift_to_infection_dates(std::span<const double> adjusted, const DelayModel& delay) {
  if (delay.combined.empty()) throw Error(ErrorCode::InvalidArgument, "delay model is empty");
  const auto n = adjusted.size();
  const auto support = delay.combined.size();
  if (n < support) throw Error(ErrorCode::Data, "series shorter than the delay support");
  const std::size_t max_delay = support - 1;

  InfectionSeries out;
  out.values.assign(n, 0.0);
  out.provisional.assign(n, false);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0;
    for (std::size_t d = 0; d < support && t + d < n; ++d) acc += adjusted[t + d] * delay.combined[d];
    out.values[t] = acc;
    out.provisional[t] = t + max_delay >= n;
  }
  return out;
}

const char* to_string(RtFlag flag) {
  switch (flag) {
    case RtFlag::Ok: return "ok";
    case RtFlag::Undefined: return "undefined";
    case RtFlag::Clipped: return "clipped";
    case RtFlag::Provisional: return "provisional";
  }
  return "undefined";
}

std::optional<RtFlag> parse_rt_flag(std::string_view text) {
  if (text == "ok") return RtFlag::Ok;
  if (text == "undefined") return RtFlag::Undefined;
  if (text == "clipped") return RtFlag::Clipped;
  if (text == "provisional") return RtFlag::Provisional;
  return std::nullopt;
}

RtEstimate estimate_rt(std::span<const double> infections, const GenerationInterval& gi,
                       int smoothing_half_width) {
  const auto n = infections.size();
  const auto lags = static_cast<std::size_t>(gi.max_lag());
  if (lags == 0) throw Error(ErrorCode::InvalidArgument, "generation interval is empty");
  if (smoothing_half_width < 0) throw Error(ErrorCode::InvalidArgument, "half-width must be >= 0");
  if (n <= lags) throw Error(ErrorCode::Data, "series not longer than the generation interval");
  if (std::any_of(infections.begin(), infections.end(), [](double v) { return !(v >= 0); }))
    throw Error(ErrorCode::InvalidArgument, "incidence must be non-negative");
  if (std::all_of(infections.begin(), infections.end(), [](double v) { return v == 0; }))
    throw Error(ErrorCode::Data, "incidence series is entirely zero");

  // Renewal denominator, defined once a full history exists.
  std::vector<double> pressure(n, 0.0);
  for (std::size_t u = lags; u < n; ++u) {
    double acc = 0;
    for (std::size_t s = 1; s <= lags; ++s) acc += gi.weights[s - 1] * infections[u - s];
    pressure[u] = acc;
  }

  RtEstimate out;
  out.rt.assign(n, std::nan(""));
  out.flags.assign(n, RtFlag::Undefined);
  const auto hw = static_cast<std::size_t>(smoothing_half_width);
  for (std::size_t t = lags; t < n; ++t) {
    const std::size_t lo = std::max(lags, t >= hw ? t - hw : 0);
    const std::size_t hi = std::min(n - 1, t + hw);
    double num = 0, den = 0;
    for (std::size_t u = lo; u <= hi; ++u) {
      num += infections[u];
      den += pressure[u];
    }
    if (den < 1e-9) continue;
    const double r = num / den;
    if (r < kRtMin || r > kRtMax) {
      out.rt[t] = std::clamp(r, kRtMin, kRtMax);
      out.flags[t] = RtFlag::Clipped;
    } else {
      out.rt[t] = r;
      out.flags[t] = RtFlag::Ok;
    }
  }
  return out;
}

const RtSeries* find_series(const RtSet& set, const std::string& province) {
  for (const auto& s : set)
    if (s.province == province) return &s;
  return nullptr;
}

RtSeries estimate_province(const Panel& panel, const std::string& province, const RtConfig& config) {
  const auto rows = panel.rows_for(province);
  const GenerationInterval gi =
      discretize_generation_interval(config.gi_mean, config.gi_sd, config.gi_max_lag);
  const DelayModel delay =
      make_delay_model(config.incubation_days, config.delay_mean, config.delay_sd, config.delay_max);

  std::vector<double> cases, tests;
  for (const auto& r : rows) {
    cases.push_back(r.new_cases);
    tests.push_back(r.new_tests);
  }
  RtSeries out;
  out.province = province;
  out.config = config;
  out.test_floor = config.test_floor ? *config.test_floor : default_test_floor(tests);
  const AdjustedIncidence adjusted = adjust_for_testing(cases, tests, out.test_floor);
  out.adjusted_incidence = adjusted.values;
  out.rt.assign(rows.size(), std::nan(""));
  out.flags.assign(rows.size(), RtFlag::Undefined);
  for (const auto& r : rows) out.dates.push_back(r.date);

  // Estimate each run of consecutive dates on its own.
  std::size_t begin = 0;
  while (begin < rows.size()) {
    std::size_t end = begin + 1;
    while (end < rows.size() && days_between(rows[end - 1].date, rows[end].date) == 1) ++end;
    const std::span<const double> run(adjusted.values.data() + begin, end - begin);
    if (run.size() >= delay.combined.size()) {
      const InfectionSeries infections = shift_to_infection_dates(run, delay);
      if (run.size() > static_cast<std::size_t>(gi.max_lag()) &&
          std::any_of(infections.values.begin(), infections.values.end(),
                      [](double v) { return v > 0; })) {
        const RtEstimate est = estimate_rt(infections.values, gi, config.half_width);
        for (std::size_t t = 0; t < run.size(); ++t) {
          out.rt[begin + t] = est.rt[t];
          out.flags[begin + t] = est.flags[t];
          // The smoothing window reaches forward by half_width days.
          const std::size_t reach = std::min(run.size() - 1, t + static_cast<std::size_t>(config.half_width));
          bool provisional = false;
          for (std::size_t u = t; u <= reach; ++u) provisional = provisional || infections.provisional[u];
          if (provisional && est.flags[t] != RtFlag::Undefined)
            out.flags[begin + t] = RtFlag::Provisional;
        }
      }
    }
    begin = end;
  }
  return out;
}

RtSet estimate_all(const Panel& panel, const RtConfig& config, int jobs) {
  RtSet out(panel.provinces().size());
  detail::parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = estimate_province(panel, panel.provinces()[i], config);
  });
  return out;
}

}  // namespace rtgam
