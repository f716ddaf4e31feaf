#include "rtgam/settings.hpp"

#include <sstream>

#include "rtgam/error.hpp"

namespace rtgam {

namespace {

Date date_key(const KeyValueConfig& config, const std::string& key, Date fallback) {
  auto v = config.get(key);
  if (!v) return fallback;
  auto d = parse_date(*v);
  if (!d) throw Error(ErrorCode::Parse, "config key " + key + ": not a YYYY-MM-DD date: '" + *v + "'");
  return *d;
}

int int_key(const KeyValueConfig& config, const std::string& key, int fallback) {
  return static_cast<int>(config.get_int(key, fallback));
}

}  // namespace

IngestConfig ingest_config(const KeyValueConfig& config) {
  IngestConfig out;
  out.strict = config.get_bool("ingest.strict", out.strict);
  return out;
}

PanelConfig panel_config(const KeyValueConfig& config) {
  PanelConfig out;
  out.case_threshold = config.get_double("panel.threshold", out.case_threshold);
  out.window.start = date_key(config, "panel.start", out.window.start);
  out.window.end = date_key(config, "panel.end", out.window.end);
  out.max_missing_frac = config.get_double("panel.max_missing_frac", out.max_missing_frac);
  out.max_interpolation_gap = int_key(config, "panel.max_gap", out.max_interpolation_gap);
  return out;
}

RtConfig rt_config(const KeyValueConfig& config) {
  RtConfig out;
  out.gi_mean = config.get_double("gi.mean", out.gi_mean);
  out.gi_sd = config.get_double("gi.sd", out.gi_sd);
  out.gi_max_lag = int_key(config, "gi.max_lag", out.gi_max_lag);
  out.incubation_days = int_key(config, "delay.incubation", out.incubation_days);
  out.delay_mean = config.get_double("delay.mean", out.delay_mean);
  out.delay_sd = config.get_double("delay.sd", out.delay_sd);
  out.delay_max = int_key(config, "delay.max", out.delay_max);
  out.half_width = int_key(config, "rt.half_width", out.half_width);
  if (config.has("rt.test_floor")) out.test_floor = config.get_double("rt.test_floor", 1.0);
  return out;
}

ModelSpec model_spec(const KeyValueConfig& config) {
  ModelSpec out;
  out.k = int_key(config, "model.k", out.k);
  if (auto smooths = config.get("model.smooths")) {
    out.smooths.clear();
    std::stringstream ss(*smooths);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(' ');
      const auto e = item.find_last_not_of(' ');
      if (b != std::string::npos) out.smooths.push_back(item.substr(b, e - b + 1));
    }
  }
  const double lo = config.get_double("model.lambda_min", 1e-6);
  const double hi = config.get_double("model.lambda_max", 1e6);
  const int points = int_key(config, "model.lambda_points", 61);
  out.lambda_grid = log_grid(lo, hi, points);
  out.sweeps = int_key(config, "model.sweeps", out.sweeps);
  out.shrinkage = config.get_bool("model.shrinkage", out.shrinkage);
  return out;
}

ScenarioSpec scenario_spec(const KeyValueConfig& config) {
  ScenarioSpec out;
  out.provinces = int_key(config, "sim.provinces", out.provinces);
  out.days = int_key(config, "sim.days", out.days);
  out.start = date_key(config, "sim.start", out.start);
  out.noise_sd = config.get_double("sim.noise_sd", out.noise_sd);
  out.intercept_spread = config.get_double("sim.intercept_spread", out.intercept_spread);
  out.zero_effects = config.get_bool("sim.zero_effects", out.zero_effects);
  out.constant_tests = config.get_bool("sim.constant_tests", out.constant_tests);
  out.seed_cases = config.get_double("sim.seed_cases", out.seed_cases);
  out.base_tests = config.get_double("sim.base_tests", out.base_tests);
  out.seed = static_cast<std::uint64_t>(config.get_int("run.seed", 1));
  const RtConfig rt = rt_config(config);
  out.gi = discretize_generation_interval(rt.gi_mean, rt.gi_sd, rt.gi_max_lag);
  const int point = int_key(config, "sim.point_delay", -1);
  out.delay = point >= 0 ? point_mass_delay(point)
                         : make_delay_model(rt.incubation_days, rt.delay_mean, rt.delay_sd, rt.delay_max);
  return out;
}

int effects_grid_size(const KeyValueConfig& config) { return int_key(config, "effects.grid", 200); }

int jobs(const KeyValueConfig& config) { return int_key(config, "run.jobs", 0); }

}  // namespace rtgam
