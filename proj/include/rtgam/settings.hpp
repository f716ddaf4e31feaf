#pragma once

#include "rtgam/config.hpp"
#include "rtgam/gam_engine.hpp"
#include "rtgam/panel.hpp"
#include "rtgam/rt_estimator.hpp"
#include "rtgam/synthetic.hpp"

// Typed views of a KeyValueConfig. Unset keys take the library defaults.
//
//   panel.threshold  panel.start  panel.end  panel.max_missing_frac  panel.max_gap
//   ingest.strict
//   gi.mean  gi.sd  gi.max_lag
//   delay.incubation  delay.mean  delay.sd  delay.max
//   rt.half_width  rt.test_floor
//   model.k  model.smooths  model.lambda_min  model.lambda_max  model.lambda_points
//   model.sweeps  model.shrinkage
//   effects.grid
//   run.jobs  run.seed
//   sim.provinces  sim.days  sim.start  sim.noise_sd  sim.intercept_spread
//   sim.zero_effects  sim.constant_tests  sim.point_delay  sim.seed_cases  sim.base_tests
namespace rtgam {

IngestConfig ingest_config(const KeyValueConfig& config);
PanelConfig panel_config(const KeyValueConfig& config);
RtConfig rt_config(const KeyValueConfig& config);
ModelSpec model_spec(const KeyValueConfig& config);
ScenarioSpec scenario_spec(const KeyValueConfig& config);
int effects_grid_size(const KeyValueConfig& config);
int jobs(const KeyValueConfig& config);

}  // namespace rtgam
