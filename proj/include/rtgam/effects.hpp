#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rtgam/gam_engine.hpp"

namespace rtgam {

struct PartialEffect {
  std::string term;
  std::vector<double> grid;
  std::vector<double> effect;
  std::vector<double> se;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<bool> extrapolated;
};

// Evenly spaced grid over the term's training range.
PartialEffect partial_effects(const FittedGam& model, const std::string& term,
                              int grid_size = 200);
PartialEffect partial_effects_at(const FittedGam& model, const std::string& term,
                                 std::span<const double> grid);

struct ProvinceFit {
  std::string province;
  FittedGam model;
};

struct PerProvinceResult {
  std::vector<ProvinceFit> fits;  // panel province order
  std::vector<Diagnostic> skipped;
};

PerProvinceResult fit_per_province(const Panel& panel, const RtSet& rt, const ModelSpec& spec,
                                   int jobs = 1);

struct CvFold {
  std::string province;
  double mse = 0;
  std::size_t n = 0;
  std::vector<std::string> training_provinces;
  bool ok = false;
  std::string error;
};

struct CvReport {
  std::vector<CvFold> folds;  // panel province order
  double global_mse = 0;      // pooled over all held-out rows of successful folds
};

// Leave-one-province-out. The held-out level is the mean of the training
// intercepts.
CvReport lopo_cv(const Panel& panel, const RtSet& rt, const ModelSpec& spec, int jobs = 1);

}  // namespace rtgam
