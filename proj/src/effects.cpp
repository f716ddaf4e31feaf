#include "rtgam/effects.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "parallel.hpp"
#include "rtgam/error.hpp"

namespace rtgam {

PartialEffect partial_effects_at(const FittedGam& model, const std::string& term,
                                 std::span<const double> grid) {
  const int j = model.term_index(term);
  if (j < 0) throw Error(ErrorCode::InvalidArgument, "unknown term: " + term);
  const SmoothTerm& smooth = model.terms[static_cast<std::size_t>(j)];
  const Eigen::MatrixXd b = smooth.basis(grid);
  const Eigen::VectorXd coef = model.term_coefficients(j);
  const Eigen::MatrixXd cov = model.term_covariance(j);
  const Eigen::VectorXd effect = b * coef;

  PartialEffect out;
  out.term = term;
  out.grid.assign(grid.begin(), grid.end());
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    const double var = b.row(i).dot(cov * b.row(i).transpose());
    const double se = std::sqrt(std::max(var, 0.0));
    const double e = effect(i);
    out.effect.push_back(e);
    out.se.push_back(se);
    out.lo.push_back(e - 1.96 * se);
    out.hi.push_back(e + 1.96 * se);
    out.extrapolated.push_back(smooth.outside_range(grid[static_cast<std::size_t>(i)]));
  }
  return out;
}

PartialEffect partial_effects(const FittedGam& model, const std::string& term, int grid_size) {
  const int j = model.term_index(term);
  if (j < 0) throw Error(ErrorCode::InvalidArgument, "unknown term: " + term);
  if (grid_size < 2) throw Error(ErrorCode::InvalidArgument, "grid size must be at least 2");
  const auto& spec = model.terms[static_cast<std::size_t>(j)].spec();
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  for (int i = 0; i < grid_size; ++i)
    grid[static_cast<std::size_t>(i)] =
        spec.range_min + (spec.range_max - spec.range_min) * i / (grid_size - 1);
  grid.back() = spec.range_max;
  return partial_effects_at(model, term, grid);
}

PerProvinceResult fit_per_province(const Panel& panel, const RtSet& rt, const ModelSpec& spec,
                                   int jobs) {
  const auto& provinces = spec.provinces.empty() ? panel.provinces() : spec.provinces;
  std::vector<std::optional<FittedGam>> fits(provinces.size());
  std::vector<std::string> reasons(provinces.size());
  const std::size_t columns = 1 + spec.smooths.size() * static_cast<std::size_t>(spec.k - 1);

  detail::parallel_for(provinces.size(), jobs, [&](std::size_t i) {
    ModelSpec local = spec;
    local.provinces = {provinces[i]};
    try {
      Design design = assemble_design(panel, rt, local);
      if (design.rows.size() <= columns + 5) {
        reasons[i] = "only " + std::to_string(design.rows.size()) + " usable rows; need more than " +
                     std::to_string(columns + 5);
        return;
      }
      fits[i] = fit_design(std::move(design), local);
    } catch (const Error& e) {
      reasons[i] = e.what();
    }
  });

  PerProvinceResult out;
  for (std::size_t i = 0; i < provinces.size(); ++i) {
    if (fits[i])
      out.fits.push_back({provinces[i], std::move(*fits[i])});
    else
      out.skipped.push_back({0, "per-province", provinces[i] + ": " + reasons[i]});
  }
  return out;
}

CvReport lopo_cv(const Panel& panel, const RtSet& rt, const ModelSpec& spec, int jobs) {
  const std::vector<std::string> provinces = spec.provinces.empty() ? panel.provinces() : spec.provinces;
  if (provinces.size() < 3)
    throw Error(ErrorCode::InvalidArgument, "leave-one-province-out needs at least 3 provinces");

  CvReport report;
  report.folds.resize(provinces.size());
  std::vector<double> sse(provinces.size(), 0.0);
  detail::parallel_for(provinces.size(), jobs, [&](std::size_t i) {
    CvFold& fold = report.folds[i];
    fold.province = provinces[i];
    std::vector<std::string> training;
    for (const auto& p : provinces)
      if (p != fold.province) training.push_back(p);
    try {
      ModelSpec local = spec;
      local.provinces = training;
      const FittedGam model = fit_gam(panel.without(fold.province), rt, local);
      fold.training_provinces = model.provinces;
      if (std::find(model.provinces.begin(), model.provinces.end(), fold.province) !=
          model.provinces.end())
        throw Error(ErrorCode::Internal, "fold training set contains the held-out province");

      const RtSeries* series = find_series(rt, fold.province);
      if (!series) throw Error(ErrorCode::Data, "province " + fold.province + " has no R_t series");
      std::map<Date, std::size_t> at;
      for (std::size_t t = 0; t < series->dates.size(); ++t) at[series->dates[t]] = t;
      std::vector<ObservationRow> rows;
      std::vector<double> y;
      for (const auto& row : panel.rows_for(fold.province)) {
        auto it = at.find(row.date);
        if (it == at.end() || !series->usable(it->second)) continue;
        rows.push_back(row);
        y.push_back(std::log(series->rt[it->second]));
      }
      if (rows.empty()) throw Error(ErrorCode::Data, "held-out province has no usable rows");
      const Eigen::VectorXd pred = predict_with_level(model, rows, model.mean_intercept());
      double acc = 0;
      for (std::size_t t = 0; t < rows.size(); ++t) {
        const double r = y[t] - pred(static_cast<Eigen::Index>(t));
        acc += r * r;
      }
      fold.n = rows.size();
      fold.mse = acc / static_cast<double>(rows.size());
      sse[i] = acc;
      fold.ok = true;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Internal) throw;
      fold.ok = false;
      fold.error = e.what();
    }
  });

  double total = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < provinces.size(); ++i)
    if (report.folds[i].ok) {
      total += sse[i];
      count += report.folds[i].n;
    }
  report.global_mse = count > 0 ? total / static_cast<double>(count) : std::nan("");
  return report;
}

}  // namespace rtgam
