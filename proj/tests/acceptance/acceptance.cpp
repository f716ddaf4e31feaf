// Acceptance runner: prints one PASS/FAIL line per criterion with its runtime.
//
//   rtgam_acceptance [--group A|B|all]
//
// Group B is self-contained. Group A needs the reference dataset in
// $RTGAM_REFERENCE_DATA (cases.csv, environment.csv, mobility.csv in the ingest
// schemas); without it those criteria fail with a reason.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "rtgam/effects.hpp"
#include "rtgam/gam_engine.hpp"
#include "rtgam/panel.hpp"
#include "rtgam/rt_estimator.hpp"
#include "rtgam/synthetic.hpp"

using namespace rtgam;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

int failures = 0;

void report(const char* id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && elapsed > budget_s) {
    o.pass = false;
    o.detail += fmt("; runtime %.2fs over budget %.0fs", elapsed, budget_s);
  }
  if (!o.pass) ++failures;
  std::printf("%s %s %s (%.2fs) %s\n", o.pass ? "PASS" : "FAIL", id, title, elapsed, o.detail.c_str());
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Group B

Outcome b1() {
  const auto gi = discretize_generation_interval(4.7, 2.9, 20);
  const int hw = 3;
  double worst_const = 0;
  const std::vector<double> flat(120, 250.0);
  const auto est = estimate_rt(flat, gi, hw);
  std::size_t defined = 0;
  for (std::size_t t = 0; t < flat.size(); ++t) {
    if (est.flags[t] == RtFlag::Undefined) continue;
    ++defined;
    worst_const = std::max(worst_const, std::abs(est.rt[t] - 1.0));
  }
  double worst_geo = 0;
  for (double rho : {0.92, 0.97, 1.03, 1.08, 1.15}) {
    std::vector<double> inc(120);
    for (std::size_t t = 0; t < inc.size(); ++t) inc[t] = 10.0 * std::pow(rho, static_cast<double>(t));
    double denom = 0;
    for (int s = 1; s <= gi.max_lag(); ++s) denom += gi.weight(s) * std::pow(rho, -s);
    const auto g = estimate_rt(inc, gi, hw);
    for (std::size_t t = 0; t < inc.size(); ++t)
      if (g.flags[t] != RtFlag::Undefined) worst_geo = std::max(worst_geo, std::abs(g.rt[t] - 1.0 / denom));
  }
  return {defined > 0 && worst_const <= 1e-6 && worst_geo <= 1e-3,
          fmt("constant max|R-1|=%.2e over %.0f days; geometric max error=%.2e", worst_const,
              static_cast<double>(defined), worst_geo)};
}

Outcome b2() {
  const int days = 140, step = 70, lag = 7;
  const auto gi = discretize_generation_interval(4.7, 2.9, 20);
  std::vector<double> path(days);
  for (int t = 0; t < days; ++t) path[static_cast<std::size_t>(t)] = t < step ? 1.8 : 0.7;
  const auto infections = simulate_epidemic(path, gi, 20.0);
  std::vector<ObservationRow> rows;
  const Date start = make_date(2020, 3, 1);
  for (int t = 0; t < days; ++t) {
    ObservationRow r;
    r.date = start + std::chrono::days{t};
    r.province = "P";
    r.region = "R";
    r.new_cases = t >= lag ? infections[static_cast<std::size_t>(t - lag)] : 0.0;
    r.new_tests = 1000;
    r.temperature_c = 15;
    r.humidity_pct = 60;
    r.pm25 = 30;
    rows.push_back(r);
  }
  const Panel panel(rows, StudyWindow{start, start + std::chrono::days{days - 1}});
  RtConfig cfg;
  cfg.incubation_days = lag;
  cfg.delay_max = 0;
  const auto series = estimate_province(panel, "P", cfg);
  // Estimates are indexed by infection date; the step sits at day `step`.
  const int buffer = cfg.half_width + lag;
  double worst = 0;
  int checked = 0, missing = 0;
  const int first = gi.max_lag();
  const int last = days - 1 - lag - cfg.half_width;
  for (int t = first; t <= last; ++t) {
    if (std::abs(t - step) <= buffer) continue;
    const auto i = static_cast<std::size_t>(t);
    if (!series.usable(i)) {
      ++missing;
      continue;
    }
    ++checked;
    worst = std::max(worst, std::abs(series.rt[i] - path[i]));
  }
  return {missing == 0 && checked > 0 && worst <= 0.1,
          fmt("max|R-R*|=%.4f over %.0f days outside a +-%.0f day buffer", worst, checked, buffer) +
              (missing ? fmt("; %.0f days without an estimate", missing) : "")};
}

// Dense hat-matrix GCV, independent of the reduced implementation.
double dense_gcv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd A = X * (X.transpose() * X + S).ldlt().solve(X.transpose());
  const double n = static_cast<double>(X.rows());
  return n * (y - A * y).squaredNorm() / std::pow(n - A.trace(), 2);
}

Outcome b3() {
  const auto grid = log_grid(1e-6, 1e6, 61);
  int agree = 0;
  std::string mismatches;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(700 + seed);
    std::uniform_real_distribution<double> u(-2, 3);
    std::normal_distribution<double> z(0, 0.1 + 0.05 * static_cast<double>(seed % 5));
    const std::size_t n = 80 + 20 * (seed % 4);
    std::vector<double> x(n);
    for (auto& v : x) v = u(rng);
    const auto term = SmoothTerm::build(x, make_spec("x", x, 6));
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 6);
    X.col(0).setOnes();
    X.rightCols(5) = term.design();
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      y(static_cast<Eigen::Index>(i)) = std::sin(1.3 * x[i]) + 0.2 * x[i] * x[i] + z(rng);
    const Eigen::MatrixXd S = term.penalty() + term.shrinkage_penalty();
    const std::vector<Penalty> pen{{1, S}};
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      Eigen::MatrixXd full = Eigen::MatrixXd::Zero(6, 6);
      full.bottomRightCorner(5, 5) = grid[g] * S;
      const double s = dense_gcv(X, y, full);
      if (s <= best_score) {
        best_score = s;
        best = g;
      }
    }
    const auto sel = select_lambdas_gcv(X, y, pen, grid, 3);
    if (sel.grid_index[0] == best)
      ++agree;
    else
      mismatches += " seed" + std::to_string(seed);
  }
  return {agree == 10, fmt("%.0f of 10 datasets agree", agree) + mismatches};
}

Outcome b4() {
  const auto sc = simulate_panel(ScenarioSpec{});
  const auto model = fit_gam(sc.panel, sc.truth, ModelSpec{});
  const auto design = assemble_design(sc.panel, sc.truth, ModelSpec{});
  bool ok = true;
  std::string detail;
  for (const auto& e : sc.effects) {
    const double rmse = testing::effect_rmse(model, e, 0.9, &design.rows);
    ok = ok && rmse < 0.05;
    detail += e.name + fmt(" rmse=%.4f; ", rmse);
  }
  const double gap = std::abs(model.adjusted_r2 - sc.explained_fraction);
  ok = ok && gap < 0.05;
  detail += fmt("adjR2=%.4f explained=%.4f", model.adjusted_r2, sc.explained_fraction);
  return {ok, detail};
}

ScenarioSpec small_spec(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.provinces = 8;
  spec.days = 120;
  spec.seed = seed;
  return spec;
}

Outcome b5() {
  const auto sc = simulate_panel(small_spec(11));
  const ModelSpec base;
  const auto model = fit_gam(sc.panel, sc.truth, base);
  const auto design = assemble_design(sc.panel, sc.truth, base);
  double centering = 0;
  for (const auto& b : design.blocks) {
    const Eigen::VectorXd contribution =
        design.X.middleCols(b.start, b.size) * model.beta.segment(b.start, b.size);
    centering = std::max(centering, std::abs(contribution.mean()));
    centering = std::max(centering, design.X.middleCols(b.start, b.size).colwise().mean().cwiseAbs().maxCoeff());
  }
  ModelSpec permuted;
  permuted.smooths = {"pm25", "humidity", "mobility", "temperature"};
  const auto other = fit_gam(sc.panel, sc.truth, permuted);
  const double perm = (model.fitted - other.fitted).cwiseAbs().maxCoeff();
  const double c = 0.42;
  RtSet shifted = sc.truth;
  for (auto& s : shifted)
    for (auto& v : s.rt) v *= std::exp(c);
  const auto moved = fit_gam(sc.panel, shifted, base);
  const auto p = static_cast<Eigen::Index>(model.provinces.size());
  const double intercept_err =
      (moved.beta.head(p) - model.beta.head(p) - Eigen::VectorXd::Constant(p, c)).cwiseAbs().maxCoeff();
  const double smooth_err =
      (moved.beta.tail(moved.beta.size() - p) - model.beta.tail(model.beta.size() - p)).cwiseAbs().maxCoeff();
  return {centering < 1e-8 && perm < 1e-8 && intercept_err < 1e-8 && smooth_err < 1e-8,
          fmt("centering=%.1e permutation=%.1e", centering, perm) +
              fmt(" shift: intercepts off by %.1e, smooth coefficients moved %.1e", intercept_err, smooth_err)};
}

Outcome b6() {
  const auto sc = simulate_panel(small_spec(12));
  const ModelSpec spec;
  const auto design = assemble_design(sc.panel, sc.truth, spec);
  const auto penalties = design_penalties(design, spec.shrinkage);
  const std::vector<double> huge(penalties.size(), 1e12);
  const auto fit = fit_penalized(design.X, design.y, penalties, huge);
  double worst_edf = 0;
  for (const auto& b : design.blocks) worst_edf = std::max(worst_edf, fit.edf(b.start, b.size));

  std::mt19937_64 rng(13);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(200, 6);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
  Eigen::VectorXd y(200);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = X(i, 0) - 0.5 * X(i, 3) + z(rng);
  const std::vector<Penalty> pen{{2, Eigen::MatrixXd::Identity(4, 4)}};
  const std::vector<double> zero{0.0};
  const auto ols = fit_penalized(X, y, pen, zero);
  const double orth = (X.transpose() * (y - ols.fitted)).cwiseAbs().maxCoeff();
  return {worst_edf < 1e-3 && orth < 1e-8, fmt("max term EDF at 1e12=%.2e; max|X'r| at 0=%.2e", worst_edf, orth)};
}

Outcome b7() {
  int good = 0, seeds = 0;
  bool integrity = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScenarioSpec spec;
    spec.seed = 500 + seed;
    spec.intercept_spread = 0;
    const auto sc = simulate_panel(spec);
    const auto report = lopo_cv(sc.panel, sc.truth, ModelSpec{}, 0);
    ++seeds;
    const auto& provinces = sc.panel.provinces();
    if (report.folds.size() != 23) integrity = false;
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& f : report.folds) {
      const std::set<std::string> training(f.training_provinces.begin(), f.training_provinces.end());
      std::set<std::string> expected(provinces.begin(), provinces.end());
      expected.erase(f.province);
      if (!f.ok || training.count(f.province) || training != expected) integrity = false;
      lo = std::min(lo, f.mse);
      hi = std::max(hi, f.mse);
    }
    if (hi / lo < 2) ++good;
  }
  detail = fmt("max/min fold MSE < 2 in %.0f of %.0f seeds", good, seeds);
  if (!integrity) detail += "; fold integrity violated";
  return {integrity && good >= 18, detail};
}

// ---------------------------------------------------------------------------
// Group A

struct Reference {
  const char* name;
  double mean, sd, min, max;
};

const Reference kTable[] = {
    {"new_cases", 42.29, 76.93, 0, 868},
    {"new_tests", 968.93, 1136.27, 0, 18256},
    {"temperature_c", 18.06, 6.60, 0.50, 36},
    {"humidity_pct", 63.84, 17.67, 11.50, 100},
    {"pm25", 48.52, 21.67, 5, 172},
    {"mobility_decrease_pct", 15.57, 12.31, -9, 47},
    {"rt", 0.94, 0.24, 0.57, 2.12},
};

struct Dataset {
  Panel panel;
  RtSet rt;
};

const Dataset* dataset(std::string& why) {
  static std::optional<Dataset> cached;
  static std::string error;
  static bool tried = false;
  if (!tried) {
    tried = true;
    const char* dir = std::getenv("RTGAM_REFERENCE_DATA");
    if (!dir || !*dir) {
      error = "reference dataset not supplied (set RTGAM_REFERENCE_DATA to a directory with cases.csv, "
              "environment.csv, mobility.csv)";
    } else {
      try {
        const fs::path d(dir);
        const auto raw = ingest_sources(d / "cases.csv", d / "environment.csv", d / "mobility.csv");
        Panel panel = build_panel(raw, PanelConfig{});
        RtSet rt = estimate_all(panel, RtConfig{}, 0);
        cached.emplace(Dataset{std::move(panel), std::move(rt)});
      } catch (const std::exception& e) {
        error = std::string("reference dataset unreadable: ") + e.what();
      }
    }
  }
  why = error;
  return cached ? &*cached : nullptr;
}

bool within(double value, double reference) {
  if (reference == 0) return value == 0;
  return std::abs(value - reference) <= 0.005 * std::abs(reference);
}

Outcome a1() {
  std::string why;
  const Dataset* d = dataset(why);
  if (!d) return {false, why};
  const auto table = summarize_panel(d->panel, &d->rt);
  int bad = 0;
  std::string detail;
  for (const auto& ref : kTable) {
    const auto it = std::find_if(table.begin(), table.end(), [&](const VariableSummary& v) { return v.name == ref.name; });
    if (it == table.end()) {
      ++bad;
      detail += std::string(ref.name) + " missing; ";
      continue;
    }
    const double got[4] = {it->mean, it->sd, it->min, it->max};
    const double want[4] = {ref.mean, ref.sd, ref.min, ref.max};
    for (int k = 0; k < 4; ++k)
      if (!within(got[k], want[k])) {
        ++bad;
        detail += std::string(ref.name) + fmt(" %.4g vs %.4g; ", got[k], want[k]);
      }
  }
  return {bad == 0, fmt("%.0f of 28 cells off; ", bad) + detail};
}

Outcome a2() {
  std::string why;
  const Dataset* d = dataset(why);
  if (!d) return {false, why};
  const auto model = fit_gam(d->panel, d->rt, ModelSpec{});
  bool ok = std::abs(model.adjusted_r2 - 0.67) <= 0.05;
  std::string detail = fmt("adjR2=%.4f; ", model.adjusted_r2);
  for (const auto& t : model.term_summaries) {
    ok = ok && t.p_value < 1e-10;
    detail += t.name + fmt(" p=%.2e; ", t.p_value);
  }
  return {ok, detail};
}

Outcome a3() {
  std::string why;
  const Dataset* d = dataset(why);
  if (!d) return {false, why};
  const auto model = fit_gam(d->panel, d->rt, ModelSpec{});
  const auto& spec = model.terms[static_cast<std::size_t>(model.term_index("pm25"))].spec();
  std::vector<double> low, high;
  for (int i = 0; i <= 100; ++i) low.push_back(10 + 0.5 * i);
  for (double x = 70; x <= spec.range_max; x += 0.5) high.push_back(x);
  const auto el = partial_effects_at(model, "pm25", low);
  double mean_abs = 0;
  for (double v : el.effect) mean_abs += std::abs(v) / static_cast<double>(el.effect.size());
  const auto eh = partial_effects_at(model, "pm25", high);
  bool monotone = !eh.effect.empty();
  double peak_above_100 = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < eh.effect.size(); ++i) {
    if (i > 0 && eh.effect[i] < eh.effect[i - 1]) monotone = false;
    if (high[i] > 100) peak_above_100 = std::max(peak_above_100, eh.effect[i]);
  }
  return {mean_abs < 0.05 && monotone && peak_above_100 > 0.1,
          fmt("mean|effect| on [10,60]=%.4f; max effect above 100=%.4f; ", mean_abs, peak_above_100) +
              (monotone ? "increasing above 70" : "not monotone above 70")};
}

Outcome a4() {
  std::string why;
  const Dataset* d = dataset(why);
  if (!d) return {false, why};
  const auto report = lopo_cv(d->panel, d->rt, ModelSpec{}, 0);
  std::vector<CvFold> folds = report.folds;
  std::sort(folds.begin(), folds.end(), [](const CvFold& a, const CvFold& b) { return a.mse > b.mse; });
  std::set<std::string> top;
  std::string detail = "top folds:";
  for (std::size_t i = 0; i < std::min<std::size_t>(4, folds.size()); ++i) {
    top.insert(folds[i].province);
    detail += " " + folds[i].province;
  }
  const bool ranked = top.count("Napoli") && top.count("Roma") && top.count("Verona");
  return {report.folds.size() == 23 && ranked, fmt("%.0f folds; ", static_cast<double>(report.folds.size())) + detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::string group = "all";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--group" && i + 1 < argc) {
      group = argv[++i];
    } else {
      std::fprintf(stderr, "usage: rtgam_acceptance [--group A|B|all]\n");
      return 2;
    }
  }
  if (group != "A" && group != "B" && group != "all") {
    std::fprintf(stderr, "usage: rtgam_acceptance [--group A|B|all]\n");
    return 2;
  }
  if (group != "B") {
    report("A1", "descriptive table matches reference within 0.5%", 10, a1);
    report("A2", "adjusted R2 0.67 +- 0.05 with four significant smooths", 60, a2);
    report("A3", "PM2.5 flat below 60 and rising above 100", 60, a3);
    report("A4", "23 folds with Napoli, Roma, Verona in the top four MSEs", 0, a4);
  }
  if (group != "A") {
    report("B1", "renewal identity and Euler-Lotka growth", 1, b1);
    report("B2", "changepoint 1.8 -> 0.7 recovered outside the buffer", 5, b2);
    report("B3", "coordinate descent equals exhaustive GCV argmin", 0, b3);
    report("B4", "smooth recovery on the default oracle panel", 120, b4);
    report("B5", "centering, term order and level shift invariants", 0, b5);
    report("B6", "penalty limits", 0, b6);
    report("B7", "leave-one-province-out integrity and balance", 0, b7);
  }
  return failures == 0 ? 0 : 1;
}
