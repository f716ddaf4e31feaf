#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "rtgam/error.hpp"
#include "rtgam/rt_estimator.hpp"
#include "rtgam/synthetic.hpp"

using namespace rtgam;

namespace {

// Growth factor rho solving R * sum_s w_s rho^-s = 1, by bisection.
double growth_root(double r, const GenerationInterval& gi) {
  auto g = [&](double rho) {
    double acc = 0;
    for (int s = 1; s <= gi.max_lag(); ++s) acc += gi.weight(s) * std::pow(rho, -s);
    return r * acc - 1.0;
  };
  double lo = 0.5, hi = 3.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Noise-free scenario read back through the estimator with an exact delay.
struct Recovery {
  Scenario scenario;
  RtSet rt;
  FittedGam model;
  Design design;
};

Recovery noise_free_pipeline(std::uint64_t seed, std::vector<double> intercepts = {}) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.noise_sd = 0;
  spec.constant_tests = true;
  spec.delay = point_mass_delay(7);
  spec.seed_cases = 2000;
  if (!intercepts.empty()) {
    spec.provinces = static_cast<int>(intercepts.size());
    spec.intercepts = intercepts;
  }
  Recovery out{simulate_panel(spec), {}, {}, {}};
  RtConfig cfg;
  cfg.incubation_days = 7;
  cfg.delay_max = 0;
  cfg.half_width = 0;
  out.rt = estimate_all(out.scenario.panel, cfg, 0);
  out.model = fit_gam(out.scenario.panel, out.rt, ModelSpec{});
  out.design = assemble_design(out.scenario.panel, out.rt, ModelSpec{});
  return out;
}

}  // namespace

TEST_SUITE("synthetic_oracle") {
  TEST_CASE("R = 1 keeps incidence constant after burn-in") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 20);
    const auto inc = simulate_epidemic(std::vector<double>(100, 1.0), gi, 50);
    for (std::size_t t = 20; t < inc.size(); ++t) CHECK(inc[t] == doctest::Approx(50).epsilon(1e-12));
  }

  TEST_CASE("R = 1.5 grows at the Euler-Lotka rate") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 20);
    const auto inc = simulate_epidemic(std::vector<double>(150, 1.5), gi, 1);
    const double measured = inc[149] / inc[148];
    CHECK(std::abs(measured - growth_root(1.5, gi)) < 1e-3);
  }

  TEST_CASE("simulation is deterministic given the seed") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 20);
    const std::vector<double> path(60, 1.1);
    const auto a = simulate_epidemic(path, gi, 30, true, 42);
    const auto b = simulate_epidemic(path, gi, 30, true, 42);
    const auto c = simulate_epidemic(path, gi, 30, true, 43);
    CHECK(a == b);
    CHECK(a != c);
    for (double v : a) CHECK(v == std::round(v));
    ScenarioSpec spec;
    spec.provinces = 3;
    spec.days = 60;
    const auto s1 = simulate_panel(spec), s2 = simulate_panel(spec);
    CHECK(s1.log_rt == s2.log_rt);
    CHECK(s1.panel.rows().back().new_cases == s2.panel.rows().back().new_cases);
  }

  TEST_CASE("explosive growth aborts") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 20);
    CHECK_THROWS_AS(simulate_epidemic(std::vector<double>(400, 3.0), gi, 100), Error);
    CHECK_THROWS_AS(simulate_epidemic(std::vector<double>(30, 0.0), gi, 100), Error);
    CHECK_THROWS_AS(simulate_epidemic(std::vector<double>(30, 1.0), gi, 0), Error);
  }

  TEST_CASE("panel respects physical bounds and truth is centered") {
    const auto sc = simulate_panel(ScenarioSpec{});
    CHECK(sc.panel.provinces().size() == 23);
    CHECK(sc.panel.size() == 23 * 160);
    for (const auto& r : sc.panel.rows()) {
      CHECK(r.humidity_pct >= 0);
      CHECK(r.humidity_pct <= 100);
      CHECK(r.pm25 >= 0);
      CHECK(r.mobility_decrease_pct <= 100);
      CHECK(r.new_cases >= 0);
      CHECK(r.new_tests > 0);
    }
    for (const auto& e : sc.effects) {
      double mean = 0;
      for (const auto& r : sc.panel.rows()) mean += e(covariate_value(r, e.name));
      CHECK(std::abs(mean / static_cast<double>(sc.panel.size())) < 1e-12);
    }
    CHECK(sc.explained_fraction > 0.5);
    CHECK(sc.explained_fraction < 1.0);
  }

  TEST_CASE("noise-free pipeline recovers each effect") {
    const auto rec = noise_free_pipeline(1);
    for (const auto& e : rec.scenario.effects) {
      const double rmse = rtgam::testing::effect_rmse(rec.model, e, 0.9, &rec.design.rows);
      INFO(e.name << " rmse " << rmse);
      CHECK(rmse < 0.02);
    }
  }

  TEST_CASE("noise-free pipeline recovers intercept differences") {
    const auto rec = noise_free_pipeline(2, {-0.1, 0.0, 0.1});
    const double a = rec.model.intercept("prov01"), b = rec.model.intercept("prov02"), c = rec.model.intercept("prov03");
    CHECK(std::abs((b - a) - 0.1) < 0.02);
    CHECK(std::abs((c - b) - 0.1) < 0.02);
  }

  TEST_CASE("invalid scenarios are rejected") {
    ScenarioSpec spec;
    spec.noise_sd = -1;
    CHECK_THROWS_AS(simulate_panel(spec), Error);
    spec = ScenarioSpec{};
    spec.intercepts = {0.1, 0.2};
    CHECK_THROWS_AS(simulate_panel(spec), Error);
    spec = ScenarioSpec{};
    spec.days = 10;
    CHECK_THROWS_AS(simulate_panel(spec), Error);
  }
}

TEST_SUITE("gcv_limits") {
  TEST_CASE("zero true effects give small EDFs in most seeds") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      ScenarioSpec spec;
      spec.provinces = 10;
      spec.days = 120;
      spec.seed = 1000 + seed;
      spec.zero_effects = true;
      const auto sc = simulate_panel(spec);
      const auto model = fit_gam(sc.panel, sc.truth, ModelSpec{});
      bool ok = true;
      for (const auto& t : model.term_summaries) ok = ok && t.edf < 0.5;
      if (ok) ++hits;
    }
    INFO("seeds meeting the bound: " << hits << " of 20");
    CHECK(hits >= 18);
  }
}
