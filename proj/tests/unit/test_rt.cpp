#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "rtgam/error.hpp"
#include "rtgam/panel.hpp"
#include "rtgam/rt_estimator.hpp"
#include "rtgam/synthetic.hpp"
#include "support.hpp"

using namespace rtgam;

namespace {

// Gamma density via lgamma, integrated with composite Simpson's rule.
double gamma_mass(double shape, double scale, double a, double b) {
  auto pdf = [&](double x) {
    if (x <= 0) return shape < 1 ? 0.0 : (shape == 1 ? 1.0 / scale : 0.0);
    return std::exp((shape - 1) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale));
  };
  const int steps = 2000;
  const double h = (b - a) / steps;
  double acc = pdf(a) + pdf(b);
  for (int i = 1; i < steps; ++i) acc += (i % 2 ? 4.0 : 2.0) * pdf(a + i * h);
  return acc * h / 3.0;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_SUITE("rt_estimator") {
  TEST_CASE("generation interval weights sum to one") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 14);
    CHECK(gi.max_lag() == 14);
    CHECK(sum(gi.weights) == doctest::Approx(1.0).epsilon(1e-12));
    for (double w : gi.weights) CHECK(w >= 0);
  }

  TEST_CASE("discretized generation interval matches numerical integration of the gamma density") {
    const double mean = 4.7, sd = 2.9;
    const double shape = (mean / sd) * (mean / sd), scale = sd * sd / mean;
    const auto gi = discretize_generation_interval(mean, sd, 14);
    std::vector<double> oracle;
    for (int s = 1; s <= 14; ++s) oracle.push_back(gamma_mass(shape, scale, s == 1 ? 1e-9 : s - 0.5, s + 0.5));
    const double total = sum(oracle);
    double oracle_mean = 0;
    for (int s = 1; s <= 14; ++s) {
      CHECK(gi.weight(s) == doctest::Approx(oracle[static_cast<std::size_t>(s - 1)] / total).epsilon(1e-6));
      oracle_mean += s * oracle[static_cast<std::size_t>(s - 1)] / total;
    }
    CHECK(gi.discretized_mean() == doctest::Approx(oracle_mean).epsilon(1e-6));
    CHECK(gi.discretized_mean() >= 4.5);
    CHECK(gi.discretized_mean() <= 4.9);
  }

  TEST_CASE("degenerate generation interval concentrates on lag 1") {
    const auto gi = discretize_generation_interval(1.0, 1e-6, 5);
    CHECK(gi.weight(1) == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("generation interval preconditions") {
    CHECK_THROWS_AS(discretize_generation_interval(4.7, 2.9, 9), Error);
    CHECK_THROWS_AS(discretize_generation_interval(0, 2.9, 20), Error);
    CHECK_THROWS_AS(discretize_generation_interval(4.7, -1, 20), Error);
  }

  TEST_CASE("delay model is incubation shift plus lognormal onset delay") {
    const auto d = make_delay_model(5, 5.0, 3.0, 21);
    CHECK(d.max_delay() == 26);
    CHECK(sum(d.combined) == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 5; ++i) CHECK(d.combined[static_cast<std::size_t>(i)] == 0);
    CHECK(d.mean() == doctest::Approx(10.0).epsilon(0.05));
    const auto p = point_mass_delay(7);
    CHECK(p.max_delay() == 7);
    CHECK(p.mean() == 7);
  }

  TEST_CASE("constant tests leave cases unchanged") {
    const std::vector<double> cases{3, 0, 17, 4, 9}, tests(5, 250);
    const auto adj = adjust_for_testing(cases, tests, 1);
    for (std::size_t t = 0; t < cases.size(); ++t) CHECK(adj.values[t] == doctest::Approx(cases[t]));
  }

  TEST_CASE("halving tests on one day doubles that day's adjusted incidence") {
    const std::vector<double> cases{10, 10, 10, 10, 10};
    std::vector<double> tests{100, 100, 100, 100, 100};
    const auto base = adjust_for_testing(cases, tests, 1);
    tests[1] = 50;
    const auto halved = adjust_for_testing(cases, tests, 1);
    CHECK(halved.median_tests == base.median_tests);
    CHECK(halved.values[1] == doctest::Approx(2 * base.values[1]));
    CHECK(halved.values[3] == doctest::Approx(base.values[3]));
  }

  TEST_CASE("zero tests hit the floor and are flagged") {
    const std::vector<double> cases{5, 5, 5, 5, 5};
    const std::vector<double> tests{100, 100, 0, 100, 100};
    const auto adj = adjust_for_testing(cases, tests, 10);
    CHECK(adj.median_tests == 100);
    CHECK(adj.values[2] == doctest::Approx(10 * cases[2]));
    CHECK(adj.floored[2]);
    CHECK_FALSE(adj.floored[0]);
    CHECK_THROWS_AS(adjust_for_testing(cases, std::vector<double>(5, 0.0), 1), Error);
  }

  TEST_CASE("test adjustment is homogeneous of degree one in cases") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 200);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> cases(30), tests(30);
      for (auto& c : cases) c = std::round(u(rng));
      for (auto& t : tests) t = std::round(u(rng));
      const double k = 0.1 + u(rng) / 20;
      std::vector<double> scaled = cases;
      for (auto& c : scaled) c *= k;
      const auto a = adjust_for_testing(cases, tests, default_test_floor(tests));
      const auto b = adjust_for_testing(scaled, tests, default_test_floor(tests));
      for (std::size_t t = 0; t < cases.size(); ++t) CHECK(b.values[t] == doctest::Approx(k * a.values[t]));
    }
  }

  TEST_CASE("default test floor is the first percentile of nonzero tests, at least one") {
    std::vector<double> tests;
    for (int i = 1; i <= 101; ++i) tests.push_back(10.0 * i);
    tests.push_back(0);
    CHECK(default_test_floor(tests) == doctest::Approx(20.0));
    CHECK(default_test_floor(std::vector<double>{0.5, 0.2}) == 1.0);
  }

  TEST_CASE("point-mass delay shifts a spike back by the delay") {
    std::vector<double> x(40, 0.0);
    x[20] = 100;
    const auto out = shift_to_infection_dates(x, point_mass_delay(7));
    CHECK(out.values[13] == 100);
    CHECK(std::count_if(out.values.begin(), out.values.end(), [](double v) { return v != 0; }) == 1);
  }

  TEST_CASE("uniform delay keeps a constant series constant; tail is provisional") {
    DelayModel d;
    d.combined = {0, 0, 0, 0, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3};
    const std::vector<double> x(30, 12.0);
    const auto out = shift_to_infection_dates(x, d);
    for (std::size_t t = 0; t + 7 < x.size(); ++t) CHECK(out.values[t] == doctest::Approx(12.0));
    for (std::size_t t = 0; t < x.size(); ++t) CHECK(out.provisional[t] == (t >= x.size() - 7));
  }

  TEST_CASE("back-shift preserves total mass when the head is empty") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 50);
    const auto delay = make_delay_model(5, 5.0, 3.0, 21);
    const auto support = delay.combined.size();
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> x(80, 0.0);
      for (std::size_t t = support; t < x.size(); ++t) x[t] = u(rng);
      const auto out = shift_to_infection_dates(x, delay);
      CHECK(sum(out.values) == doctest::Approx(sum(x)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(shift_to_infection_dates(std::vector<double>(10, 1.0), delay), Error);
  }

  TEST_CASE("constant incidence gives R = 1 on every defined day") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 20);
    const std::vector<double> incidence(60, 37.0);
    const auto est = estimate_rt(incidence, gi, 3);
    for (std::size_t t = 0; t < incidence.size(); ++t) {
      if (t < 20) {
        CHECK(est.flags[t] == RtFlag::Undefined);
        CHECK(std::isnan(est.rt[t]));
      } else {
        CHECK(est.flags[t] == RtFlag::Ok);
        CHECK(std::abs(est.rt[t] - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("geometric incidence matches the Euler-Lotka closed form") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 20);
    for (double rho : {0.9, 0.97, 1.0, 1.05, 1.12}) {
      std::vector<double> incidence(80);
      for (std::size_t t = 0; t < incidence.size(); ++t) incidence[t] = std::pow(rho, static_cast<double>(t));
      double denom = 0;
      for (int s = 1; s <= gi.max_lag(); ++s) denom += gi.weight(s) * std::pow(rho, -s);
      const double expected = 1.0 / denom;
      const auto est = estimate_rt(incidence, gi, 3);
      for (std::size_t t = 20; t < incidence.size(); ++t) CHECK(std::abs(est.rt[t] - expected) < 1e-9);
    }
  }

  TEST_CASE("estimate is scale invariant") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 20);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(1, 100);
    std::vector<double> x(70);
    for (auto& v : x) v = u(rng);
    const auto a = estimate_rt(x, gi, 3);
    for (double k : {1e-3, 0.5, 7.0, 1e6}) {
      std::vector<double> y = x;
      for (auto& v : y) v *= k;
      const auto b = estimate_rt(y, gi, 3);
      for (std::size_t t = 20; t < x.size(); ++t) CHECK(b.rt[t] == doctest::Approx(a.rt[t]).epsilon(1e-12));
    }
  }

  TEST_CASE("extreme ratios are clipped and flagged; zero denominators are undefined") {
    const auto gi = discretize_generation_interval(1.0, 0.5, 3);
    std::vector<double> x(12, 0.0);
    x[0] = 1e-9;
    x[4] = 1.0;
    x[5] = 1e5;
    const auto est = estimate_rt(x, gi, 0);
    CHECK(est.flags[5] == RtFlag::Clipped);
    CHECK(est.rt[5] == kRtMax);
    std::vector<double> late(12, 0.0);
    late[10] = 5;
    const auto est2 = estimate_rt(late, gi, 0);
    CHECK(est2.flags[5] == RtFlag::Undefined);
    CHECK_THROWS_AS(estimate_rt(std::vector<double>(3, 1.0), gi, 0), Error);
    CHECK_THROWS_AS(estimate_rt(std::vector<double>(12, 0.0), gi, 0), Error);
  }

  TEST_CASE("noise-free renewal epidemic with constant R converges after burn-in") {
    const auto gi = discretize_generation_interval(4.7, 2.9, 20);
    for (double r_star : {0.7, 1.0, 1.3}) {
      const std::vector<double> path(120, r_star);
      const auto incidence = simulate_epidemic(path, gi, 100.0);
      const auto est = estimate_rt(incidence, gi, 3);
      for (std::size_t t = 40; t < path.size(); ++t) CHECK(std::abs(est.rt[t] - r_star) < 0.05);
    }
  }

  TEST_CASE("flag names round-trip") {
    for (auto f : {RtFlag::Ok, RtFlag::Undefined, RtFlag::Clipped, RtFlag::Provisional})
      CHECK(parse_rt_flag(to_string(f)) == f);
    CHECK_FALSE(parse_rt_flag("bogus").has_value());
  }

  TEST_CASE("province pipeline marks provisional tail and splits on date gaps") {
    std::vector<ObservationRow> rows;
    const Date start = make_date(2020, 3, 1);
    for (int t = 0; t < 90; ++t) {
      if (t == 60) continue;  // gap splits the series into runs of 60 and 29 days
      rows.push_back(rtgam::testing::row("A", start + std::chrono::days{t}, 50, 100));
    }
    const Panel panel(rows, StudyWindow{});
    RtConfig cfg;
    const auto s = estimate_province(panel, "A", cfg);
    REQUIRE(s.rt.size() == 89);
    // First run: 60 days. Defined from day 20, provisional from 60 - 26 - 3.
    for (std::size_t t = 0; t < 20; ++t) CHECK(s.flags[t] == RtFlag::Undefined);
    for (std::size_t t = 20; t < 31; ++t) {
      CHECK(s.flags[t] == RtFlag::Ok);
      CHECK(s.rt[t] == doctest::Approx(1.0));
    }
    for (std::size_t t = 31; t < 60; ++t) CHECK(s.flags[t] == RtFlag::Provisional);
    // Second run: 29 days, so past its burn-in every estimate rests on provisional infections.
    for (std::size_t t = 60; t < 80; ++t) CHECK(s.flags[t] == RtFlag::Undefined);
    for (std::size_t t = 80; t < 89; ++t) CHECK(s.flags[t] == RtFlag::Provisional);
    CHECK(s.test_floor == doctest::Approx(100));
  }

  TEST_CASE("parallel estimation equals sequential estimation") {
    std::vector<ObservationRow> rows;
    std::mt19937_64 rng(2);
    std::poisson_distribution<int> pois(80);
    for (const char* p : {"A", "B", "C", "D", "E"})
      for (int t = 0; t < 70; ++t)
        rows.push_back(rtgam::testing::row(p, make_date(2020, 3, 1) + std::chrono::days{t}, pois(rng), 100 + pois(rng)));
    const Panel panel(rows, StudyWindow{});
    const auto a = estimate_all(panel, RtConfig{}, 1);
    const auto b = estimate_all(panel, RtConfig{}, 4);
    REQUIRE(a.size() == 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].province == b[i].province);
      for (std::size_t t = 0; t < a[i].rt.size(); ++t) {
        CHECK(a[i].flags[t] == b[i].flags[t]);
        if (!std::isnan(a[i].rt[t])) CHECK(a[i].rt[t] == b[i].rt[t]);
      }
    }
  }
}
