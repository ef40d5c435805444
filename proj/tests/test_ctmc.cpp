#include "qstab/ctmc.hpp"
#include "qstab/errors.hpp"
#include "qstab/models.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace qstab;
using Catch::Approx;

namespace {

DeathRateFn constant_deaths(std::vector<double> mu) {
  return [mu](std::size_t i, std::span<const Coord>) { return mu[i]; };
}

}  // namespace

TEST_CASE("truncated generator structure", "[ctmc]") {
  const auto gen = build_truncated_generator(ArrivalRates({0.5}), constant_deaths({1.0}), 2, 1.0);
  const auto Q = gen.dense();
  const std::vector<std::vector<double>> expected{{-0.5, 0.5, 0.0}, {1.0, -1.5, 0.5}, {0.0, 1.0, -1.0}};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(Q[r][c] == Approx(expected[r][c]).margin(1e-15));

  const auto g2 = build_truncated_generator(ArrivalRates({0.3, 0.7}), constant_deaths({1.0, 2.0}), 1, 2.0);
  CHECK(g2.n_states() == 4);
  for (const auto& row : g2.dense()) {
    double sum = 0.0;
    for (double v : row) sum += v;
    CHECK(std::abs(sum) < 1e-14);
  }
  CHECK(g2.uniformization_constant() == Approx(0.3 + 0.7 + 2 * 2.0));

  CHECK_THROWS_AS(build_truncated_generator(ArrivalRates({0.5, 0.5, 0.5}), constant_deaths({1, 1, 1}), 1000, 1.0,
                                            1'000'000),
                  BoxTooLarge);
}

TEST_CASE("saturated three-queue pair uses the busy-third-queue rates", "[ctmc]") {
  const auto spec = models::table_allocation(models::three_queue_params(3.0, 2.0));
  const Permutation id{0, 1, 2};
  SaturatedAllocation sat(spec, certify_context(spec, id, 2));
  const DeathRateFn deaths = [&](std::size_t i, std::span<const Coord> x) { return sat.rate(i, x); };
  const auto gen = build_truncated_generator(ArrivalRates({0.5, 0.6}), deaths, 40, spec.bound());
  const Box& b = gen.box();
  const State only1{3, 0};
  const State both{3, 4};
  // queue 1 with queue 3 busy: a_13 = 2 when queue 2 is empty, base 1 otherwise
  CHECK(gen.death(b.encode(only1), 0) == 2.0);
  CHECK(gen.death(b.encode(both), 0) == 1.0);
  CHECK(gen.death(b.encode(both), 1) == 1.0);
}

TEST_CASE("stationary solves against closed forms", "[ctmc]") {
  SECTION("M/M/1 on a large box") {
    const auto gen = build_truncated_generator(ArrivalRates({0.5}), constant_deaths({1.0}), 60, 1.0);
    const auto d = solve_stationary(gen);
    CHECK(d.mass[0] == Approx(0.5).margin(1e-9));
    CHECK(d.total() == Approx(1.0).margin(1e-12));
    for (Coord k = 0; k <= 60; ++k) {
      const Coord x[] = {k};
      CHECK(d.at(x) >= 0.0);
    }
  }
  SECTION("two independent queues") {
    const auto gen = build_truncated_generator(ArrivalRates({0.5, 0.5}), constant_deaths({1.0, 1.0}), 40, 1.0);
    const auto d = solve_stationary(gen);
    double tv = 0.0;
    for (std::size_t s = 0; s < d.mass.size(); ++s) {
      const State x = d.box.decode(s);
      tv += std::abs(d.mass[s] - oracle::geometric(0.5, x[0]) * oracle::geometric(0.5, x[1]));
    }
    CHECK(0.5 * tv < 1e-8);
  }
  SECTION("every backend agrees with dense elimination") {
    const DeathRateFn deaths = [](std::size_t i, std::span<const Coord> x) {
      return 0.5 + 0.25 * static_cast<double>(i) + 0.5 / (1.0 + static_cast<double>(x[1 - i]));
    };
    const auto gen = build_truncated_generator(ArrivalRates({0.4, 0.3}), deaths, 9, 1.5);
    const auto ref = oracle::dense_stationary(gen.dense());
    for (auto backend : {Backend::Direct, Backend::GaussSeidel, Backend::Power}) {
      SolveOptions o;
      o.backend = backend;
      o.tol = 1e-13;
      const auto d = solve_stationary(gen, o);
      CHECK(oracle::total_variation(d.mass, ref) < 1e-10);
      CHECK(stationary_residual(gen, d.mass) <= 1e-12);
    }
  }
}

TEST_CASE("mass outside the closed class is zero", "[ctmc]") {
  // Queue 1 never empties once above level 2: states with x < 2 are transient.
  const DeathRateFn deaths = [](std::size_t, std::span<const Coord> x) { return x[0] <= 2 ? 0.0 : 1.0; };
  const auto gen = build_truncated_generator(ArrivalRates({0.5}), deaths, 30, 1.0);
  const auto d = solve_stationary(gen);
  CHECK(d.mass[0] == 0.0);
  CHECK(d.mass[1] == 0.0);
  CHECK(d.total() == Approx(1.0).margin(1e-12));
}

TEST_CASE("adaptive stationary escalation", "[ctmc]") {
  const auto deaths = constant_deaths({1.0});
  const auto [d5, r5] = adaptive_stationary(ArrivalRates({0.5}), deaths, 1.0);
  const auto [d9, r9] = adaptive_stationary(ArrivalRates({0.9}), deaths, 1.0);
  CHECK(r5.certified);
  CHECK(r9.certified);
  CHECK(d9.box.T > d5.box.T);
  CHECK(d9.mass[0] == Approx(0.1).margin(1e-8));
  CHECK(d5.boundary_mass < 1e-8);

  CHECK_THROWS_AS(adaptive_stationary(ArrivalRates({1.2}), deaths, 1.0), NoConvergence);

  const auto [d0, r0] = adaptive_stationary(ArrivalRates(), deaths, 1.0);
  CHECK(d0.mass.size() == 1);
  CHECK(d0.mass[0] == 1.0);
}

TEST_CASE("L values", "[ctmc]") {
  SECTION("constant rates give the constants exactly") {
    const auto c = models::constant_allocation({1.0, 1.5, 2.0});
    for (std::size_t n = 0; n < 3; ++n) {
      std::vector<double> lam(n, 0.4);
      const auto L = compute_L(c, {0, 1, 2}, n, 2, lam);
      CHECK(L.value == Approx(2.0).margin(1e-15));
      CHECK(L.prefix_stable);
    }
  }
  SECTION("three-queue stage 2 closed form") {
    const auto t = models::table_allocation(models::three_queue_params(3.0, 2.0));
    const double lam[] = {0.5};
    const auto L = compute_L(t, {0, 1, 2}, 1, 1, lam);
    CHECK(L.value == Approx(0.5 + 2.0 * 0.5).margin(1e-6));
  }
  SECTION("unstable prefix maps to zero") {
    const auto t = models::table_allocation(models::three_queue_params(3.0, 2.0));
    const double lam[] = {1.5};
    const auto L = compute_L(t, {0, 1, 2}, 1, 1, lam);
    CHECK(L.value == 0.0);
    CHECK_FALSE(L.prefix_stable);
  }
  SECTION("base stations against the series oracle") {
    for (int family : {0, 1})
      for (double gamma : {0.05, 2.0}) {
        const auto form = family == 0 ? models::InterferenceForm::Exponential : models::InterferenceForm::Polynomial;
        const auto bs = models::two_basestations(form, gamma);
        for (double l1 : {0.1, 0.3, 0.45}) {
          const double lam[] = {l1};
          const auto L = compute_L(bs, {0, 1}, 1, 1, lam);
          CHECK(L.value == Approx(oracle::basestation_L12(l1, gamma, family)).margin(1e-6));
        }
      }
  }
}

TEST_CASE("one-dimensional closed form", "[ctmc]") {
  const auto g = stationary_1d_closed_form(0.5, [](Coord) { return 1.0; });
  for (Coord k = 0; k < 30; ++k) {
    const Coord x[] = {k};
    CHECK(g.at(x) == Approx(oracle::geometric(0.5, k)).margin(1e-15));
  }
  const auto alpha = [](Coord x) { return std::pow(1.0 + 1.0 / static_cast<double>(x), 2.0); };
  const auto a = stationary_1d_closed_form(0.8, alpha);
  for (Coord k = 0; k + 1 < a.box.T; ++k) {
    const Coord x[] = {k};
    const Coord y[] = {k + 1};
    CHECK(a.at(y) * alpha(k + 1) == Approx(a.at(x) * 0.8).epsilon(1e-12));
  }
  CHECK_THROWS_AS(stationary_1d_closed_form(1.5, [](Coord) { return 1.0; }), DivergentSeries);

  // pi^1 of the base stations with queue 2 saturated: closed form vs solver.
  const auto death = [](Coord x) { return std::min(3.0, std::log1p(static_cast<double>(x))) / 6.0; };
  const auto cf = stationary_1d_closed_form(0.3, death);
  const DeathRateFn df = [&](std::size_t, std::span<const Coord> x) { return death(x[0]); };
  const auto gen = build_truncated_generator(ArrivalRates({0.3}), df, cf.box.T, 0.5);
  SolveOptions o;
  o.backend = Backend::GaussSeidel;
  o.tol = 1e-14;
  const auto num = solve_stationary(gen, o);
  CHECK(oracle::total_variation(num.mass, cf.mass) < 1e-10);
}

TEST_CASE("detailed balance on 1-D solves", "[ctmc]") {
  const DeathRateFn df = [](std::size_t, std::span<const Coord> x) {
    return 1.0 + 0.5 * std::sin(static_cast<double>(x[0]));
  };
  const auto gen = build_truncated_generator(ArrivalRates({0.35}), df, 80, 1.5);
  const auto d = solve_stationary(gen);
  for (Coord k = 0; k < 80; ++k) {
    const Coord x[] = {k};
    const Coord y[] = {k + 1};
    CHECK(std::abs(d.at(y) * df(0, y) - d.at(x) * 0.35) < 1e-10);
  }
}

TEST_CASE("perturbed deaths converge and order the laws", "[ctmc]") {
  const auto bs = models::two_basestations(models::InterferenceForm::Exponential, 2.0);
  SaturatedAllocation sat(bs, certify_context(bs, {0, 1}, 1));
  auto L_eps = [&](double eps) {
    const DeathRateFn df = [&](std::size_t i, std::span<const Coord> x) { return sat.rate(i, x) + (i == 0 ? eps : 0.0); };
    const Functional f = [&](std::span<const Coord> x) { return sat.rate(1, x); };
    const auto [d, r] = adaptive_stationary(ArrivalRates({0.4}), df, bs.bound() + eps, {}, {f});
    return std::make_pair(d.expectation(f), d);
  };
  const double L0 = L_eps(0.0).first;
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double eps : {0.1, 0.01, 0.001}) {
    const double gap = std::abs(L_eps(eps).first - L0);
    CHECK(gap <= prev_gap + 1e-10);
    prev_gap = gap;
  }
  CHECK(prev_gap < 1e-3);

  // Larger deaths give a stochastically smaller stationary law.
  const auto d0 = L_eps(0.0).second;
  const auto d1 = L_eps(0.1).second;
  const auto m0 = d0.marginal(0);
  const auto m1 = d1.marginal(0);
  auto tail = [](const std::vector<double>& m, std::size_t k) {
    double t = 0.0;
    for (std::size_t j = k; j < m.size(); ++j) t += m[j];
    return t;
  };
  for (std::size_t k = 0; k < std::max(m0.size(), m1.size()); ++k) CHECK(tail(m1, k) <= tail(m0, k) + 1e-12);
}

TEST_CASE("distribution CSV dump", "[ctmc]") {
  const auto gen = build_truncated_generator(ArrivalRates({0.5, 0.2}), constant_deaths({1.0, 1.0}), 2, 1.0);
  const auto d = solve_stationary(gen);
  std::ostringstream os;
  write_distribution_csv(os, d);
  const std::string s = os.str();
  CHECK(s.rfind("#", 0) == 0);
  CHECK(s.find("residual") != std::string::npos);
  CHECK(s.find("boundary_mass") != std::string::npos);
  CHECK(s.find("x_1,x_2,probability") != std::string::npos);
}
