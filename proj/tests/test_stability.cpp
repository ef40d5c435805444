#include "qstab/errors.hpp"
#include "qstab/models.hpp"
#include "qstab/rng.hpp"
#include "qstab/stability.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace qstab;
using Catch::Approx;

namespace {

AllocationSpec two_valued() {
  return AllocationSpec(
      2, [](std::size_t i, std::span<const Coord> x) { return i == 0 ? (x[1] == 0 ? 1.2 : 0.8) : 1.0; }, 2.0);
}

}  // namespace

TEST_CASE("general bounds", "[stability]") {
  const auto spec = two_valued();
  CHECK(general_bounds(ArrivalRates({0.5, 0.5}), spec)[0].label == QueueLabel::Stable);
  CHECK(general_bounds(ArrivalRates({1.5, 0.5}), spec)[0].label == QueueLabel::Unstable);
  const auto mid = general_bounds(ArrivalRates({1.0, 0.5}), spec);
  CHECK(mid[0].label == QueueLabel::Indeterminate);
  CHECK(mid[0].lower == Approx(0.8));
  CHECK(mid[0].upper == Approx(1.2));
}

TEST_CASE("sequential prefix", "[stability]") {
  SECTION("independent pair") {
    const auto pr = sequential_prefix(ArrivalRates({0.5, 0.5}), models::constant_allocation({1.0, 1.0}), {0, 1});
    CHECK(pr.n_max == 2);
    REQUIRE(pr.margins.size() == 2);
    CHECK(pr.margins[0] == Approx(0.5));
    CHECK(pr.margins[1] == Approx(0.5));
  }
  SECTION("three-queue stage 2") {
    const auto t = models::table_allocation(models::three_queue_params(3.0, 2.0));
    const auto pr = sequential_prefix(ArrivalRates({0.5, 1.2, 0.1}), t, {0, 1, 2});
    CHECK(pr.n_max >= 2);
    CHECK(pr.margins[1] == Approx(0.3).margin(1e-6));
  }
  SECTION("three-queue stage 1 failure") {
    const auto t = models::table_allocation(models::three_queue_params(3.0, 2.0));
    const auto pr = sequential_prefix(ArrivalRates({1.5, 0.2, 0.1}), t, {0, 1, 2});
    CHECK(pr.n_max == 0);
    CHECK(pr.margins.size() == 1);
  }
  SECTION("one server") {
    const auto pr = sequential_prefix(ArrivalRates({0.9}), models::one_server_alpha(2.0), {0});
    CHECK(pr.n_max == 1);
    CHECK(pr.stages[0].L == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("instability test", "[stability]") {
  CHECK(check_unstable_at(ArrivalRates({1.3}), models::constant_allocation({1.0}), {0}, 0));
  const auto bs = models::two_basestations(models::InterferenceForm::Exponential, 2.0);
  CHECK(check_unstable_at(ArrivalRates({2.9, 2.9}), bs, {0, 1}, 0));
  const auto c = models::constant_allocation({1.0, 1.0});
  for (std::size_t n = 0; n < 2; ++n) CHECK_FALSE(check_unstable_at(ArrivalRates({0.5, 0.5}), c, {0, 1}, n));
  AllocationSpec osc(
      2, [](std::size_t i, std::span<const Coord> x) { return i == 0 ? 1.0 + (x[1] % 2 ? -0.5 : 0.5) : 1.0; }, 2.0);
  CHECK_THROWS_AS(check_unstable_at(ArrivalRates({2.0, 2.0}), osc, {0, 1}, 0), NoUniformLimit);
}

TEST_CASE("classify", "[stability]") {
  for (double alpha : {0.5, 2.0}) {
    const auto spec = models::one_server_alpha(alpha);
    CHECK(classify(ArrivalRates({0.9}), spec).system_label == SystemLabel::Stable);
    CHECK(classify(ArrivalRates({1.1}), spec).system_label == SystemLabel::Unstable);
    CHECK(classify(ArrivalRates({1.0}), spec).system_label == SystemLabel::BoundaryIndeterminate);
  }
  const auto ind = classify(ArrivalRates({0.5, 0.5}), models::constant_allocation({1.0, 1.0}));
  CHECK(ind.system_label == SystemLabel::Stable);
  CHECK(ind.per_queue == std::vector<QueueLabel>{QueueLabel::Stable, QueueLabel::Stable});

  const auto bs = models::two_basestations(models::InterferenceForm::Exponential, 2.0);
  const auto v = classify(ArrivalRates({0.45, 0.45}), bs);
  CHECK(v.system_label == SystemLabel::Stable);
  REQUIRE(v.certificate);
  // The deciding curve value is the series L^1_2 at lambda_1 = 0.45.
  const auto& c = *v.certificate;
  CHECK(c.inequalities[1].L == Approx(oracle::basestation_L12(0.45, 2.0, 0)).margin(1e-6));
  CHECK(c.inequalities[0].L == Approx(0.5).margin(1e-12));
}

TEST_CASE("partial stability labels", "[stability]") {
  // Queue 1 alone below the corner, queue 2 above the curve: S1.
  const auto bs = models::two_basestations(models::InterferenceForm::Exponential, 2.0);
  const double l2 = oracle::basestation_L12(0.3, 2.0, 0) + 0.05;
  const auto v = classify(ArrivalRates({0.3, l2}), bs);
  CHECK(v.per_queue[0] == QueueLabel::Stable);
  CHECK(v.per_queue[1] != QueueLabel::Stable);
  CHECK(region_label(v) == "S1");
}

TEST_CASE("hypothesis failures", "[stability]") {
  AllocationSpec up(
      2, [](std::size_t i, std::span<const Coord> x) { return i == 0 ? std::min(4.0, 1.0 + x[1]) : 1.0; }, 4.0);
  const auto v = classify(ArrivalRates({0.5, 0.5}), up);
  CHECK_FALSE(v.partially_decreasing);
  CHECK_FALSE(v.warnings.empty());

  AllocationSpec osc(
      2, [](std::size_t i, std::span<const Coord> x) { return i == 0 ? 1.0 + (x[1] % 2 ? -0.5 : 0.5) : 1.0; }, 2.0);
  // Queue 1 sits between its tail bounds and the prefix tests are unavailable.
  const auto w = classify(ArrivalRates({1.2, 0.5}), osc);
  CHECK(w.system_label == SystemLabel::HypothesesUnverified);
  CHECK(w.per_queue[0] == QueueLabel::Indeterminate);
  CHECK(w.per_queue[1] == QueueLabel::Stable);

  const auto big = models::constant_allocation(std::vector<double>(7, 1.0));
  CHECK_THROWS_AS(classify(ArrivalRates(std::vector<double>(7, 0.5)), big), PermutationCapExceeded);
  Tolerances tol;
  tol.degrade_beyond_cap = true;
  const auto deg = classify(ArrivalRates(std::vector<double>(7, 0.5)), big, tol);
  CHECK(deg.system_label == SystemLabel::Stable);
  CHECK_FALSE(deg.warnings.empty());
}

TEST_CASE("permutation equivariance", "[stability]") {
  const auto t = models::table_allocation({{3.0, 2.5, 2.0}, {{0, 2.2, 1.9}, {1.5, 0, 1.2}, {1.7, 1.1, 0}}, 1.0});
  const ArrivalRates r({0.5, 1.4, 0.3});
  const auto base = classify(r, t);
  for (const auto& sigma : all_permutations(3)) {
    const auto [ts, rs] = relabel(t, r, sigma);
    const auto v = classify(rs, ts);
    CHECK(v.system_label == base.system_label);
    for (std::size_t k = 0; k < 3; ++k) CHECK(v.per_queue[k] == base.per_queue[sigma[k]]);
  }
}

TEST_CASE("consistency with the tail bounds", "[stability]") {
  const auto bs = models::two_basestations(models::InterferenceForm::Polynomial, 0.4);
  StabilityEngine engine(bs);
  Philox4x32 rng(7, 0);
  for (int k = 0; k < 25; ++k) {
    const ArrivalRates r({0.05 + 1.6 * rng.uniform(), 0.05 + 1.6 * rng.uniform()});
    const auto v = engine.classify(r);
    const auto b = engine.general_bounds(r);
    for (std::size_t i = 0; i < 2; ++i) {
      if (b[i].label == QueueLabel::Stable) CHECK(v.per_queue[i] != QueueLabel::Unstable);
      if (b[i].label == QueueLabel::Unstable) CHECK(v.per_queue[i] != QueueLabel::Stable);
    }
  }
}

TEST_CASE("one queue reduces to the birth-death criterion", "[stability]") {
  Philox4x32 rng(11, 0);
  for (int k = 0; k < 20; ++k) {
    // phi(x) = c + d / (1 + x)^p with random c, d, p; liminf = c.
    const double c = 0.5 + rng.uniform();
    const double d = rng.uniform();
    const double p = 1.5 + 2.0 * rng.uniform();
    AllocationSpec spec(
        1, [=](std::size_t, std::span<const Coord> x) { return c + d / std::pow(1.0 + static_cast<double>(x[0]), p); },
        c + d);
    const double lam = 0.1 + 2.0 * rng.uniform();
    const auto v = classify(ArrivalRates({lam}), spec);
    if (lam < c - 1e-3) CHECK(v.system_label == SystemLabel::Stable);
    else if (lam > c + 1e-3) CHECK(v.system_label == SystemLabel::Unstable);
  }
}

TEST_CASE("certificates survive doubled boxes", "[stability]") {
  const auto t = models::table_allocation(models::three_queue_params(3.0, 2.0));
  StabilityEngine engine(t);
  for (const auto& r : {ArrivalRates({0.5, 1.2, 0.1}), ArrivalRates({0.9, 0.9, 0.9}), ArrivalRates({1.5, 1.5, 1.5})}) {
    const auto v = engine.classify(r);
    CHECK(engine.verify_certificate(v));
  }
}

TEST_CASE("sweep keeps grid order and is monotone in columns", "[stability]") {
  const auto bs = models::two_basestations(models::InterferenceForm::Exponential, 2.0);
  std::vector<ArrivalRates> grid;
  for (int a = 1; a <= 10; ++a)
    for (int b = 1; b <= 10; ++b) grid.emplace_back(std::vector<double>{0.1 * a, 0.1 * b});
  StabilityEngine engine(bs);
  const auto one = engine.sweep(grid, 1);
  const auto four = engine.sweep(grid, 4);
  REQUIRE(one.size() == grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(one[k].lambda[0] == grid[k][0]);
    CHECK(one[k].label == four[k].label);
  }
  for (int a = 0; a < 10; ++a) {
    bool left = false;
    for (int b = 0; b < 10; ++b) {
      const bool stable = one[static_cast<std::size_t>(a * 10 + b)].label == "S";
      if (!stable) left = true;
      CHECK_FALSE((left && stable));
    }
  }
  CHECK(engine.sweep({ArrivalRates({0.4, 0.4})}).size() == 1);
  const auto deep = engine.classify(ArrivalRates({2.9, 2.9}));
  CHECK(region_label(deep) == "U");
}
