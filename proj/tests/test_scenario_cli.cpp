#include "qstab/commands.hpp"
#include "qstab/errors.hpp"
#include "qstab/models.hpp"
#include "qstab/report.hpp"
#include "qstab/scenario.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace qstab;
using Catch::Approx;

TEST_CASE("scenario files", "[scenario]") {
  const std::string text = R"({
  "name": "bs",
  "n_queues": 2,
  "arrival_rates": [0.3, 0.4],
  "allocation": {
    "kind": "product",
    "gain": {"cap": 3, "form": "log_gain"},
    "interference": {"form": "poly_interference", "gamma": 0.4}
  },
  "grid": ["0.1:0.3:0.1", "0.2:0.2:0.1"],
  "tolerances": {"margins_tol": 1e-3},
  "seed": 17
})";
  const Scenario s = parse_scenario(text);
  CHECK(s.name == "bs");
  CHECK(s.n_queues == 2);
  REQUIRE(s.rates);
  CHECK((*s.rates)[1] == 0.4);
  CHECK(s.tolerances.margins_tol == 1e-3);
  CHECK(s.seed == 17);
  const auto pts = grid_points(s);
  REQUIRE(pts.size() == 3);
  CHECK(pts[2][0] == Approx(0.3));
  CHECK(pts[2][1] == Approx(0.2));
  const State x{4, 2};
  CHECK(s.spec->evaluate(0, x) ==
        Approx(std::log(5.0) * models::interference_value(models::InterferenceForm::Polynomial, 0.4, 2)));
}

TEST_CASE("scenario errors carry line numbers", "[scenario]") {
  try {
    parse_scenario("{\n  \"name\": \"x\",\n  \"n_queues\": 1\n  \"allocation\": {}\n}");
    FAIL("expected a parse error");
  } catch (const ScenarioError& e) {
    CHECK(e.line() == 4);
  }
  try {
    parse_scenario("{\n  \"name\": \"x\",\n  \"n_queues\": 1,\n  \"arrival_rates\": [-1],\n"
                   "  \"allocation\": {\"kind\": \"constant\", \"mu\": [1]}\n}");
    FAIL("expected a rate error");
  } catch (const ScenarioError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(parse_scenario(R"({"n_queues": 1, "colour": 3, "allocation": {"kind": "constant", "mu": [1]}})"),
                  ScenarioError);
  CHECK_THROWS_AS(parse_axis("0.1:0.5:0"), ScenarioError);
  CHECK_THROWS_AS(parse_axis("0:0.5:0.1"), ScenarioError);
  CHECK_THROWS_AS(builtin_scenario("nope"), ScenarioError);
  CHECK_THROWS_AS(builtin_scenario("mm1", {{"bogus", "1"}}), ScenarioError);
}

TEST_CASE("tolerance overrides", "[scenario]") {
  Tolerances t;
  apply_tolerance(t, "margins_tol=0.01");
  apply_tolerance(t, "backend=gauss_seidel");
  apply_tolerance(t, "start_T=16");
  CHECK(t.margins_tol == 0.01);
  CHECK(t.solver.solve.backend == Backend::GaussSeidel);
  CHECK(t.solver.start_T == 16);
  CHECK_THROWS_AS(apply_tolerance(t, "margins_tol"), ScenarioError);
  CHECK_THROWS_AS(apply_tolerance(t, "nope=1"), ScenarioError);
}

TEST_CASE("sweep outputs are deterministic", "[report]") {
  CommonOptions o;
  o.scenario = "builtin:two_basestations";
  o.params = {{"gamma", "2"}};
  o.grid = "0.1:0.9:0.2,0.1:0.9:0.2";
  const auto s = load_with_overrides(o);
  StabilityEngine e(*s.spec, s.tolerances);
  const auto samples = e.sweep(grid_points(s));
  std::ostringstream c1, c2, v1, v2;
  write_sweep_csv(c1, samples);
  write_sweep_csv(c2, StabilityEngine(*s.spec, s.tolerances).sweep(grid_points(s), 3));
  write_sweep_svg(v1, samples, "t");
  write_sweep_svg(v2, samples, "t");
  CHECK(c1.str() == c2.str());
  CHECK(v1.str() == v2.str());
  CHECK(c1.str().rfind("lambda_1,lambda_2,label,margin\n", 0) == 0);
  CHECK(v1.str().find(label_color("S")) != std::string::npos);
  CHECK(label_color("U") == "#c62828");

  o.grid = "0.2:0.2:0.1,0.3:0.3:0.1";
  std::ostringstream one;
  CHECK(cmd_sweep(o, one) == 0);
  CHECK(one.str().find("0.200000,0.300000,S,") != std::string::npos);
}

TEST_CASE("command exit codes", "[cli]") {
  std::ostringstream sink;
  CommonOptions o;
  o.scenario = "builtin:one_server_alpha";
  o.lambda = "0.9";
  CHECK(cmd_analyze(o, sink) == exit_code::kStable);
  o.lambda = "1.1";
  CHECK(cmd_analyze(o, sink) == exit_code::kUnstable);
  o.lambda = "1.0";
  CHECK(cmd_analyze(o, sink) == exit_code::kIndeterminate);
  o.lambda = "0.5,0.5";
  CHECK_THROWS_AS(cmd_analyze(o, sink), ScenarioError);

  CHECK(exit_code_for(SystemLabel::HypothesesUnverified) == exit_code::kIndeterminate);
  CHECK(exit_code_for(ProbeLabel::Inconclusive) == exit_code::kIndeterminate);

  CommonOptions c;
  c.corpus = "inverted";
  CHECK(cmd_couple_check(c, sink) == exit_code::kHypothesisViolated);
  c.corpus = "mm1";
  c.pairs = 20;
  CHECK(cmd_couple_check(c, sink) == 0);
  c.corpus = "three_queues";
  CHECK(cmd_couple_check(c, sink) == 0);
  c.corpus = "random";
  c.pairs = 200;
  CHECK(cmd_couple_check(c, sink) == 0);
}

TEST_CASE("simulate command", "[cli]") {
  std::ostringstream sink;
  CommonOptions o;
  o.scenario = "builtin:mm1";
  o.params = {{"lambda", "0.5"}};
  o.horizon = 8000.0;
  CHECK(cmd_simulate(o, sink) == exit_code::kStable);
  o.params = {{"lambda", "1.5"}};
  CHECK(cmd_simulate(o, sink) == exit_code::kUnstable);
  o.replicas = 10;
  std::ostringstream warn;
  CHECK(cmd_simulate(o, warn) == exit_code::kIndeterminate);
  CHECK(warn.str().find("warning") != std::string::npos);
}

TEST_CASE("three-queue report", "[cli]") {
  std::ostringstream out;
  CommonOptions o;
  o.lambda = "0.5,1.2,0.05";
  CHECK(cmd_three_queues(o, out) == exit_code::kStable);
  const std::string s = out.str();
  CHECK(s.find("lambda_1 + a_23 (1 - lambda_1) = 1.500000000") != std::string::npos);
  CHECK(s.find(" ok") != std::string::npos);
  CHECK(s.find("pi_00") != std::string::npos);

  const auto spec = models::table_allocation(models::three_queue_params(3.0, 2.0));
  const auto p = three_queue_pi(spec, ArrivalRates({0.5, 1.2, 0.05}));
  REQUIRE(p.stable);
  CHECK(p.pi[0] + p.pi[1] + p.pi[2] + p.pi[3] == Approx(1.0).margin(1e-10));

  std::ostringstream first;
  o.lambda = "1.5,0.2,0.1";
  cmd_three_queues(o, first);
  CHECK(first.str().find("sigma (1,2,3): n_max = 0") != std::string::npos);

  std::ostringstream bad;
  o.params = {{"a12", "3.5"}};
  o.lambda = "0.5,0.5,0.5";
  cmd_three_queues(o, bad);
  CHECK(bad.str().find("warning: a_i >= a_ij >= 1 fails") != std::string::npos);
}

TEST_CASE("symmetric three-queue reports permute with lambda", "[cli]") {
  const auto spec = models::table_allocation(models::three_queue_params(3.0, 2.0));
  StabilityEngine e(spec);
  const ArrivalRates r({0.4, 0.9, 0.2});
  const Permutation tau{2, 0, 1};
  const ArrivalRates rt = r.relabeled(tau);
  for (const auto& sigma : all_permutations(3)) {
    const auto a = e.sequential_prefix(r, sigma);
    // the same queue order in the permuted system
    const auto b = e.sequential_prefix(rt, compose(inverse(tau), sigma));
    REQUIRE(a.stages.size() == b.stages.size());
    CHECK(a.n_max == b.n_max);
    for (std::size_t k = 0; k < a.stages.size(); ++k) CHECK(a.stages[k].L == Approx(b.stages[k].L).margin(1e-9));
  }
}
