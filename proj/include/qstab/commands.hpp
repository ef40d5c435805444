#pragma once

#include "qstab/scenario.hpp"
#include "qstab/simulator.hpp"
#include "qstab/stability.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qstab {

namespace exit_code {
inline constexpr int kStable = 0;
inline constexpr int kUnstable = 1;
inline constexpr int kIndeterminate = 2;
inline constexpr int kHypothesisViolated = 3;
inline constexpr int kUsage = 64;
inline constexpr int kInternal = 70;
}  // namespace exit_code

int exit_code_for(SystemLabel label);
int exit_code_for(ProbeLabel label);

struct CommonOptions {
  std::string scenario;
  std::map<std::string, std::string> params;
  std::optional<std::string> lambda;
  std::optional<std::string> grid;
  std::vector<std::string> tolerances;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string svg;
  std::optional<double> horizon;
  std::optional<std::size_t> replicas;
  std::size_t threads = 1;
  std::string corpus = "random";
  std::size_t pairs = 1000;
};

// Scenario with every command-line override applied.
Scenario load_with_overrides(const CommonOptions& opts);

int cmd_analyze(const CommonOptions& opts, std::ostream& out);
int cmd_sweep(const CommonOptions& opts, std::ostream& out);
int cmd_simulate(const CommonOptions& opts, std::ostream& out);
int cmd_couple_check(const CommonOptions& opts, std::ostream& out);
int cmd_three_queues(const CommonOptions& opts, std::ostream& out);

// Saturated process Y^n of the identity labelling as a simulator model:
// classes 1..n keep their arrival rates and are served at l^n phi.
BirthDeathModel saturated_model(const AllocationSpec& spec, const ArrivalRates& rates,
                                std::size_t n, const LimitOptions& limits = {});

// One coupled pair for the comparison check.
struct CouplingCase {
  BirthDeathModel X;
  BirthDeathModel Y;
  State x0;
  State y0;
};

// Random pair satisfying the comparison hypotheses by construction. Y has
// psi_i(y) = (b_i + sum_j w_ij / (1 + y_j)) (1 + 0.3 sin y_i) and births eta_i;
// X serves at psi_i(x padded with zeros) + c_i and has births eta_i f(x) with
// f <= 1. Deterministic in (seed, index).
CouplingCase random_coupling_case(std::uint64_t seed, std::uint64_t index);

// Stationary class probabilities of the two-queue saturated process with the
// third queue at infinity: pi[0] = P(x1 = 0, x2 = 0), pi[1] = P(0, >0),
// pi[2] = P(>0, 0), pi[3] = P(>0, >0).
struct ThreeQueuePi {
  bool stable = false;
  std::array<double, 4> pi{};
  Coord box_T = 0;
  double boundary_mass = 0.0;
  bool certified = false;
};
ThreeQueuePi three_queue_pi(const AllocationSpec& spec, const ArrivalRates& rates,
                            const Tolerances& tol = {}, std::optional<Coord> fixed_T = {});

}  // namespace qstab
