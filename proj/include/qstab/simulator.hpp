#pragma once

#include "qstab/allocation.hpp"
#include "qstab/errors.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace qstab {

// Multiclass birth-death dynamics: x -> x + e_i at birth(i, x), x -> x - e_i at
// death(i, x) when x_i > 0. The bounds feed the uniformization clock.
struct BirthDeathModel {
  using RateFn = std::function<double(std::size_t i, std::span<const Coord> x)>;

  std::size_t classes = 0;
  RateFn birth;
  RateFn death;
  std::vector<double> birth_bounds;
  double death_bound = 0.0;

  static BirthDeathModel from_allocation(const ArrivalRates& rates, const AllocationSpec& spec);
  static BirthDeathModel constant(std::vector<double> births, std::vector<double> deaths);
  double uniformization_constant() const;
};

struct PathOptions {
  std::size_t histogram_cap = 4096;
  std::ostream* csv = nullptr;  // time,queue_1..queue_N
  double sample_interval = 1.0;
  std::uint64_t stream = 0;
};

struct PathSample {
  std::uint64_t seed = 0;
  double horizon = 0.0;
  std::uint64_t event_count = 0;  // uniformization ticks
  std::uint64_t jump_count = 0;   // ticks that moved the state
  // Time spent at each level per queue; index histogram_cap collects overflow.
  std::vector<std::vector<double>> occupancy;
  State final_state;
  std::vector<double> time_average;
  std::vector<double> drift_slope;  // X_i(horizon) / horizon
};

PathSample simulate_path(const BirthDeathModel& model, const State& x0, double horizon,
                         std::uint64_t seed, const PathOptions& opts = {});
PathSample simulate_path(const ArrivalRates& rates, const AllocationSpec& spec, const State& x0,
                         double horizon, std::uint64_t seed, const PathOptions& opts = {});

// Rate hypotheses of the comparison lemma broken at a sampled pair of states.
class HypothesisViolated : public Error {
 public:
  HypothesisViolated(const std::string& what, State x, State y, std::size_t queue)
      : Error(what), x_(std::move(x)), y_(std::move(y)), queue_(queue) {}
  const State& x() const noexcept { return x_; }
  const State& y() const noexcept { return y_; }
  std::size_t queue() const noexcept { return queue_; }

 private:
  State x_;
  State y_;
  std::size_t queue_;
};

struct Horizon {
  double time = 1e300;
  std::uint64_t max_events = UINT64_MAX;
};

struct CouplingReport {
  std::uint64_t violations = 0;
  std::uint64_t sampled_instants = 0;
  std::uint64_t event_count = 0;
  double elapsed = 0.0;
  std::vector<Coord> max_gap;  // max of y_i - x_i over the path, compared coordinates
  State x_final;
  State y_final;
  std::vector<std::vector<double>> x_occupancy;
};

CouplingReport simulate_coupled_pair(const BirthDeathModel& X, const BirthDeathModel& Y,
                                     const State& x0, const State& y0, const Horizon& horizon,
                                     std::uint64_t seed, std::uint64_t stream = 0,
                                     std::size_t histogram_cap = 4096);

enum class ProbeLabel { LooksStable, LooksUnstable, Inconclusive };
std::string to_string(ProbeLabel l);

struct ProbeOptions {
  std::vector<double> horizons{4000.0, 16000.0};
  std::size_t replicas = 30;
  std::uint64_t seed = 1;
  double escape_threshold = 0.01;
  double quantile = 0.999;
  double z = 3.0;
  std::size_t threads = 1;
};

struct ProbeDiagnostic {
  ProbeLabel label = ProbeLabel::Inconclusive;
  std::vector<Coord> K;                   // per-queue level covering the early mass
  std::vector<double> escape;             // fraction of late-window time above K
  std::vector<double> mean_slope;
  std::vector<double> slope_lower_bound;  // mean - z sd / sqrt(R)
  std::size_t replicas = 0;
  std::vector<std::string> warnings;
};

ProbeDiagnostic empirical_stability_probe(const BirthDeathModel& model, const State& x0,
                                          const ProbeOptions& opts);
ProbeDiagnostic empirical_stability_probe(const ArrivalRates& rates, const AllocationSpec& spec,
                                          const State& x0, const ProbeOptions& opts);

// Total variation distance between two occupancy histograms after normalization.
double occupancy_tv(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace qstab
