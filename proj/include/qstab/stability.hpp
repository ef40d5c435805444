#pragma once

#include "qstab/allocation.hpp"
#include "qstab/ctmc.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace qstab {

enum class QueueLabel { Stable, Unstable, Indeterminate };
enum class SystemLabel { Stable, Unstable, BoundaryIndeterminate, HypothesesUnverified };

std::string to_string(QueueLabel l);
std::string to_string(SystemLabel l);

struct Tolerances {
  double margins_tol = 1e-4;
  // Gate for the uniform-limit hypothesis; the residual must fall below this.
  double uniform_tol = 1e-4;
  LimitOptions limits;
  AdaptiveOptions solver;
  Coord structure_box = 64;
  std::size_t permutation_cap = 6;
  int descent_steps = 20;
  // Above the permutation cap, fall back to the tail-rate bounds instead of throwing.
  bool degrade_beyond_cap = false;
};

struct Inequality {
  enum class Kind {
    StageStable,    // lambda^sigma_i < L^{i-1}_i
    TailUnstable,   // lambda^sigma_i > L^n_i
    BoundStable,    // lambda_i < liminf inf phi_i
    BoundUnstable,  // lambda_i > limsup sup phi_i
  };
  Kind kind = Kind::StageStable;
  std::size_t queue = 0;  // original queue index
  std::size_t stage = 0;  // saturated process order used for L (n)
  double lambda = 0.0;
  double L = 0.0;
  Coord box_T = 0;
  bool prefix_stable = true;
  bool certified = true;

  bool stable_side() const noexcept {
    return kind == Kind::StageStable || kind == Kind::BoundStable;
  }
  // Positive when the inequality holds.
  double slack() const noexcept { return stable_side() ? L - lambda : lambda - L; }
};

std::string to_string(Inequality::Kind k);

struct Certificate {
  Permutation sigma;
  std::size_t n = 0;
  std::vector<double> margins;  // L^{i-1}_i - lambda^sigma_i for the stages checked
  std::vector<Inequality> inequalities;
  bool via_descent = false;
  std::vector<double> descended_lambda;
};

struct QueueBound {
  double lower = 0.0;  // liminf_{x_i} inf_{x_j} phi_i
  double upper = 0.0;  // limsup_{x_i} sup_{x_j} phi_i
  QueueLabel label = QueueLabel::Indeterminate;
};

struct StabilityVerdict {
  std::vector<QueueLabel> per_queue;
  SystemLabel system_label = SystemLabel::BoundaryIndeterminate;
  // The witness deciding the system label, when there is one.
  std::optional<Certificate> certificate;
  // Every witness that contributed a per-queue label.
  std::vector<Certificate> witnesses;
  std::vector<QueueBound> bounds;
  double margin = 0.0;  // signed distance proxy: > 0 inside S, < 0 inside U
  double margins_tol = 0.0;
  bool partially_decreasing = true;
  bool uniform_limits = true;
  std::vector<std::string> warnings;
  std::vector<double> lambda;
  Tolerances tolerances;
};

struct PrefixResult {
  Permutation sigma;
  std::size_t n_max = 0;
  std::vector<double> margins;  // for stages 1..n_max+1 (when it exists)
  std::vector<Inequality> stages;
};

struct UnstableTest {
  bool holds = false;
  std::vector<Inequality> inequalities;
};

struct RegionSample {
  ArrivalRates lambda;
  StabilityVerdict verdict;
  std::chrono::duration<double> wall_time{0};
  std::string error;
  std::string label;
};

// Region label: S, U, B, S<queues> (e.g. S1), or ERR.
std::string region_label(const StabilityVerdict& v);

class StabilityEngine {
 public:
  StabilityEngine(AllocationSpec spec, Tolerances tol = {});

  const AllocationSpec& spec() const noexcept { return spec_; }
  const Tolerances& tolerances() const noexcept { return tol_; }

  const StructureReport& monotonicity() const;
  const StructureReport& uniformity() const;

  std::vector<QueueBound> general_bounds(const ArrivalRates& rates) const;

  // L^n_q for every original queue q, with the prefix made of the first n
  // queues of sigma.
  std::vector<LValue> saturated_rates(const ArrivalRates& rates, const Permutation& sigma,
                                      std::size_t n, std::optional<Coord> fixed_T = {}) const;

  PrefixResult sequential_prefix(const ArrivalRates& rates, const Permutation& sigma) const;
  UnstableTest check_unstable_at(const ArrivalRates& rates, const Permutation& sigma,
                                 std::size_t n) const;

  StabilityVerdict classify(const ArrivalRates& rates) const;

  // Re-evaluates every certificate inequality with boxes scaled by box_factor.
  bool verify_certificate(const StabilityVerdict& v, int box_factor = 2) const;

  std::vector<RegionSample> sweep(const std::vector<ArrivalRates>& grid,
                                  std::size_t threads = 1) const;

 private:
  const SaturatedAllocation& saturated(std::uint64_t mask) const;
  const std::vector<QueueBound>& raw_bounds() const;
  StabilityVerdict classify_impl(const ArrivalRates& rates, bool allow_descent) const;
  StabilityVerdict bounds_only(const ArrivalRates& rates, std::vector<std::string> warnings) const;

  AllocationSpec spec_;
  Tolerances tol_;

  mutable std::mutex mutex_;
  mutable std::optional<StructureReport> mono_;
  mutable std::optional<StructureReport> uniform_;
  mutable std::optional<std::vector<QueueBound>> bounds_;
  mutable std::map<std::uint64_t, std::shared_ptr<SaturatedAllocation>> saturated_;
  mutable std::map<std::pair<std::uint64_t, std::vector<double>>, std::vector<LValue>> lcache_;
};

// Convenience wrappers with a fresh engine per call.
std::vector<QueueBound> general_bounds(const ArrivalRates& rates, const AllocationSpec& spec,
                                       const Tolerances& tol = {});
PrefixResult sequential_prefix(const ArrivalRates& rates, const AllocationSpec& spec,
                               const Permutation& sigma, const Tolerances& tol = {});
bool check_unstable_at(const ArrivalRates& rates, const AllocationSpec& spec,
                       const Permutation& sigma, std::size_t n, const Tolerances& tol = {});
StabilityVerdict classify(const ArrivalRates& rates, const AllocationSpec& spec,
                          const Tolerances& tol = {});
std::vector<RegionSample> sweep(const std::vector<ArrivalRates>& grid, const AllocationSpec& spec,
                                const Tolerances& tol = {}, std::size_t threads = 1);

}  // namespace qstab
