#pragma once

#include "qstab/errors.hpp"
#include "qstab/types.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace qstab {

// Marks a coordinate sitting "at infinity" in states handed to analytic limit
// evaluators. Black-box rate functions never see it.
inline constexpr Coord kSaturated = std::numeric_limits<Coord>::max();

class ArrivalRates {
 public:
  ArrivalRates() = default;
  explicit ArrivalRates(std::vector<double> rates);

  std::size_t size() const noexcept { return rates_.size(); }
  double operator[](std::size_t i) const { return rates_[i]; }
  std::span<const double> values() const noexcept { return rates_; }

  // lambda^sigma_k = lambda_{sigma(k)}
  ArrivalRates relabeled(const Permutation& sigma) const;

 private:
  std::vector<double> rates_;
};

// Rate of queue i when the relabeled system is in prefix state (x_1..x_n) and
// the remaining coordinates are saturated.
using PrefixRate = std::function<double(std::span<const Coord> prefix)>;
using AnalyticLimits =
    std::function<PrefixRate(const Permutation& sigma, std::size_t n, std::size_t i)>;

class AllocationSpec {
 public:
  using RateFn = std::function<double(std::size_t i, std::span<const Coord> x)>;

  AllocationSpec(std::size_t n_queues, RateFn rate_fn, double bound,
                 AnalyticLimits analytic_limits = {}, std::string name = {});

  std::size_t n_queues() const noexcept { return n_; }
  double bound() const noexcept { return bound_; }
  const std::string& name() const noexcept { return name_; }

  bool has_analytic_limits() const noexcept { return static_cast<bool>(analytic_); }
  const AnalyticLimits& analytic_limits() const noexcept { return analytic_; }

  // phi_i(x). Throws BoundViolation when the rate leaves [0, bound].
  double evaluate(std::size_t i, std::span<const Coord> x) const;

  AllocationSpec without_analytic_limits() const;
  AllocationSpec with_bound(double bound) const;

  // Set by models whose limits are known to be uniform in the prefix; the
  // probe then reports the residual without gating on it.
  bool uniform_limits_declared() const noexcept { return uniform_declared_; }
  AllocationSpec with_declared_uniform_limits() const;

 private:
  std::size_t n_;
  RateFn fn_;
  double bound_;
  AnalyticLimits analytic_;
  std::string name_;
  bool uniform_declared_ = false;
};

double evaluate(const AllocationSpec& spec, std::size_t i, std::span<const Coord> x);

// phi^sigma and lambda^sigma.
std::pair<AllocationSpec, ArrivalRates> relabel(const AllocationSpec& spec,
                                                const ArrivalRates& rates,
                                                const Permutation& sigma);
AllocationSpec relabel(const AllocationSpec& spec, const Permutation& sigma);

// Knobs for the numeric saturation machinery.
struct LimitOptions {
  Coord start_level = 64;
  double growth = 2.0;
  double limit_tol = 1e-9;
  int max_levels = 40;
  Coord probe_cap = 32;
  // Caps (probe_cap+1)^n for high-dimensional prefixes.
  std::size_t max_probe_states = 40000;
};

Coord next_level(Coord level, double growth);
std::vector<Coord> level_schedule(const LimitOptions& opts);

struct SaturationContext {
  Permutation sigma;
  std::size_t prefix_len = 0;
  Coord sat_level = 64;
  double growth_factor = 2.0;
  double limit_tol = 1e-9;
  int max_levels = 40;
  Coord probe_cap = 32;  // prefixes in {0..probe_cap}^n were checked
  bool certified = false;
  bool analytic = false;
};

// Escalates the saturation level until the two-level tail minimum is stable at
// every probed prefix. Throws SaturationNotConverged.
SaturationContext certify_context(const AllocationSpec& spec, const Permutation& sigma,
                                  std::size_t n, const LimitOptions& opts = {});

// l^n phi^sigma_i(prefix). i is a relabeled index in 0..N-1.
double lower_partial_limit(const AllocationSpec& spec, const SaturationContext& ctx,
                           std::size_t i, std::span<const Coord> prefix);

// The rate field of the saturated process Y^n for one (sigma, n): memoized
// l^n phi^sigma_i over prefix states. Safe to share across threads.
class SaturatedAllocation {
 public:
  SaturatedAllocation(AllocationSpec spec, SaturationContext ctx);

  std::size_t n_queues() const noexcept { return spec_.n_queues(); }
  std::size_t prefix_len() const noexcept { return ctx_.prefix_len; }
  double bound() const noexcept { return spec_.bound(); }
  const SaturationContext& context() const noexcept { return ctx_; }
  const AllocationSpec& spec() const noexcept { return spec_; }

  double rate(std::size_t i, std::span<const Coord> prefix) const;

 private:
  struct KeyHash {
    std::size_t operator()(const State& s) const noexcept;
  };

  AllocationSpec spec_;
  SaturationContext ctx_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<State, std::vector<double>, KeyHash> memo_;
};

struct StructureReport {
  struct Counterexample {
    State x;
    State y;
    std::size_t queue = 0;
    double rate_x = 0.0;
    double rate_y = 0.0;
  };

  bool partially_decreasing = true;
  std::optional<Counterexample> counterexample;
  bool uniform_limits = true;
  double worst_residual = 0.0;
  std::vector<double> residual_history;
  Coord probe_box = 0;
  bool sampled = true;  // finite-box verification, not a proof
  std::string note;
};

StructureReport check_partially_decreasing(const AllocationSpec& spec, Coord box_cap = 64,
                                           std::size_t max_states = 2'000'000);

// Non-throwing form used by the engine.
StructureReport probe_uniform_limits(const AllocationSpec& spec,
                                     std::span<const Coord> schedule, double tol,
                                     Coord probe_cap = 32,
                                     std::size_t max_probe_states = 40000);
// Throws NoUniformLimit when the residual at the last level is not below tol.
StructureReport check_uniform_limits(const AllocationSpec& spec,
                                     std::span<const Coord> schedule, double tol,
                                     Coord probe_cap = 32);

// Increasing bounded gain g_i(x_i). value(kSaturated) must return the limit g_i*.
struct GainFunction {
  std::function<double(Coord)> value;
  double cap = 0.0;
  std::string name;
};

// Decreasing interference h_i(x). Coordinates equal to kSaturated stand for
// the pointwise limit in that coordinate.
struct InterferenceFunction {
  std::function<double(std::span<const Coord>)> value;
  std::string name;
};

// phi_i(x) = g_i(x_i) h_i(x), with analytic limits from g_i* and the limits of h_i.
AllocationSpec build_product_allocation(std::vector<GainFunction> gains,
                                        std::vector<InterferenceFunction> interference,
                                        Coord probe_cap = 24);

}  // namespace qstab
