#pragma once

#include "qstab/allocation.hpp"
#include "qstab/errors.hpp"
#include "qstab/types.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qstab {

// The box {0..T}^dim with the first coordinate varying fastest.
struct Box {
  std::size_t dim = 0;
  Coord T = 0;

  std::size_t side() const noexcept { return static_cast<std::size_t>(T) + 1; }
  std::size_t size() const;
  std::size_t encode(std::span<const Coord> x) const;
  void decode(std::size_t s, std::span<Coord> out) const;
  State decode(std::size_t s) const;
  bool on_face(std::size_t s) const;
};

// Death rate of class i in state x. Only consulted when x_i > 0.
using DeathRateFn = std::function<double(std::size_t i, std::span<const Coord> x)>;

class TruncatedGenerator {
 public:
  static constexpr std::size_t kDefaultStateCap = 50'000'000;

  TruncatedGenerator(std::vector<double> births, const DeathRateFn& deaths, Coord T, double bound,
                     std::size_t state_cap = kDefaultStateCap);

  const Box& box() const noexcept { return box_; }
  std::size_t dim() const noexcept { return box_.dim; }
  std::size_t n_states() const noexcept { return n_states_; }
  std::span<const double> births() const noexcept { return births_; }
  double bound() const noexcept { return bound_; }
  double uniformization_constant() const noexcept { return lambda_; }

  // Rate of s -> s + e_i (zero on the upper face) and s -> s - e_i (zero at x_i = 0).
  double birth(std::size_t s, std::size_t i) const;
  double death(std::size_t s, std::size_t i) const { return deaths_[s * box_.dim + i]; }
  double exit_rate(std::size_t s) const;
  std::size_t stride(std::size_t i) const noexcept { return stride_[i]; }
  Coord coord(std::size_t s, std::size_t i) const noexcept {
    return static_cast<Coord>((s / stride_[i]) % box_.side());
  }

  // Dense Q for small boxes (tests and diagnostics).
  std::vector<std::vector<double>> dense() const;

 private:
  Box box_;
  std::size_t n_states_ = 0;
  std::vector<double> births_;
  std::vector<double> deaths_;
  std::vector<std::size_t> stride_;
  double bound_ = 0.0;
  double lambda_ = 0.0;
};

TruncatedGenerator build_truncated_generator(const ArrivalRates& rates, const DeathRateFn& deaths,
                                             Coord T, double bound,
                                             std::size_t state_cap = TruncatedGenerator::kDefaultStateCap);

enum class Backend { Auto, Direct, GaussSeidel, Power };
std::string to_string(Backend b);

struct SolveOptions {
  double tol = 1e-10;
  Backend backend = Backend::Auto;
  std::size_t max_sweeps = 1'000'000;
  // Auto uses sparse LU up to this many states, Gauss-Seidel above.
  std::size_t direct_limit = 400'000;
};

struct StationaryDistribution {
  Box box;
  std::vector<double> mass;
  double residual = 0.0;
  double boundary_mass = 0.0;
  std::size_t iterations = 0;
  Backend backend = Backend::Auto;

  double at(std::span<const Coord> x) const;
  double total() const;
  // Sum of f(x) pi(x) over the box.
  double expectation(const std::function<double(std::span<const Coord>)>& f) const;
  // Marginal law of coordinate i.
  std::vector<double> marginal(std::size_t i) const;
};

// ||pi Q||_inf over the whole box.
double stationary_residual(const TruncatedGenerator& gen, std::span<const double> pi);

StationaryDistribution solve_stationary(const TruncatedGenerator& gen, const SolveOptions& opts = {});

struct AdaptiveOptions {
  Coord start_T = 32;
  Coord max_T_1d = 65536;
  // Caps (T+1)^dim for dim >= 2.
  std::size_t max_states = std::size_t{1} << 19;
  double tail_tol = 1e-8;
  double residual_tol = 1e-10;
  // dim >= 2: give up early when the fitted geometric tail misses tail_tol at the cap.
  bool extrapolate_tail = true;
  SolveOptions solve;
};

struct SolveAttempt {
  Coord T = 0;
  std::size_t states = 0;
  double boundary_mass = 0.0;
  double residual = 0.0;
  std::vector<double> functionals;
  std::size_t iterations = 0;
  Backend backend = Backend::Auto;
};

struct SolveReport {
  std::vector<SolveAttempt> history;
  bool certified = false;
  std::string note;
};

// Box cap reached with the boundary still carrying mass.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, SolveReport report)
      : Error(what), report_(std::move(report)) {}
  const SolveReport& report() const noexcept { return report_; }

 private:
  SolveReport report_;
};

using Functional = std::function<double(std::span<const Coord>)>;

// Doubles T from start_T until the boundary mass and the death-rate functionals
// (plus any extra functionals) settle. With fixed_T a single solve at that box
// is returned and certification only looks at the boundary mass.
std::pair<StationaryDistribution, SolveReport> adaptive_stationary(
    const ArrivalRates& rates, const DeathRateFn& deaths, double bound,
    const AdaptiveOptions& opts = {}, const std::vector<Functional>& extra = {},
    std::optional<Coord> fixed_T = std::nullopt);

struct LValue {
  double value = 0.0;
  bool prefix_stable = true;
  Coord box_T = 0;
  double boundary_mass = 0.0;
  bool certified = true;
};

// L^n_i for every relabeled queue i of the saturated process Y^n described by
// sat, with prefix arrival rates lambda^sigma_1..lambda^sigma_n. Unstable Y^n
// gives zero for every queue.
std::vector<LValue> compute_L_all(const SaturatedAllocation& sat,
                                  std::span<const double> prefix_rates,
                                  const AdaptiveOptions& opts = {},
                                  std::optional<Coord> fixed_T = std::nullopt);

LValue compute_L(const AllocationSpec& spec, const Permutation& sigma, std::size_t n,
                 std::size_t i, std::span<const double> prefix_rates,
                 const LimitOptions& limits = {}, const AdaptiveOptions& opts = {});

// Product formula pi(x) = c prod_{z <= x} lambda / death(z) for a single class.
StationaryDistribution stationary_1d_closed_form(double lambda,
                                                 const std::function<double(Coord)>& death_fn,
                                                 Coord cutoff = 1'000'000);

class DivergentSeries : public Error {
 public:
  using Error::Error;
};

// CSV with a comment header carrying residual and boundary mass.
void write_distribution_csv(std::ostream& os, const StationaryDistribution& dist);

}  // namespace qstab
