#include "qstab/ctmc.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace qstab {

std::size_t Box::size() const { return checked_pow(side(), dim); }

std::size_t Box::encode(std::span<const Coord> x) const {
  std::size_t s = 0;
  std::size_t mult = 1;
  for (std::size_t k = 0; k < dim; ++k) {
    s += static_cast<std::size_t>(x[k]) * mult;
    mult *= side();
  }
  return s;
}

void Box::decode(std::size_t s, std::span<Coord> out) const {
  for (std::size_t k = 0; k < dim; ++k) {
    out[k] = static_cast<Coord>(s % side());
    s /= side();
  }
}

State Box::decode(std::size_t s) const {
  State x(dim);
  decode(s, x);
  return x;
}

bool Box::on_face(std::size_t s) const {
  for (std::size_t k = 0; k < dim; ++k) {
    if (static_cast<Coord>(s % side()) == T) return true;
    s /= side();
  }
  return false;
}

TruncatedGenerator::TruncatedGenerator(std::vector<double> births, const DeathRateFn& deaths,
                                       Coord T, double bound, std::size_t state_cap)
    : births_(std::move(births)), bound_(bound) {
  if (T < 1) throw std::invalid_argument("truncation level must be >= 1");
  box_.dim = births_.size();
  box_.T = T;
  for (double b : births_)
    if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("birth rates must be >= 0");
  n_states_ = checked_pow(box_.side(), box_.dim, state_cap);
  if (n_states_ > state_cap) {
    throw BoxTooLarge("box {0.." + std::to_string(T) + "}^" + std::to_string(box_.dim) +
                      " exceeds the state cap of " + std::to_string(state_cap));
  }
  stride_.assign(box_.dim, 1);
  for (std::size_t k = 1; k < box_.dim; ++k) stride_[k] = stride_[k - 1] * box_.side();

  deaths_.assign(n_states_ * box_.dim, 0.0);
  State x(box_.dim, 0);
  for (std::size_t s = 0; s < n_states_; ++s) {
    box_.decode(s, x);
    for (std::size_t i = 0; i < box_.dim; ++i) {
      if (x[i] == 0) continue;
      const double d = deaths(i, x);
      if (!std::isfinite(d) || d < 0.0 || d > bound_ * (1.0 + 1e-12)) {
        throw BoundViolation("death rate " + std::to_string(d) + " of class " +
                             std::to_string(i + 1) + " at " + format_state(x) +
                             " outside [0, bound]");
      }
      deaths_[s * box_.dim + i] = d;
    }
  }
  double total_birth = 0.0;
  for (double b : births_) total_birth += b;
  lambda_ = total_birth + static_cast<double>(box_.dim) * bound_;
}

double TruncatedGenerator::birth(std::size_t s, std::size_t i) const {
  return coord(s, i) < box_.T ? births_[i] : 0.0;
}

double TruncatedGenerator::exit_rate(std::size_t s) const {
  double r = 0.0;
  for (std::size_t i = 0; i < box_.dim; ++i) r += birth(s, i) + death(s, i);
  return r;
}

std::vector<std::vector<double>> TruncatedGenerator::dense() const {
  if (n_states_ > 4096) throw BoxTooLarge("dense generator limited to 4096 states");
  std::vector<std::vector<double>> Q(n_states_, std::vector<double>(n_states_, 0.0));
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t i = 0; i < box_.dim; ++i) {
      const double b = birth(s, i);
      if (b > 0.0) Q[s][s + stride_[i]] += b;
      const double d = death(s, i);
      if (d > 0.0) Q[s][s - stride_[i]] += d;
    }
    Q[s][s] = -exit_rate(s);
  }
  return Q;
}

TruncatedGenerator build_truncated_generator(const ArrivalRates& rates, const DeathRateFn& deaths,
                                             Coord T, double bound, std::size_t state_cap) {
  return TruncatedGenerator(std::vector<double>(rates.values().begin(), rates.values().end()),
                            deaths, T, bound, state_cap);
}

std::string to_string(Backend b) {
  switch (b) {
    case Backend::Auto: return "auto";
    case Backend::Direct: return "direct";
    case Backend::GaussSeidel: return "gauss-seidel";
    case Backend::Power: return "power";
  }
  return "unknown";
}

double StationaryDistribution::at(std::span<const Coord> x) const {
  for (Coord c : x)
    if (c < 0 || c > box.T) return 0.0;
  return mass[box.encode(x)];
}

double StationaryDistribution::total() const {
  double t = 0.0;
  for (double m : mass) t += m;
  return t;
}

double StationaryDistribution::expectation(
    const std::function<double(std::span<const Coord>)>& f) const {
  State x(box.dim, 0);
  double acc = 0.0;
  for (std::size_t s = 0; s < mass.size(); ++s) {
    if (mass[s] == 0.0) continue;
    box.decode(s, x);
    acc += f(x) * mass[s];
  }
  return acc;
}

std::vector<double> StationaryDistribution::marginal(std::size_t i) const {
  std::vector<double> out(box.side(), 0.0);
  State x(box.dim, 0);
  for (std::size_t s = 0; s < mass.size(); ++s) {
    box.decode(s, x);
    out[static_cast<std::size_t>(x[i])] += mass[s];
  }
  return out;
}

namespace {

double inflow(const TruncatedGenerator& gen, std::span<const double> pi, std::size_t s) {
  double in = 0.0;
  const Coord T = gen.box().T;
  for (std::size_t i = 0; i < gen.dim(); ++i) {
    const Coord c = gen.coord(s, i);
    const std::size_t st = gen.stride(i);
    if (c > 0) in += pi[s - st] * gen.births()[i];
    if (c < T) in += pi[s + st] * gen.death(s + st, i);
  }
  return in;
}

// States reachable from the top corner: the unique closed class of the box.
std::vector<char> closed_class(const TruncatedGenerator& gen) {
  const std::size_t S = gen.n_states();
  std::vector<char> in(S, 0);
  std::vector<std::size_t> stack{S - 1};
  in[S - 1] = 1;
  while (!stack.empty()) {
    const std::size_t s = stack.back();
    stack.pop_back();
    for (std::size_t i = 0; i < gen.dim(); ++i) {
      const std::size_t st = gen.stride(i);
      if (gen.birth(s, i) > 0.0 && !in[s + st]) {
        in[s + st] = 1;
        stack.push_back(s + st);
      }
      if (gen.death(s, i) > 0.0 && !in[s - st]) {
        in[s - st] = 1;
        stack.push_back(s - st);
      }
    }
  }
  return in;
}

bool normalize(std::vector<double>& pi) {
  double t = 0.0;
  for (double& v : pi) {
    if (v < 0.0) v = 0.0;
    t += v;
  }
  if (!(t > 0.0) || !std::isfinite(t)) return false;
  for (double& v : pi) v /= t;
  return true;
}

// Exact solve for one class via pi(x+1) death(x+1) = pi(x) lambda.
std::vector<double> solve_1d(const TruncatedGenerator& gen) {
  const std::size_t S = gen.n_states();
  const double lambda = gen.births()[0];
  std::size_t start = 0;
  for (std::size_t x = 1; x < S; ++x)
    if (gen.death(x, 0) == 0.0) start = x;
  std::vector<double> logw(S, -std::numeric_limits<double>::infinity());
  logw[start] = 0.0;
  double top = 0.0;
  for (std::size_t x = start; x + 1 < S; ++x) {
    logw[x + 1] = logw[x] + std::log(lambda) - std::log(gen.death(x + 1, 0));
    top = std::max(top, logw[x + 1]);
  }
  std::vector<double> pi(S, 0.0);
  for (std::size_t x = start; x < S; ++x) pi[x] = std::exp(logw[x] - top);
  normalize(pi);
  return pi;
}

bool solve_direct(const TruncatedGenerator& gen, const std::vector<char>& cls, std::size_t pin,
                  std::vector<double>& pi) {
  const std::size_t S = gen.n_states();
  std::vector<std::ptrdiff_t> idx(S, -1);
  std::ptrdiff_t m = 0;
  for (std::size_t s = 0; s < S; ++s)
    if (cls[s] && s != pin) idx[s] = m++;
  pi.assign(S, 0.0);
  pi[pin] = 1.0;
  if (m == 0) return true;

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(m) * (2 * gen.dim() + 1));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  // Row y of A is the balance equation at y: sum_x pi_x Q(x, y) = 0.
  for (std::size_t x = 0; x < S; ++x) {
    if (!cls[x]) continue;
    const auto col = idx[x];
    if (col >= 0) trip.emplace_back(col, col, -gen.exit_rate(x));
    for (std::size_t i = 0; i < gen.dim(); ++i) {
      const std::size_t st = gen.stride(i);
      const double b = gen.birth(x, i);
      if (b > 0.0 && idx[x + st] >= 0) {
        if (col >= 0) trip.emplace_back(idx[x + st], col, b);
        else rhs[idx[x + st]] -= b;
      }
      const double d = gen.death(x, i);
      if (d > 0.0 && idx[x - st] >= 0) {
        if (col >= 0) trip.emplace_back(idx[x - st], col, d);
        else rhs[idx[x - st]] -= d;
      }
    }
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) return false;
  Eigen::VectorXd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success) return false;
  for (std::size_t s = 0; s < S; ++s) {
    if (idx[s] < 0) continue;
    const double v = sol[idx[s]];
    if (!std::isfinite(v)) return false;
    pi[s] = v;
  }
  return normalize(pi);
}

std::size_t solve_iterative(const TruncatedGenerator& gen, const std::vector<char>& cls,
                            std::vector<double>& pi, Backend method, double tol,
                            std::size_t max_sweeps) {
  const std::size_t S = gen.n_states();
  if (pi.size() != S || !normalize(pi)) {
    pi.assign(S, 0.0);
    std::size_t count = 0;
    for (std::size_t s = 0; s < S; ++s) count += cls[s] ? 1 : 0;
    for (std::size_t s = 0; s < S; ++s) pi[s] = cls[s] ? 1.0 / static_cast<double>(count) : 0.0;
  }
  const double Lam = gen.uniformization_constant();
  std::vector<double> next;
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    if (method == Backend::Power) {
      next.assign(S, 0.0);
      for (std::size_t s = 0; s < S; ++s) {
        if (!cls[s]) continue;
        next[s] = pi[s] + (inflow(gen, pi, s) - pi[s] * gen.exit_rate(s)) / Lam;
      }
      pi.swap(next);
    } else {
      auto relax = [&](std::size_t s) {
        if (!cls[s]) return;
        const double out = gen.exit_rate(s);
        if (out > 0.0) pi[s] = inflow(gen, pi, s) / out;
      };
      for (std::size_t s = 0; s < S; ++s) relax(s);
      for (std::size_t s = S; s-- > 0;) relax(s);
    }
    normalize(pi);
    if ((sweep % 8 == 0 || sweep == max_sweeps) && stationary_residual(gen, pi) <= tol) return sweep;
  }
  return max_sweeps;
}

}  // namespace

double stationary_residual(const TruncatedGenerator& gen, std::span<const double> pi) {
  double worst = 0.0;
  for (std::size_t s = 0; s < gen.n_states(); ++s)
    worst = std::max(worst, std::abs(inflow(gen, pi, s) - pi[s] * gen.exit_rate(s)));
  return worst;
}

StationaryDistribution solve_stationary(const TruncatedGenerator& gen, const SolveOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  StationaryDistribution out;
  out.box = gen.box();
  const std::size_t S = gen.n_states();

  Backend method = opts.backend;
  if (method == Backend::Auto) method = S <= opts.direct_limit ? Backend::Direct : Backend::GaussSeidel;
  out.backend = method;

  std::vector<double> pi;
  if (method == Backend::Direct) {
    if (gen.dim() == 1 && gen.births()[0] > 0.0) {
      pi = solve_1d(gen);
    } else {
      const auto cls = closed_class(gen);
      const std::size_t pin = cls[0] ? 0 : S - 1;
      if (!solve_direct(gen, cls, pin, pi) && !solve_direct(gen, cls, S - 1, pi)) pi.clear();
      if (pi.empty() || stationary_residual(gen, pi) > opts.tol) {
        out.iterations = solve_iterative(gen, cls, pi, Backend::GaussSeidel, opts.tol,
                                         opts.max_sweeps);
        out.backend = Backend::GaussSeidel;
      }
    }
  } else {
    const auto cls = closed_class(gen);
    out.iterations = solve_iterative(gen, cls, pi, method, opts.tol, opts.max_sweeps);
  }

  out.residual = stationary_residual(gen, pi);
  if (!(out.residual <= opts.tol)) {
    std::ostringstream os;
    os << to_string(out.backend) << " solve stalled at residual " << out.residual << " > "
       << opts.tol << " on " << S << " states";
    throw SolveFailure(os.str());
  }
  out.mass = std::move(pi);
  for (std::size_t s = 0; s < S; ++s)
    if (out.box.on_face(s)) out.boundary_mass += out.mass[s];
  return out;
}

namespace {

Coord max_level_for(std::size_t dim, const AdaptiveOptions& opts) {
  if (dim == 1) return opts.max_T_1d;
  Coord T = 1;
  while (checked_pow(static_cast<std::size_t>(T + 2), dim, opts.max_states) <= opts.max_states) ++T;
  return T;
}

}  // namespace

std::pair<StationaryDistribution, SolveReport> adaptive_stationary(
    const ArrivalRates& rates, const DeathRateFn& deaths, double bound,
    const AdaptiveOptions& opts, const std::vector<Functional>& extra,
    std::optional<Coord> fixed_T) {
  if (!(opts.tail_tol > 0.0) || !(opts.residual_tol > 0.0))
    throw std::invalid_argument("tolerances must be positive");
  const std::size_t dim = rates.size();
  SolveReport report;

  auto functionals = [&](const StationaryDistribution& d, const TruncatedGenerator* gen) {
    std::vector<double> f;
    for (std::size_t i = 0; i < dim; ++i) {
      double acc = 0.0;
      for (std::size_t s = 0; s < d.mass.size(); ++s) acc += gen->death(s, i) * d.mass[s];
      f.push_back(acc);
    }
    for (const auto& g : extra) f.push_back(d.expectation(g));
    return f;
  };

  if (dim == 0) {
    StationaryDistribution d;
    d.box = Box{0, 0};
    d.mass = {1.0};
    d.backend = Backend::Direct;
    SolveAttempt a;
    a.states = 1;
    for (const auto& g : extra) a.functionals.push_back(g({}));
    report.history.push_back(a);
    report.certified = true;
    return {d, report};
  }

  const Coord T_cap = max_level_for(dim, opts);
  Coord T = std::min(fixed_T.value_or(opts.start_T), fixed_T ? std::numeric_limits<Coord>::max() : T_cap);
  SolveOptions sopts = opts.solve;
  sopts.tol = opts.residual_tol;

  std::vector<double> births(rates.values().begin(), rates.values().end());
  for (;;) {
    TruncatedGenerator gen(births, deaths, T, bound);
    StationaryDistribution dist = solve_stationary(gen, sopts);
    SolveAttempt a;
    a.T = T;
    a.states = gen.n_states();
    a.boundary_mass = dist.boundary_mass;
    a.residual = dist.residual;
    a.functionals = functionals(dist, &gen);
    a.iterations = dist.iterations;
    a.backend = dist.backend;
    report.history.push_back(a);

    const bool tail_ok = dist.boundary_mass < opts.tail_tol;
    if (fixed_T) {
      report.certified = tail_ok;
      if (!tail_ok) report.note = "boundary mass above tail tolerance at the fixed box";
      return {std::move(dist), report};
    }
    if (tail_ok && report.history.size() >= 2) {
      const auto& prev = report.history[report.history.size() - 2].functionals;
      double change = 0.0;
      for (std::size_t k = 0; k < prev.size(); ++k)
        change = std::max(change, std::abs(prev[k] - a.functionals[k]));
      if (change < opts.tail_tol) {
        report.certified = true;
        return {std::move(dist), report};
      }
    }
    if (!tail_ok && opts.extrapolate_tail && dim >= 2 && T >= 128 && T < T_cap &&
        report.history.size() >= 2) {
      // Geometric tail model: mass(T) ~ rho^T, fitted on the last two boxes.
      const auto& prev = report.history[report.history.size() - 2];
      const double ratio = prev.boundary_mass > 0.0 ? dist.boundary_mass / prev.boundary_mass : 1.0;
      const double steps = static_cast<double>(T_cap - T) / static_cast<double>(T - prev.T);
      const double predicted = ratio >= 1.0 ? dist.boundary_mass : dist.boundary_mass * std::pow(ratio, steps);
      if (predicted > 100.0 * opts.tail_tol) {
        std::ostringstream os;
        os << "boundary mass " << dist.boundary_mass << " at T=" << T << " decays too slowly to reach "
           << opts.tail_tol << " by T=" << T_cap;
        report.note = os.str();
        throw NoConvergence(os.str(), report);
      }
    }
    if (T >= T_cap) {
      if (!tail_ok) {
        std::ostringstream os;
        os << "boundary mass " << dist.boundary_mass << " still >= " << opts.tail_tol
           << " at the largest box T=" << T;
        report.note = os.str();
        throw NoConvergence(os.str(), report);
      }
      report.note = "functionals did not settle before the box cap";
      return {std::move(dist), report};
    }
    T = std::min(T * 2, T_cap);
  }
}

std::vector<LValue> compute_L_all(const SaturatedAllocation& sat,
                                  std::span<const double> prefix_rates,
                                  const AdaptiveOptions& opts, std::optional<Coord> fixed_T) {
  const std::size_t N = sat.n_queues();
  const std::size_t n = sat.prefix_len();
  if (prefix_rates.size() != n) throw std::invalid_argument("prefix rates must have length n");
  std::vector<LValue> out(N);
  if (n == 0) {
    for (std::size_t i = 0; i < N; ++i) out[i].value = sat.rate(i, {});
    return out;
  }
  const ArrivalRates rates(std::vector<double>(prefix_rates.begin(), prefix_rates.end()));
  DeathRateFn deaths = [&sat](std::size_t i, std::span<const Coord> x) { return sat.rate(i, x); };
  std::vector<Functional> extra;
  for (std::size_t i = n; i < N; ++i)
    extra.push_back([&sat, i](std::span<const Coord> x) { return sat.rate(i, x); });
  try {
    auto [dist, report] = adaptive_stationary(rates, deaths, sat.bound(), opts, extra, fixed_T);
    const auto& last = report.history.back();
    for (std::size_t i = 0; i < N; ++i) {
      out[i].value = i < n ? dist.expectation([&sat, i](std::span<const Coord> x) {
        return sat.rate(i, x);
      })
                           : last.functionals[i];
      out[i].box_T = last.T;
      out[i].boundary_mass = last.boundary_mass;
      out[i].certified = report.certified;
    }
  } catch (const NoConvergence& e) {
    const auto& last = e.report().history.back();
    for (auto& v : out) {
      v.value = 0.0;
      v.prefix_stable = false;
      v.box_T = last.T;
      v.boundary_mass = last.boundary_mass;
      v.certified = true;
    }
  }
  return out;
}

LValue compute_L(const AllocationSpec& spec, const Permutation& sigma, std::size_t n,
                 std::size_t i, std::span<const double> prefix_rates, const LimitOptions& limits,
                 const AdaptiveOptions& opts) {
  if (i >= spec.n_queues()) throw std::out_of_range("compute_L: queue index");
  SaturatedAllocation sat(spec, certify_context(spec, sigma, n, limits));
  return compute_L_all(sat, prefix_rates, opts)[i];
}

StationaryDistribution stationary_1d_closed_form(double lambda,
                                                 const std::function<double(Coord)>& death_fn,
                                                 Coord cutoff) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  constexpr std::size_t kWindow = 64;
  std::vector<double> logw{0.0};
  std::vector<double> ratios;
  double log_sum = 0.0;
  for (Coord x = 1; x <= cutoff; ++x) {
    const double d = death_fn(x);
    if (!(d > 0.0) || !std::isfinite(d))
      throw std::invalid_argument("death rate must be positive for x >= 1");
    const double r = lambda / d;
    ratios.push_back(r);
    const double lw = logw.back() + std::log(r);
    logw.push_back(lw);
    const double hi = std::max(log_sum, lw);
    log_sum = hi + std::log(std::exp(log_sum - hi) + std::exp(lw - hi));

    if (ratios.size() >= kWindow) {
      const double rmax = *std::max_element(ratios.end() - kWindow, ratios.end());
      if (rmax < 1.0 - 1e-9 && lw + std::log(rmax / (1.0 - rmax)) - log_sum < std::log(1e-15)) {
        StationaryDistribution out;
        out.box = Box{1, x};
        out.backend = Backend::Direct;
        out.mass.resize(logw.size());
        for (std::size_t k = 0; k < logw.size(); ++k) out.mass[k] = std::exp(logw[k] - log_sum);
        normalize(out.mass);
        for (std::size_t k = 0; k + 1 < out.mass.size(); ++k) {
          const double lhs = out.mass[k + 1] * death_fn(static_cast<Coord>(k + 1));
          out.residual = std::max(out.residual, std::abs(lhs - out.mass[k] * lambda));
        }
        out.boundary_mass = out.mass.back();
        return out;
      }
    }
  }
  throw DivergentSeries("product series does not converge before cutoff " +
                        std::to_string(cutoff));
}

void write_distribution_csv(std::ostream& os, const StationaryDistribution& dist) {
  os << "# residual=" << std::setprecision(6) << dist.residual
     << " boundary_mass=" << dist.boundary_mass << " T=" << dist.box.T << '\n';
  for (std::size_t k = 0; k < dist.box.dim; ++k) os << "x_" << k + 1 << ',';
  os << "probability\n";
  os << std::setprecision(17);
  State x(dist.box.dim);
  for (std::size_t s = 0; s < dist.mass.size(); ++s) {
    dist.box.decode(s, x);
    for (Coord c : x) os << c << ',';
    os << dist.mass[s] << '\n';
  }
}

}  // namespace qstab
