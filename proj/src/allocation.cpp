#include "qstab/allocation.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qstab {

namespace {

// Odometer over {0..cap}^dim.
bool next_in_box(std::span<Coord> x, Coord cap) {
  for (auto& c : x) {
    if (c < cap) {
      ++c;
      return true;
    }
    c = 0;
  }
  return false;
}

// Per-coordinate probe cap so that (cap+1)^dim stays within max_states.
Coord capped_probe(Coord probe_cap, std::size_t dim, std::size_t max_states) {
  Coord c = std::max<Coord>(probe_cap, 0);
  while (c > 1 && checked_pow(static_cast<std::size_t>(c + 1), dim, max_states) > max_states) --c;
  return c;
}

// Minimum of phi^sigma_i over the saturated coordinates on {R, next(R)}^(N-n).
double tail_minimum(const AllocationSpec& spec, const Permutation& sigma, std::size_t n,
                    std::size_t i, std::span<const Coord> prefix, Coord level, double growth) {
  const std::size_t N = spec.n_queues();
  const std::array<Coord, 2> grid{level, next_level(level, growth)};
  State z(N, 0);
  for (std::size_t k = 0; k < n; ++k) z[sigma[k]] = prefix[k];
  const std::size_t free_sat = N - n;
  const std::size_t combos = std::size_t{1} << free_sat;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < combos; ++mask) {
    for (std::size_t k = 0; k < free_sat; ++k) z[sigma[n + k]] = grid[(mask >> k) & 1u];
    best = std::min(best, spec.evaluate(sigma[i], z));
  }
  return best;
}

void check_permutation(const Permutation& sigma, std::size_t n) {
  if (!is_permutation(sigma, n)) throw std::invalid_argument("not a permutation of the queues");
}

}  // namespace

ArrivalRates::ArrivalRates(std::vector<double> rates) : rates_(std::move(rates)) {
  for (double r : rates_) {
    if (!(r > 0.0) || !std::isfinite(r))
      throw std::invalid_argument("arrival rates must be finite and strictly positive");
  }
}

ArrivalRates ArrivalRates::relabeled(const Permutation& sigma) const {
  check_permutation(sigma, rates_.size());
  std::vector<double> out(rates_.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) out[k] = rates_[sigma[k]];
  return ArrivalRates(std::move(out));
}

AllocationSpec::AllocationSpec(std::size_t n_queues, RateFn rate_fn, double bound,
                               AnalyticLimits analytic_limits, std::string name)
    : n_(n_queues),
      fn_(std::move(rate_fn)),
      bound_(bound),
      analytic_(std::move(analytic_limits)),
      name_(std::move(name)) {
  if (n_ == 0) throw std::invalid_argument("allocation needs at least one queue");
  if (!fn_) throw std::invalid_argument("allocation needs a rate function");
  if (!(bound_ > 0.0) || !std::isfinite(bound_))
    throw std::invalid_argument("allocation bound must be positive and finite");
}

double AllocationSpec::evaluate(std::size_t i, std::span<const Coord> x) const {
  if (i >= n_ || x.size() != n_) throw std::out_of_range("evaluate: bad queue index or state size");
  const double r = fn_(i, x);
  if (!std::isfinite(r) || r < 0.0 || r > bound_) {
    std::ostringstream os;
    os << "rate phi_" << i + 1 << format_state(x) << " = " << r << " outside [0, " << bound_
       << "]";
    throw BoundViolation(os.str());
  }
  return r;
}

AllocationSpec AllocationSpec::without_analytic_limits() const {
  return AllocationSpec(n_, fn_, bound_, {}, name_);
}

AllocationSpec AllocationSpec::with_bound(double bound) const {
  AllocationSpec out(n_, fn_, bound, analytic_, name_);
  out.uniform_declared_ = uniform_declared_;
  return out;
}

AllocationSpec AllocationSpec::with_declared_uniform_limits() const {
  AllocationSpec out(*this);
  out.uniform_declared_ = true;
  return out;
}

double evaluate(const AllocationSpec& spec, std::size_t i, std::span<const Coord> x) {
  return spec.evaluate(i, x);
}

AllocationSpec relabel(const AllocationSpec& spec, const Permutation& sigma) {
  const std::size_t N = spec.n_queues();
  check_permutation(sigma, N);
  auto fn = [spec, sigma, N](std::size_t i, std::span<const Coord> x) {
    State z(N);
    for (std::size_t k = 0; k < N; ++k) z[sigma[k]] = x[k];
    return spec.evaluate(sigma[i], z);
  };
  AnalyticLimits lim;
  if (spec.has_analytic_limits()) {
    lim = [base = spec.analytic_limits(), sigma](const Permutation& tau, std::size_t n,
                                                 std::size_t i) {
      return base(compose(sigma, tau), n, i);
    };
  }
  AllocationSpec out(N, std::move(fn), spec.bound(), std::move(lim), spec.name());
  return spec.uniform_limits_declared() ? out.with_declared_uniform_limits() : out;
}

std::pair<AllocationSpec, ArrivalRates> relabel(const AllocationSpec& spec,
                                                const ArrivalRates& rates,
                                                const Permutation& sigma) {
  if (rates.size() != spec.n_queues()) throw std::invalid_argument("relabel: size mismatch");
  return {relabel(spec, sigma), rates.relabeled(sigma)};
}

Coord next_level(Coord level, double growth) {
  const double next = std::ceil(static_cast<double>(level) * growth);
  if (next >= static_cast<double>(std::numeric_limits<Coord>::max() / 4))
    return std::numeric_limits<Coord>::max() / 4;
  return std::max<Coord>(level + 1, static_cast<Coord>(next));
}

std::vector<Coord> level_schedule(const LimitOptions& opts) {
  std::vector<Coord> out;
  Coord R = opts.start_level;
  for (int k = 0; k < opts.max_levels; ++k) {
    out.push_back(R);
    R = next_level(R, opts.growth);
  }
  return out;
}

SaturationContext certify_context(const AllocationSpec& spec, const Permutation& sigma,
                                  std::size_t n, const LimitOptions& opts) {
  const std::size_t N = spec.n_queues();
  check_permutation(sigma, N);
  if (n > N) throw std::invalid_argument("prefix length exceeds number of queues");
  if (!(opts.growth > 1.0)) throw std::invalid_argument("growth factor must exceed 1");

  SaturationContext ctx;
  ctx.sigma = sigma;
  ctx.prefix_len = n;
  ctx.sat_level = opts.start_level;
  ctx.growth_factor = opts.growth;
  ctx.limit_tol = opts.limit_tol;
  ctx.max_levels = opts.max_levels;
  ctx.probe_cap = capped_probe(opts.probe_cap, n, opts.max_probe_states);

  if (spec.has_analytic_limits()) {
    ctx.analytic = true;
    ctx.certified = true;
    return ctx;
  }
  if (n == N) {
    ctx.certified = true;
    return ctx;
  }

  std::vector<State> probes;
  State p(n, 0);
  do {
    probes.push_back(p);
  } while (n > 0 && next_in_box(p, ctx.probe_cap));

  auto sample = [&](Coord level) {
    std::vector<double> v;
    v.reserve(probes.size() * N);
    for (const auto& pr : probes)
      for (std::size_t i = 0; i < N; ++i)
        v.push_back(tail_minimum(spec, sigma, n, i, pr, level, opts.growth));
    return v;
  };

  Coord R = opts.start_level;
  std::vector<double> cur = sample(R);
  double worst = 0.0;
  for (int k = 0; k + 1 < opts.max_levels; ++k) {
    const Coord nextR = next_level(R, opts.growth);
    std::vector<double> nxt = sample(nextR);
    worst = 0.0;
    for (std::size_t j = 0; j < cur.size(); ++j) worst = std::max(worst, std::abs(cur[j] - nxt[j]));
    if (worst < opts.limit_tol) {
      ctx.sat_level = R;
      ctx.certified = true;
      return ctx;
    }
    R = nextR;
    cur = std::move(nxt);
  }
  std::ostringstream os;
  os << "lower partial limit for sigma=" << format_permutation(sigma) << ", n=" << n
     << " did not stabilize: last change " << worst << " >= " << opts.limit_tol;
  throw SaturationNotConverged(os.str());
}

double lower_partial_limit(const AllocationSpec& spec, const SaturationContext& ctx,
                           std::size_t i, std::span<const Coord> prefix) {
  const std::size_t N = spec.n_queues();
  const std::size_t n = ctx.prefix_len;
  if (i >= N || prefix.size() != n) throw std::out_of_range("lower_partial_limit: bad arguments");
  if (ctx.analytic && spec.has_analytic_limits()) {
    const double r = spec.analytic_limits()(ctx.sigma, n, i)(prefix);
    if (!std::isfinite(r) || r < 0.0 || r > spec.bound())
      throw BoundViolation("analytic limit outside [0, bound]");
    return r;
  }
  if (!ctx.certified) throw SaturationNotConverged("saturation context not certified");
  if (n == N) {
    State z(N);
    for (std::size_t k = 0; k < N; ++k) z[ctx.sigma[k]] = prefix[k];
    return spec.evaluate(ctx.sigma[i], z);
  }
  const bool in_probe = std::all_of(prefix.begin(), prefix.end(),
                                    [&](Coord c) { return c <= ctx.probe_cap; });
  if (in_probe) return tail_minimum(spec, ctx.sigma, n, i, prefix, ctx.sat_level, ctx.growth_factor);

  // Outside the certified probe box: escalate pointwise from the certified level.
  Coord R = ctx.sat_level;
  double cur = tail_minimum(spec, ctx.sigma, n, i, prefix, R, ctx.growth_factor);
  for (int k = 0; k < ctx.max_levels; ++k) {
    const Coord nextR = next_level(R, ctx.growth_factor);
    const double nxt = tail_minimum(spec, ctx.sigma, n, i, prefix, nextR, ctx.growth_factor);
    if (std::abs(cur - nxt) < ctx.limit_tol) return cur;
    R = nextR;
    cur = nxt;
  }
  throw SaturationNotConverged("lower partial limit did not stabilize at prefix " +
                               format_state(prefix));
}

std::size_t SaturatedAllocation::KeyHash::operator()(const State& s) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (Coord c : s) {
    h ^= static_cast<std::size_t>(c) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

SaturatedAllocation::SaturatedAllocation(AllocationSpec spec, SaturationContext ctx)
    : spec_(std::move(spec)), ctx_(std::move(ctx)) {
  if (!ctx_.certified) throw SaturationNotConverged("saturation context not certified");
}

double SaturatedAllocation::rate(std::size_t i, std::span<const Coord> prefix) const {
  State key(prefix.begin(), prefix.end());
  {
    std::lock_guard lock(mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end() && !std::isnan(it->second[i])) return it->second[i];
  }
  const double r = lower_partial_limit(spec_, ctx_, i, prefix);
  std::lock_guard lock(mutex_);
  auto& slot = memo_[std::move(key)];
  if (slot.empty()) slot.assign(spec_.n_queues(), std::numeric_limits<double>::quiet_NaN());
  slot[i] = r;
  return r;
}

StructureReport check_partially_decreasing(const AllocationSpec& spec, Coord box_cap,
                                           std::size_t max_states) {
  const std::size_t N = spec.n_queues();
  if (box_cap < 1) throw std::invalid_argument("probe box must be nonempty with cap >= 1");
  StructureReport rep;
  const Coord c = capped_probe(box_cap, N, max_states);
  rep.probe_box = c;
  if (c < box_cap) {
    rep.note = "box reduced from " + std::to_string(box_cap) + " to " + std::to_string(c) +
               " per coordinate to bound the probe";
  }

  const std::size_t side = static_cast<std::size_t>(c + 1);
  const std::size_t S = checked_pow(side, N);
  std::vector<std::size_t> stride(N, 1);
  for (std::size_t k = 1; k < N; ++k) stride[k] = stride[k - 1] * side;

  std::vector<double> rates(S * N);
  State x(N, 0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t i = 0; i < N; ++i) rates[s * N + i] = spec.evaluate(i, x);
    next_in_box(x, c);
  }

  const double slack = 1e-12 * std::max(1.0, spec.bound());
  std::fill(x.begin(), x.end(), 0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) {
        if (j == i || x[j] >= c) continue;
        const double rx = rates[s * N + i];
        const double ry = rates[(s + stride[j]) * N + i];
        if (rx < ry - slack) {
          rep.partially_decreasing = false;
          StructureReport::Counterexample ce;
          ce.x = x;
          ce.y = x;
          ce.y[j] += 1;
          ce.queue = i;
          ce.rate_x = rx;
          ce.rate_y = ry;
          rep.counterexample = std::move(ce);
          return rep;
        }
      }
    }
    next_in_box(x, c);
  }
  return rep;
}

StructureReport probe_uniform_limits(const AllocationSpec& spec, std::span<const Coord> schedule,
                                     double tol, Coord probe_cap, std::size_t max_probe_states) {
  if (schedule.empty()) throw std::invalid_argument("empty saturation schedule");
  for (std::size_t k = 1; k < schedule.size(); ++k)
    if (schedule[k] <= schedule[k - 1])
      throw std::invalid_argument("saturation schedule must be strictly increasing");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");

  const std::size_t N = spec.n_queues();
  StructureReport rep;
  rep.residual_history.assign(schedule.size(), 0.0);
  rep.probe_box = probe_cap;

  // Subsets of saturated coordinates; the limit only depends on which ones are at infinity.
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << N); ++mask) {
    Permutation sigma;
    for (std::size_t k = 0; k < N; ++k)
      if (!((mask >> k) & 1u)) sigma.push_back(k);
    const std::size_t m = sigma.size();
    for (std::size_t k = 0; k < N; ++k)
      if ((mask >> k) & 1u) sigma.push_back(k);
    const std::size_t sat = N - m;
    const Coord c = capped_probe(probe_cap, m, max_probe_states);

    std::vector<PrefixRate> analytic;
    if (spec.has_analytic_limits()) {
      for (std::size_t i = 0; i < N; ++i) analytic.push_back(spec.analytic_limits()(sigma, m, i));
    }

    std::size_t combos = 1;
    for (std::size_t k = 0; k < sat; ++k) combos *= 3;

    for (std::size_t lvl = 0; lvl < schedule.size(); ++lvl) {
      const Coord R = schedule[lvl];
      const std::array<Coord, 3> pts{R, R + 1,
                                     static_cast<Coord>(std::ceil(1.5 * static_cast<double>(R)))};
      double worst = 0.0;
      State prefix(m, 0);
      State z(N, 0);
      do {
        for (std::size_t k = 0; k < m; ++k) z[sigma[k]] = prefix[k];
        for (std::size_t i = 0; i < N; ++i) {
          double lo = std::numeric_limits<double>::infinity();
          double hi = -lo;
          const double lim = analytic.empty() ? 0.0 : analytic[i](prefix);
          for (std::size_t comb = 0; comb < combos; ++comb) {
            std::size_t code = comb;
            for (std::size_t k = 0; k < sat; ++k) {
              z[sigma[m + k]] = pts[code % 3];
              code /= 3;
            }
            const double v = spec.evaluate(sigma[i], z);
            if (analytic.empty()) {
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            } else {
              worst = std::max(worst, std::abs(v - lim));
            }
          }
          if (analytic.empty()) worst = std::max(worst, hi - lo);
        }
      } while (m > 0 && next_in_box(prefix, c));
      rep.residual_history[lvl] = std::max(rep.residual_history[lvl], worst);
    }
  }
  rep.worst_residual = rep.residual_history.back();
  rep.uniform_limits = rep.worst_residual < tol || spec.uniform_limits_declared();
  if (rep.worst_residual >= tol && rep.uniform_limits) {
    std::ostringstream os;
    os << "uniform limits declared by the model; probe residual " << rep.worst_residual
       << " at level " << schedule.back();
    rep.note = os.str();
  } else if (!rep.uniform_limits) {
    std::ostringstream os;
    os << "tail oscillation " << rep.worst_residual << " at level " << schedule.back()
       << " is not below " << tol;
    rep.note = os.str();
  }
  return rep;
}

StructureReport check_uniform_limits(const AllocationSpec& spec, std::span<const Coord> schedule,
                                     double tol, Coord probe_cap) {
  StructureReport rep = probe_uniform_limits(spec, schedule, tol, probe_cap);
  if (!rep.uniform_limits) throw NoUniformLimit(rep.note);
  return rep;
}

AllocationSpec build_product_allocation(std::vector<GainFunction> gains,
                                        std::vector<InterferenceFunction> interference,
                                        Coord probe_cap) {
  const std::size_t N = gains.size();
  if (N == 0 || interference.size() != N)
    throw std::invalid_argument("need one gain and one interference function per queue");

  constexpr Coord kGainProbe = 256;
  for (std::size_t i = 0; i < N; ++i) {
    const auto& g = gains[i];
    if (!g.value || !interference[i].value) throw std::invalid_argument("empty gain/interference");
    double prev = g.value(0);
    for (Coord x = 0; x <= kGainProbe; ++x) {
      const double v = g.value(x);
      if (!std::isfinite(v) || v < 0.0 || v > g.cap)
        throw InvalidShape("gain " + std::to_string(i + 1) + " leaves [0, cap] at x=" +
                           std::to_string(x));
      if (v < prev) throw InvalidShape("gain " + std::to_string(i + 1) + " decreases at x=" +
                                       std::to_string(x));
      prev = v;
    }
    const double lim = g.value(kSaturated);
    if (!(lim >= prev) || lim > g.cap)
      throw InvalidShape("gain " + std::to_string(i + 1) + " limit inconsistent with samples");
  }

  const Coord c = capped_probe(probe_cap, N, 200000);
  double h_max = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    State x(N, 0);
    do {
      const double v = interference[i].value(x);
      if (!std::isfinite(v) || v < 0.0)
        throw InvalidShape("interference " + std::to_string(i + 1) + " negative at " +
                           format_state(x));
      h_max = std::max(h_max, v);
      for (std::size_t j = 0; j < N; ++j) {
        if (x[j] >= c) continue;
        State y = x;
        ++y[j];
        if (interference[i].value(y) > v * (1.0 + 1e-12))
          throw InvalidShape("interference " + std::to_string(i + 1) + " increases from " +
                             format_state(x) + " to " + format_state(y));
      }
    } while (next_in_box(x, c));
  }

  double cap_max = 0.0;
  for (const auto& g : gains) cap_max = std::max(cap_max, g.cap);
  const double bound = cap_max * h_max;

  auto fn = [gains, interference](std::size_t i, std::span<const Coord> x) {
    return gains[i].value(x[i]) * interference[i].value(x);
  };
  auto limits = [gains, interference, N](const Permutation& sigma, std::size_t n,
                                         std::size_t i) -> PrefixRate {
    const std::size_t q = sigma[i];
    return [gains, interference, sigma, n, q, N](std::span<const Coord> prefix) {
      State z(N, kSaturated);
      for (std::size_t k = 0; k < n; ++k) z[sigma[k]] = prefix[k];
      return gains[q].value(z[q]) * interference[q].value(z);
    };
  };
  std::string name = "product";
  // Bounded increasing g times decreasing h: the tail limits are uniform in the prefix.
  return AllocationSpec(N, std::move(fn), bound, std::move(limits), std::move(name))
      .with_declared_uniform_limits();
}

}  // namespace qstab
