#include "qstab/stability.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace qstab {

std::string to_string(QueueLabel l) {
  switch (l) {
    case QueueLabel::Stable: return "Stable";
    case QueueLabel::Unstable: return "Unstable";
    case QueueLabel::Indeterminate: return "Indeterminate";
  }
  return "?";
}

std::string to_string(SystemLabel l) {
  switch (l) {
    case SystemLabel::Stable: return "Stable";
    case SystemLabel::Unstable: return "Unstable";
    case SystemLabel::BoundaryIndeterminate: return "Boundary-Indeterminate";
    case SystemLabel::HypothesesUnverified: return "Hypotheses-Unverified";
  }
  return "?";
}

std::string to_string(Inequality::Kind k) {
  switch (k) {
    case Inequality::Kind::StageStable: return "stage";
    case Inequality::Kind::TailUnstable: return "tail";
    case Inequality::Kind::BoundStable: return "bound-lower";
    case Inequality::Kind::BoundUnstable: return "bound-upper";
  }
  return "?";
}

std::string region_label(const StabilityVerdict& v) {
  const std::size_t N = v.per_queue.size();
  std::size_t stable = 0;
  std::size_t unstable = 0;
  for (auto l : v.per_queue) {
    if (l == QueueLabel::Stable) ++stable;
    if (l == QueueLabel::Unstable) ++unstable;
  }
  if (stable == N) return "S";
  if (unstable == N) return "U";
  if (stable + unstable < N) return v.system_label == SystemLabel::HypothesesUnverified ? "H" : "B";
  std::string out = "S";
  for (std::size_t q = 0; q < N; ++q)
    if (v.per_queue[q] == QueueLabel::Stable) out += std::to_string(q + 1);
  return out;
}

namespace {

std::uint64_t prefix_mask(const Permutation& sigma, std::size_t n) {
  std::uint64_t m = 0;
  for (std::size_t k = 0; k < n; ++k) m |= std::uint64_t{1} << sigma[k];
  return m;
}

// Prefix queues in increasing order, then the saturated ones in increasing order.
Permutation canonical_sigma(std::uint64_t mask, std::size_t N) {
  Permutation s;
  for (std::size_t q = 0; q < N; ++q)
    if ((mask >> q) & 1u) s.push_back(q);
  for (std::size_t q = 0; q < N; ++q)
    if (!((mask >> q) & 1u)) s.push_back(q);
  return s;
}

Coord probe_side(Coord cap, std::size_t dim, std::size_t extra, std::size_t max_states) {
  Coord c = std::max<Coord>(cap, 0);
  while (c > 0 &&
         checked_pow(static_cast<std::size_t>(c + 1) + extra, dim, max_states) > max_states)
    --c;
  return c;
}

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

}  // namespace

StabilityEngine::StabilityEngine(AllocationSpec spec, Tolerances tol)
    : spec_(std::move(spec)), tol_(std::move(tol)) {
  if (!(tol_.margins_tol > 0.0)) throw std::invalid_argument("margins_tol must be positive");
  if (spec_.n_queues() > 63) throw std::invalid_argument("at most 63 queues supported");
}

const StructureReport& StabilityEngine::monotonicity() const {
  std::lock_guard lock(mutex_);
  if (!mono_) mono_ = check_partially_decreasing(spec_, tol_.structure_box);
  return *mono_;
}

const StructureReport& StabilityEngine::uniformity() const {
  std::lock_guard lock(mutex_);
  if (!uniform_) {
    const auto schedule = level_schedule(tol_.limits);
    uniform_ = probe_uniform_limits(spec_, schedule, tol_.uniform_tol, tol_.limits.probe_cap,
                                    tol_.limits.max_probe_states);
  }
  return *uniform_;
}

const SaturatedAllocation& StabilityEngine::saturated(std::uint64_t mask) const {
  std::lock_guard lock(mutex_);
  auto it = saturated_.find(mask);
  if (it != saturated_.end()) return *it->second;
  const std::size_t N = spec_.n_queues();
  const Permutation sigma = canonical_sigma(mask, N);
  const std::size_t n = static_cast<std::size_t>(std::popcount(mask));
  auto sat = std::make_shared<SaturatedAllocation>(spec_, certify_context(spec_, sigma, n,
                                                                          tol_.limits));
  return *saturated_.emplace(mask, std::move(sat)).first->second;
}

std::vector<LValue> StabilityEngine::saturated_rates(const ArrivalRates& rates,
                                                     const Permutation& sigma, std::size_t n,
                                                     std::optional<Coord> fixed_T) const {
  const std::size_t N = spec_.n_queues();
  if (rates.size() != N) throw std::invalid_argument("arrival rates do not match the allocation");
  if (!is_permutation(sigma, N) || n > N) throw std::invalid_argument("bad permutation or prefix");
  const std::uint64_t mask = prefix_mask(sigma, n);
  const Permutation canon = canonical_sigma(mask, N);
  std::vector<double> lam(n);
  for (std::size_t k = 0; k < n; ++k) lam[k] = rates[canon[k]];

  const auto key = std::make_pair(mask, lam);
  if (!fixed_T) {
    std::lock_guard lock(mutex_);
    auto it = lcache_.find(key);
    if (it != lcache_.end()) return it->second;
  }
  const SaturatedAllocation& sat = saturated(mask);
  const auto relabeled = compute_L_all(sat, lam, tol_.solver, fixed_T);
  std::vector<LValue> out(N);
  for (std::size_t k = 0; k < N; ++k) out[canon[k]] = relabeled[k];
  if (!fixed_T) {
    std::lock_guard lock(mutex_);
    lcache_.emplace(key, out);
  }
  return out;
}

const std::vector<QueueBound>& StabilityEngine::raw_bounds() const {
  {
    std::lock_guard lock(mutex_);
    if (bounds_) return *bounds_;
  }
  const std::size_t N = spec_.n_queues();
  const auto& lim = tol_.limits;
  std::vector<QueueBound> out(N);

  for (std::size_t i = 0; i < N; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    if (spec_.has_analytic_limits()) {
      // x_i at infinity; each subset of the other queues either finite (probed) or saturated.
      std::vector<std::size_t> others;
      for (std::size_t j = 0; j < N; ++j)
        if (j != i) others.push_back(j);
      for (std::uint64_t sub = 0; sub < (std::uint64_t{1} << others.size()); ++sub) {
        Permutation sigma;
        for (std::size_t k = 0; k < others.size(); ++k)
          if ((sub >> k) & 1u) sigma.push_back(others[k]);
        const std::size_t n = sigma.size();
        sigma.push_back(i);
        for (std::size_t k = 0; k < others.size(); ++k)
          if (!((sub >> k) & 1u)) sigma.push_back(others[k]);
        const PrefixRate f = spec_.analytic_limits()(sigma, n, n);
        const Coord c = probe_side(lim.probe_cap, n, 0, lim.max_probe_states);
        State p(n, 0);
        do {
          const double v = f(p);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        } while (n > 0 && next_in_box(p, c));
      }
    } else {
      const Coord c = probe_side(lim.probe_cap, N - 1, 2, lim.max_probe_states);
      auto at_level = [&](Coord R) {
        const Coord R2 = next_level(R, lim.growth);
        std::vector<Coord> grid;
        for (Coord v = 0; v <= c; ++v) grid.push_back(v);
        grid.push_back(R);
        grid.push_back(R2);
        const std::array<Coord, 3> own{R, R + 1, R2};
        double mn = std::numeric_limits<double>::infinity();
        double mx = -mn;
        std::vector<std::size_t> idx(N - 1, 0);
        State x(N, 0);
        for (;;) {
          std::size_t k = 0;
          for (std::size_t j = 0; j < N; ++j)
            if (j != i) x[j] = grid[idx[k++]];
          for (Coord xi : own) {
            x[i] = xi;
            const double v = spec_.evaluate(i, x);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
          }
          std::size_t d = 0;
          while (d < idx.size() && ++idx[d] == grid.size()) idx[d++] = 0;
          if (d == idx.size()) break;
        }
        return std::make_pair(mn, mx);
      };
      Coord R = lim.start_level;
      auto prev = at_level(R);
      bool done = false;
      for (int k = 0; k + 1 < lim.max_levels; ++k) {
        R = next_level(R, lim.growth);
        auto cur = at_level(R);
        if (std::abs(cur.first - prev.first) < lim.limit_tol &&
            std::abs(cur.second - prev.second) < lim.limit_tol) {
          prev = cur;
          done = true;
          break;
        }
        prev = cur;
      }
      if (!done)
        throw SaturationNotConverged("tail bounds of phi_" + std::to_string(i + 1) +
                                     " did not stabilize");
      lo = prev.first;
      hi = prev.second;
    }
    out[i].lower = lo;
    out[i].upper = hi;
  }
  std::lock_guard lock(mutex_);
  if (!bounds_) bounds_ = std::move(out);
  return *bounds_;
}

std::vector<QueueBound> StabilityEngine::general_bounds(const ArrivalRates& rates) const {
  if (rates.size() != spec_.n_queues())
    throw std::invalid_argument("arrival rates do not match the allocation");
  std::vector<QueueBound> out = raw_bounds();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (rates[i] < out[i].lower - tol_.margins_tol) out[i].label = QueueLabel::Stable;
    else if (rates[i] > out[i].upper + tol_.margins_tol) out[i].label = QueueLabel::Unstable;
    else out[i].label = QueueLabel::Indeterminate;
  }
  return out;
}

PrefixResult StabilityEngine::sequential_prefix(const ArrivalRates& rates,
                                                const Permutation& sigma) const {
  const std::size_t N = spec_.n_queues();
  PrefixResult pr;
  pr.sigma = sigma;
  for (std::size_t i = 0; i < N; ++i) {
    const auto Ls = saturated_rates(rates, sigma, i);
    const std::size_t q = sigma[i];
    Inequality ineq;
    ineq.kind = Inequality::Kind::StageStable;
    ineq.queue = q;
    ineq.stage = i;
    ineq.lambda = rates[q];
    ineq.L = Ls[q].value;
    ineq.box_T = Ls[q].box_T;
    ineq.prefix_stable = Ls[q].prefix_stable;
    ineq.certified = Ls[q].certified;
    pr.stages.push_back(ineq);
    pr.margins.push_back(ineq.slack());
    if (ineq.slack() > tol_.margins_tol) pr.n_max = i + 1;
    else break;
  }
  return pr;
}

UnstableTest StabilityEngine::check_unstable_at(const ArrivalRates& rates,
                                                const Permutation& sigma, std::size_t n) const {
  const std::size_t N = spec_.n_queues();
  if (n >= N) throw std::invalid_argument("instability test needs n < N");
  if (!uniformity().uniform_limits) throw NoUniformLimit(uniformity().note);
  UnstableTest out;
  const PrefixResult pr = sequential_prefix(rates, sigma);
  if (pr.n_max < n) return out;
  out.inequalities.assign(pr.stages.begin(), pr.stages.begin() + static_cast<std::ptrdiff_t>(n));
  const auto Ls = saturated_rates(rates, sigma, n);
  bool all = true;
  for (std::size_t i = n; i < N; ++i) {
    const std::size_t q = sigma[i];
    Inequality ineq;
    ineq.kind = Inequality::Kind::TailUnstable;
    ineq.queue = q;
    ineq.stage = n;
    ineq.lambda = rates[q];
    ineq.L = Ls[q].value;
    ineq.box_T = Ls[q].box_T;
    ineq.prefix_stable = Ls[q].prefix_stable;
    ineq.certified = Ls[q].certified;
    out.inequalities.push_back(ineq);
    if (!(ineq.slack() > tol_.margins_tol)) all = false;
  }
  out.holds = all;
  return out;
}

StabilityVerdict StabilityEngine::bounds_only(const ArrivalRates& rates,
                                              std::vector<std::string> warnings) const {
  StabilityVerdict v;
  const std::size_t N = spec_.n_queues();
  v.lambda.assign(rates.values().begin(), rates.values().end());
  v.tolerances = tol_;
  v.margins_tol = tol_.margins_tol;
  v.warnings = std::move(warnings);
  v.bounds = general_bounds(rates);
  Certificate cert;
  bool all_stable = true;
  bool any_unstable = false;
  double stable_margin = std::numeric_limits<double>::infinity();
  double unstable_slack = 0.0;
  for (std::size_t q = 0; q < N; ++q) {
    const auto& b = v.bounds[q];
    v.per_queue.push_back(b.label);
    Inequality ineq;
    ineq.queue = q;
    ineq.lambda = rates[q];
    if (b.label == QueueLabel::Stable) {
      ineq.kind = Inequality::Kind::BoundStable;
      ineq.L = b.lower;
    } else if (b.label == QueueLabel::Unstable) {
      ineq.kind = Inequality::Kind::BoundUnstable;
      ineq.L = b.upper;
    }
    if (b.label != QueueLabel::Indeterminate) cert.inequalities.push_back(ineq);
    if (b.label != QueueLabel::Stable) all_stable = false;
    if (b.label == QueueLabel::Stable) stable_margin = std::min(stable_margin, b.lower - rates[q]);
    if (b.label == QueueLabel::Unstable) {
      any_unstable = true;
      unstable_slack = std::max(unstable_slack, rates[q] - b.upper);
    }
  }
  if (!cert.inequalities.empty()) v.witnesses.push_back(cert);
  if (all_stable) {
    v.system_label = SystemLabel::Stable;
    v.margin = stable_margin;
    v.certificate = cert;
  } else if (any_unstable) {
    v.system_label = SystemLabel::Unstable;
    v.margin = -unstable_slack;
    v.certificate = cert;
  } else {
    v.system_label = SystemLabel::HypothesesUnverified;
  }
  return v;
}

StabilityVerdict StabilityEngine::classify(const ArrivalRates& rates) const {
  return classify_impl(rates, true);
}

StabilityVerdict StabilityEngine::classify_impl(const ArrivalRates& rates,
                                                bool allow_descent) const {
  const std::size_t N = spec_.n_queues();
  if (rates.size() != N) throw std::invalid_argument("arrival rates do not match the allocation");
  if (N > tol_.permutation_cap) {
    const std::string msg = std::to_string(N) + " queues exceed the permutation cap of " +
                            std::to_string(tol_.permutation_cap);
    if (!tol_.degrade_beyond_cap) throw PermutationCapExceeded(msg);
    return bounds_only(rates, {msg + "; using tail bounds only"});
  }

  const StructureReport& mono = monotonicity();
  if (!mono.partially_decreasing) {
    std::ostringstream os;
    os << "allocation is not partially decreasing on the probe box";
    if (mono.counterexample) {
      const auto& ce = *mono.counterexample;
      os << ": phi_" << ce.queue + 1 << format_state(ce.x) << " = " << ce.rate_x << " < phi_"
         << ce.queue + 1 << format_state(ce.y) << " = " << ce.rate_y;
    }
    StabilityVerdict v = bounds_only(rates, {os.str()});
    v.partially_decreasing = false;
    return v;
  }
  const StructureReport& uni = uniformity();

  StabilityVerdict v;
  v.lambda.assign(rates.values().begin(), rates.values().end());
  v.tolerances = tol_;
  v.margins_tol = tol_.margins_tol;
  v.uniform_limits = uni.uniform_limits;
  v.bounds = general_bounds(rates);
  if (!uni.uniform_limits)
    v.warnings.push_back("uniform limits not verified (" + uni.note +
                         "); the instability test is disabled");

  const double tol = tol_.margins_tol;
  std::vector<char> stable_by(N, 0);
  std::vector<char> unstable_by(N, 0);
  std::vector<double> best_stable_slack(N, -std::numeric_limits<double>::infinity());

  const auto perms = all_permutations(N);
  std::vector<PrefixResult> prefixes;
  std::optional<Certificate> full;
  for (const auto& sigma : perms) {
    PrefixResult pr = sequential_prefix(rates, sigma);
    for (const auto& st : pr.stages)
      if (!st.certified)
        v.warnings.push_back("stage solve for queue " + std::to_string(st.queue + 1) +
                             " under " + format_permutation(sigma) + " not certified");
    if (pr.n_max > 0) {
      Certificate c;
      c.sigma = sigma;
      c.n = pr.n_max;
      c.margins.assign(pr.margins.begin(), pr.margins.begin() + static_cast<std::ptrdiff_t>(pr.n_max));
      c.inequalities.assign(pr.stages.begin(),
                            pr.stages.begin() + static_cast<std::ptrdiff_t>(pr.n_max));
      for (std::size_t k = 0; k < pr.n_max; ++k) {
        stable_by[sigma[k]] = 1;
        best_stable_slack[sigma[k]] = std::max(best_stable_slack[sigma[k]], pr.margins[k]);
      }
      v.witnesses.push_back(c);
      if (pr.n_max == N) {
        full = c;
        prefixes.push_back(std::move(pr));
        break;
      }
    }
    prefixes.push_back(std::move(pr));
  }

  std::vector<Certificate> unstable_witnesses;
  if (!full && uni.uniform_limits) {
    for (const auto& pr : prefixes) {
      for (std::size_t n = 0; n <= pr.n_max && n < N; ++n) {
        UnstableTest t = check_unstable_at(rates, pr.sigma, n);
        if (!t.holds) continue;
        Certificate c;
        c.sigma = pr.sigma;
        c.n = n;
        c.margins.assign(pr.margins.begin(), pr.margins.begin() + static_cast<std::ptrdiff_t>(n));
        c.inequalities = std::move(t.inequalities);
        for (std::size_t i = n; i < N; ++i) unstable_by[pr.sigma[i]] = 1;
        unstable_witnesses.push_back(std::move(c));
        break;
      }
    }

    const bool well_outside =
        std::all_of(prefixes.begin(), prefixes.end(), [&](const PrefixResult& pr) {
          return pr.n_max < N && pr.margins.size() > pr.n_max && pr.margins[pr.n_max] < -tol;
        });
    if (unstable_witnesses.empty() && allow_descent && well_outside) {
      for (int k = 1; k <= tol_.descent_steps; ++k) {
        const double r = tol * std::ldexp(1.0, k);
        std::vector<double> lowered(v.lambda);
        bool positive = true;
        for (double& l : lowered) {
          l -= r;
          if (!(l > 0.0)) positive = false;
        }
        if (!positive) break;
        const StabilityVerdict sub = classify_impl(ArrivalRates(lowered), false);
        if (sub.system_label == SystemLabel::Stable) break;
        bool found = false;
        for (const auto& w : sub.witnesses) {
          const bool is_unstable = std::any_of(
              w.inequalities.begin(), w.inequalities.end(),
              [](const Inequality& q) { return q.kind == Inequality::Kind::TailUnstable; });
          if (!is_unstable) continue;
          Certificate c = w;
          c.via_descent = true;
          c.descended_lambda = lowered;
          for (std::size_t i = c.n; i < N; ++i) unstable_by[c.sigma[i]] = 1;
          unstable_witnesses.push_back(std::move(c));
          found = true;
        }
        if (found) break;
      }
    }
  }

  // Tail bounds are valid without any structural hypothesis.
  Certificate bound_cert;
  for (std::size_t q = 0; q < N; ++q) {
    const auto& b = v.bounds[q];
    if (b.label == QueueLabel::Indeterminate) continue;
    Inequality ineq;
    ineq.queue = q;
    ineq.lambda = rates[q];
    if (b.label == QueueLabel::Stable) {
      ineq.kind = Inequality::Kind::BoundStable;
      ineq.L = b.lower;
      stable_by[q] = 1;
      best_stable_slack[q] = std::max(best_stable_slack[q], ineq.slack());
    } else {
      ineq.kind = Inequality::Kind::BoundUnstable;
      ineq.L = b.upper;
      unstable_by[q] = 1;
    }
    bound_cert.inequalities.push_back(ineq);
  }
  if (!bound_cert.inequalities.empty()) v.witnesses.push_back(bound_cert);
  for (const auto& c : unstable_witnesses) v.witnesses.push_back(c);

  v.per_queue.assign(N, QueueLabel::Indeterminate);
  bool all_stable = true;
  bool any_unstable = false;
  for (std::size_t q = 0; q < N; ++q) {
    if (stable_by[q] && unstable_by[q]) {
      v.warnings.push_back("conflicting witnesses for queue " + std::to_string(q + 1));
      all_stable = false;
      continue;
    }
    if (stable_by[q]) v.per_queue[q] = QueueLabel::Stable;
    if (unstable_by[q]) {
      v.per_queue[q] = QueueLabel::Unstable;
      any_unstable = true;
    }
    if (!stable_by[q]) all_stable = false;
  }

  auto min_slack = [](const Certificate& c) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& q : c.inequalities) m = std::min(m, q.slack());
    return m;
  };

  if (all_stable) {
    v.system_label = SystemLabel::Stable;
    if (full) {
      v.certificate = full;
      v.margin = *std::min_element(full->margins.begin(), full->margins.end());
    } else {
      v.margin = *std::min_element(best_stable_slack.begin(), best_stable_slack.end());
    }
  } else if (any_unstable) {
    v.system_label = SystemLabel::Unstable;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : unstable_witnesses) {
      const double s = min_slack(c);
      if (s > best) {
        best = s;
        v.certificate = c;
      }
    }
    if (!bound_cert.inequalities.empty()) {
      double bound_slack = -std::numeric_limits<double>::infinity();
      for (const auto& q : bound_cert.inequalities)
        if (!q.stable_side()) bound_slack = std::max(bound_slack, q.slack());
      if (bound_slack > best) {
        best = bound_slack;
        v.certificate = bound_cert;
      }
    }
    v.margin = -best;
  } else {
    v.system_label = uni.uniform_limits ? SystemLabel::BoundaryIndeterminate
                                        : SystemLabel::HypothesesUnverified;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& pr : prefixes)
      best = std::max(best, *std::min_element(pr.margins.begin(), pr.margins.end()));
    v.margin = best;
  }
  return v;
}

bool StabilityEngine::verify_certificate(const StabilityVerdict& v, int box_factor) const {
  if (box_factor < 1) throw std::invalid_argument("box factor must be >= 1");
  std::vector<const Certificate*> certs;
  for (const auto& c : v.witnesses) certs.push_back(&c);
  if (v.certificate) certs.push_back(&*v.certificate);
  for (const Certificate* c : certs) {
    if (c->sigma.empty()) continue;  // tail bounds carry no solve
    const ArrivalRates rates(c->via_descent ? c->descended_lambda : v.lambda);
    for (const auto& q : c->inequalities) {
      if (q.stage == 0 || q.box_T == 0) {
        const auto Ls = saturated_rates(rates, c->sigma, q.stage);
        const double L = Ls[q.queue].value;
        if (q.stable_side() ? !(q.lambda < L) : !(q.lambda > L)) return false;
        continue;
      }
      const Coord T = q.box_T * box_factor;
      const auto Ls = saturated_rates(rates, c->sigma, q.stage, T);
      const LValue& L = Ls[q.queue];
      if (!q.prefix_stable) {
        if (L.certified) return false;  // the prefix process should still leak mass
        continue;
      }
      if (q.stable_side() ? !(q.lambda < L.value) : !(q.lambda > L.value)) return false;
    }
  }
  return true;
}

std::vector<RegionSample> StabilityEngine::sweep(const std::vector<ArrivalRates>& grid,
                                                 std::size_t threads) const {
  std::vector<RegionSample> out(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= grid.size()) return;
      RegionSample& s = out[k];
      s.lambda = grid[k];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        s.verdict = classify(grid[k]);
        s.label = region_label(s.verdict);
      } catch (const std::exception& e) {
        s.error = e.what();
        s.label = "ERR";
      }
      s.wall_time = std::chrono::steady_clock::now() - t0;
    }
  };
  threads = std::max<std::size_t>(1, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<QueueBound> general_bounds(const ArrivalRates& rates, const AllocationSpec& spec,
                                       const Tolerances& tol) {
  return StabilityEngine(spec, tol).general_bounds(rates);
}

PrefixResult sequential_prefix(const ArrivalRates& rates, const AllocationSpec& spec,
                               const Permutation& sigma, const Tolerances& tol) {
  return StabilityEngine(spec, tol).sequential_prefix(rates, sigma);
}

bool check_unstable_at(const ArrivalRates& rates, const AllocationSpec& spec,
                       const Permutation& sigma, std::size_t n, const Tolerances& tol) {
  return StabilityEngine(spec, tol).check_unstable_at(rates, sigma, n).holds;
}

StabilityVerdict classify(const ArrivalRates& rates, const AllocationSpec& spec,
                          const Tolerances& tol) {
  return StabilityEngine(spec, tol).classify(rates);
}

std::vector<RegionSample> sweep(const std::vector<ArrivalRates>& grid, const AllocationSpec& spec,
                                const Tolerances& tol, std::size_t threads) {
  return StabilityEngine(spec, tol).sweep(grid, threads);
}

}  // namespace qstab
