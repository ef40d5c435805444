#include "qstab/simulator.hpp"

#include "qstab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace qstab {

BirthDeathModel BirthDeathModel::from_allocation(const ArrivalRates& rates,
                                                 const AllocationSpec& spec) {
  if (rates.size() != spec.n_queues())
    throw std::invalid_argument("arrival rates do not match the allocation");
  BirthDeathModel m;
  m.classes = spec.n_queues();
  std::vector<double> lam(rates.values().begin(), rates.values().end());
  m.birth = [lam](std::size_t i, std::span<const Coord>) { return lam[i]; };
  m.death = [spec](std::size_t i, std::span<const Coord> x) { return spec.evaluate(i, x); };
  m.birth_bounds = lam;
  m.death_bound = spec.bound();
  return m;
}

BirthDeathModel BirthDeathModel::constant(std::vector<double> births, std::vector<double> deaths) {
  if (births.size() != deaths.size() || births.empty())
    throw std::invalid_argument("need matching nonempty birth and death vectors");
  BirthDeathModel m;
  m.classes = births.size();
  m.birth = [births](std::size_t i, std::span<const Coord>) { return births[i]; };
  m.death = [deaths](std::size_t i, std::span<const Coord>) { return deaths[i]; };
  m.birth_bounds = births;
  m.death_bound = *std::max_element(deaths.begin(), deaths.end());
  return m;
}

double BirthDeathModel::uniformization_constant() const {
  return std::accumulate(birth_bounds.begin(), birth_bounds.end(), 0.0) +
         static_cast<double>(classes) * death_bound;
}

std::string to_string(ProbeLabel l) {
  switch (l) {
    case ProbeLabel::LooksStable: return "LooksStable";
    case ProbeLabel::LooksUnstable: return "LooksUnstable";
    case ProbeLabel::Inconclusive: return "Inconclusive";
  }
  return "?";
}

namespace {

// Single-path uniformized stepper. The pending tick is kept across calls, so
// splitting a run at checkpoints does not change the path.
class Stepper {
 public:
  Stepper(const BirthDeathModel& m, State x0, std::uint64_t seed, std::uint64_t stream)
      : m_(m), x_(std::move(x0)), rng_(seed, stream), Lambda_(m.uniformization_constant()) {
    if (x_.size() != m_.classes) throw std::invalid_argument("initial state has wrong size");
    if (!(Lambda_ > 0.0)) throw std::invalid_argument("model has no positive rates");
    next_tick_ = rng_.exponential(Lambda_);
  }

  template <class Hold>
  void advance_to(double until, Hold&& hold) {
    while (next_tick_ <= until) {
      hold(x_, next_tick_ - t_);
      t_ = next_tick_;
      tick();
      next_tick_ = t_ + rng_.exponential(Lambda_);
    }
    if (until > t_) {
      hold(x_, until - t_);
      t_ = until;
    }
  }

  const State& state() const noexcept { return x_; }
  std::uint64_t ticks() const noexcept { return ticks_; }
  std::uint64_t jumps() const noexcept { return jumps_; }

 private:
  void tick() {
    ++ticks_;
    const double u = rng_.uniform() * Lambda_;
    double acc = 0.0;
    for (std::size_t i = 0; i < m_.classes; ++i) {
      acc += m_.birth(i, x_);
      if (u < acc) {
        ++x_[i];
        ++jumps_;
        return;
      }
    }
    for (std::size_t i = 0; i < m_.classes; ++i) {
      if (x_[i] == 0) continue;
      acc += m_.death(i, x_);
      if (u < acc) {
        --x_[i];
        ++jumps_;
        return;
      }
    }
  }

  const BirthDeathModel& m_;
  State x_;
  Philox4x32 rng_;
  double Lambda_;
  double t_ = 0.0;
  double next_tick_ = 0.0;
  std::uint64_t ticks_ = 0;
  std::uint64_t jumps_ = 0;
};

struct Occupancy {
  std::size_t cap;
  std::vector<std::vector<double>> h;

  Occupancy(std::size_t classes, std::size_t cap_) : cap(cap_), h(classes, std::vector<double>(cap_ + 1, 0.0)) {}
  void add(const State& x, double dt) {
    for (std::size_t i = 0; i < h.size(); ++i)
      h[i][std::min<std::size_t>(static_cast<std::size_t>(x[i]), cap)] += dt;
  }
};

}  // namespace

PathSample simulate_path(const BirthDeathModel& model, const State& x0, double horizon,
                         std::uint64_t seed, const PathOptions& opts) {
  if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be >= 0");
  for (Coord c : x0)
    if (c < 0) throw std::invalid_argument("initial state must be nonnegative");
  Stepper st(model, x0, seed, opts.stream);
  Occupancy occ(model.classes, opts.histogram_cap);
  std::vector<double> area(model.classes, 0.0);
  auto hold = [&](const State& x, double dt) {
    occ.add(x, dt);
    for (std::size_t i = 0; i < x.size(); ++i) area[i] += static_cast<double>(x[i]) * dt;
  };

  if (opts.csv) {
    if (!(opts.sample_interval > 0.0)) throw std::invalid_argument("sample interval must be > 0");
    std::ostream& os = *opts.csv;
    os << "time";
    for (std::size_t i = 0; i < model.classes; ++i) os << ",queue_" << i + 1;
    os << '\n';
    for (std::uint64_t k = 0;; ++k) {
      const double t = static_cast<double>(k) * opts.sample_interval;
      if (t > horizon) break;
      st.advance_to(t, hold);
      os << t;
      for (Coord c : st.state()) os << ',' << c;
      os << '\n';
    }
  }
  st.advance_to(horizon, hold);

  PathSample out;
  out.seed = seed;
  out.horizon = horizon;
  out.event_count = st.ticks();
  out.jump_count = st.jumps();
  out.occupancy = std::move(occ.h);
  out.final_state = st.state();
  out.time_average.resize(model.classes, 0.0);
  out.drift_slope.resize(model.classes, 0.0);
  for (std::size_t i = 0; i < model.classes; ++i) {
    if (horizon > 0.0) {
      out.time_average[i] = area[i] / horizon;
      out.drift_slope[i] = static_cast<double>(out.final_state[i]) / horizon;
    } else {
      out.time_average[i] = static_cast<double>(x0[i]);
    }
  }
  return out;
}

PathSample simulate_path(const ArrivalRates& rates, const AllocationSpec& spec, const State& x0,
                         double horizon, std::uint64_t seed, const PathOptions& opts) {
  return simulate_path(BirthDeathModel::from_allocation(rates, spec), x0, horizon, seed, opts);
}

CouplingReport simulate_coupled_pair(const BirthDeathModel& X, const BirthDeathModel& Y,
                                     const State& x0, const State& y0, const Horizon& horizon,
                                     std::uint64_t seed, std::uint64_t stream,
                                     std::size_t histogram_cap) {
  const std::size_t I = X.classes;
  const std::size_t J = Y.classes;
  const std::size_t M = std::min(I, J);
  if (x0.size() != I || y0.size() != J) throw std::invalid_argument("initial states have wrong size");
  for (std::size_t i = 0; i < M; ++i)
    if (x0[i] > y0[i]) throw std::invalid_argument("initial pair is not ordered");

  const double Lambda = X.uniformization_constant() + Y.uniformization_constant();
  Philox4x32 rng(seed, stream);
  State x = x0;
  State y = y0;
  CouplingReport rep;
  rep.max_gap.assign(M, 0);
  for (std::size_t i = 0; i < M; ++i) rep.max_gap[i] = y[i] - x[i];
  Occupancy occ(I, histogram_cap);
  constexpr double kSlack = 1e-12;

  auto fail = [&](const char* which, std::size_t i, double lhs, double rhs) {
    std::ostringstream os;
    os << "hypothesis " << which << " fails for queue " << i + 1 << " at x=" << format_state(x)
       << ", y=" << format_state(y) << ": " << lhs << (which[0] == 'b' ? " > " : " < ") << rhs;
    throw HypothesisViolated(os.str(), x, y, i);
  };

  // One categorical draw per tick over the joint transition table.
  struct Move {
    double rate;
    std::size_t i;
    int dx;
    int dy;
  };
  std::vector<Move> moves;
  double t = 0.0;
  for (;;) {
    const double dt = rng.exponential(Lambda);
    if (rep.event_count >= horizon.max_events || t + dt > horizon.time) {
      if (horizon.time < 1e300 && horizon.time > t) {
        occ.add(x, horizon.time - t);
        t = horizon.time;
      }
      break;
    }
    occ.add(x, dt);
    t += dt;
    ++rep.event_count;

    moves.clear();
    for (std::size_t i = 0; i < M; ++i) {
      const double lx = X.birth(i, x);
      const double ey = Y.birth(i, y);
      if (x[i] < y[i]) {
        moves.push_back({lx, i, 1, 0});
        moves.push_back({ey, i, 0, 1});
      } else {
        if (lx > ey + kSlack) fail("birth", i, lx, ey);
        moves.push_back({lx, i, 1, 1});
        moves.push_back({ey - lx, i, 0, 1});
      }
    }
    for (std::size_t i = M; i < I; ++i) moves.push_back({X.birth(i, x), i, 1, 0});
    for (std::size_t j = M; j < J; ++j) moves.push_back({Y.birth(j, y), j, 0, 1});
    for (std::size_t i = 0; i < M; ++i) {
      if (x[i] < y[i]) {
        if (x[i] > 0) moves.push_back({X.death(i, x), i, -1, 0});
        moves.push_back({Y.death(i, y), i, 0, -1});
      } else if (x[i] > 0) {
        const double px = X.death(i, x);
        const double py = Y.death(i, y);
        if (px < py - kSlack) fail("death", i, px, py);
        moves.push_back({py, i, -1, -1});
        moves.push_back({px - py, i, -1, 0});
      }
    }
    for (std::size_t i = M; i < I; ++i)
      if (x[i] > 0) moves.push_back({X.death(i, x), i, -1, 0});
    for (std::size_t j = M; j < J; ++j)
      if (y[j] > 0) moves.push_back({Y.death(j, y), j, 0, -1});

    const double u = rng.uniform() * Lambda;
    double acc = 0.0;
    for (const auto& mv : moves) {
      acc += std::max(0.0, mv.rate);
      if (u < acc) {
        x[mv.i] += mv.dx;
        y[mv.i] += mv.dy;
        break;
      }
    }

    ++rep.sampled_instants;
    bool ordered = true;
    for (std::size_t i = 0; i < M; ++i) {
      if (x[i] > y[i]) ordered = false;
      rep.max_gap[i] = std::max(rep.max_gap[i], y[i] - x[i]);
    }
    if (!ordered) ++rep.violations;
  }
  rep.elapsed = t;
  rep.x_final = x;
  rep.y_final = y;
  rep.x_occupancy = std::move(occ.h);
  return rep;
}

ProbeDiagnostic empirical_stability_probe(const BirthDeathModel& model, const State& x0,
                                          const ProbeOptions& opts) {
  if (opts.horizons.empty()) throw std::invalid_argument("probe needs at least one horizon");
  std::vector<double> hz = opts.horizons;
  std::sort(hz.begin(), hz.end());
  if (!(hz.front() > 0.0)) throw std::invalid_argument("horizons must be positive");
  const std::size_t N = model.classes;
  const std::size_t R = std::max<std::size_t>(opts.replicas, 1);
  constexpr std::size_t kCap = 4096;

  const double late_from = hz.size() >= 2 ? hz[hz.size() - 2] : hz.back() / 2.0;
  struct Replica {
    std::vector<std::vector<double>> early;
    std::vector<std::vector<double>> late;
    State first;
    State last;
  };
  std::vector<Replica> reps(R);

  auto run = [&](std::size_t r) {
    Stepper st(model, x0, opts.seed, r);
    Occupancy early(N, kCap);
    Occupancy late(N, kCap);
    double now = 0.0;
    auto hold = [&](const State& x, double dt) {
      // Split the holding interval at the window edges.
      const double a = now;
      const double b = now + dt;
      const double e = std::max(0.0, std::min(b, hz.front()) - a);
      if (e > 0.0) early.add(x, e);
      const double l = std::max(0.0, b - std::max(a, late_from));
      if (l > 0.0) late.add(x, l);
      now = b;
    };
    Replica& out = reps[r];
    for (std::size_t k = 0; k < hz.size(); ++k) {
      st.advance_to(hz[k], hold);
      if (k == 0) out.first = st.state();
    }
    out.last = st.state();
    out.early = std::move(early.h);
    out.late = std::move(late.h);
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(opts.threads, R));
  if (threads == 1) {
    for (std::size_t r = 0; r < R; ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t r = t; r < R; r += threads) run(r);
      });
    for (auto& th : pool) th.join();
  }

  ProbeDiagnostic d;
  d.replicas = R;
  d.K.assign(N, 0);
  d.escape.assign(N, 0.0);
  d.mean_slope.assign(N, 0.0);
  d.slope_lower_bound.assign(N, 0.0);
  const double span = hz.size() >= 2 ? hz.back() - hz.front() : hz.back();

  bool any_unstable = false;
  bool all_tight = true;
  for (std::size_t i = 0; i < N; ++i) {
    std::vector<double> early(kCap + 1, 0.0);
    std::vector<double> late(kCap + 1, 0.0);
    for (const auto& rp : reps)
      for (std::size_t k = 0; k <= kCap; ++k) {
        early[k] += rp.early[i][k];
        late[k] += rp.late[i][k];
      }
    const double total = std::accumulate(early.begin(), early.end(), 0.0);
    double cum = 0.0;
    std::size_t K = kCap;
    for (std::size_t k = 0; k <= kCap; ++k) {
      cum += early[k];
      if (cum >= opts.quantile * total) {
        K = k;
        break;
      }
    }
    d.K[i] = static_cast<Coord>(K);
    const double late_total = std::accumulate(late.begin(), late.end(), 0.0);
    double above = 0.0;
    for (std::size_t k = K + 1; k <= kCap; ++k) above += late[k];
    d.escape[i] = late_total > 0.0 ? above / late_total : 0.0;

    std::vector<double> slopes;
    for (const auto& rp : reps) {
      const double delta = hz.size() >= 2 ? static_cast<double>(rp.last[i] - rp.first[i])
                                          : static_cast<double>(rp.last[i]);
      slopes.push_back(delta / span);
    }
    const double mean = std::accumulate(slopes.begin(), slopes.end(), 0.0) / static_cast<double>(R);
    double var = 0.0;
    for (double s : slopes) var += (s - mean) * (s - mean);
    var = R > 1 ? var / static_cast<double>(R - 1) : 0.0;
    d.mean_slope[i] = mean;
    d.slope_lower_bound[i] = mean - opts.z * std::sqrt(var / static_cast<double>(R));
    if (d.slope_lower_bound[i] > 0.0) any_unstable = true;
    if (!(d.escape[i] < opts.escape_threshold)) all_tight = false;
  }

  if (any_unstable) d.label = ProbeLabel::LooksUnstable;
  else if (all_tight) d.label = ProbeLabel::LooksStable;
  if (opts.replicas < 30) {
    d.warnings.push_back("fewer than 30 replicas; the normal band is unreliable, reporting Inconclusive");
    d.label = ProbeLabel::Inconclusive;
  }
  d.warnings.push_back("heuristic: thresholds are engineering choices, not a stability proof");
  return d;
}

ProbeDiagnostic empirical_stability_probe(const ArrivalRates& rates, const AllocationSpec& spec,
                                          const State& x0, const ProbeOptions& opts) {
  return empirical_stability_probe(BirthDeathModel::from_allocation(rates, spec), x0, opts);
}

double occupancy_tv(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::max(a.size(), b.size());
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (!(sa > 0.0) || !(sb > 0.0)) throw std::invalid_argument("empty histogram");
  double tv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pa = k < a.size() ? a[k] / sa : 0.0;
    const double pb = k < b.size() ? b[k] / sb : 0.0;
    tv += std::abs(pa - pb);
  }
  return 0.5 * tv;
}

}  // namespace qstab
