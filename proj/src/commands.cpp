#include "qstab/commands.hpp"

#include "qstab/ctmc.hpp"
#include "qstab/errors.hpp"
#include "qstab/report.hpp"
#include "qstab/rng.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

namespace qstab {

using nlohmann::json;

int exit_code_for(SystemLabel label) {
  switch (label) {
    case SystemLabel::Stable: return exit_code::kStable;
    case SystemLabel::Unstable: return exit_code::kUnstable;
    case SystemLabel::BoundaryIndeterminate:
    case SystemLabel::HypothesesUnverified: return exit_code::kIndeterminate;
  }
  return exit_code::kInternal;
}

int exit_code_for(ProbeLabel label) {
  switch (label) {
    case ProbeLabel::LooksStable: return exit_code::kStable;
    case ProbeLabel::LooksUnstable: return exit_code::kUnstable;
    case ProbeLabel::Inconclusive: return exit_code::kIndeterminate;
  }
  return exit_code::kInternal;
}

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path + "'");
  return f;
}

ArrivalRates require_rates(const Scenario& s) {
  if (!s.rates) throw ScenarioError("scenario has no arrival rates; pass --lambda");
  return *s.rates;
}

}  // namespace

Scenario load_with_overrides(const CommonOptions& opts) {
  if (opts.scenario.empty()) throw ScenarioError("missing --scenario");
  Scenario s = resolve_scenario(opts.scenario, opts.params);
  if (opts.lambda) {
    ArrivalRates r = parse_rates(*opts.lambda);
    if (r.size() != s.n_queues)
      throw ScenarioError("--lambda has " + std::to_string(r.size()) + " rates, scenario has " +
                          std::to_string(s.n_queues) + " queues");
    s.rates = std::move(r);
  }
  if (opts.grid) s.grid = parse_grid(*opts.grid);
  for (const auto& t : opts.tolerances) apply_tolerance(s.tolerances, t);
  if (opts.seed) s.seed = *opts.seed;
  return s;
}

int cmd_analyze(const CommonOptions& opts, std::ostream& out) {
  const Scenario s = load_with_overrides(opts);
  const ArrivalRates rates = require_rates(s);
  StabilityEngine engine(*s.spec, s.tolerances);
  const StabilityVerdict v = engine.classify(rates);
  out << "scenario: " << s.name << '\n' << format_verdict(v);
  if (!opts.out.empty()) {
    json j = to_json(v);
    j["scenario"] = s.name;
    j["allocation"] = s.allocation;
    open_output(opts.out) << j.dump(2) << '\n';
  }
  return exit_code_for(v.system_label);
}

int cmd_sweep(const CommonOptions& opts, std::ostream& out) {
  const Scenario s = load_with_overrides(opts);
  const auto points = grid_points(s);
  StabilityEngine engine(*s.spec, s.tolerances);
  const auto samples = engine.sweep(points, opts.threads);
  if (opts.out.empty()) {
    write_sweep_csv(out, samples);
  } else {
    auto f = open_output(opts.out);
    write_sweep_csv(f, samples);
  }
  if (!opts.svg.empty()) {
    auto f = open_output(opts.svg);
    write_sweep_svg(f, samples, s.name);
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& p : samples) ++counts[p.label];
  out << "# " << samples.size() << " points:";
  for (const auto& [label, n] : counts) out << ' ' << label << '=' << n;
  out << '\n';
  for (const auto& p : samples)
    if (!p.error.empty()) out << "# ERR at " << format_decimal(p.lambda[0], 6) << ": " << p.error << '\n';
  return exit_code::kStable;
}

int cmd_simulate(const CommonOptions& opts, std::ostream& out) {
  const Scenario s = load_with_overrides(opts);
  const ArrivalRates rates = require_rates(s);
  ProbeOptions po;
  if (opts.horizon) {
    if (!(*opts.horizon > 0.0)) throw ScenarioError("--horizon must be positive");
    po.horizons = {*opts.horizon / 4.0, *opts.horizon};
  }
  if (opts.replicas) po.replicas = *opts.replicas;
  po.seed = s.seed;
  po.threads = std::max<std::size_t>(opts.threads, 1);
  const State x0(s.n_queues, 0);
  const ProbeDiagnostic d = empirical_stability_probe(rates, *s.spec, x0, po);

  out << "scenario: " << s.name << '\n';
  out << "probe: " << to_string(d.label) << " (" << d.replicas << " replicas, horizons "
      << po.horizons.front() << " .. " << po.horizons.back() << ", seed " << po.seed << ")\n";
  for (std::size_t i = 0; i < d.K.size(); ++i)
    out << "  queue " << i + 1 << ": K=" << d.K[i] << " escape=" << format_decimal(d.escape[i], 6)
        << " slope=" << format_decimal(d.mean_slope[i], 6)
        << " slope_lcb=" << format_decimal(d.slope_lower_bound[i], 6) << '\n';
  for (const auto& w : d.warnings) out << "warning: " << w << '\n';
  if (!opts.out.empty()) {
    json j = to_json(d);
    j["scenario"] = s.name;
    j["horizons"] = po.horizons;
    j["seed"] = po.seed;
    open_output(opts.out) << j.dump(2) << '\n';
  }
  return exit_code_for(d.label);
}

BirthDeathModel saturated_model(const AllocationSpec& spec, const ArrivalRates& rates,
                                std::size_t n, const LimitOptions& limits) {
  const Permutation id = identity_permutation(spec.n_queues());
  auto sat = std::make_shared<SaturatedAllocation>(spec, certify_context(spec, id, n, limits));
  BirthDeathModel m;
  m.classes = n;
  m.birth_bounds.assign(rates.values().begin(), rates.values().begin() + static_cast<std::ptrdiff_t>(n));
  const auto births = m.birth_bounds;
  m.birth = [births](std::size_t i, std::span<const Coord>) { return births[i]; };
  m.death = [sat](std::size_t i, std::span<const Coord> x) { return sat->rate(i, x); };
  m.death_bound = spec.bound();
  return m;
}

CouplingCase random_coupling_case(std::uint64_t seed, std::uint64_t index) {
  Philox4x32 rng(seed, index);
  auto unif = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  auto pick = [&](Coord lo, Coord hi) {
    return lo + static_cast<Coord>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  const std::size_t J = static_cast<std::size_t>(pick(1, 3));
  const std::size_t I = static_cast<std::size_t>(pick(1, static_cast<Coord>(J)));

  std::vector<double> b(J), c(I), eta(J);
  std::vector<std::vector<double>> w(J, std::vector<double>(J, 0.0));
  for (std::size_t i = 0; i < J; ++i) {
    b[i] = unif(0.2, 1.5);
    eta[i] = unif(0.1, 1.5);
    for (std::size_t j = 0; j < J; ++j)
      if (j != i) w[i][j] = unif(0.0, 1.0);
  }
  for (auto& ci : c) ci = unif(0.0, 0.5);

  // psi_i at a J-vector; coordinates past the given span count as empty.
  auto psi = [b, w, J](std::size_t i, std::span<const Coord> y) {
    double s = b[i];
    for (std::size_t j = 0; j < J; ++j) {
      if (j == i) continue;
      const double yj = j < y.size() ? static_cast<double>(y[j]) : 0.0;
      s += w[i][j] / (1.0 + yj);
    }
    return s * (1.0 + 0.3 * std::sin(static_cast<double>(y[i])));
  };
  double psi_bound = 0.0;
  for (std::size_t i = 0; i < J; ++i) {
    double s = b[i];
    for (double v : w[i]) s += v;
    psi_bound = std::max(psi_bound, 1.3 * s);
  }

  CouplingCase cc;
  cc.Y.classes = J;
  cc.Y.birth_bounds = eta;
  cc.Y.birth = [eta](std::size_t i, std::span<const Coord>) { return eta[i]; };
  cc.Y.death = psi;
  cc.Y.death_bound = psi_bound;

  cc.X.classes = I;
  cc.X.birth_bounds.assign(eta.begin(), eta.begin() + static_cast<std::ptrdiff_t>(I));
  cc.X.birth = [eta](std::size_t i, std::span<const Coord> x) {
    Coord total = 0;
    for (Coord v : x) total += v;
    return eta[i] * (0.5 + 0.5 / (1.0 + static_cast<double>(total)));
  };
  cc.X.death = [psi, c](std::size_t i, std::span<const Coord> x) { return psi(i, x) + c[i]; };
  cc.X.death_bound = psi_bound + 0.5;

  cc.y0.resize(J);
  for (auto& v : cc.y0) v = pick(0, 5);
  cc.x0.resize(I);
  for (std::size_t i = 0; i < I; ++i) cc.x0[i] = pick(0, cc.y0[i]);
  return cc;
}

ThreeQueuePi three_queue_pi(const AllocationSpec& spec, const ArrivalRates& rates,
                            const Tolerances& tol, std::optional<Coord> fixed_T) {
  if (spec.n_queues() != 3 || rates.size() != 3)
    throw std::invalid_argument("three-queue probabilities need a three-queue system");
  const Permutation id = identity_permutation(3);
  SaturatedAllocation sat(spec, certify_context(spec, id, 2, tol.limits));
  const DeathRateFn deaths = [&sat](std::size_t i, std::span<const Coord> x) { return sat.rate(i, x); };
  const ArrivalRates prefix(std::vector<double>{rates[0], rates[1]});
  ThreeQueuePi out;
  std::vector<Functional> cls;
  for (int k = 0; k < 4; ++k)
    cls.push_back([k](std::span<const Coord> x) {
      const int c = (x[0] > 0 ? 2 : 0) + (x[1] > 0 ? 1 : 0);
      return c == k ? 1.0 : 0.0;
    });
  try {
    const auto [dist, rep] = adaptive_stationary(prefix, deaths, spec.bound(), tol.solver, cls, fixed_T);
    out.stable = true;
    for (int k = 0; k < 4; ++k) out.pi[static_cast<std::size_t>(k)] = dist.expectation(cls[static_cast<std::size_t>(k)]);
    out.box_T = dist.box.T;
    out.boundary_mass = dist.boundary_mass;
    out.certified = rep.certified;
  } catch (const NoConvergence&) {
    out.stable = false;
  }
  return out;
}

int cmd_couple_check(const CommonOptions& opts, std::ostream& out) {
  const std::uint64_t seed = opts.seed.value_or(1);
  Horizon hz;
  hz.max_events = static_cast<std::uint64_t>(opts.horizon.value_or(1000.0));
  std::uint64_t violations = 0;
  std::uint64_t pairs = 0;
  std::uint64_t events = 0;

  auto run = [&](const BirthDeathModel& X, const BirthDeathModel& Y, const State& x0,
                 const State& y0, std::uint64_t stream) {
    const CouplingReport r = simulate_coupled_pair(X, Y, x0, y0, hz, seed, stream);
    violations += r.violations;
    events += r.event_count;
    ++pairs;
    return r;
  };

  try {
    if (opts.corpus == "random") {
      for (std::size_t k = 0; k < opts.pairs; ++k) {
        const CouplingCase cc = random_coupling_case(seed, k);
        run(cc.X, cc.Y, cc.x0, cc.y0, k);
      }
    } else if (opts.corpus == "mm1") {
      const auto X = BirthDeathModel::constant({0.5}, {2.0});
      const auto Y = BirthDeathModel::constant({0.5}, {1.0});
      for (std::size_t k = 0; k < opts.pairs; ++k) run(X, Y, {0}, {0}, k);
    } else if (opts.corpus == "three_queues") {
      CommonOptions o = opts;
      o.scenario = opts.scenario.empty() ? "builtin:three_queues" : opts.scenario;
      const Scenario s = load_with_overrides(o);
      if (s.n_queues != 3) throw ScenarioError("three_queues corpus needs a three-queue scenario");
      const ArrivalRates rates = require_rates(s);
      const auto X = BirthDeathModel::from_allocation(rates, *s.spec);
      const auto Y = saturated_model(*s.spec, rates, 2, s.tolerances.limits);
      for (std::size_t k = 0; k < opts.pairs; ++k) run(X, Y, {0, 0, 0}, {0, 0}, k);
    } else if (opts.corpus == "inverted") {
      const auto X = BirthDeathModel::constant({1.0}, {1.0});
      const auto Y = BirthDeathModel::constant({0.5}, {1.0});
      run(X, Y, {0}, {0}, 0);
    } else {
      throw ScenarioError("unknown corpus '" + opts.corpus + "' (random, mm1, three_queues, inverted)");
    }
  } catch (const HypothesisViolated& e) {
    out << "corpus: " << opts.corpus << '\n';
    out << "HypothesisViolated after " << pairs << " complete pairs: " << e.what() << '\n';
    out << "  witness x=" << format_state(e.x()) << " y=" << format_state(e.y())
        << " queue=" << e.queue() + 1 << '\n';
    return exit_code::kHypothesisViolated;
  }
  out << "corpus: " << opts.corpus << "\npairs: " << pairs << "\nevents: " << events
      << "\nviolations: " << violations << '\n';
  if (!opts.out.empty()) {
    json j{{"corpus", opts.corpus}, {"pairs", pairs}, {"events", events},
           {"events_per_pair", hz.max_events}, {"violations", violations}, {"seed", seed}};
    open_output(opts.out) << j.dump(2) << '\n';
  }
  return violations == 0 ? exit_code::kStable : exit_code::kUnstable;
}

int cmd_three_queues(const CommonOptions& opts, std::ostream& out) {
  CommonOptions o = opts;
  if (o.scenario.empty()) o.scenario = "builtin:three_queues";
  const Scenario s = load_with_overrides(o);
  if (s.n_queues != 3) throw ScenarioError("three-queues needs a three-queue scenario");
  const ArrivalRates rates = require_rates(s);

  const json& alloc = s.allocation;
  std::vector<double> a(3, 0.0);
  std::vector<std::vector<double>> ap(3, std::vector<double>(3, 0.0));
  const bool table = alloc.value("kind", "") == "table";
  if (table) {
    for (std::size_t i = 0; i < 3; ++i) {
      a[i] = alloc.at("a_i").at(i).get<double>();
      for (std::size_t j = 0; j < 3; ++j) ap[i][j] = alloc.at("a_ij").at(i).at(j).get<double>();
    }
    bool ordered = true;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j && !(a[i] >= ap[i][j] && ap[i][j] >= 1.0)) ordered = false;
    if (!ordered)
      out << "warning: a_i >= a_ij >= 1 fails; the allocation is not partially decreasing\n";
  }

  StabilityEngine engine(*s.spec, s.tolerances);
  const StabilityVerdict v = engine.classify(rates);
  out << "scenario: " << s.name << '\n' << format_verdict(v);

  out << "stage reports:\n";
  for (const auto& sigma : all_permutations(3)) {
    const PrefixResult pr = engine.sequential_prefix(rates, sigma);
    out << "  sigma " << format_permutation(sigma) << ": n_max = " << pr.n_max << '\n';
    for (const auto& st : pr.stages)
      out << "    stage " << st.stage + 1 << " queue " << st.queue + 1 << ": lambda "
          << format_decimal(st.lambda, 6) << (st.slack() > 0 ? " < " : " >= ") << "L "
          << format_decimal(st.L, 9) << (st.prefix_stable ? "" : "  (saturated prefix unstable)")
          << '\n';
  }

  int status = exit_code_for(v.system_label);
  if (table) {
    const Permutation id = identity_permutation(3);
    const auto L1 = engine.saturated_rates(rates, id, 1);
    if (rates[0] < 1.0) {
      const double closed = rates[0] + ap[1][2] * (1.0 - rates[0]);
      const double diff = std::abs(L1[1].value - closed);
      out << "stage 2: L = " << format_decimal(L1[1].value, 9) << ", lambda_1 + a_23 (1 - lambda_1) = "
          << format_decimal(closed, 9) << ", |diff| = " << diff << (diff <= 1e-6 ? " ok" : " MISMATCH")
          << '\n';
      if (diff > 1e-6) status = exit_code::kInternal;
    } else {
      out << "stage 2: lambda_1 >= 1, saturated single-queue process unstable\n";
    }
    const ThreeQueuePi p = three_queue_pi(*s.spec, rates, s.tolerances);
    if (p.stable) {
      const double rhs = a[2] * p.pi[0] + ap[2][0] * p.pi[2] + ap[2][1] * p.pi[1] + p.pi[3];
      const double L2 = engine.saturated_rates(rates, id, 2)[2].value;
      out << "stage 3: pi_00 = " << format_decimal(p.pi[0], 9) << ", pi_01 = " << format_decimal(p.pi[1], 9)
          << ", pi_10 = " << format_decimal(p.pi[2], 9) << ", pi_11 = " << format_decimal(p.pi[3], 9)
          << " (sum " << format_decimal(p.pi[0] + p.pi[1] + p.pi[2] + p.pi[3], 12) << ", box T=" << p.box_T
          << ")\n";
      out << "  a_3 pi_00 + a_31 pi_10 + a_32 pi_01 + pi_11 = " << format_decimal(rhs, 9)
          << ", engine L = " << format_decimal(L2, 9) << ", lambda_3 = " << format_decimal(rates[2], 6)
          << (rates[2] < rhs ? " satisfied" : " not satisfied") << '\n';
    } else {
      out << "stage 3: saturated two-queue process unstable, probabilities undefined\n";
    }
  }
  return status;
}

}  // namespace qstab
