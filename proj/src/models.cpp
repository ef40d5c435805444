#include "qstab/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qstab::models {

AllocationSpec constant_allocation(std::vector<double> mu) {
  if (mu.empty()) throw std::invalid_argument("constant allocation needs at least one rate");
  for (double m : mu)
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("rates must be >= 0");
  const double bound = std::max(1e-300, *std::max_element(mu.begin(), mu.end()));
  auto fn = [mu](std::size_t i, std::span<const Coord>) { return mu[i]; };
  auto lim = [mu](const Permutation& sigma, std::size_t, std::size_t i) -> PrefixRate {
    const double v = mu[sigma[i]];
    return [v](std::span<const Coord>) { return v; };
  };
  return AllocationSpec(mu.size(), fn, bound, lim, "constant");
}

namespace {

double table_rate(const TableParams& p, std::size_t i, std::span<const Coord> x) {
  const std::size_t N = p.a.size();
  if (N == 1) return p.a[0];
  std::size_t busy = 0;
  std::size_t busy_j = 0;
  for (std::size_t j = 0; j < N; ++j) {
    if (j != i && x[j] > 0) {
      ++busy;
      busy_j = j;
    }
  }
  if (busy == 0) return p.a[i];
  if (busy == 1) return p.a_pair[i][busy_j];
  return p.base;
}

}  // namespace

AllocationSpec table_allocation(const TableParams& params) {
  const std::size_t N = params.a.size();
  if (N == 0 || N > 3) throw std::invalid_argument("table allocation supports 1 to 3 queues");
  TableParams p = params;
  if (p.a_pair.empty()) p.a_pair.assign(N, std::vector<double>(N, p.base));
  if (p.a_pair.size() != N) throw std::invalid_argument("a_ij must be an N x N table");
  for (auto& row : p.a_pair)
    if (row.size() != N) throw std::invalid_argument("a_ij must be an N x N table");
  double bound = p.base;
  for (std::size_t i = 0; i < N; ++i) {
    bound = std::max(bound, p.a[i]);
    for (std::size_t j = 0; j < N; ++j)
      if (i != j) bound = std::max(bound, p.a_pair[i][j]);
  }
  for (double v : p.a)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("table rates must be >= 0");
  if (!(p.base >= 0.0)) throw std::invalid_argument("table base rate must be >= 0");

  auto fn = [p](std::size_t i, std::span<const Coord> x) { return table_rate(p, i, x); };
  // Only positivity of the other coordinates matters, so a saturated queue acts as busy.
  auto lim = [p, N](const Permutation& sigma, std::size_t n, std::size_t i) -> PrefixRate {
    return [p, N, sigma, n, i](std::span<const Coord> prefix) {
      State z(N, 1);
      for (std::size_t k = 0; k < n; ++k) z[sigma[k]] = prefix[k];
      return table_rate(p, sigma[i], z);
    };
  };
  return AllocationSpec(N, fn, bound, lim, "table");
}

TableParams three_queue_params(double a, double a_pair) {
  TableParams p;
  p.a.assign(3, a);
  p.a_pair.assign(3, std::vector<double>(3, a_pair));
  return p;
}

AllocationSpec one_server_alpha(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  auto rate = [alpha](Coord x) {
    return x == 0 ? std::pow(2.0, alpha) : std::pow(1.0 + 1.0 / static_cast<double>(x), alpha);
  };
  auto fn = [rate](std::size_t, std::span<const Coord> x) { return rate(x[0]); };
  auto lim = [rate](const Permutation&, std::size_t n, std::size_t) -> PrefixRate {
    if (n == 0) return [](std::span<const Coord>) { return 1.0; };
    return [rate](std::span<const Coord> p) { return rate(p[0]); };
  };
  return AllocationSpec(1, fn, std::pow(2.0, alpha), lim, "one_server_alpha");
}

InterferenceForm parse_interference_form(const std::string& name) {
  if (name == "exp_interference" || name == "exp") return InterferenceForm::Exponential;
  if (name == "poly_interference" || name == "poly") return InterferenceForm::Polynomial;
  throw std::invalid_argument("unknown interference form '" + name + "'");
}

std::string to_string(InterferenceForm form) {
  return form == InterferenceForm::Exponential ? "exp_interference" : "poly_interference";
}

GainFunction log_gain(double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("gain cap must be positive");
  GainFunction g;
  g.cap = cap;
  g.name = "log_gain";
  g.value = [cap](Coord x) {
    if (x == kSaturated) return cap;
    return std::min(cap, std::log1p(static_cast<double>(x)));
  };
  return g;
}

double interference_value(InterferenceForm form, double gamma, Coord other) {
  if (other == kSaturated) return 1.0 / 6.0;
  const double s = static_cast<double>(other);
  const double decay =
      form == InterferenceForm::Exponential ? std::exp(-gamma * s) : std::pow(1.0 + s, -gamma);
  return 1.0 / (6.0 - 4.0 * decay);
}

InterferenceFunction interference(InterferenceForm form, std::size_t queue, std::size_t n_queues,
                                  double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (queue >= n_queues) throw std::out_of_range("interference queue index");
  InterferenceFunction h;
  h.name = to_string(form);
  h.value = [form, queue, n_queues, gamma](std::span<const Coord> x) {
    Coord s = 0;
    for (std::size_t j = 0; j < n_queues; ++j) {
      if (j == queue) continue;
      if (x[j] == kSaturated) return 1.0 / 6.0;
      s += x[j];
    }
    return interference_value(form, gamma, s);
  };
  return h;
}

AllocationSpec two_basestations(InterferenceForm form, double gamma, double gain_cap) {
  std::vector<GainFunction> gains{log_gain(gain_cap), log_gain(gain_cap)};
  std::vector<InterferenceFunction> inter{interference(form, 0, 2, gamma),
                                          interference(form, 1, 2, gamma)};
  return build_product_allocation(std::move(gains), std::move(inter));
}

}  // namespace qstab::models
