#pragma once

// Independent reference computations. Nothing here calls into the solver.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

// pi(k) = (1 - rho) rho^k of the M/M/1 queue.
inline double geometric(double rho, long k) { return (1.0 - rho) * std::pow(rho, static_cast<double>(k)); }

// Birth-death chain with constant birth lambda and deaths mu(x), x >= 1, on
// {0..T} with a reflecting face at T. Long double products.
inline std::vector<double> birth_death_1d(double lambda, const std::function<double(long)>& mu,
                                          long T) {
  std::vector<long double> w(static_cast<std::size_t>(T) + 1);
  w[0] = 1.0L;
  long double total = 1.0L;
  for (long x = 1; x <= T; ++x) {
    w[static_cast<std::size_t>(x)] = w[static_cast<std::size_t>(x) - 1] * lambda / mu(x);
    total += w[static_cast<std::size_t>(x)];
  }
  std::vector<double> p(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) p[k] = static_cast<double>(w[k] / total);
  return p;
}

// Product-form mass at x for independent coordinates.
template <class State>
double product_at(const std::vector<std::vector<double>>& marginals, const State& x) {
  double p = 1.0;
  for (std::size_t k = 0; k < marginals.size(); ++k) p *= marginals[k][static_cast<std::size_t>(x[k])];
  return p;
}

// Stationary vector of a dense generator: solves pi Q = 0, sum pi = 1 by
// Gaussian elimination with partial pivoting on the transposed system with
// the last equation replaced by normalization.
inline std::vector<double> dense_stationary(const std::vector<std::vector<double>>& Q) {
  const std::size_t n = Q.size();
  std::vector<std::vector<long double>> A(n, std::vector<long double>(n + 1, 0.0L));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) A[r][c] = Q[c][r];
  for (std::size_t c = 0; c < n; ++c) A[n - 1][c] = 1.0L;
  A[n - 1][n] = 1.0L;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
    if (A[piv][col] == 0.0L) throw std::runtime_error("singular generator");
    std::swap(A[piv], A[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || A[r][col] == 0.0L) continue;
      const long double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c <= n; ++c) A[r][c] -= f * A[col][c];
    }
  }
  std::vector<double> pi(n);
  for (std::size_t r = 0; r < n; ++r) pi[r] = static_cast<double>(A[r][n] / A[r][r]);
  return pi;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::fabs(a[k] - b[k]);
  return 0.5 * s;
}

// Two base stations with queue 2 saturated: queue 1 is served at g(x) / 6 and
// queue 2 at 3 h(x_1). Returns sum_x 3 h(x) pi(x) with pi proportional to
// prod_{z <= x} lambda / (g(z) / 6). Past the gain cap the weight ratio is
// the constant 2 lambda.
// family 0: h(s) = 1 / (6 - 4 exp(-gamma s)); family 1: h(s) = 1 / (6 - 4 (1 + s)^-gamma).
inline double basestation_L12(double lambda, double gamma, int family) {
  const auto h = [&](long s) {
    const long double d = family == 0 ? 6.0L - 4.0L * std::exp(-static_cast<long double>(gamma) * s)
                                       : 6.0L - 4.0L * std::pow(1.0L + s, -static_cast<long double>(gamma));
    return 1.0L / d;
  };
  const auto g = [](long z) { return std::min(3.0L, std::log1p(static_cast<long double>(z))); };
  const long double r = 2.0L * lambda;
  if (!(r < 1.0L)) return 0.0;
  // g saturates once log(1 + z) >= 3, i.e. z >= 20.
  const long z_sat = 20;
  long double w = 1.0L;
  long double num = 3.0L * h(0);
  long double den = 1.0L;
  for (long z = 1; z < z_sat; ++z) {
    w *= lambda / (g(z) / 6.0L);
    num += w * 3.0L * h(z);
    den += w;
  }
  // Geometric weights from here on; h still varies, so keep summing termwise.
  long double wz = w;
  for (long z = z_sat; z < z_sat + 200000; ++z) {
    wz *= r;
    num += wz * 3.0L * h(z);
    den += wz;
    if (wz < 1e-24L * den) {
      const long double tail = wz * r / (1.0L - r);
      num += tail * 3.0L * h(z + 1);
      den += tail;
      break;
    }
  }
  return static_cast<double>(num / den);
}

}  // namespace oracle
