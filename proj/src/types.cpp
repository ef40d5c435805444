#include "qstab/types.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qstab {

Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  return p;
}

bool is_permutation(const Permutation& p, std::size_t n) {
  if (p.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (auto v : p) {
    if (v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation inverse(const Permutation& p) {
  Permutation inv(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) inv[p[k]] = k;
  return inv;
}

Permutation compose(const Permutation& a, const Permutation& b) {
  if (a.size() != b.size()) throw std::invalid_argument("compose: size mismatch");
  Permutation c(a.size());
  for (std::size_t k = 0; k < b.size(); ++k) c[k] = a[b[k]];
  return c;
}

std::vector<Permutation> all_permutations(std::size_t n) {
  std::vector<Permutation> out;
  Permutation p = identity_permutation(n);
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::string format_state(std::span<const Coord> x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (k) os << ',';
    os << x[k];
  }
  os << ')';
  return os.str();
}

std::string format_permutation(const Permutation& p) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k) os << ',';
    os << p[k] + 1;
  }
  os << ')';
  return os.str();
}

std::size_t checked_pow(std::size_t base, std::size_t exp, std::size_t limit) {
  std::size_t r = 1;
  for (std::size_t k = 0; k < exp; ++k) {
    if (base != 0 && r > limit / base) return limit + (limit < std::numeric_limits<std::size_t>::max() ? 1 : 0);
    r *= base;
  }
  return r;
}

}  // namespace qstab
