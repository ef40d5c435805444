#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace qstab {

using Coord = std::int64_t;
using State = std::vector<Coord>;

// Zero-based. perm[k] is the original queue placed at relabeled position k.
using Permutation = std::vector<std::size_t>;

Permutation identity_permutation(std::size_t n);
Permutation inverse(const Permutation& p);
bool is_permutation(const Permutation& p, std::size_t n);
// (a o b)(k) = a[b[k]]
Permutation compose(const Permutation& a, const Permutation& b);
// All permutations of {0..n-1} in lexicographic order.
std::vector<Permutation> all_permutations(std::size_t n);

std::string format_state(std::span<const Coord> x);
std::string format_permutation(const Permutation& p);  // one-based, e.g. "(2,3,1)"

std::size_t checked_pow(std::size_t base, std::size_t exp,
                        std::size_t limit = std::numeric_limits<std::size_t>::max());

}  // namespace qstab
