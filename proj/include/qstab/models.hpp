#pragma once

#include "qstab/allocation.hpp"

#include <string>
#include <vector>

namespace qstab::models {

// phi_i == mu_i.
AllocationSpec constant_allocation(std::vector<double> mu);

// Rates that depend only on which other queues are nonempty. For N = 3 queue i
// is served at a_i when the other two are empty, a_ij when only j is busy and at
// the base rate when both are busy. For N = 2 the rate drops from a_i to
// a_ij. a_ij is indexed [i][j]; diagonal entries are ignored.
struct TableParams {
  std::vector<double> a;
  std::vector<std::vector<double>> a_pair;
  double base = 1.0;
};
AllocationSpec table_allocation(const TableParams& params);

// Symmetric three-queue parameters: a_i for all i and a_ij for all i != j.
TableParams three_queue_params(double a, double a_pair);

// Single server phi_1(x) = (1 + 1/x)^alpha, with phi_1(0) = 2^alpha.
AllocationSpec one_server_alpha(double alpha);

enum class InterferenceForm { Exponential, Polynomial };

InterferenceForm parse_interference_form(const std::string& name);
std::string to_string(InterferenceForm form);

// g(x) = min(cap, log(1 + x)).
GainFunction log_gain(double cap = 3.0);

// h_i(x) = 1 / (6 - 4 e^{-gamma s}) or 1 / (6 - 4 (1 + s)^{-gamma}) with s the
// total load of the other queues. A saturated other queue gives the limit 1/6.
InterferenceFunction interference(InterferenceForm form, std::size_t queue, std::size_t n_queues,
                                  double gamma);

// Scalar h as a function of the other queue's length; used by oracles and reports.
double interference_value(InterferenceForm form, double gamma, Coord other);

// Two base stations with log gains and the chosen interference family.
AllocationSpec two_basestations(InterferenceForm form, double gamma, double gain_cap = 3.0);

}  // namespace qstab::models
