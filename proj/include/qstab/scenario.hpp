#pragma once

#include "qstab/allocation.hpp"
#include "qstab/stability.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qstab {

struct GridAxis {
  double min = 0.0;
  double max = 0.0;
  double step = 0.0;

  std::vector<double> values() const;
};

// "MIN:MAX:STEP"
GridAxis parse_axis(const std::string& text);
// "MIN:MAX:STEP[,MIN:MAX:STEP]"
std::vector<GridAxis> parse_grid(const std::string& text);

struct Scenario {
  std::string name;
  std::size_t n_queues = 0;
  std::shared_ptr<const AllocationSpec> spec;
  std::optional<ArrivalRates> rates;
  std::vector<GridAxis> grid;
  Tolerances tolerances;
  std::uint64_t seed = 1;
  nlohmann::json allocation;  // the allocation block as given, for reports
};

// Throws ScenarioError (with a line number when one can be located).
Scenario parse_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);

// Built-ins: one_server_alpha, two_basestations, three_queues, mm1.
Scenario builtin_scenario(const std::string& name,
                          const std::map<std::string, std::string>& params = {});
std::vector<std::string> builtin_names();

// "builtin:NAME" or a file path.
Scenario resolve_scenario(const std::string& ref,
                          const std::map<std::string, std::string>& params = {});

// KEY=VAL override of a tolerance knob.
void apply_tolerance(Tolerances& tol, const std::string& assignment);

// "a,b,c"
ArrivalRates parse_rates(const std::string& text);

// Grid points in row-major order (last axis fastest). With more than two
// queues, axes cover the first coordinates and the rest come from the
// scenario's arrival rates.
std::vector<ArrivalRates> grid_points(const Scenario& s);

// Allocation built from a JSON allocation block.
AllocationSpec allocation_from_json(const nlohmann::json& block, std::size_t n_queues,
                                    LimitOptions* limits = nullptr);

}  // namespace qstab
