#pragma once

#include "qstab/simulator.hpp"
#include "qstab/stability.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace qstab {

nlohmann::json to_json(const Tolerances& tol);
nlohmann::json to_json(const Inequality& q);
nlohmann::json to_json(const Certificate& c);
nlohmann::json to_json(const StabilityVerdict& v);
nlohmann::json to_json(const ProbeDiagnostic& d);

// Human-readable verdict with every certificate inequality.
std::string format_verdict(const StabilityVerdict& v);

// Fixed-precision decimal used by every CSV writer.
std::string format_decimal(double v, int digits = 6);

// lambda_1,lambda_2,label,margin
void write_sweep_csv(std::ostream& os, const std::vector<RegionSample>& samples);

// Colored-cell region map over the first two coordinates of the samples.
// Cells are 12 px, plot margin 48 px, palette fixed per label.
void write_sweep_svg(std::ostream& os, const std::vector<RegionSample>& samples,
                     const std::string& title);
std::string label_color(const std::string& label);

}  // namespace qstab
