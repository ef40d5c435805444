#include "qstab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace qstab {

using nlohmann::json;

json to_json(const Tolerances& tol) {
  return {{"margins_tol", tol.margins_tol},
          {"uniform_tol", tol.uniform_tol},
          {"limit_tol", tol.limits.limit_tol},
          {"start_level", tol.limits.start_level},
          {"growth", tol.limits.growth},
          {"max_levels", tol.limits.max_levels},
          {"probe_cap", tol.limits.probe_cap},
          {"tail_tol", tol.solver.tail_tol},
          {"residual_tol", tol.solver.residual_tol},
          {"start_T", tol.solver.start_T},
          {"max_T_1d", tol.solver.max_T_1d},
          {"max_states", tol.solver.max_states},
          {"backend", to_string(tol.solver.solve.backend)},
          {"structure_box", tol.structure_box},
          {"permutation_cap", tol.permutation_cap},
          {"descent_steps", tol.descent_steps}};
}

json to_json(const Inequality& q) {
  json j{{"kind", to_string(q.kind)},
         {"queue", q.queue + 1},
         {"lambda", q.lambda},
         {"L", q.L},
         {"relation", q.stable_side() ? "lambda < L" : "lambda > L"},
         {"slack", q.slack()}};
  if (q.kind == Inequality::Kind::StageStable || q.kind == Inequality::Kind::TailUnstable) {
    j["saturated_order"] = q.stage;
    j["box_T"] = q.box_T;
    j["prefix_stable"] = q.prefix_stable;
    j["certified"] = q.certified;
  }
  return j;
}

json to_json(const Certificate& c) {
  json j;
  if (!c.sigma.empty()) {
    json sigma = json::array();
    for (auto s : c.sigma) sigma.push_back(s + 1);
    j["sigma"] = sigma;
    j["n"] = c.n;
    j["margins"] = c.margins;
  } else {
    j["source"] = "tail bounds";
  }
  json ineqs = json::array();
  for (const auto& q : c.inequalities) ineqs.push_back(to_json(q));
  j["inequalities"] = ineqs;
  if (c.via_descent) {
    j["via_descent"] = true;
    j["descended_lambda"] = c.descended_lambda;
  }
  return j;
}

json to_json(const StabilityVerdict& v) {
  json labels = json::array();
  for (auto l : v.per_queue) labels.push_back(to_string(l));
  json bounds = json::array();
  for (const auto& b : v.bounds) bounds.push_back({{"lower", b.lower}, {"upper", b.upper},
                                                   {"label", to_string(b.label)}});
  json witnesses = json::array();
  for (const auto& w : v.witnesses) witnesses.push_back(to_json(w));
  json j{{"lambda", v.lambda},
         {"system_label", to_string(v.system_label)},
         {"per_queue", labels},
         {"margin", v.margin},
         {"margins_tol", v.margins_tol},
         {"partially_decreasing", v.partially_decreasing},
         {"uniform_limits", v.uniform_limits},
         {"tail_bounds", bounds},
         {"witnesses", witnesses},
         {"warnings", v.warnings},
         {"tolerances", to_json(v.tolerances)}};
  if (v.certificate) j["certificate"] = to_json(*v.certificate);
  return j;
}

json to_json(const ProbeDiagnostic& d) {
  return {{"label", to_string(d.label)},
          {"replicas", d.replicas},
          {"K", d.K},
          {"escape", d.escape},
          {"mean_slope", d.mean_slope},
          {"slope_lower_bound", d.slope_lower_bound},
          {"warnings", d.warnings}};
}

std::string format_decimal(double v, int digits) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string format_verdict(const StabilityVerdict& v) {
  std::ostringstream os;
  os << "lambda = (";
  for (std::size_t i = 0; i < v.lambda.size(); ++i) os << (i ? ", " : "") << v.lambda[i];
  os << ")\n";
  os << "system: " << to_string(v.system_label) << "  (margin " << format_decimal(v.margin, 6)
     << ", margins_tol " << v.margins_tol << ")\n";
  for (std::size_t q = 0; q < v.per_queue.size(); ++q) {
    os << "  queue " << q + 1 << ": " << to_string(v.per_queue[q]);
    if (q < v.bounds.size())
      os << "  [tail bounds " << format_decimal(v.bounds[q].lower, 6) << " .. "
         << format_decimal(v.bounds[q].upper, 6) << "]";
    os << '\n';
  }
  os << "hypotheses: partially decreasing " << (v.partially_decreasing ? "yes" : "no")
     << " (sampled), uniform limits " << (v.uniform_limits ? "yes" : "no") << " (sampled)\n";
  auto print_cert = [&](const Certificate& c) {
    if (c.sigma.empty()) os << "  tail bounds\n";
    else {
      os << "  sigma " << format_permutation(c.sigma) << ", n = " << c.n;
      if (c.via_descent) {
        os << ", found at lowered lambda (";
        for (std::size_t i = 0; i < c.descended_lambda.size(); ++i)
          os << (i ? ", " : "") << format_decimal(c.descended_lambda[i], 6);
        os << ")";
      }
      os << '\n';
    }
    for (const auto& q : c.inequalities) {
      os << "    [" << to_string(q.kind) << "] queue " << q.queue + 1 << ": lambda "
         << format_decimal(q.lambda, 6) << (q.stable_side() ? " < " : " > ") << "L "
         << format_decimal(q.L, 9) << "  (slack " << format_decimal(q.slack(), 9);
      if (q.box_T > 0) os << ", box T=" << q.box_T;
      if (!q.prefix_stable) os << ", saturated prefix unstable";
      os << ")\n";
    }
  };
  if (v.certificate) {
    os << "certificate:\n";
    print_cert(*v.certificate);
  }
  if (!v.witnesses.empty()) {
    os << "witnesses:\n";
    for (const auto& w : v.witnesses) print_cert(w);
  }
  for (const auto& w : v.warnings) os << "warning: " << w << '\n';
  const auto& t = v.tolerances;
  os << "tolerances: margins_tol=" << t.margins_tol << " uniform_tol=" << t.uniform_tol
     << " limit_tol=" << t.limits.limit_tol << " tail_tol=" << t.solver.tail_tol
     << " residual_tol=" << t.solver.residual_tol << " probe_cap=" << t.limits.probe_cap
     << " structure_box=" << t.structure_box << '\n';
  return os.str();
}

void write_sweep_csv(std::ostream& os, const std::vector<RegionSample>& samples) {
  os << "lambda_1,lambda_2,label,margin\n";
  for (const auto& s : samples) {
    const auto v = s.lambda.values();
    os << format_decimal(v[0], 6) << ',' << (v.size() > 1 ? format_decimal(v[1], 6) : "") << ','
       << s.label << ',' << (s.label == "ERR" ? "" : format_decimal(s.verdict.margin, 9)) << '\n';
  }
}

std::string label_color(const std::string& label) {
  static const std::map<std::string, std::string> palette{
      {"S", "#2e7d32"}, {"S1", "#1565c0"}, {"S2", "#f9a825"},
      {"U", "#c62828"}, {"B", "#9e9e9e"},  {"ERR", "#000000"}};
  auto it = palette.find(label);
  return it == palette.end() ? "#6a1b9a" : it->second;
}

void write_sweep_svg(std::ostream& os, const std::vector<RegionSample>& samples,
                     const std::string& title) {
  constexpr int kCell = 12;
  constexpr int kMargin = 48;
  std::set<double> xs;
  std::set<double> ys;
  for (const auto& s : samples) {
    xs.insert(s.lambda[0]);
    ys.insert(s.lambda.size() > 1 ? s.lambda[1] : 0.0);
  }
  std::map<double, int> xi;
  std::map<double, int> yi;
  int k = 0;
  for (double x : xs) xi[x] = k++;
  k = 0;
  for (double y : ys) yi[y] = k++;
  const int cols = static_cast<int>(xs.size());
  const int rows = static_cast<int>(ys.size());
  const int width = 2 * kMargin + cols * kCell + 120;
  const int height = 2 * kMargin + rows * kCell;

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << kMargin << "\" y=\"" << kMargin / 2
     << "\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  for (const auto& s : samples) {
    const double y = s.lambda.size() > 1 ? s.lambda[1] : 0.0;
    const int cx = kMargin + xi[s.lambda[0]] * kCell;
    const int cy = kMargin + (rows - 1 - yi[y]) * kCell;
    os << "<rect x=\"" << cx << "\" y=\"" << cy << "\" width=\"" << kCell << "\" height=\""
       << kCell << "\" fill=\"" << label_color(s.label) << "\"><title>" << format_decimal(s.lambda[0], 4)
       << ',' << format_decimal(y, 4) << ' ' << s.label << "</title></rect>\n";
  }
  const int x0 = kMargin;
  const int y0 = kMargin + rows * kCell;
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 + cols * kCell << "\" y2=\""
     << y0 << "\" stroke=\"#000000\"/>\n";
  os << "<line x1=\"" << x0 << "\" y1=\"" << kMargin << "\" x2=\"" << x0 << "\" y2=\"" << y0
     << "\" stroke=\"#000000\"/>\n";
  if (!xs.empty()) {
    os << "<text x=\"" << x0 << "\" y=\"" << y0 + 16
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_decimal(*xs.begin(), 2)
       << "</text>\n";
    os << "<text x=\"" << x0 + cols * kCell - 24 << "\" y=\"" << y0 + 16
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_decimal(*xs.rbegin(), 2)
       << "</text>\n";
    os << "<text x=\"" << x0 + cols * kCell / 2 - 20 << "\" y=\"" << y0 + 32
       << "\" font-family=\"sans-serif\" font-size=\"12\">lambda_1</text>\n";
    os << "<text x=\"4\" y=\"" << y0 << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_decimal(*ys.begin(), 2) << "</text>\n";
    os << "<text x=\"4\" y=\"" << kMargin + 10 << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_decimal(*ys.rbegin(), 2) << "</text>\n";
    os << "<text x=\"4\" y=\"" << kMargin + rows * kCell / 2
       << "\" font-family=\"sans-serif\" font-size=\"12\">lambda_2</text>\n";
  }
  const std::vector<std::string> legend{"S", "S1", "S2", "U", "B", "ERR"};
  int ly = kMargin;
  const int lx = kMargin + cols * kCell + 20;
  for (const auto& l : legend) {
    os << "<rect x=\"" << lx << "\" y=\"" << ly << "\" width=\"" << kCell << "\" height=\"" << kCell
       << "\" fill=\"" << label_color(l) << "\"/>\n";
    os << "<text x=\"" << lx + kCell + 6 << "\" y=\"" << ly + kCell - 2
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << l << "</text>\n";
    ly += kCell + 6;
  }
  os << "</svg>\n";
}

}  // namespace qstab
