#include "qstab/scenario.hpp"

#include "qstab/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qstab {

using nlohmann::json;

namespace {

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ScenarioError("cannot parse " + what + " '" + s + "' as a number");
  }
  if (used != s.size()) throw ScenarioError("trailing characters in " + what + " '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

// Line of the first occurrence of "key" in the source, 0 if absent.
int locate(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ScenarioError(msg, locate(text_, key));
  }

  const json& require(const json& obj, const std::string& key) const {
    if (!obj.contains(key)) fail(key, "missing key '" + key + "'");
    return obj.at(key);
  }

  double number(const json& obj, const std::string& key) const {
    const json& v = require(obj, key);
    if (!v.is_number()) fail(key, "'" + key + "' must be a number");
    return v.get<double>();
  }

  double number_or(const json& obj, const std::string& key, double dflt) const {
    return obj.contains(key) ? number(obj, key) : dflt;
  }

  std::string string(const json& obj, const std::string& key) const {
    const json& v = require(obj, key);
    if (!v.is_string()) fail(key, "'" + key + "' must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const json& obj, const std::string& key) const {
    const json& v = require(obj, key);
    if (!v.is_array()) fail(key, "'" + key + "' must be a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "'" + key + "' must contain only numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  const std::string& text_;
};

const std::vector<std::string> kTopKeys{"name",  "n_queues", "arrival_rates", "allocation",
                                        "grid",  "tolerances", "seed"};

AllocationSpec build_allocation(const Reader& rd, const json& block, std::size_t N,
                                LimitOptions* limits) {
  if (!block.is_object()) rd.fail("allocation", "'allocation' must be an object");
  const std::string kind = rd.string(block, "kind");
  std::optional<AllocationSpec> spec;
  try {
    if (kind == "table") {
      models::TableParams p;
      p.a = rd.numbers(block, "a_i");
      if (p.a.size() != N) rd.fail("a_i", "'a_i' needs one entry per queue");
      p.base = rd.number_or(block, "base", 1.0);
      if (block.contains("a_ij")) {
        const json& rows = block.at("a_ij");
        if (!rows.is_array() || rows.size() != N) rd.fail("a_ij", "'a_ij' must be an N x N list");
        for (const auto& row : rows) {
          if (!row.is_array() || row.size() != N) rd.fail("a_ij", "'a_ij' must be an N x N list");
          std::vector<double> r;
          for (const auto& e : row) {
            if (!e.is_number()) rd.fail("a_ij", "'a_ij' must contain only numbers");
            r.push_back(e.get<double>());
          }
          p.a_pair.push_back(std::move(r));
        }
      }
      spec = models::table_allocation(p);
    } else if (kind == "product") {
      const json& gain = rd.require(block, "gain");
      const json& inter = rd.require(block, "interference");
      const double cap = rd.number_or(gain, "cap", 3.0);
      const std::string gform = gain.contains("form") ? rd.string(gain, "form") : "log_gain";
      if (gform != "log_gain") rd.fail("form", "unknown gain form '" + gform + "'");
      const std::string iform = rd.string(inter, "form");
      models::InterferenceForm form{};
      try {
        form = models::parse_interference_form(iform);
      } catch (const std::invalid_argument&) {
        rd.fail("interference", "unknown interference form '" + iform + "'");
      }
      const double gamma = rd.number(inter, "gamma");
      std::vector<GainFunction> gains;
      std::vector<InterferenceFunction> hs;
      for (std::size_t i = 0; i < N; ++i) {
        gains.push_back(models::log_gain(cap));
        hs.push_back(models::interference(form, i, N, gamma));
      }
      spec = build_product_allocation(std::move(gains), std::move(hs));
    } else if (kind == "constant") {
      const auto mu = rd.numbers(block, "mu");
      if (mu.size() != N) rd.fail("mu", "'mu' needs one entry per queue");
      spec = models::constant_allocation(mu);
    } else if (kind == "one_server_alpha") {
      if (N != 1) rd.fail("kind", "one_server_alpha needs n_queues = 1");
      spec = models::one_server_alpha(rd.number(block, "alpha"));
    } else {
      rd.fail("kind", "unknown allocation kind '" + kind + "'");
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    rd.fail("allocation", std::string("invalid allocation: ") + e.what());
  }
  if (block.contains("bound")) {
    const double b = rd.number(block, "bound");
    if (!(b > 0.0)) rd.fail("bound", "'bound' must be positive");
    spec = spec->with_bound(b);
  }
  if (limits) {
    if (block.contains("limit_tol")) limits->limit_tol = rd.number(block, "limit_tol");
    if (block.contains("probe_cap"))
      limits->probe_cap = static_cast<Coord>(rd.number(block, "probe_cap"));
    if (!(limits->limit_tol > 0.0)) rd.fail("limit_tol", "'limit_tol' must be positive");
    if (limits->probe_cap < 0) rd.fail("probe_cap", "'probe_cap' must be >= 0");
  }
  return *spec;
}

}  // namespace

std::vector<double> GridAxis::values() const {
  std::vector<double> out;
  for (std::size_t k = 0;; ++k) {
    double v = min + static_cast<double>(k) * step;
    if (v > max + 1e-9 * step) break;
    v = std::round(v * 1e12) / 1e12;
    out.push_back(v);
  }
  return out;
}

GridAxis parse_axis(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw ScenarioError("grid axis '" + text + "' must be MIN:MAX:STEP");
  GridAxis a{parse_number(parts[0], "grid min"), parse_number(parts[1], "grid max"),
             parse_number(parts[2], "grid step")};
  if (!(a.step > 0.0)) throw ScenarioError("grid step must be positive in '" + text + "'");
  if (!(a.max >= a.min)) throw ScenarioError("grid max below min in '" + text + "'");
  if (!(a.min > 0.0)) throw ScenarioError("arrival rates must be positive in '" + text + "'");
  return a;
}

std::vector<GridAxis> parse_grid(const std::string& text) {
  std::vector<GridAxis> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_axis(part));
  if (out.empty()) throw ScenarioError("empty grid");
  return out;
}

ArrivalRates parse_rates(const std::string& text) {
  std::vector<double> v;
  for (const auto& part : split(text, ',')) v.push_back(parse_number(part, "arrival rate"));
  try {
    return ArrivalRates(v);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  }
}

AllocationSpec allocation_from_json(const json& block, std::size_t n_queues, LimitOptions* limits) {
  const std::string text = block.dump();
  return build_allocation(Reader(text), block, n_queues, limits);
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    std::string msg = e.what();
    const auto cut = msg.find("syntax error");
    throw ScenarioError(cut == std::string::npos ? msg : msg.substr(cut), line);
  }
  const Reader rd(text);
  if (!doc.is_object()) throw ScenarioError("scenario must be a JSON object", 1);
  for (const auto& [key, _] : doc.items())
    if (std::find(kTopKeys.begin(), kTopKeys.end(), key) == kTopKeys.end())
      rd.fail(key, "unknown key '" + key + "'");

  Scenario s;
  s.name = doc.contains("name") ? rd.string(doc, "name") : "scenario";
  const double nq = rd.number(doc, "n_queues");
  if (!(nq >= 1.0) || nq != std::floor(nq)) rd.fail("n_queues", "'n_queues' must be a positive integer");
  s.n_queues = static_cast<std::size_t>(nq);

  if (doc.contains("tolerances")) {
    const json& t = doc.at("tolerances");
    if (!t.is_object()) rd.fail("tolerances", "'tolerances' must be an object");
    for (const auto& [key, val] : t.items()) {
      std::string v = val.is_string() ? val.get<std::string>() : val.dump();
      try {
        apply_tolerance(s.tolerances, key + "=" + v);
      } catch (const ScenarioError& e) {
        rd.fail(key, e.what());
      }
    }
  }
  s.allocation = rd.require(doc, "allocation");
  s.spec = std::make_shared<AllocationSpec>(
      build_allocation(rd, s.allocation, s.n_queues, &s.tolerances.limits));

  if (doc.contains("arrival_rates")) {
    const auto r = rd.numbers(doc, "arrival_rates");
    if (r.size() != s.n_queues) rd.fail("arrival_rates", "'arrival_rates' needs one entry per queue");
    for (double v : r)
      if (!(v > 0.0)) rd.fail("arrival_rates", "arrival rates must be strictly positive");
    s.rates = ArrivalRates(r);
  }
  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    try {
      if (g.is_string()) {
        s.grid = parse_grid(g.get<std::string>());
      } else if (g.is_array()) {
        for (const auto& e : g) {
          if (!e.is_string()) rd.fail("grid", "grid axes must be \"MIN:MAX:STEP\" strings");
          s.grid.push_back(parse_axis(e.get<std::string>()));
        }
      } else {
        rd.fail("grid", "'grid' must be a string or a list of strings");
      }
    } catch (const ScenarioError& e) {
      if (e.line() > 0) throw;
      rd.fail("grid", e.what());
    }
    if (s.grid.size() > s.n_queues) rd.fail("grid", "more grid axes than queues");
  }
  if (doc.contains("seed")) {
    const json& v = doc.at("seed");
    if (!v.is_number_unsigned()) rd.fail("seed", "'seed' must be a nonnegative integer");
    s.seed = v.get<std::uint64_t>();
  }
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const ScenarioError& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

std::vector<std::string> builtin_names() {
  return {"mm1", "one_server_alpha", "three_queues", "two_basestations"};
}

Scenario builtin_scenario(const std::string& name, const std::map<std::string, std::string>& params) {
  auto get = [&](const std::string& key, double dflt) {
    auto it = params.find(key);
    return it == params.end() ? dflt : parse_number(it->second, "parameter " + key);
  };
  auto get_str = [&](const std::string& key, const std::string& dflt) {
    auto it = params.find(key);
    return it == params.end() ? dflt : it->second;
  };
  json doc;
  doc["name"] = name;
  if (name == "mm1") {
    doc["n_queues"] = 1;
    doc["allocation"] = {{"kind", "constant"}, {"mu", {get("mu", 1.0)}}};
    doc["arrival_rates"] = {get("lambda", 0.5)};
  } else if (name == "one_server_alpha") {
    doc["n_queues"] = 1;
    doc["allocation"] = {{"kind", "one_server_alpha"}, {"alpha", get("alpha", 2.0)}};
    doc["arrival_rates"] = {0.9};
  } else if (name == "three_queues") {
    const double a = get("a", 3.0);
    const double ap = get("a_pair", 2.0);
    json ai = json::array();
    json aij = json::array();
    for (int i = 1; i <= 3; ++i) {
      ai.push_back(get("a" + std::to_string(i), a));
      json row = json::array();
      for (int j = 1; j <= 3; ++j)
        row.push_back(i == j ? 0.0 : get("a" + std::to_string(i) + std::to_string(j), ap));
      aij.push_back(row);
    }
    doc["n_queues"] = 3;
    doc["allocation"] = {{"kind", "table"}, {"a_i", ai}, {"a_ij", aij}};
    doc["arrival_rates"] = {0.5, 1.2, 0.1};
  } else if (name == "two_basestations") {
    doc["n_queues"] = 2;
    const std::string family = get_str("family", "exp");
    doc["allocation"] = {
        {"kind", "product"},
        {"gain", {{"cap", get("cap", 3.0)}, {"form", "log_gain"}}},
        {"interference",
         {{"form", family == "poly" ? "poly_interference" : family == "exp" ? "exp_interference" : family},
          {"gamma", get("gamma", 2.0)}}}};
    doc["arrival_rates"] = {0.3, 0.3};
    doc["grid"] = {"0.05:1:0.05", "0.05:1:0.05"};
  } else {
    throw ScenarioError("unknown built-in scenario '" + name + "'");
  }
  for (const auto& [k, v] : params) {
    static const std::vector<std::string> known{"mu", "lambda", "alpha", "a", "a_pair", "family",
                                                "gamma", "cap", "a1", "a2", "a3", "a12", "a13",
                                                "a21", "a23", "a31", "a32"};
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ScenarioError("unknown parameter '" + k + "' for built-in scenario");
  }
  return parse_scenario(doc.dump(2));
}

Scenario resolve_scenario(const std::string& ref, const std::map<std::string, std::string>& params) {
  const std::string prefix = "builtin:";
  if (ref.rfind(prefix, 0) == 0) return builtin_scenario(ref.substr(prefix.size()), params);
  if (!params.empty()) throw ScenarioError("--param only applies to built-in scenarios");
  return load_scenario_file(ref);
}

void apply_tolerance(Tolerances& tol, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ScenarioError("tolerance override '" + assignment + "' must be KEY=VAL");
  const std::string key = assignment.substr(0, eq);
  std::string val = assignment.substr(eq + 1);
  if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
  auto num = [&] { return parse_number(val, key); };
  auto positive = [&] {
    const double v = num();
    if (!(v > 0.0)) throw ScenarioError("'" + key + "' must be positive");
    return v;
  };
  auto count = [&] {
    const double v = num();
    if (!(v >= 0.0) || v != std::floor(v)) throw ScenarioError("'" + key + "' must be a nonnegative integer");
    return v;
  };
  if (key == "margins_tol") tol.margins_tol = positive();
  else if (key == "uniform_tol") tol.uniform_tol = positive();
  else if (key == "limit_tol") tol.limits.limit_tol = positive();
  else if (key == "probe_cap") tol.limits.probe_cap = static_cast<Coord>(count());
  else if (key == "start_level") tol.limits.start_level = static_cast<Coord>(positive());
  else if (key == "growth") {
    tol.limits.growth = num();
    if (!(tol.limits.growth > 1.0)) throw ScenarioError("'growth' must exceed 1");
  } else if (key == "max_levels") tol.limits.max_levels = static_cast<int>(positive());
  else if (key == "tail_tol") tol.solver.tail_tol = positive();
  else if (key == "residual_tol") tol.solver.residual_tol = positive();
  else if (key == "start_T") tol.solver.start_T = static_cast<Coord>(positive());
  else if (key == "max_T_1d") tol.solver.max_T_1d = static_cast<Coord>(positive());
  else if (key == "max_states") tol.solver.max_states = static_cast<std::size_t>(positive());
  else if (key == "structure_box") tol.structure_box = static_cast<Coord>(positive());
  else if (key == "permutation_cap") tol.permutation_cap = static_cast<std::size_t>(count());
  else if (key == "descent_steps") tol.descent_steps = static_cast<int>(count());
  else if (key == "degrade_beyond_cap") tol.degrade_beyond_cap = val == "true" || val == "1";
  else if (key == "backend") {
    if (val == "auto") tol.solver.solve.backend = Backend::Auto;
    else if (val == "direct") tol.solver.solve.backend = Backend::Direct;
    else if (val == "gauss-seidel" || val == "gauss_seidel") tol.solver.solve.backend = Backend::GaussSeidel;
    else if (val == "power") tol.solver.solve.backend = Backend::Power;
    else throw ScenarioError("unknown backend '" + val + "'");
  } else {
    throw ScenarioError("unknown tolerance key '" + key + "'");
  }
}

std::vector<ArrivalRates> grid_points(const Scenario& s) {
  if (s.grid.empty()) throw ScenarioError("scenario has no grid; pass --grid");
  const std::size_t N = s.n_queues;
  if (s.grid.size() > N) throw ScenarioError("more grid axes than queues");
  if (s.grid.size() < N && !s.rates)
    throw ScenarioError("grid covers fewer queues than the system; arrival_rates must fix the rest");
  std::vector<std::vector<double>> axes;
  for (const auto& a : s.grid) axes.push_back(a.values());
  std::vector<double> base(N, 0.0);
  if (s.rates) base.assign(s.rates->values().begin(), s.rates->values().end());
  std::vector<ArrivalRates> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    std::vector<double> lam = base;
    for (std::size_t k = 0; k < axes.size(); ++k) lam[k] = axes[k][idx[k]];
    out.emplace_back(lam);
    std::size_t d = axes.size();
    while (d > 0) {
      --d;
      if (++idx[d] < axes[d].size()) break;
      idx[d] = 0;
      if (d == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

}  // namespace qstab
