#pragma once

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "hk/common.hpp"
#include "hk/convexity.hpp"
#include "hk/grid.hpp"
#include "hk/let.hpp"
#include "hk/measure.hpp"

namespace hk {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Versioned text formats. Doubles survive round-trips (serialized with up to
// 17 significant digits by the JSON layer).
// ---------------------------------------------------------------------------

inline json measure_to_json(const DiscreteMeasure& mu) {
  json atoms = json::array();
  for (const auto& a : mu.atoms) atoms.push_back({{"x", a.x}, {"mass", a.mass}});
  return {{"format", "hk-measure"}, {"version", 1}, {"dimension", mu.dimension}, {"atoms", atoms}};
}

inline DiscreteMeasure measure_from_json(const json& j) {
  try {
    if (j.value("format", "hk-measure") != std::string("hk-measure"))
      throw ParseError("not a measure object");
    DiscreteMeasure mu(j.at("dimension").get<int>());
    for (const auto& a : j.at("atoms")) mu.add(a.at("x").get<Vec>(), a.at("mass").get<double>());
    return mu;
  } catch (const json::exception& e) {
    throw ParseError(std::string("measure: ") + e.what());
  }
}

inline json grid_geometry_to_json(const GridGeometry& g) {
  json box = json::array();
  for (auto& [lo, hi] : g.box) box.push_back({lo, hi});
  return {{"box", box}, {"spacing", g.spacing}};
}

inline GridGeometry grid_geometry_from_json(const json& j) {
  std::vector<std::pair<double, double>> box;
  for (const auto& b : j.at("box")) box.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  return GridGeometry(box, j.at("spacing").get<std::vector<double>>());
}

inline json grid_density_to_json(const GridDensity& g) {
  json j = grid_geometry_to_json(g.geom);
  j["format"] = "hk-grid";
  j["version"] = 1;
  j["values"] = g.values;
  return j;
}

inline GridDensity grid_density_from_json(const json& j) {
  try {
    return GridDensity(grid_geometry_from_json(j), j.at("values").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("grid: ") + e.what());
  }
}

// Grid functions may carry infinities; they are stored as the strings
// "inf" / "-inf" to stay inside strict JSON.
inline json grid_function_to_json(const GridFunction& f) {
  json j = grid_geometry_to_json(f.geom);
  j["format"] = "hk-grid";
  j["version"] = 1;
  json vals = json::array();
  for (double v : f.values) {
    if (v == inf)
      vals.push_back("inf");
    else if (v == -inf)
      vals.push_back("-inf");
    else
      vals.push_back(v);
  }
  j["values"] = vals;
  return j;
}

inline GridFunction grid_function_from_json(const json& j) {
  try {
    GridGeometry geom = grid_geometry_from_json(j);
    std::vector<double> vals;
    for (const auto& v : j.at("values")) {
      if (v.is_string())
        vals.push_back(v.get<std::string>() == "-inf" ? -inf : inf);
      else
        vals.push_back(v.get<double>());
    }
    return GridFunction(std::move(geom), std::move(vals));
  } catch (const json::exception& e) {
    throw ParseError(std::string("grid function: ") + e.what());
  }
}

inline json plan_to_json(const TransportPlan& plan) {
  json entries = json::array();
  for (const auto& e : plan.entries) entries.push_back({{"i", e.i}, {"j", e.j}, {"weight", e.weight}});
  return {{"format", "hk-plan"},
          {"version", 1},
          {"entries", entries},
          {"sigma0", plan.sigma0},
          {"sigma1", plan.sigma1}};
}

inline json certificate_to_json(const OptimalityCertificate& c) {
  return {{"max_complementarity_violation", c.max_complementarity_violation},
          {"max_feasibility_violation", c.max_feasibility_violation},
          {"duality_gap", c.duality_gap}};
}

inline json convexity_report_to_json(const ConvexityReport& r) {
  auto cond = [](const ConditionVerdict& v) {
    return json{{"pass", v.pass}, {"worst_margin", v.worst_margin}, {"worst_c", v.worst_c}};
  };
  return {{"format", "hk-convexity-report"},
          {"version", 1},
          {"dimension", r.d},
          {"lambda", r.lambda},
          {"sampled_only", r.sampled_only},
          {"conditions",
           {{"b_psd", cond(r.b_psd)},
            {"monotone_h", cond(r.monotone_h)},
            {"hellinger", cond(r.hellinger)},
            {"mccann", cond(r.mccann)},
            {"extra", cond(r.extra)}}},
          {"overall", r.overall ? "PASS" : "FAIL"}};
}

// ---------------------------------------------------------------------------
// Files and run manifests.
// ---------------------------------------------------------------------------

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

inline std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline constexpr const char* tool_version = "0.1.0";

struct RunManifest {
  std::string command;
  json parameters;
  json input_hashes = json::object();
  std::vector<std::string> output_paths;
  double wall_time_seconds = 0.0;

  json to_json() const {
    return {{"format", "hk-manifest"}, {"version", 1},     {"command", command},
            {"parameters", parameters}, {"inputs", input_hashes},
            {"outputs", output_paths},  {"tool_version", tool_version},
            {"wall_time_seconds", wall_time_seconds}};
  }
};

}  // namespace hk
