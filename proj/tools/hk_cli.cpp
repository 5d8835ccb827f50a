// Command-line driver: distance, geodesic, hopflax and convexity subcommands
// over the measure/grid file formats, with a manifest per run.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "hk/hk.hpp"

namespace fs = std::filesystem;
using namespace hk;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input_error = 2;
constexpr int exit_numerical_failure = 3;
constexpr int exit_certification_fail = 4;

struct CommonOptions {
  double tolerance = 1e-6;
  int threads = 1;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--tolerance", tolerance, "solver / certification tolerance");
    cmd->add_option("--threads", threads, "worker threads (results are thread-count independent)");
    cmd->add_option("--seed", seed, "seed for randomized initializations");
  }

  LetOptions let() const {
    LetOptions o;
    o.tolerance = tolerance;
    o.seed = seed;
    return o;
  }
};

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

json parse_times(const std::string& csv) {
  json times = json::array();
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    times.push_back(std::stod(csv.substr(pos, next - pos)));
    pos = next + 1;
  }
  return times;
}

DensityFunction density_from_json(const json& j);

// "name:key=value,key=value" form used by --family
DensityFunction density_from_spec(const std::string& spec) {
  std::size_t colon = spec.find(':');
  std::string name = spec.substr(0, colon);
  std::map<std::string, double> kv;
  if (colon != std::string::npos) {
    std::string rest = spec.substr(colon + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      std::size_t next = rest.find(',', pos);
      if (next == std::string::npos) next = rest.size();
      std::string item = rest.substr(pos, next - pos);
      std::size_t eq = item.find('=');
      if (eq == std::string::npos) throw ParseError("bad family parameter: " + item);
      kv[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
      pos = next + 1;
    }
  }
  try {
    if (name == "power") return power_density(kv.at("m"));
    if (name == "negative_power") return negative_power_density(kv.at("q"));
    if (name == "boltzmann") return boltzmann_density();
    if (name == "capped_linear") return capped_linear_density(kv.at("kappa"), kv.at("c_star"));
  } catch (const std::out_of_range&) {
    throw ParseError("missing parameter for family " + name);
  }
  throw ParseError("unknown density family: " + name);
}

DensityFunction density_from_json(const json& j) {
  try {
    std::string family = j.at("family").get<std::string>();
    if (family == "power") return power_density(j.at("m").get<double>());
    if (family == "negative_power") return negative_power_density(j.at("q").get<double>());
    if (family == "boltzmann") return boltzmann_density();
    if (family == "capped_linear")
      return capped_linear_density(j.at("kappa").get<double>(), j.at("c_star").get<double>());
    if (family == "sum") {
      std::vector<DensityFunction> terms;
      for (const auto& t : j.at("terms")) terms.push_back(density_from_json(t));
      return sum_density(std::move(terms));
    }
    if (family == "tabulated") {
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : j.at("points"))
        pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      return tabulated_density(std::move(pts));
    }
    throw ParseError("unknown density family: " + family);
  } catch (const json::exception& e) {
    throw ParseError(std::string("density spec: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hellinger-Kantorovich distances, geodesics and convexity certificates"};
  app.require_subcommand(1);

  // ---- distance ----------------------------------------------------------
  auto* cmd_distance = app.add_subcommand("distance", "HK distance between two measure files");
  std::string d_mu0, d_mu1, d_plan, d_cert, d_out;
  double d_alpha = 1.0, d_beta = 4.0;
  CommonOptions d_common;
  cmd_distance->add_option("--mu0", d_mu0, "first measure file")->required();
  cmd_distance->add_option("--mu1", d_mu1, "second measure file")->required();
  cmd_distance->add_option("--alpha", d_alpha, "transport strength");
  cmd_distance->add_option("--beta", d_beta, "growth strength");
  cmd_distance->add_option("--plan", d_plan, "write the optimal plan here");
  cmd_distance->add_option("--certificate", d_cert, "write the optimality certificate here");
  cmd_distance->add_option("--out", d_out, "write the result object here (default: stdout only)");
  d_common.attach(cmd_distance);

  // ---- geodesic -----------------------------------------------------------
  auto* cmd_geodesic = app.add_subcommand("geodesic", "sample the geodesic between two measures");
  std::string g_mu0, g_mu1, g_times = "0,0.25,0.5,0.75,1", g_dir;
  bool g_verify = false;
  CommonOptions g_common;
  cmd_geodesic->add_option("--mu0", g_mu0)->required();
  cmd_geodesic->add_option("--mu1", g_mu1)->required();
  cmd_geodesic->add_option("--times", g_times, "comma-separated times in [0,1]");
  cmd_geodesic->add_option("--out", g_dir, "output directory")->required();
  cmd_geodesic->add_flag("--verify", g_verify, "re-solve at midpoints for a constant-speed report");
  g_common.attach(cmd_geodesic);

  // ---- hopflax -------------------------------------------------------------
  auto* cmd_hopflax = app.add_subcommand("hopflax", "evolve a grid potential");
  std::string h_grid, h_grid1, h_dir, h_direction = "forward", h_times = "0.25,0.5,0.75";
  bool h_pair = false;
  CommonOptions h_common;
  cmd_hopflax->add_option("--grid", h_grid, "potential grid file (xi_0, or xi_bar_1 backward)")
      ->required();
  cmd_hopflax->add_option("--direction", h_direction, "forward | backward");
  cmd_hopflax->add_option("--times", h_times, "comma-separated times");
  cmd_hopflax->add_flag("--pair", h_pair, "treat --grid as xi_0 and --grid1 as xi_bar_1");
  cmd_hopflax->add_option("--grid1", h_grid1, "backward potential for --pair mode");
  cmd_hopflax->add_option("--out", h_dir, "output directory")->required();
  h_common.attach(cmd_hopflax);

  // ---- convexity ------------------------------------------------------------
  auto* cmd_convexity = app.add_subcommand("convexity", "certify geodesic lambda-convexity");
  std::string c_family, c_spec, c_out;
  int c_dim = 1;
  double c_lambda = 0.0;
  bool c_optimal = false;
  CommonOptions c_common;
  cmd_convexity->add_option("--family", c_family, "integrand family, e.g. power:m=2");
  cmd_convexity->add_option("--spec", c_spec, "integrand spec file (JSON)");
  cmd_convexity->add_option("--dim", c_dim, "space dimension")->required();
  cmd_convexity->add_option("--lambda", c_lambda, "modulus to certify");
  cmd_convexity->add_flag("--optimal", c_optimal, "report the optimal modulus instead");
  cmd_convexity->add_option("--out", c_out, "write the report here");
  c_common.attach(cmd_convexity);

  CLI11_PARSE(app, argc, argv);
  Stopwatch watch;

  try {
    if (*cmd_distance) {
      DiscreteMeasure mu0 = measure_from_json(load_json(d_mu0));
      DiscreteMeasure mu1 = measure_from_json(load_json(d_mu1));
      RescaledMeasure r0 = rescale_to_canonical(d_alpha, d_beta, mu0);
      RescaledMeasure r1 = rescale_to_canonical(d_alpha, d_beta, mu1);
      LetSolution sol = solve_let(r0.measure, r1.measure, d_common.let());
      double hk2 = r0.mass_factor * sol.hk_squared;

      json result = {{"format", "hk-distance-result"},
                     {"version", 1},
                     {"hk", std::sqrt(hk2)},
                     {"hk_squared", hk2},
                     {"alpha", d_alpha},
                     {"beta", d_beta},
                     {"certificate", certificate_to_json(sol.certificate)}};
      RunManifest manifest;
      manifest.command = "distance";
      manifest.parameters = {{"alpha", d_alpha},
                             {"beta", d_beta},
                             {"tolerance", d_common.tolerance},
                             {"seed", d_common.seed},
                             {"threads", d_common.threads}};
      manifest.input_hashes = {{d_mu0, fnv1a_file(d_mu0)}, {d_mu1, fnv1a_file(d_mu1)}};
      if (!d_plan.empty()) {
        save_json(d_plan, plan_to_json(sol.plan));
        manifest.output_paths.push_back(d_plan);
      }
      if (!d_cert.empty()) {
        save_json(d_cert, certificate_to_json(sol.certificate));
        manifest.output_paths.push_back(d_cert);
      }
      manifest.wall_time_seconds = watch.seconds();
      result["manifest"] = manifest.to_json();
      if (!d_out.empty()) save_json(d_out, result);
      std::cout << result.dump(2) << "\n";
      return exit_ok;
    }

    if (*cmd_geodesic) {
      DiscreteMeasure mu0 = measure_from_json(load_json(g_mu0));
      DiscreteMeasure mu1 = measure_from_json(load_json(g_mu1));
      GeodesicCurve curve = build_geodesic(mu0, mu1, g_common.let());
      fs::create_directories(g_dir);

      json times = parse_times(g_times);
      json snapshots = json::array();
      for (std::size_t k = 0; k < times.size(); ++k) {
        double t = times[k].get<double>();
        DiscreteMeasure mt = sample(curve, t);
        char name[64];
        std::snprintf(name, sizeof name, "measure_t%03zu.json", k);
        std::string path = (fs::path(g_dir) / name).string();
        save_json(path, measure_to_json(mt));
        snapshots.push_back({{"t", t}, {"path", name}, {"mass", mt.total_mass()}});
      }

      json verify = nullptr;
      if (g_verify) {
        double total = std::sqrt(curve.hk_squared);
        json checks = json::array();
        for (double s : {0.25, 0.5, 0.75}) {
          double dist_0s = std::sqrt(solve_let(mu0, sample(curve, s), g_common.let()).hk_squared);
          checks.push_back({{"s", s},
                            {"hk_0_to_s", dist_0s},
                            {"expected", s * total},
                            {"defect", std::abs(dist_0s - s * total)}});
        }
        verify = {{"constant_speed", checks}};
      }

      RunManifest manifest;
      manifest.command = "geodesic";
      manifest.parameters = {{"times", times},
                             {"tolerance", g_common.tolerance},
                             {"seed", g_common.seed},
                             {"threads", g_common.threads}};
      manifest.input_hashes = {{g_mu0, fnv1a_file(g_mu0)}, {g_mu1, fnv1a_file(g_mu1)}};
      for (const auto& s : snapshots) manifest.output_paths.push_back(s.at("path"));
      manifest.wall_time_seconds = watch.seconds();

      json out = manifest.to_json();
      out["hk_squared"] = curve.hk_squared;
      out["snapshots"] = snapshots;
      if (!verify.is_null()) out["verify"] = verify;
      save_json((fs::path(g_dir) / "manifest.json").string(), out);
      std::cout << out.dump(2) << "\n";
      return exit_ok;
    }

    if (*cmd_hopflax) {
      fs::create_directories(h_dir);
      json times = parse_times(h_times);
      RunManifest manifest;
      manifest.command = "hopflax";
      manifest.parameters = {{"direction", h_direction},
                             {"times", times},
                             {"pair", h_pair},
                             {"tolerance", h_common.tolerance},
                             {"threads", h_common.threads}};
      manifest.input_hashes = {{h_grid, fnv1a_file(h_grid)}};

      GridFunction xi = grid_function_from_json(load_json(h_grid));
      json outputs = json::array();
      if (!h_pair) {
        bool forward = (h_direction == "forward");
        if (!forward && h_direction != "backward")
          throw ParseError("--direction must be forward or backward");
        for (std::size_t k = 0; k < times.size(); ++k) {
          double t = times[k].get<double>();
          GridFunction xt = forward ? hopf_lax_forward(xi, t, h_common.threads)
                                    : hopf_lax_backward(xi, t, h_common.threads);
          char name[64];
          std::snprintf(name, sizeof name, "potential_t%03zu.json", k);
          save_json((fs::path(h_dir) / name).string(), grid_function_to_json(xt));
          outputs.push_back({{"t", t}, {"path", name}});
          manifest.output_paths.push_back(name);
        }
      } else {
        if (h_grid1.empty()) throw ParseError("--pair mode needs --grid1");
        manifest.input_hashes[h_grid1] = fnv1a_file(h_grid1);
        GridFunction xibar1 = grid_function_from_json(load_json(h_grid1));
        for (std::size_t k = 0; k < times.size(); ++k) {
          double t = times[k].get<double>();
          GridFunction xt = hopf_lax_forward(xi, t, h_common.threads);
          GridFunction xbt = hopf_lax_backward(xibar1, t, h_common.threads);
          double h = xi.geom.spacing[0];
          ContactSet cs = contact_set(xt, xbt, t, std::max(h_common.tolerance, 4.0 * h * h));
          char name[64];
          std::snprintf(name, sizeof name, "contact_t%03zu.json", k);
          json mask = json::array(), minus = json::array(), plus = json::array();
          for (std::size_t n = 0; n < cs.mask.size(); ++n) {
            if (cs.mask[n]) mask.push_back(n);
            if (cs.minus_mask[n]) minus.push_back(n);
            if (cs.plus_mask[n]) plus.push_back(n);
          }
          save_json((fs::path(h_dir) / name).string(),
                    {{"format", "hk-contact-set"},
                     {"version", 1},
                     {"t", t},
                     {"tolerance", cs.tolerance},
                     {"nodes", mask},
                     {"pure_decay_nodes", minus},
                     {"pure_growth_nodes", plus}});
          outputs.push_back({{"t", t}, {"path", name}, {"contact_nodes", mask.size()}});
          manifest.output_paths.push_back(name);
        }
      }
      manifest.wall_time_seconds = watch.seconds();
      json out = manifest.to_json();
      out["outputs"] = outputs;
      save_json((fs::path(h_dir) / "manifest.json").string(), out);
      std::cout << out.dump(2) << "\n";
      return exit_ok;
    }

    if (*cmd_convexity) {
      DensityFunction E;
      RunManifest manifest;
      manifest.command = "convexity";
      if (!c_spec.empty()) {
        E = density_from_json(load_json(c_spec));
        manifest.input_hashes = {{c_spec, fnv1a_file(c_spec)}};
      } else if (!c_family.empty()) {
        E = density_from_spec(c_family);
      } else {
        throw ParseError("convexity needs --family or --spec");
      }

      json result;
      bool pass = true;
      if (c_optimal) {
        LambdaOpt opt = lambda_opt(E, c_dim);
        ConvexityReport rep = certify(E, c_dim, opt.lambda - 1e-9);
        result = convexity_report_to_json(rep);
        result["lambda_opt"] = opt.lambda;
        result["c_star"] = opt.c_star;
        pass = rep.overall;
      } else {
        ConvexityReport rep = certify(E, c_dim, c_lambda);
        result = convexity_report_to_json(rep);
        pass = rep.overall;
      }
      result["integrand"] = E.name;
      manifest.parameters = {{"dim", c_dim},
                             {"lambda", c_lambda},
                             {"optimal", c_optimal},
                             {"tolerance", c_common.tolerance}};
      manifest.wall_time_seconds = watch.seconds();
      result["manifest"] = manifest.to_json();
      if (!c_out.empty()) save_json(c_out, result);
      std::cout << result.dump(2) << "\n";
      return pass ? exit_ok : exit_certification_fail;
    }
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_numerical_failure;
  }
  return exit_ok;
}
