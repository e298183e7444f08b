// flab: identity suites, comparison checks and tensor dumps from the shell.
// Exit codes: 0 pass, 1 fail, 2 hypothesis unverified, 3 error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flab/harness.hpp"

using namespace flab;

namespace {

struct MetricArgs {
  std::string metric;
  int n = 0;
  std::vector<double> params;
};

void add_metric_options(CLI::App* cmd, MetricArgs& a) {
  cmd->add_option("--metric", a.metric, "catalog name or metric JSON file")->required();
  cmd->add_option("--n", a.n, "complex dimension (catalog metrics)");
  cmd->add_option("--params", a.params, "catalog parameters");
}

MetricSpec resolve_metric(const MetricArgs& a) {
  if (std::filesystem::is_regular_file(a.metric)) {
    MetricSpec m = load_metric(a.metric);
    if (a.n && a.n != m.n) throw Error("--n " + std::to_string(a.n) + " disagrees with the file (n = " + std::to_string(m.n) + ")");
    return m;
  }
  return catalog_get(a.metric, a.n ? a.n : default_n(a.metric), a.params);
}

Vec parse_vector(const std::string& text, const char* what) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw Error(std::string(what) + " must be a JSON array of numbers");
  }
  if (!j.is_array()) throw Error(std::string(what) + " must be a JSON array of numbers");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(std::string(what) + " must be a JSON array of numbers");
    v[static_cast<int>(i)] = j[i].get<double>();
  }
  return v;
}

/// {"x": [...], "y": [...]} in real coordinates, or {"z": [[re, im], ...],
/// "v": [[re, im], ...]}.
EvalPoint parse_point(const std::string& text, int n) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw Error("--at must be a JSON object");
  }
  auto complex_part = [&](const char* key) {
    const auto& a = j.at(key);
    CVec c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[static_cast<int>(i)] = {a[i].at(0).get<double>(), a[i].at(1).get<double>()};
    return to_real(c);
  };
  EvalPoint p;
  try {
    if (j.contains("x")) {
      p.x = parse_vector(j.at("x").dump(), "x");
      p.y = parse_vector(j.at("y").dump(), "y");
    } else {
      p.x = complex_part("z");
      p.y = complex_part("v");
    }
  } catch (const nlohmann::json::exception&) {
    throw Error("--at needs keys x, y (real) or z, v (complex pairs)");
  }
  if (p.x.size() != 2 * n || p.y.size() != 2 * n) throw Error("--at has wrong dimension for n = " + std::to_string(n));
  return p;
}

struct OutputArgs {
  std::string out;
  std::string format = "json";
};

void add_output_options(CLI::App* cmd, OutputArgs& o, std::vector<std::string> formats) {
  cmd->add_option("--out", o.out, "write the report here instead of stdout");
  cmd->add_option("--format", o.format, "output format")->check(CLI::IsMember(formats));
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error("write to '" + path + "' failed");
}

int finish(const Report& r, const OutputArgs& o) {
  const Format f = parse_format(o.format);
  if (o.out.empty()) {
    std::cout << render(r, f);
  } else {
    emit(r, f, o.out);
    std::cerr << r.check_id << " on " << r.metric << ": " << to_string(r.status()) << "\n";
  }
  return exit_code(r.status());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flab: complex Finsler identity and comparison checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // check
  MetricArgs check_metric;
  OutputArgs check_out;
  std::string suite;
  size_t samples = 100;
  std::uint64_t check_seed = 1;
  std::optional<double> tol;
  auto* check = app.add_subcommand("check", "run an identity suite");
  check->add_option("suite", suite, "suite name")->required()->check(CLI::IsMember(suite_names()));
  add_metric_options(check, check_metric);
  check->add_option("--samples", samples, "sample points")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "RNG seed");
  check->add_option("--tol", tol, "tolerance (default per suite)");
  add_output_options(check, check_out, {"json", "csv"});

  // geodesic
  MetricArgs geo_metric;
  std::string from, dir, geo_out, geo_format = "csv";
  double len = 0;
  bool normalize = false;
  auto* geo = app.add_subcommand("geodesic", "integrate a unit-speed geodesic");
  add_metric_options(geo, geo_metric);
  geo->add_option("--from", from, "start point, JSON array of 2n reals")->required();
  geo->add_option("--dir", dir, "initial velocity, JSON array of 2n reals with F = 1")->required();
  geo->add_option("--len", len, "length")->required();
  geo->add_flag("--normalize", normalize, "rescale --dir to unit speed first");
  geo->add_option("--out", geo_out, "output file");
  geo->add_option("--format", geo_format, "csv (t, x, xdot) or json summary")->check(CLI::IsMember({"csv", "json"}));

  // compare
  MetricArgs cmp_metric;
  OutputArgs cmp_out;
  std::string kind, radii_text, measure = "riemannian_det", center_text;
  double lambda = 0;
  size_t directions = 8, geodesics = 50, budget = 1000000, batches = 20;
  std::uint64_t cmp_seed = 1;
  auto* cmp = app.add_subcommand("compare", "comparison theorem checks");
  cmp->add_option("kind", kind, "laplacian, diameter or volume")->required()->check(CLI::IsMember({"laplacian", "diameter", "volume"}));
  add_metric_options(cmp, cmp_metric);
  cmp->add_option("--lambda", lambda, "curvature bound")->required();
  cmp->add_option("--radii", radii_text, "radius grid a:b:k");
  cmp->add_option("--directions", directions, "laplacian: geodesic directions")->check(CLI::PositiveNumber);
  cmp->add_option("--geodesics", geodesics, "diameter: seeded geodesics")->check(CLI::PositiveNumber);
  cmp->add_option("--samples", budget, "volume: direction-radius samples per ball")->check(CLI::PositiveNumber);
  cmp->add_option("--batches", batches, "volume: batches for the error estimate")->check(CLI::Range(2, 1000));
  cmp->add_option("--measure", measure, "volume: busemann_hausdorff, riemannian_det or density:<expr>");
  cmp->add_option("--center", center_text, "base point, JSON array (default origin)");
  cmp->add_option("--seed", cmp_seed, "RNG seed");
  add_output_options(cmp, cmp_out, {"json", "csv", "plotdata"});

  // tensors
  MetricArgs ten_metric;
  std::string at, ten_out;
  auto* ten = app.add_subcommand("tensors", "dump real and complex tensor sets at a point");
  add_metric_options(ten, ten_metric);
  ten->add_option("--at", at, R"(JSON {"x":[..],"y":[..]} or {"z":[[re,im],..],"v":[[re,im],..]})")->required();
  ten->add_option("--out", ten_out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (*check) {
      SamplingConfig cfg;
      cfg.seed = check_seed;
      cfg.count = samples;
      return finish(run_suite(suite, resolve_metric(check_metric), cfg, tol), check_out);
    }
    if (*geo) {
      const MetricSpec m = resolve_metric(geo_metric);
      const Vec x0 = parse_vector(from, "--from");
      Vec y0 = parse_vector(dir, "--dir");
      if (x0.size() != 2 * m.n || y0.size() != 2 * m.n) throw Error("--from/--dir need 2n = " + std::to_string(2 * m.n) + " entries");
      if (normalize) y0 = unit_direction(m, x0, y0);
      const Geodesic g = integrate_geodesic(m, x0, y0, len);
      if (geo_format == "csv") {
        write_text(to_csv(g), geo_out);
      } else {
        nlohmann::ordered_json j;
        j["schema"] = "flab.geodesic/1";
        j["version"] = kVersion;
        j["metric"] = m.id();
        j["from"] = std::vector<double>(x0.data(), x0.data() + x0.size());
        j["dir"] = std::vector<double>(g.y0.data(), g.y0.data() + g.y0.size());
        j["length"] = len;
        j["t_end"] = g.t_end();
        j["chart_exit"] = g.chart_exit;
        const Vec xe = g.x(g.t_end()), ve = g.velocity(g.t_end());
        j["x_end"] = std::vector<double>(xe.data(), xe.data() + xe.size());
        j["xdot_end"] = std::vector<double>(ve.data(), ve.data() + ve.size());
        j["max_speed_drift"] = g.max_speed_drift;
        j["max_residual"] = g.max_residual;
        j["steps"] = g.sol.steps.size();
        write_text(j.dump(2) + "\n", geo_out);
      }
      if (g.chart_exit) std::cerr << "geodesic left the chart at t = " << g.t_end() << "\n";
      return 0;
    }
    if (*cmp) {
      const MetricSpec m = resolve_metric(cmp_metric);
      const Vec center = center_text.empty() ? Vec() : parse_vector(center_text, "--center");
      if (kind == "laplacian") {
        ComparisonConfig cfg;
        cfg.seed = cmp_seed;
        cfg.directions = directions;
        cfg.center = center;
        return finish(verify_laplacian_comparison(m, lambda, parse_grid(radii_text.empty() ? "0.2:1.4:7" : radii_text), cfg),
                      cmp_out);
      }
      if (kind == "diameter") {
        DiameterConfig cfg;
        cfg.seed = cmp_seed;
        cfg.geodesics = geodesics;
        return finish(verify_diameter(m, lambda, cfg), cmp_out);
      }
      VolumeRatioConfig cfg;
      cfg.center = center;
      cfg.mc.seed = cmp_seed;
      cfg.mc.batches = batches;
      cfg.mc.directions = std::max<size_t>(batches, static_cast<size_t>(std::lround(std::sqrt(static_cast<double>(budget)))));
      cfg.mc.radial_samples = std::max<size_t>(1, budget / cfg.mc.directions);
      return finish(volume_ratio(m, Measure::parse(measure), lambda, parse_grid(radii_text.empty() ? "0.3:0.9:3" : radii_text), cfg)
                        .report,
                    cmp_out);
    }
    if (*ten) {
      const MetricSpec m = resolve_metric(ten_metric);
      const EvalPoint p = parse_point(at, m.n);
      nlohmann::json j;
      j["schema"] = "flab.tensors/1";
      j["version"] = kVersion;
      j["metric"] = metric_to_json(m);
      j["real"] = to_json(real_tensors(m, p));
      j["complex"] = to_json(complex_tensors(m, p));
      write_text(j.dump(2) + "\n", ten_out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "flab: error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "flab: error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
