#pragma once

// Identity suites, comparison-theorem verifications and the volume
// comparison. Everything here returns a Report; the CLI only parses
// arguments and emits.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "flab/bridge.hpp"
#include "flab/geodesic.hpp"
#include "flab/parallel.hpp"
#include "flab/report.hpp"

namespace flab {

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"homogeneity", "j_invariance", "kahler", "spray_correspondence",
                                                 "parallelism", "cross_engine"};
  return names;
}

inline double default_tolerance(const std::string& suite) {
  if (suite == "homogeneity" || suite == "j_invariance") return 1e-9;
  if (suite == "cross_engine") return 1e-6;
  return 1e-8;
}

namespace detail {

/// Per-sample residual vectors; an empty error string means the sample was
/// evaluated.
struct SampleRun {
  std::vector<std::vector<double>> values;
  std::vector<std::string> errors;
};

template <class F>
SampleRun evaluate_samples(size_t count, F&& f) {
  SampleRun run;
  run.values.resize(count);
  run.errors.resize(count);
  parallel_for(count, [&](size_t i) {
    try {
      run.values[i] = f(i);
    } catch (const Error& e) {
      run.errors[i] = e.what();
      if (run.errors[i].empty()) run.errors[i] = "evaluation failed";
    }
  });
  return run;
}

inline Report start_report(const std::string& id, const MetricSpec& m, std::uint64_t seed) {
  Report r;
  r.check_id = id;
  r.metric = m.id();
  r.params = m.params;
  r.n = m.n;
  r.seed = seed;
  return r;
}

/// Records failures and returns column c of the evaluated samples.
inline std::vector<double> column(const SampleRun& run, size_t c) {
  std::vector<double> out;
  for (size_t i = 0; i < run.values.size(); ++i)
    if (run.errors[i].empty()) out.push_back(run.values[i][c]);
  return out;
}

inline void record_failures(Report& r, const SampleRun& run) {
  r.samples = run.values.size();
  for (size_t i = 0; i < run.errors.size(); ++i)
    if (!run.errors[i].empty()) r.record_failure("sample " + std::to_string(i) + ": " + run.errors[i]);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  std::uint32_t out[2];
  sq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// identity suites

/// Runs one identity suite on seeded sample points. Sample failures are
/// recorded; more than 1% of them fails the report.
inline Report run_suite(const std::string& suite, const MetricSpec& spec, const SamplingConfig& cfg,
                        std::optional<double> tolerance = std::nullopt) {
  const auto t0 = std::chrono::steady_clock::now();
  const double tol = tolerance.value_or(default_tolerance(suite));
  MetricSpec m = spec;
  if (cfg.z_radius > 0) m.sampling.z_radius = cfg.z_radius;
  const std::vector<EvalPoint> pts = sample_points(m, cfg.seed, cfg.count);
  Report r = detail::start_report(suite, m, cfg.seed);
  const bool hermitian = m.declares(Property::hermitian);

  if (suite == "homogeneity") {
    Rng rng(detail::derive_seed(cfg.seed, 1));
    std::uniform_real_distribution<double> mod(0.5, 2.0), arg(0, 2 * M_PI);
    std::vector<std::complex<double>> zeta(cfg.count);
    for (auto& c : zeta) c = std::polar(mod(rng), arg(rng));
    const HomogeneitySubject subject{m.expr, 1, 1};
    auto run = detail::evaluate_samples(cfg.count, [&](size_t i) {
      const EvalPoint& p = pts[i];
      const std::complex<double> g = m.evaluate_complex(p.x, p.y);
      if (!(g.real() > 0)) throw DomainError("G <= 0 at sample");
      const std::complex<double> gs = m.evaluate_complex(p.x, to_real(to_complex(p.y) * zeta[i]));
      const HomogeneityResiduals h = homogeneity_check(subject, p);
      return std::vector<double>{std::abs(gs.real() - std::norm(zeta[i]) * g.real()) / g.real(),
                                 std::max(std::abs(g.imag()), std::abs(gs.imag())), h.declared,
                                 std::max({h.R_y, h.I_y, h.R_u, h.I_u}), std::max(h.holomorphic, h.antiholomorphic)};
    });
    detail::record_failures(r, run);
    r.checks.push_back(make_check("G(z,zeta v)=|zeta|^2 G", detail::column(run, 0), tol));
    r.checks.push_back(make_check("imaginary_part", detail::column(run, 1), std::max(tol, 1e-12)));
    r.checks.push_back(make_check("bidegree_(1,1)", detail::column(run, 2), tol));
    r.checks.push_back(make_check("real_euler", detail::column(run, 3), tol));
    r.checks.push_back(make_check("wirtinger_euler", detail::column(run, 4), tol));
  } else if (suite == "j_invariance") {
    Rng rng(detail::derive_seed(cfg.seed, 2));
    std::vector<Vec> X(cfg.count);
    for (auto& x : X) x = sample_ball(rng, 2 * m.n, 2.0);
    auto run = detail::evaluate_samples(cfg.count, [&](size_t i) {
      const RealTensorSet t = spray_and_connection(eval_partials(m, pts[i], 3, 1));
      const JInvariance j = j_invariance_check(t, X[i]);
      const double full = std::max(j.d, j.e), cartan = t.C.max_abs();
      return std::vector<double>{j.a, j.b, j.c, full, cartan, (full < 1e-9) == (cartan < 1e-9) ? 0.0 : 1.0};
    });
    detail::record_failures(r, run);
    r.checks.push_back(make_check("g_y(Jy,JX)=g_y(y,X)", detail::column(run, 0), tol));
    r.checks.push_back(make_check("g_y(y,Jy)=0", detail::column(run, 1), tol));
    r.checks.push_back(make_check("g_y(y,y)=g_y(Jy,Jy)", detail::column(run, 2), tol));
    const Check full = make_check("full_J_invariance", detail::column(run, 3), tol, !hermitian,
                                  hermitian ? "" : "asserted only for metrics declared hermitian");
    r.checks.push_back(full);
    r.checks.push_back(make_check("cartan_torsion", detail::column(run, 4), tol, true));
    r.checks.push_back(make_check("invariance_iff_riemannian", detail::column(run, 5), 0.5, false,
                                  "1 marks a sample where full J-invariance and vanishing Cartan torsion disagree"));
    if (!hermitian && !full.pass) r.notes.push_back("partial: unconditional identities hold, full J-invariance fails");
  } else if (suite == "kahler") {
    auto run = detail::evaluate_samples(cfg.count, [&](size_t i) {
      const KahlerResiduals k = kahler_residuals(m, pts[i]);
      return std::vector<double>{k.strong, k.weak};
    });
    detail::record_failures(r, run);
    r.checks.push_back(make_check("strong_kahler", detail::column(run, 0), tol));
    r.checks.push_back(make_check("weak_kahler", detail::column(run, 1), tol));
  } else if (suite == "spray_correspondence") {
    auto run = detail::evaluate_samples(cfg.count, [&](size_t i) {
      const KahlerResiduals k = kahler_residuals(m, pts[i]);
      return std::vector<double>{spray_correspondence(m, pts[i]), k.weak};
    });
    detail::record_failures(r, run);
    r.checks.push_back(make_check("complex_spray=G^b+iG^(b+n)", detail::column(run, 0), tol));
    r.checks.push_back(make_check("weak_kahler", detail::column(run, 1), tol, true));
  } else if (suite == "parallelism") {
    auto run = detail::evaluate_samples(cfg.count, [&](size_t i) {
      const Parallelism p = parallelism_residual(m, pts[i]);
      return std::vector<double>{p.r0, p.r1, p.r2};
    });
    detail::record_failures(r, run);
    r.checks.push_back(make_check("J_commutes_with_connection", detail::column(run, 0), tol));
    r.checks.push_back(make_check("J_commutes_with_berwald", detail::column(run, 1), tol));
    r.checks.push_back(make_check("horizontal_derivative_of_J", detail::column(run, 2), tol));
  } else if (suite == "cross_engine") {
    const auto ref = m.reference.find("holomorphic_curvature");
    auto run = detail::evaluate_samples(cfg.count, [&](size_t i) {
      const EvalPoint& p = pts[i];
      const double H = holomorphic_curvature(m, p);
      const SprayData d = spray_data(m, p.x, p.y, 2);
      const double K = flag_curvature_from(d.g, d.Rik, p.y, apply_J(p.y));
      const double weak = kahler_residuals(m, p).weak;
      return std::vector<double>{std::abs(H - K), ref == m.reference.end() ? 0.0 : std::abs(H - ref->second), weak, H};
    });
    detail::record_failures(r, run);
    const std::vector<double> weak = detail::column(run, 2);
    const double wmax = weak.empty() ? 0 : *std::max_element(weak.begin(), weak.end());
    r.hypotheses_ok = !weak.empty() && wmax < 1e-8;
    r.hypotheses.push_back(std::string("weakly kahler (max residual ") + format_double(wmax) + " < 1e-8): " +
                           (r.hypotheses_ok ? "verified" : "unverified"));
    r.checks.push_back(make_check("|H(v)-K(y,Jy)|", detail::column(run, 0), tol));
    if (ref != m.reference.end())
      r.checks.push_back(make_check("|H-reference|", detail::column(run, 1), tol, false,
                                    "reference H = " + format_double(ref->second)));
    r.checks.push_back(make_check("holomorphic_curvature", detail::column(run, 3),
                                  std::numeric_limits<double>::infinity(), true, "raw values, not residuals"));
    r.notes.push_back("H normalized so that fubini_study has H = 4");
  } else {
    throw Error("unknown suite '" + suite + "'");
  }
  r.notes.push_back("tolerance " + format_double(tol));
  r.runtime_seconds = detail::seconds_since(t0);
  return r;
}

// ---------------------------------------------------------------------------
// comparison theorems

/// Samples x -> ct_lambda(x); points where it is undefined become NaN
/// (written as markers by the plot emitter).
inline Series ct_series(double lambda, const std::vector<double>& grid, const std::string& name = "ct") {
  Series s;
  s.name = name;
  for (double t : grid) {
    s.x.push_back(t);
    try {
      s.y.push_back(ct_lambda(lambda, t));
    } catch (const Error&) {
      s.y.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return s;
}

/// a:b:k -> k evenly spaced values from a to b.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) throw Error("grid must look like a:b:k");
  double a = 0, b = 0;
  long k = 0;
  try {
    size_t pos = 0;
    a = std::stod(parts[0], &pos);
    if (pos != parts[0].size()) throw std::invalid_argument("a");
    b = std::stod(parts[1], &pos);
    if (pos != parts[1].size()) throw std::invalid_argument("b");
    k = std::stol(parts[2], &pos);
    if (pos != parts[2].size()) throw std::invalid_argument("k");
  } catch (const std::exception&) {
    throw Error("grid must look like a:b:k, got '" + text + "'");
  }
  if (k < 1) throw Error("grid needs k >= 1");
  std::vector<double> g;
  for (long i = 0; i < k; ++i) g.push_back(k == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(k - 1));
  return g;
}

struct ComparisonConfig {
  std::uint64_t seed = 1;
  size_t directions = 8;
  size_t hypothesis_samples = 50;
  Vec center;  // empty: origin
  JacobiOptions jacobi;
};

namespace detail {

struct CurvatureBounds {
  double min_orthogonal_ricci = std::numeric_limits<double>::infinity();
  double min_holomorphic = std::numeric_limits<double>::infinity();
  size_t samples = 0;
  size_t failures = 0;
};

/// Lower bounds of Ric_perp and H over the seeded sample points and the
/// extra (x, y) pairs supplied by the caller.
inline CurvatureBounds sample_curvature_bounds(const MetricSpec& m, std::uint64_t seed, size_t count,
                                               const std::vector<EvalPoint>& extra) {
  std::vector<EvalPoint> pts = sample_points(m, seed, count);
  pts.insert(pts.end(), extra.begin(), extra.end());
  auto run = evaluate_samples(pts.size(), [&](size_t i) {
    const Vec y = unit_direction(m, pts[i].x, pts[i].y);
    const OrthogonalRicci o = orthogonal_ricci(m, {pts[i].x, y});
    return std::vector<double>{o.value, holomorphic_curvature(m, {pts[i].x, y})};
  });
  CurvatureBounds b;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (!run.errors[i].empty()) {
      ++b.failures;
      continue;
    }
    ++b.samples;
    b.min_orthogonal_ricci = std::min(b.min_orthogonal_ricci, run.values[i][0]);
    b.min_holomorphic = std::min(b.min_holomorphic, run.values[i][1]);
  }
  return b;
}

inline std::string verdict(const std::string& what, double found, double needed, bool ok) {
  return what + ": min sampled " + format_double(found) + " vs required " + format_double(needed) + " -> " +
         (ok ? "verified" : "unverified");
}

}  // namespace detail

/// Laplacian and Hessian comparison for the distance from a point:
/// Box_perp r <= (2n-2) ct_lambda(r) and H(r)(V, V) <= 2 ct_lambda(2r).
/// One table row per (direction, radius); rows past a conjugate point or
/// the chart are skipped.
inline Report verify_laplacian_comparison(const MetricSpec& m, double lambda, const std::vector<double>& radii,
                                          const ComparisonConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (radii.empty()) throw Error("no radii given");
  for (double r : radii)
    if (!(r > 0)) throw Error("radii must be positive");
  const int N = 2 * m.n;
  const Vec p = cfg.center.size() ? cfg.center : Vec::Zero(N);
  if (p.size() != N) throw Error("center has wrong dimension");
  if (!m.in_domain(p)) throw DomainError("center outside the metric's domain");
  const double rmax = *std::max_element(radii.begin(), radii.end());
  const bool has_perp = m.n >= 2;

  Report rep = detail::start_report("laplacian_comparison", m, cfg.seed);
  rep.params.push_back(lambda);
  rep.table.columns = {"direction", "r",   "box_perp", "box_perp_bound", "box_perp_slack",
                       "hvv",       "hvv_bound", "hvv_slack", "skipped"};

  Rng rng(detail::derive_seed(cfg.seed, 3));
  std::vector<Vec> dirs;
  for (size_t d = 0; d < cfg.directions; ++d) dirs.push_back(unit_direction(m, p, sample_sphere(rng, N)));

  struct Row {
    double box_perp, hvv, asym;
    int skipped;  // 0 evaluated, 1 conjugate point, 2 chart exit
    EvalPoint at;
  };
  std::vector<std::vector<Row>> rows(dirs.size());
  std::vector<std::string> errors(dirs.size());
  parallel_for(dirs.size(), [&](size_t d) {
    try {
      JacobiOptions jo = cfg.jacobi;
      jo.stop_at_conjugate = true;
      const JacobiSolution J = integrate_jacobi(m, p, dirs[d], rmax, jo);
      for (double r : radii) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        Row row{nan, nan, nan, 0, {}};
        if (r >= J.conjugate_time) {
          row.skipped = 1;
        } else if (r > J.t_end() + 1e-12) {
          row.skipped = 2;
        } else {
          try {
            const DistanceProbe pr = distance_hessian(J, r);
            row.box_perp = pr.box_perp;
            row.hvv = pr.hvv;
            row.asym = pr.asymmetry;
            row.at = {pr.x, pr.T};
          } catch (const ConjugateReached&) {
            row.skipped = 1;
          }
        }
        rows[d].push_back(row);
      }
    } catch (const Error& e) {
      errors[d] = e.what();
    }
  });

  std::vector<EvalPoint> along;
  for (const auto& rs : rows)
    for (const Row& row : rs)
      if (row.skipped == 0) along.push_back(row.at);
  const detail::CurvatureBounds cb =
      detail::sample_curvature_bounds(m, detail::derive_seed(cfg.seed, 4), cfg.hypothesis_samples, along);
  const bool ric_ok = cb.samples > 0 && cb.min_orthogonal_ricci >= (2 * m.n - 2) * lambda - 1e-6;
  const bool hol_ok = cb.samples > 0 && cb.min_holomorphic >= 4 * lambda - 1e-6;
  if (has_perp) {
    rep.hypotheses.push_back(detail::verdict("box_perp comparison needs Ric_perp >= (2n-2) lambda", cb.min_orthogonal_ricci,
                                             (2 * m.n - 2) * lambda, ric_ok));
  } else {
    rep.hypotheses.push_back("box_perp comparison: n = 1, orthogonal part is empty, skipped");
  }
  rep.hypotheses.push_back(
      detail::verdict("hvv comparison needs H >= 4 lambda", cb.min_holomorphic, 4 * lambda, hol_ok));
  rep.hypotheses_ok = (ric_ok || !has_perp) && hol_ok;
  if (cb.failures) rep.notes.push_back(std::to_string(cb.failures) + " curvature samples could not be evaluated");

  std::vector<double> box_viol, hvv_viol, box_gap, hvv_gap, asym;
  size_t skipped_conj = 0, skipped_chart = 0;
  Series bound_box{"box_perp_bound", {}, {}}, bound_hvv{"hvv_bound", {}, {}};
  for (double r : radii) {
    bound_box.x.push_back(r);
    bound_hvv.x.push_back(r);
    double bb = std::numeric_limits<double>::quiet_NaN(), bh = bb;
    try {
      bb = (2 * m.n - 2) * ct_lambda(lambda, r);
    } catch (const PoleError&) {
    }
    try {
      bh = 2 * ct_lambda(lambda, 2 * r);
    } catch (const PoleError&) {
    }
    bound_box.y.push_back(has_perp ? bb : std::numeric_limits<double>::quiet_NaN());
    bound_hvv.y.push_back(bh);
  }
  for (size_t d = 0; d < dirs.size(); ++d) {
    ++rep.samples;
    if (!errors[d].empty()) {
      rep.record_failure("direction " + std::to_string(d) + ": " + errors[d]);
      continue;
    }
    Series sb{"box_perp[" + std::to_string(d) + "]", {}, {}}, sh{"hvv[" + std::to_string(d) + "]", {}, {}};
    for (size_t k = 0; k < radii.size(); ++k) {
      const Row& row = rows[d][k];
      const double r = radii[k];
      const double nan = std::numeric_limits<double>::quiet_NaN();
      double bslack = nan, hslack = nan;
      int skipped = row.skipped;
      if (skipped == 1) ++skipped_conj;
      if (skipped == 2) ++skipped_chart;
      if (skipped == 0) {
        if (has_perp && std::isfinite(bound_box.y[k])) {
          bslack = bound_box.y[k] - row.box_perp;
          box_viol.push_back(std::max(0.0, -bslack));
          box_gap.push_back(std::abs(bslack));
        }
        if (std::isfinite(bound_hvv.y[k])) {
          hslack = bound_hvv.y[k] - row.hvv;
          hvv_viol.push_back(std::max(0.0, -hslack));
          hvv_gap.push_back(std::abs(hslack));
        }
        asym.push_back(row.asym);
        sb.x.push_back(r);
        sb.y.push_back(row.box_perp);
        sh.x.push_back(r);
        sh.y.push_back(row.hvv);
      }
      rep.table.rows.push_back({static_cast<double>(d), r, has_perp ? row.box_perp : nan, has_perp ? bound_box.y[k] : nan,
                                bslack, row.hvv, bound_hvv.y[k], hslack, static_cast<double>(skipped)});
    }
    if (has_perp) rep.plot.push_back(std::move(sb));
    rep.plot.push_back(std::move(sh));
  }
  if (has_perp) rep.plot.push_back(bound_box);
  rep.plot.push_back(bound_hvv);

  if (has_perp) {
    rep.checks.push_back(make_check("box_perp_violation", box_viol, 1e-4, !ric_ok, "max(0, -(bound - box_perp))"));
    rep.checks.push_back(make_check("box_perp_gap", box_gap, 1e-4, true, "|bound - box_perp|, zero on the model"));
  }
  rep.checks.push_back(make_check("hvv_violation", hvv_viol, 1e-4, !hol_ok, "max(0, -(bound - H(V,V)))"));
  rep.checks.push_back(make_check("hvv_gap", hvv_gap, 1e-4, true, "|bound - H(V,V)|, zero on the model"));
  rep.checks.push_back(make_check("hessian_asymmetry", asym, 1e-6, true));
  if (skipped_conj) rep.notes.push_back(std::to_string(skipped_conj) + " rows skipped: conjugate point reached");
  if (skipped_chart) rep.notes.push_back(std::to_string(skipped_chart) + " rows skipped: geodesic left the chart");
  rep.notes.push_back("skipped column: 0 evaluated, 1 conjugate point, 2 chart exit");
  rep.runtime_seconds = detail::seconds_since(t0);
  return rep;
}

struct DiameterConfig {
  std::uint64_t seed = 1;
  size_t geodesics = 50;
  size_t hypothesis_samples = 50;
  JacobiOptions jacobi;
};

/// Conjugate-point bound along seeded unit geodesics: t* <= pi / sqrt(lambda)
/// under Ric_perp >= (2n-2) lambda, or t* <= pi / (2 sqrt(lambda)) under
/// H >= 4 lambda when n = 1.
inline Report verify_diameter(const MetricSpec& m, double lambda, const DiameterConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(lambda > 0)) throw Error("λ must be positive");
  const bool holomorphic_route = m.n == 1;
  const double bound = holomorphic_route ? M_PI / (2 * std::sqrt(lambda)) : M_PI / std::sqrt(lambda);

  Report rep = detail::start_report("diameter", m, cfg.seed);
  rep.params.push_back(lambda);
  const detail::CurvatureBounds cb =
      detail::sample_curvature_bounds(m, detail::derive_seed(cfg.seed, 5), cfg.hypothesis_samples, {});
  if (holomorphic_route) {
    rep.hypotheses_ok = cb.samples > 0 && cb.min_holomorphic >= 4 * lambda - 1e-6;
    rep.hypotheses.push_back(detail::verdict("n = 1 route needs H >= 4 lambda", cb.min_holomorphic, 4 * lambda, rep.hypotheses_ok));
  } else {
    rep.hypotheses_ok = cb.samples > 0 && cb.min_orthogonal_ricci >= (2 * m.n - 2) * lambda - 1e-6;
    rep.hypotheses.push_back(detail::verdict("needs Ric_perp >= (2n-2) lambda", cb.min_orthogonal_ricci,
                                             (2 * m.n - 2) * lambda, rep.hypotheses_ok));
  }

  Rng rng(detail::derive_seed(cfg.seed, 6));
  std::vector<EvalPoint> starts;
  for (size_t i = 0; i < cfg.geodesics; ++i) {
    EvalPoint s = sample_point(m, rng);
    s.y = unit_direction(m, s.x, s.y);
    starts.push_back(s);
  }
  const double search = 1.25 * bound;
  std::vector<double> tstar(starts.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<int> exited(starts.size(), 0);
  std::vector<std::string> errors(starts.size());
  parallel_for(starts.size(), [&](size_t i) {
    try {
      tstar[i] = conjugate_point(m, starts[i].x, starts[i].y, search, cfg.jacobi);
    } catch (const ChartExit&) {
      exited[i] = 1;
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  rep.table.columns = {"geodesic", "conjugate_time", "bound", "chart_exit"};
  std::vector<double> excess, times;
  size_t exits = 0;
  for (size_t i = 0; i < starts.size(); ++i) {
    ++rep.samples;
    if (!errors[i].empty()) {
      rep.record_failure("geodesic " + std::to_string(i) + ": " + errors[i]);
      continue;
    }
    exits += exited[i];
    rep.table.rows.push_back({static_cast<double>(i), tstar[i], bound, static_cast<double>(exited[i])});
    if (exited[i]) continue;
    excess.push_back(std::max(0.0, tstar[i] - bound));
    times.push_back(tstar[i]);
  }
  rep.checks.push_back(make_check("conjugate_time_excess", excess, 1e-6, false, "max(0, t* - bound); inf if none found by 1.25 bound"));
  rep.checks.push_back(make_check("conjugate_time", times, std::numeric_limits<double>::infinity(), true, "raw t* values"));
  rep.notes.push_back("bound " + format_double(bound) + (holomorphic_route ? " (holomorphic route)" : ""));
  rep.notes.push_back(std::to_string(exits) + " geodesics left the chart and were excluded");
  rep.runtime_seconds = detail::seconds_since(t0);
  return rep;
}

// ---------------------------------------------------------------------------
// volume comparison

/// Constant holomorphic curvature 4 lambda in dimension n, built from the
/// catalog by rescaling.
inline MetricSpec model_metric(double lambda, int n) {
  if (lambda == 0) return catalog_get("euclidean", n);
  MetricSpec m = catalog_get(lambda > 0 ? "fubini_study" : "complex_hyperbolic", n);
  const double s = 1 / std::abs(lambda);
  if (s != 1) {
    // s G has curvature 1/s times that of G
    m.expr = MetricExpr::constant(s) * m.expr;
    m.name += "_scaled";
    m.params = {lambda};
    m.reference.clear();
  }
  return m;
}

struct VolumeEstimate {
  std::string metric;
  std::string measure;
  Vec center;
  std::vector<double> radii;
  std::vector<double> volume, sigma;
  std::vector<double> model_volume, model_sigma;
  VolumeCurve curve, model_curve;
};

struct VolumeRatioConfig {
  VolumeConfig mc;
  size_t s_samples = 20;
  Vec center;  // empty: origin
};

struct VolumeRatioResult {
  VolumeEstimate estimate;
  Report report;
};

namespace detail {

inline std::vector<double> batch_sigma(const VolumeCurve& c) {
  const size_t B = c.batch_volume.size();
  std::vector<double> s(c.radii.size(), 0);
  for (size_t k = 0; k < c.radii.size(); ++k) {
    double mean = 0, sq = 0;
    for (const auto& b : c.batch_volume) mean += b[k];
    mean /= static_cast<double>(B);
    for (const auto& b : c.batch_volume) sq += (b[k] - mean) * (b[k] - mean);
    s[k] = B > 1 ? std::sqrt(sq / static_cast<double>(B - 1) / static_cast<double>(B)) : 0;
  }
  return s;
}

}  // namespace detail

/// Ball volumes around the center for the metric and for the model of
/// curvature lambda, both by the same polar Monte-Carlo pipeline (the model
/// on an independent stream). Passes iff every grid pair satisfies
/// Vol(R)/Vol(r) <= V(R)/V(r) (1 + 3 sigma).
inline VolumeRatioResult volume_ratio(const MetricSpec& m, const Measure& mu, double lambda,
                                      const std::vector<double>& radii, const VolumeRatioConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (radii.size() < 2) throw Error("volume ratio needs at least two radii");
  for (size_t k = 0; k < radii.size(); ++k)
    if (!(radii[k] > 0) || (k && !(radii[k] > radii[k - 1]))) throw Error("radii must be positive and increasing");
  if (cfg.mc.batches < 2) throw Error("volume ratio needs at least two batches");
  const int N = 2 * m.n;
  const Vec p = cfg.center.size() ? cfg.center : Vec::Zero(N);
  if (p.size() != N) throw Error("center has wrong dimension");

  VolumeRatioResult out;
  Report& rep = out.report;
  rep = detail::start_report("volume_ratio", m, cfg.mc.seed);
  rep.params.push_back(lambda);

  // S-curvature along random directions, at the center and at seeded points
  std::vector<EvalPoint> pts = sample_points(m, detail::derive_seed(cfg.mc.seed, 7), cfg.s_samples);
  Rng rng(detail::derive_seed(cfg.mc.seed, 8));
  for (size_t i = 0; i < std::max<size_t>(1, cfg.s_samples / 4); ++i) pts.push_back({p, sample_sphere(rng, N)});
  auto srun = detail::evaluate_samples(pts.size(), [&](size_t i) {
    return std::vector<double>{std::abs(s_curvature(m, {pts[i].x, unit_direction(m, pts[i].x, pts[i].y)}, mu))};
  });
  const std::vector<double> svals = detail::column(srun, 0);
  const double smax = svals.empty() ? std::numeric_limits<double>::infinity() : *std::max_element(svals.begin(), svals.end());
  rep.hypotheses_ok = !svals.empty() && smax < 1e-6;
  rep.hypotheses.push_back("S-curvature under " + mu.name() + ": max sampled |S| " + format_double(smax) + " < 1e-6 -> " +
                           (rep.hypotheses_ok ? "verified" : "unverified"));
  rep.checks.push_back(make_check("s_curvature", svals, 1e-6, true));

  const MetricSpec model = model_metric(lambda, m.n);
  VolumeConfig mcfg = cfg.mc;
  mcfg.stream = cfg.mc.stream + 1;
  VolumeEstimate& est = out.estimate;
  est.metric = m.id();
  est.measure = mu.name();
  est.center = p;
  est.radii = radii;
  est.curve = volume_curve(m, p, mu, radii, cfg.mc);
  est.model_curve = volume_curve(model, Vec::Zero(N), mu, radii, mcfg);
  est.volume = est.curve.volume;
  est.sigma = detail::batch_sigma(est.curve);
  est.model_volume = est.model_curve.volume;
  est.model_sigma = detail::batch_sigma(est.model_curve);
  rep.samples = est.curve.samples_per_ball;

  rep.table.columns = {"r", "volume", "sigma", "model_volume", "model_sigma"};
  for (size_t k = 0; k < radii.size(); ++k)
    rep.table.rows.push_back({radii[k], est.volume[k], est.sigma[k], est.model_volume[k], est.model_sigma[k]});
  rep.plot.push_back({"volume", radii, est.volume});
  rep.plot.push_back({"model_volume", radii, est.model_volume});

  std::vector<double> excess, deviation, rel_sigma, monotone;
  for (size_t hi = 1; hi < radii.size(); ++hi) {
    monotone.push_back(est.volume[hi - 1] - est.volume[hi] - 3 * std::hypot(est.sigma[hi], est.sigma[hi - 1]));
    for (size_t lo = 0; lo < hi; ++lo) {
      const double rm = est.curve.ratio(hi, lo), rk = est.model_curve.ratio(hi, lo);
      const double sm = est.curve.ratio_sigma(hi, lo) / rm, sk = est.model_curve.ratio_sigma(hi, lo) / rk;
      const double sigma = std::hypot(sm, sk);
      excess.push_back(rm / rk - 1 - 3 * sigma);
      deviation.push_back(std::abs(rm / rk - 1) / sigma);
      rel_sigma.push_back(sigma);
    }
  }
  rep.checks.push_back(make_check("ratio_excess", excess, 0, false, "Vol(R)/Vol(r) / model ratio - 1 - 3 sigma, pass iff < 0"));
  rep.checks.push_back(make_check("ratio_deviation_sigma", deviation, 3, true, "|ratio / model ratio - 1| in sigma units"));
  rep.checks.push_back(make_check("monotone_volume", monotone, 0, true, "Vol(r) - Vol(R) - 3 sigma, negative when monotone"));
  const Check rs = make_check("ratio_relative_sigma", rel_sigma, 0.05, false);
  rep.checks.push_back(rs);
  if (!rs.pass) rep.notes.push_back("Monte-Carlo variance too high: increase the sample budget");
  rep.notes.push_back("model " + model.id() + " on stream " + std::to_string(mcfg.stream));
  rep.notes.push_back(std::to_string(est.curve.chart_exits) + " chart exits, " +
                      std::to_string(est.curve.conjugate_truncations) + " conjugate truncations");
  rep.runtime_seconds = detail::seconds_since(t0);
  return out;
}

}  // namespace flab
