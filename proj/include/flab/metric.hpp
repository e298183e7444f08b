#pragma once

// Metric definitions: the MetricSpec type, the built-in catalog, JSON
// loading, sampling of evaluation points and the homogeneity validator.

#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "flab/error.hpp"
#include "flab/expr.hpp"
#include "flab/parallel.hpp"
#include "flab/report.hpp"

namespace flab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class Property { hermitian, kahler, weakly_kahler, strongly_convex };

inline const char* to_string(Property p) {
  switch (p) {
    case Property::hermitian: return "hermitian";
    case Property::kahler: return "kahler";
    case Property::weakly_kahler: return "weakly_kahler";
    case Property::strongly_convex: return "strongly_convex";
  }
  return "";
}

inline Property parse_property(const std::string& s) {
  for (Property p : {Property::hermitian, Property::kahler, Property::weakly_kahler, Property::strongly_convex})
    if (s == to_string(p)) return p;
  throw Error("unknown property '" + s + "'");
}

/// A point of the slit tangent bundle in real coordinates:
/// z^a = x^a + i x^{a+n}, v^a = y^a + i y^{a+n}.
struct EvalPoint {
  Vec x;
  Vec y;
  int n() const { return static_cast<int>(x.size() / 2); }
};

inline CVec to_complex(const Vec& y) {
  const int n = static_cast<int>(y.size() / 2);
  CVec v(n);
  for (int a = 0; a < n; ++a) v[a] = {y[a], y[a + n]};
  return v;
}

inline Vec to_real(const CVec& v) {
  const int n = static_cast<int>(v.size());
  Vec y(2 * n);
  for (int a = 0; a < n; ++a) {
    y[a] = v[a].real();
    y[a + n] = v[a].imag();
  }
  return y;
}

/// Region used when drawing random evaluation points.
struct SamplingDomain {
  double z_radius = 1.0;   // z drawn uniformly from the ball |z| < z_radius
  double v_min_abs = 0.0;  // reject v having some |v^a| below this
};

struct MetricSpec {
  std::string name;
  std::vector<double> params;
  int n = 0;
  MetricExpr expr;
  std::vector<Property> declared;
  double chart_radius = std::numeric_limits<double>::infinity();  // domain |z| < chart_radius
  SamplingDomain sampling;
  /// Reference values known in closed form (e.g. "holomorphic_curvature").
  std::map<std::string, double> reference;

  std::string id() const {
    std::string s = name + "(n=" + std::to_string(n);
    for (double p : params) s += "," + detail::format_real(p);
    return s + ")";
  }

  bool declares(Property p) const {
    for (Property q : declared)
      if (q == p) return true;
    return false;
  }

  bool in_domain(const Vec& x) const {
    if (!std::isfinite(chart_radius)) return true;
    return x.squaredNorm() < chart_radius * chart_radius;
  }

  /// Checks n >= 1 and that every variable index lies in [1, n].
  void validate() const {
    if (n < 1) throw Error("complex dimension must be >= 1");
    if (expr.empty()) throw Error("metric has no expression");
    if (expr.max_index() > n || (expr.max_index() > 0 && expr.min_index() < 1))
      throw Error("variable index out of range [1, " + std::to_string(n) + "]");
  }

  std::complex<double> evaluate_complex(const Vec& x, const Vec& y) const {
    const CVec z = to_complex(x), v = to_complex(y);
    return expr.evaluate({z.data(), static_cast<size_t>(z.size())}, {v.data(), static_cast<size_t>(v.size())});
  }

  double G(const Vec& x, const Vec& y) const { return evaluate_complex(x, y).real(); }
  double G(const EvalPoint& p) const { return G(p.x, p.y); }
};

struct ParamSchema {
  std::string name;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

struct CatalogEntry {
  std::string name;
  std::string description;
  int fixed_n = 0;  // 0: any n >= 1
  std::vector<ParamSchema> params;
  std::vector<Property> properties;
  std::function<MetricSpec(int n, const std::vector<double>& params)> generate;
};

namespace detail {

inline MetricExpr sum_abs2(VarKind kind, int n) {
  MetricExpr s = MetricExpr::unary(NodeKind::Abs2, MetricExpr::variable(kind, 1));
  for (int a = 2; a <= n; ++a) s = s + MetricExpr::unary(NodeKind::Abs2, MetricExpr::variable(kind, a));
  return s;
}

/// <z, v> = sum conj(z^a) v^a.
inline MetricExpr hermitian_product(int n) {
  MetricExpr s = MetricExpr::unary(NodeKind::Conj, MetricExpr::z(1)) * MetricExpr::v(1);
  for (int a = 2; a <= n; ++a) s = s + MetricExpr::unary(NodeKind::Conj, MetricExpr::z(a)) * MetricExpr::v(a);
  return s;
}

inline MetricSpec base_spec(std::string name, int n, std::vector<Property> props) {
  MetricSpec m;
  m.name = std::move(name);
  m.n = n;
  m.declared = std::move(props);
  return m;
}

}  // namespace detail

inline const std::vector<CatalogEntry>& catalog() {
  using P = Property;
  static const std::vector<CatalogEntry> entries = [] {
    std::vector<CatalogEntry> e;
    e.push_back({"euclidean", "flat metric sum |v^a|^2", 0, {},
                 {P::hermitian, P::kahler, P::weakly_kahler, P::strongly_convex},
                 [](int n, const std::vector<double>&) {
                   MetricSpec m = detail::base_spec("euclidean", n, {P::hermitian, P::kahler, P::weakly_kahler, P::strongly_convex});
                   m.expr = detail::sum_abs2(VarKind::V, n);
                   m.sampling = {1.0, 0.0};
                   m.reference = {{"holomorphic_curvature", 0.0}, {"orthogonal_flag_curvature", 0.0}, {"lambda", 0.0}};
                   return m;
                 }});
    e.push_back({"fubini_study", "Fubini-Study metric in the affine chart, holomorphic curvature 4", 0, {},
                 {P::hermitian, P::kahler, P::weakly_kahler, P::strongly_convex},
                 [](int n, const std::vector<double>&) {
                   MetricSpec m = detail::base_spec("fubini_study", n, {P::hermitian, P::kahler, P::weakly_kahler, P::strongly_convex});
                   const MetricExpr s = MetricExpr::constant(1) + detail::sum_abs2(VarKind::Z, n);
                   const MetricExpr num = s * detail::sum_abs2(VarKind::V, n) -
                                          MetricExpr::unary(NodeKind::Abs2, detail::hermitian_product(n));
                   m.expr = num / MetricExpr::pow(s, 2);
                   m.sampling = {1.0, 0.0};
                   m.reference = {{"holomorphic_curvature", 4.0}, {"orthogonal_flag_curvature", 1.0}, {"lambda", 1.0}};
                   return m;
                 }});
    e.push_back({"complex_hyperbolic", "Bergman-type metric on the unit ball, holomorphic curvature -4", 0, {},
                 {P::hermitian, P::kahler, P::weakly_kahler, P::strongly_convex},
                 [](int n, const std::vector<double>&) {
                   MetricSpec m = detail::base_spec("complex_hyperbolic", n, {P::hermitian, P::kahler, P::weakly_kahler, P::strongly_convex});
                   const MetricExpr s = MetricExpr::constant(1) - detail::sum_abs2(VarKind::Z, n);
                   const MetricExpr num = s * detail::sum_abs2(VarKind::V, n) +
                                          MetricExpr::unary(NodeKind::Abs2, detail::hermitian_product(n));
                   m.expr = num / MetricExpr::pow(s, 2);
                   m.chart_radius = 1.0;
                   m.sampling = {0.7, 0.0};
                   m.reference = {{"holomorphic_curvature", -4.0}, {"orthogonal_flag_curvature", -1.0}, {"lambda", -1.0}};
                   return m;
                 }});
    e.push_back({"hermitian_nonkahler", "(1+|z^2|^2)|v^1|^2 + |v^2|^2 on C^2", 2, {}, {P::hermitian, P::strongly_convex},
                 [](int n, const std::vector<double>&) {
                   MetricSpec m = detail::base_spec("hermitian_nonkahler", n, {P::hermitian, P::strongly_convex});
                   m.expr = (MetricExpr::constant(1) + MetricExpr::unary(NodeKind::Abs2, MetricExpr::z(2))) *
                                MetricExpr::unary(NodeKind::Abs2, MetricExpr::v(1)) +
                            MetricExpr::unary(NodeKind::Abs2, MetricExpr::v(2));
                   m.sampling = {1.5, 0.0};
                   return m;
                 }});
    e.push_back({"complex_minkowski_quartic", "(sum |v^a|^4)^(1/2), x-independent and non-Hermitian for n >= 2", 0, {},
                 {P::kahler, P::weakly_kahler, P::strongly_convex},
                 [](int n, const std::vector<double>&) {
                   MetricSpec m = detail::base_spec("complex_minkowski_quartic", n, {P::kahler, P::weakly_kahler, P::strongly_convex});
                   MetricExpr s = MetricExpr::pow(MetricExpr::unary(NodeKind::Abs2, MetricExpr::v(1)), 2);
                   for (int a = 2; a <= n; ++a)
                     s = s + MetricExpr::pow(MetricExpr::unary(NodeKind::Abs2, MetricExpr::v(a)), 2);
                   m.expr = MetricExpr::unary(NodeKind::Sqrt, s);
                   // Strong convexity degenerates where some v^a vanishes.
                   m.sampling = {1.0, 0.3};
                   m.reference = {{"holomorphic_curvature", 0.0}};
                   return m;
                 }});
    return e;
  }();
  return entries;
}

inline const CatalogEntry& catalog_entry(const std::string& name) {
  for (const auto& e : catalog())
    if (e.name == name) return e;
  throw Error("unknown catalog metric '" + name + "'");
}

inline MetricSpec catalog_get(const std::string& name, int n, const std::vector<double>& params = {}) {
  const CatalogEntry& e = catalog_entry(name);
  if (e.fixed_n != 0 && n != e.fixed_n)
    throw Error(name + " is defined only for n = " + std::to_string(e.fixed_n));
  if (n < 1 || n > 4) throw Error("complex dimension out of schema [1, 4]: " + std::to_string(n));
  if (params.size() != e.params.size())
    throw Error(name + " expects " + std::to_string(e.params.size()) + " parameter(s), got " + std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i)
    if (!(params[i] >= e.params[i].min && params[i] <= e.params[i].max))
      throw Error("parameter " + e.params[i].name + " out of schema");
  MetricSpec m = e.generate(n, params);
  m.params = params;
  m.validate();
  return m;
}

/// Default n when a catalog entry is requested without one.
inline int default_n(const std::string& name) {
  const CatalogEntry& e = catalog_entry(name);
  return e.fixed_n ? e.fixed_n : 2;
}

/// Metric document: {"name", "n", "params"} for catalog entries or
/// {"name", "n", "expression"} for custom metrics. Optional keys:
/// "declared_properties", "chart_radius", "sampling": {"z_radius", "v_min_abs"}.
inline MetricSpec metric_from_json(const nlohmann::json& j) {
  const std::string name = j.value("name", std::string("custom"));
  MetricSpec m;
  if (j.contains("expression")) {
    m.name = name;
    m.n = j.at("n").get<int>();
    m.expr = parse_metric(j.at("expression").get<std::string>());
  } else {
    const int n = j.contains("n") ? j.at("n").get<int>() : default_n(name);
    m = catalog_get(name, n, j.value("params", std::vector<double>{}));
  }
  if (j.contains("declared_properties")) {
    m.declared.clear();
    for (const auto& p : j.at("declared_properties")) m.declared.push_back(parse_property(p.get<std::string>()));
  }
  if (j.contains("chart_radius")) m.chart_radius = j.at("chart_radius").get<double>();
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    m.sampling.z_radius = s.value("z_radius", m.sampling.z_radius);
    m.sampling.v_min_abs = s.value("v_min_abs", m.sampling.v_min_abs);
  }
  m.validate();
  return m;
}

inline nlohmann::json metric_to_json(const MetricSpec& m) {
  nlohmann::json j;
  j["name"] = m.name;
  j["n"] = m.n;
  j["params"] = m.params;
  j["expression"] = m.expr.print();
  std::vector<std::string> props;
  for (Property p : m.declared) props.push_back(to_string(p));
  j["declared_properties"] = props;
  if (std::isfinite(m.chart_radius)) j["chart_radius"] = m.chart_radius;
  return j;
}

inline MetricSpec load_metric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metric file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed metric file '" + path + "': " + e.what());
  }
  return metric_from_json(j);
}

using Rng = std::mt19937_64;

/// Uniform point in the real ball of the given radius and dimension.
inline Vec sample_ball(Rng& rng, int dim, double radius) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  Vec u(dim);
  for (int i = 0; i < dim; ++i) u[i] = normal(rng);
  const double r = radius * std::pow(unit(rng), 1.0 / dim);
  return u * (r / u.norm());
}

inline Vec sample_sphere(Rng& rng, int dim) {
  std::normal_distribution<double> normal;
  Vec u(dim);
  for (int i = 0; i < dim; ++i) u[i] = normal(rng);
  return u / u.norm();
}

/// Random evaluation point inside the metric's sampling domain.
inline EvalPoint sample_point(const MetricSpec& m, Rng& rng) {
  const int dim = 2 * m.n;
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  EvalPoint p;
  p.x = sample_ball(rng, dim, m.sampling.z_radius);
  for (;;) {
    Vec y(dim);
    for (int i = 0; i < dim; ++i) y[i] = box(rng);
    if (y.norm() < 0.1) continue;
    bool ok = true;
    for (int a = 0; a < m.n; ++a)
      if (std::hypot(y[a], y[a + m.n]) < m.sampling.v_min_abs) ok = false;
    if (!ok) continue;
    p.y = y;
    return p;
  }
}

inline std::vector<EvalPoint> sample_points(const MetricSpec& m, std::uint64_t seed, size_t count) {
  Rng rng(seed);
  std::vector<EvalPoint> pts;
  pts.reserve(count);
  for (size_t i = 0; i < count; ++i) pts.push_back(sample_point(m, rng));
  return pts;
}

struct SamplingConfig {
  std::uint64_t seed = 1;
  size_t count = 100;
  double z_radius = 0;  // 0: use the metric's sampling domain
};

/// Max relative residual of G(z, zeta v) = |zeta|^2 G(z, v) over random
/// (z, v, zeta); passes iff below 1e-9. Per-sample failures are recorded.
inline Report validate_homogeneity(const MetricSpec& spec, const SamplingConfig& cfg, double tol = 1e-9) {
  MetricSpec m = spec;
  if (cfg.z_radius > 0) m.sampling.z_radius = cfg.z_radius;
  Rng rng(cfg.seed);
  struct Sample {
    EvalPoint p;
    std::complex<double> zeta;
  };
  std::vector<Sample> samples;
  std::uniform_real_distribution<double> mod(0.5, 2.0), arg(0, 2 * M_PI);
  for (size_t i = 0; i < cfg.count; ++i) {
    Sample s;
    s.p = sample_point(m, rng);
    s.zeta = std::polar(mod(rng), arg(rng));
    samples.push_back(s);
  }
  std::vector<double> hom(cfg.count, -1), imag(cfg.count, -1);
  std::vector<std::string> err(cfg.count);
  parallel_for(cfg.count, [&](size_t i) {
    try {
      const auto& s = samples[i];
      const std::complex<double> g = m.evaluate_complex(s.p.x, s.p.y);
      const Vec ys = to_real(to_complex(s.p.y) * s.zeta);
      const std::complex<double> gs = m.evaluate_complex(s.p.x, ys);
      if (!(g.real() > 0)) throw DomainError("G <= 0 at sample");
      hom[i] = std::abs(gs.real() - std::norm(s.zeta) * g.real()) / g.real();
      imag[i] = std::max(std::abs(g.imag()), std::abs(gs.imag()));
    } catch (const Error& e) {
      err[i] = e.what();
    }
  });
  Report r;
  r.check_id = "homogeneity";
  r.metric = m.id();
  r.params = m.params;
  r.n = m.n;
  r.seed = cfg.seed;
  r.samples = cfg.count;
  std::vector<double> h, im;
  for (size_t i = 0; i < cfg.count; ++i) {
    if (!err[i].empty()) {
      r.record_failure("sample " + std::to_string(i) + ": " + err[i]);
      continue;
    }
    h.push_back(hom[i]);
    im.push_back(imag[i]);
  }
  r.checks.push_back(make_check("homogeneity_G(z,zeta v)=|zeta|^2 G", h, tol));
  r.checks.push_back(make_check("imaginary_part", im, 1e-12));
  return r;
}

}  // namespace flab
