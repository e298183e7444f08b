#pragma once

// Exact mixed partials of G = F^2 at a point of the slit tangent bundle, and
// a finite-difference cross-check for them.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "flab/error.hpp"
#include "flab/jet.hpp"
#include "flab/metric.hpp"

namespace flab {

inline constexpr int kMaxYOrder = 5;
inline constexpr int kMaxXOrder = 2;

/// Multi-index over the 4n real coordinates: exponent per x^i and per y^i.
/// Stored as exponent counts, so any permutation of the same derivatives has
/// the same representation.
struct PartialSpec {
  std::vector<int> x;
  std::vector<int> y;

  int x_order() const {
    int s = 0;
    for (int e : x) s += e;
    return s;
  }
  int y_order() const {
    int s = 0;
    for (int e : y) s += e;
    return s;
  }
  int order() const { return x_order() + y_order(); }

  /// Builds the spec from a list of variable positions: 0..2n-1 are x,
  /// 2n..4n-1 are y. Repetitions raise the exponent.
  static PartialSpec from_variables(int dim, std::initializer_list<int> vars) {
    PartialSpec s{std::vector<int>(dim, 0), std::vector<int>(dim, 0)};
    for (int v : vars) {
      if (v < dim) ++s.x[v];
      else ++s.y[v - dim];
    }
    return s;
  }
};

/// G jet at one point. Coefficients are Taylor coefficients; partial() turns
/// them into derivative values.
class JetTable {
 public:
  JetTable(RealJet jet, EvalPoint point, std::string metric) : jet_(std::move(jet)), point_(std::move(point)), metric_(std::move(metric)) {}

  const RealJet& jet() const { return jet_; }
  const EvalPoint& point() const { return point_; }
  const std::string& metric() const { return metric_; }
  int max_x() const { return jet_.space().max_x(); }
  int max_y() const { return jet_.space().max_y(); }
  int dim() const { return jet_.space().dim(); }
  double G() const { return jet_.value(); }

  double operator[](const PartialSpec& s) const {
    if (s.x_order() > max_x() || s.y_order() > max_y()) throw Error("partial beyond the orders of this table");
    return jet_.partial(s.x, s.y);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["metric"] = metric_;
    j["x"] = std::vector<double>(point_.x.data(), point_.x.data() + point_.x.size());
    j["y"] = std::vector<double>(point_.y.data(), point_.y.data() + point_.y.size());
    j["max_x"] = max_x();
    j["max_y"] = max_y();
    nlohmann::json entries = nlohmann::json::array();
    const auto& X = jet_.space().x();
    const auto& Y = jet_.space().y();
    for (int xi = 0; xi < X.size(); ++xi)
      for (int yi = 0; yi < Y.size(); ++yi) {
        auto ex = X.exponents(xi), ey = Y.exponents(yi);
        entries.push_back({{"dx", std::vector<int>(ex.begin(), ex.end())},
                           {"dy", std::vector<int>(ey.begin(), ey.end())},
                           {"value", jet_.coeff(xi, yi) * X.factorial_weight(xi) * Y.factorial_weight(yi)}});
      }
    j["partials"] = entries;
    return j;
  }

 private:
  RealJet jet_;
  EvalPoint point_;
  std::string metric_;
};

/// Raw G jet with separate x and y truncation orders. No contract check; the
/// engines use it internally at the orders they need.
inline RealJet metric_jet(const MetricSpec& spec, const EvalPoint& p, int max_x, int max_y) {
  const int dim = 2 * spec.n;
  if (p.x.size() != dim || p.y.size() != dim) throw Error("evaluation point has wrong dimension");
  if (!(p.y.norm() > 0)) throw DomainError("y = 0 is outside the slit tangent bundle");
  if (!spec.in_domain(p.x)) throw DomainError("point outside the metric's chart domain");
  const JetSpace& sp = JetSpace::get(dim, max_x, max_y);
  auto v = spec.expr.evaluate_jet(sp, {p.x.data(), static_cast<size_t>(dim)}, {p.y.data(), static_cast<size_t>(dim)});
  if (!v.real) {
    double scale = 0, err = 0;
    for (double c : v.re.coefficients()) scale = std::max(scale, std::abs(c));
    for (double c : v.im.coefficients()) err = std::max(err, std::abs(c));
    if (err > 1e-10 * std::max(1.0, scale)) throw DomainError("metric expression is not real-valued at this point");
  }
  if (!(v.re.value() > 0)) throw DomainError("G is not positive at this point");
  return std::move(v.re);
}

inline JetTable eval_partials(const MetricSpec& spec, const EvalPoint& p, int max_y, int max_x) {
  if (max_y < 0 || max_x < 0 || max_y > kMaxYOrder || max_x > kMaxXOrder)
    throw Error("derivative orders exceed the (y <= 5, x <= 2) contract");
  return JetTable(metric_jet(spec, p, max_x, max_y), p, spec.id());
}

namespace detail {

/// Fourth-order central stencils for the k-th derivative, k = 0..3.
struct Stencil {
  std::vector<int> offsets;
  std::vector<double> weights;
  double denom;
};

inline const Stencil& stencil(int k) {
  static const std::array<Stencil, 4> s = {{
      {{0}, {1.0}, 1.0},
      {{-2, -1, 1, 2}, {1, -8, 8, -1}, 12.0},
      {{-2, -1, 0, 1, 2}, {-1, 16, -30, 16, -1}, 12.0},
      {{-3, -2, -1, 1, 2, 3}, {1, -8, 13, -13, 8, -1}, 8.0},
  }};
  return s.at(k);
}

/// Tensor-product finite difference of G with uniform step h.
inline double fd_partial(const MetricSpec& spec, const EvalPoint& p, const PartialSpec& idx, double h) {
  const int dim = 2 * spec.n;
  std::vector<int> vars, orders;
  for (int i = 0; i < dim; ++i)
    if (idx.x[i]) vars.push_back(i), orders.push_back(idx.x[i]);
  for (int i = 0; i < dim; ++i)
    if (idx.y[i]) vars.push_back(dim + i), orders.push_back(idx.y[i]);
  double sum = 0, scale = 1;
  for (size_t a = 0; a < vars.size(); ++a) scale *= stencil(orders[a]).denom * std::pow(h, orders[a]);
  std::vector<size_t> pos(vars.size(), 0);
  for (;;) {
    Vec x = p.x, y = p.y;
    double w = 1;
    for (size_t a = 0; a < vars.size(); ++a) {
      const Stencil& s = stencil(orders[a]);
      w *= s.weights[pos[a]];
      const double shift = s.offsets[pos[a]] * h;
      if (vars[a] < dim) x[vars[a]] += shift;
      else y[vars[a] - dim] += shift;
    }
    if (!spec.in_domain(x)) throw DomainError("finite-difference stencil leaves the chart domain");
    sum += w * spec.G(x, y);
    size_t a = 0;
    for (; a < vars.size(); ++a) {
      if (++pos[a] < stencil(orders[a]).weights.size()) break;
      pos[a] = 0;
    }
    if (a == vars.size()) break;
  }
  return sum / scale;
}

}  // namespace detail

struct FdResult {
  double jet = 0;
  double fd = 0;
  double error = 0;  // |jet - fd| / max(1, |fd|)
  double step = 0;
};

/// Compares one jet partial (order <= 3) against Richardson-extrapolated
/// fourth-order central differences. The step is calibrated by taking the
/// candidate whose two extrapolation levels agree best.
/// `jet` must be the G jet at p with truncation orders covering idx.
inline FdResult fd_crosscheck(const MetricSpec& spec, const EvalPoint& p, const PartialSpec& idx, const RealJet& jet) {
  if (idx.order() > 3) throw Error("finite-difference cross-check supports total order <= 3");
  const int dim = 2 * spec.n;
  if (static_cast<int>(idx.x.size()) != dim || static_cast<int>(idx.y.size()) != dim)
    throw Error("partial spec has wrong dimension");
  FdResult r;
  r.jet = jet.partial(idx.x, idx.y);
  if (idx.order() == 0) {
    r.fd = spec.G(p.x, p.y);
    r.error = std::abs(r.jet - r.fd) / std::max(1.0, std::abs(r.fd));
    return r;
  }
  // Keep the widest stencil (3h) well inside the chart.
  double hmax = 0.04;
  if (std::isfinite(spec.chart_radius)) hmax = std::min(hmax, (spec.chart_radius - p.x.norm()) / 8.0);
  double best_gap = std::numeric_limits<double>::infinity();
  std::vector<double> D;
  for (double h = hmax; D.size() < 4; h /= 2) D.push_back(detail::fd_partial(spec, p, idx, h));
  for (size_t k = 0; k + 2 < D.size(); ++k) {
    const double r1 = (16 * D[k + 1] - D[k]) / 15, r2 = (16 * D[k + 2] - D[k + 1]) / 15;
    const double gap = std::abs(r1 - r2);
    if (gap < best_gap) {
      best_gap = gap;
      r.fd = r2;
      r.step = hmax / std::pow(2.0, static_cast<double>(k + 2));
    }
  }
  r.error = std::abs(r.jet - r.fd) / std::max(1.0, std::abs(r.fd));
  return r;
}

inline FdResult fd_crosscheck(const MetricSpec& spec, const EvalPoint& p, const PartialSpec& idx) {
  if (idx.order() > 3) throw Error("finite-difference cross-check supports total order <= 3");
  return fd_crosscheck(spec, p, idx, metric_jet(spec, p, idx.x_order(), idx.y_order()));
}

/// Every partial of total order 1..max_order over the 4n coordinates.
inline std::vector<PartialSpec> all_partials(int dim, int max_order) {
  std::vector<PartialSpec> out;
  const auto& m = MonomialSpace::get(2 * dim, max_order);
  for (int i = 1; i < m.size(); ++i) {
    auto e = m.exponents(i);
    PartialSpec s{std::vector<int>(e.begin(), e.begin() + dim), std::vector<int>(e.begin() + dim, e.end())};
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace flab
