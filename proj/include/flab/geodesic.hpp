#pragma once

// Geodesics, parallel frames, Jacobi fields and the probes built on them:
// distance Hessian, index form, conjugate points, the boundary-value
// distance, direct second derivatives of the distance, the Riccati quantity
// and polar volume estimates.

#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <sstream>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "flab/complex_engine.hpp"
#include "flab/frame.hpp"
#include "flab/metric.hpp"
#include "flab/ode.hpp"
#include "flab/quadrature.hpp"
#include "flab/real_engine.hpp"

namespace flab {

// ---------------------------------------------------------------------------
// comparison functions

/// Solution of s'' + lambda s = 0, s(0) = 0, s'(0) = 1.
inline double s_lambda(double lambda, double t) {
  if (lambda > 0) return std::sin(std::sqrt(lambda) * t) / std::sqrt(lambda);
  if (lambda < 0) return std::sinh(std::sqrt(-lambda) * t) / std::sqrt(-lambda);
  return t;
}

/// ct = s'/s. Defined on 0 < t < pi/sqrt(lambda) for lambda > 0.
inline double ct_lambda(double lambda, double t) {
  if (!(t > 0)) throw DomainError("ct_lambda needs t > 0");
  if (lambda > 0) {
    const double k = std::sqrt(lambda);
    if (k * t >= M_PI) throw PoleError("ct_lambda: t >= pi/sqrt(lambda)");
    return k / std::tan(k * t);
  }
  if (lambda < 0) {
    const double k = std::sqrt(-lambda);
    return k / std::tanh(k * t);
  }
  return 1 / t;
}

// ---------------------------------------------------------------------------
// geodesics

/// Raised when a path leaves the chart or the coordinate cap.
class ChartExit : public DomainError {
 public:
  using DomainError::DomainError;
};

struct GeodesicOptions {
  OdeOptions ode;
  /// Paths with |x| beyond this are treated as leaving the chart; the
  /// projective charts put whole hyperplanes at coordinate infinity.
  double max_coordinate = 50;
};

inline void chart_guard(const MetricSpec& spec, const Vec& x, double max_coordinate) {
  if (!spec.in_domain(x) || !(x.norm() <= max_coordinate)) throw ChartExit("path leaves the chart");
}

inline Vec unit_direction(const MetricSpec& spec, const Vec& x, const Vec& y) {
  const double G = spec.G(x, y);
  if (!(G > 0)) throw DomainError("direction has zero length");
  return y / std::sqrt(G);
}

inline Mat fundamental_tensor_at(const MetricSpec& spec, const Vec& x, const Vec& y) {
  return detail::jet_values(detail::metric_tensor_jets(metric_jet(spec, {x, y}, 0, 2)));
}

struct Geodesic {
  MetricSpec spec;
  Vec x0, y0;  // y0 unit
  double length = 0;
  bool chart_exit = false;
  OdeSolution sol;
  double max_speed_drift = 0;  // max |F(x') - 1| at step ends
  double max_residual = 0;     // max |x'' + 2 G(x, x')| at step midpoints, x'' from the interpolant

  int N() const { return static_cast<int>(x0.size()); }
  Vec x(double t) const { return sol(t).head(N()); }
  Vec velocity(double t) const { return sol(t).segment(N(), N()); }
  double t_end() const { return sol.t_end; }
};

/// Unit-speed geodesic x'' + 2 G(x, x') = 0 from (x0, y0). y0 must have
/// F(y0) = 1 up to 1e-6 (it is renormalized). Stops early (chart_exit) if
/// the path leaves the chart.
inline Geodesic integrate_geodesic(const MetricSpec& spec, const Vec& x0, const Vec& y0, double length,
                                   const GeodesicOptions& opt = {}) {
  const int N = 2 * spec.n;
  if (x0.size() != N || y0.size() != N) throw Error("initial data has wrong dimension");
  if (!(length > 0)) throw DomainError("geodesic length must be positive");
  if (!(std::abs(std::sqrt(spec.G(x0, y0)) - 1) <= 1e-6)) throw DomainError("initial velocity is not unit (F(y0) != 1)");
  Geodesic g;
  g.spec = spec;
  g.x0 = x0;
  g.y0 = unit_direction(spec, x0, y0);
  g.length = length;
  Vec s0(2 * N);
  s0 << x0, g.y0;
  auto rhs = [&](double, const Vec& s) {
    const Vec x = s.head(N), v = s.tail(N);
    chart_guard(spec, x, opt.max_coordinate);
    Vec ds(2 * N);
    ds << v, -2 * spray_data(spec, x, v, 0).spray;
    return ds;
  };
  g.sol = integrate_ode(rhs, 0, s0, length, opt.ode);
  g.chart_exit = g.sol.domain_exit;
  for (const DenseStep& st : g.sol.steps) {
    const Vec end = st.eval(st.t1());
    g.max_speed_drift = std::max(g.max_speed_drift, std::abs(std::sqrt(spec.G(end.head(N), end.tail(N))) - 1));
    // derivative of the interpolant at the midpoint
    const Vec mid = st.eval(st.t0 + 0.5 * st.h);
    const Vec d = st.Q * Eigen::Vector4d(1, 1, 0.75, 0.5);
    const Vec acc = d.tail(N);
    g.max_residual = std::max(g.max_residual, (acc + 2 * spray_data(spec, mid.head(N), mid.tail(N), 0).spray).cwiseAbs().maxCoeff());
  }
  return g;
}

/// CSV with columns t, x_1.., xdot_1.. at the accepted step ends.
inline std::string to_csv(const Geodesic& g) {
  const int N = g.N();
  std::ostringstream os;
  os << std::setprecision(17) << "t";
  for (int i = 0; i < N; ++i) os << ",x" << i + 1;
  for (int i = 0; i < N; ++i) os << ",xdot" << i + 1;
  os << "\n";
  auto row = [&](double t, const Vec& s) {
    os << t;
    for (int i = 0; i < s.size(); ++i) os << "," << s[i];
    os << "\n";
  };
  if (!g.sol.steps.empty()) row(0, g.sol.steps.front().y0);
  for (const DenseStep& st : g.sol.steps) row(st.t1(), st.eval(st.t1()));
  return os.str();
}

struct TransportResult {
  Vec X;              // transported vector at the end
  double norm_drift;  // max |g_T(X, X) - g_T(X0, X0)| at step ends
  Geodesic path;
};

/// Parallel transport along the geodesic: X' = -G^i_j(x, T) X^j.
inline TransportResult parallel_transport(const MetricSpec& spec, const Vec& x0, const Vec& y0, const Vec& X0,
                                          double length, const GeodesicOptions& opt = {}) {
  const int N = 2 * spec.n;
  TransportResult r;
  r.path.spec = spec;
  r.path.x0 = x0;
  r.path.y0 = unit_direction(spec, x0, y0);
  r.path.length = length;
  Vec s0(3 * N);
  s0 << x0, r.path.y0, X0;
  auto rhs = [&](double, const Vec& s) {
    const Vec x = s.head(N), v = s.segment(N, N);
    chart_guard(spec, x, opt.max_coordinate);
    const SprayData d = spray_data(spec, x, v, 1);
    Vec ds(3 * N);
    ds << v, -2 * d.spray, -d.conn * s.tail(N);
    return ds;
  };
  const double n0 = X0.dot(fundamental_tensor_at(spec, x0, r.path.y0) * X0);
  r.norm_drift = 0;
  auto monitor = [&](const DenseStep&, const Vec& s) {
    const Vec X = s.tail(N);
    r.norm_drift = std::max(r.norm_drift, std::abs(X.dot(fundamental_tensor_at(spec, s.head(N), s.segment(N, N)) * X) - n0));
    return false;
  };
  r.path.sol = integrate_ode(rhs, 0, s0, length, opt.ode, monitor);
  r.path.chart_exit = r.path.sol.domain_exit;
  r.X = r.path.sol.y_end.tail(N);
  return r;
}

// ---------------------------------------------------------------------------
// Jacobi fields in a parallel frame

struct JacobiOptions {
  GeodesicOptions geo;
  bool stop_at_conjugate = false;
};

struct JacobiState {
  Vec x, v;
  Mat E;      // parallel frame, columns {completion..., JT, T}
  Mat A, Ap;  // Jacobi matrix on the first N-1 frame vectors and its derivative
};

/// Joint integration of geodesic, parallel frame and the Jacobi matrix
/// A'' = -K A, A(0) = 0, A'(0) = I, with K_ab = R_ik E_a^i E_b^k.
class JacobiSolution {
 public:
  MetricSpec spec;
  int N = 0;
  int m = 0;
  double length = 0;
  OdeSolution sol;
  double conjugate_time = std::numeric_limits<double>::infinity();
  bool chart_exit = false;
  double max_speed_drift = 0;
  double max_frame_drift = 0;

  double t_end() const { return sol.t_end; }
  int holomorphic_index() const { return m - 1; }

  JacobiState unpack(const Vec& s) const {
    JacobiState st;
    st.x = s.head(N);
    st.v = s.segment(N, N);
    st.E = Eigen::Map<const Mat>(s.data() + 2 * N, N, N);
    st.A = Eigen::Map<const Mat>(s.data() + 2 * N + N * N, m, m);
    st.Ap = Eigen::Map<const Mat>(s.data() + 2 * N + N * N + m * m, m, m);
    return st;
  }
  JacobiState at(double t) const { return unpack(sol(t)); }
  double det_A(double t) const { return at(t).A.determinant(); }
  /// A'^T A - A^T A', zero for an exact solution.
  double wronskian(double t) const {
    const JacobiState st = at(t);
    return (st.Ap.transpose() * st.A - st.A.transpose() * st.Ap).cwiseAbs().maxCoeff();
  }

  /// Curvature form in the full frame at time t (T row and column vanish).
  Mat curvature_frame(double t) const {
    const JacobiState st = at(t);
    const SprayData d = spray_data(spec, st.x, st.v, 2);
    Mat K = st.E.transpose() * d.Rik * st.E;
    return 0.5 * (K + K.transpose());
  }
};

inline Mat initial_frame(const MetricSpec& spec, const Vec& x, const Vec& T) {
  const int N = static_cast<int>(T.size());
  const Mat g = fundamental_tensor_at(spec, x, T);
  const Mat F = orthonormal_frame(g, {T, apply_J(T)});
  Mat E(N, N);
  for (int c = 2; c < N; ++c) E.col(c - 2) = F.col(c);
  E.col(N - 2) = F.col(1);
  E.col(N - 1) = F.col(0);
  return E;
}

inline JacobiSolution integrate_jacobi(const MetricSpec& spec, const Vec& x0, const Vec& y0, double length,
                                       const JacobiOptions& opt = {}) {
  JacobiSolution J;
  J.spec = spec;
  J.N = 2 * spec.n;
  J.m = J.N - 1;
  J.length = length;
  const int N = J.N, m = J.m;
  const Vec T0 = unit_direction(spec, x0, y0);
  const Mat E0 = initial_frame(spec, x0, T0);
  Vec s0 = Vec::Zero(2 * N + N * N + 2 * m * m);
  s0.head(N) = x0;
  s0.segment(N, N) = T0;
  Eigen::Map<Mat>(s0.data() + 2 * N, N, N) = E0;
  Eigen::Map<Mat>(s0.data() + 2 * N + N * N + m * m, m, m) = Mat::Identity(m, m);

  auto rhs = [&](double, const Vec& s) {
    const Vec x = s.head(N), v = s.segment(N, N);
    chart_guard(spec, x, opt.geo.max_coordinate);
    const SprayData d = spray_data(spec, x, v, 2);
    Eigen::Map<const Mat> E(s.data() + 2 * N, N, N);
    Eigen::Map<const Mat> A(s.data() + 2 * N + N * N, m, m);
    Eigen::Map<const Mat> Ap(s.data() + 2 * N + N * N + m * m, m, m);
    const Mat Ep = E.leftCols(m);
    const Mat K = Ep.transpose() * d.Rik * Ep;
    Vec ds(s.size());
    ds.head(N) = v;
    ds.segment(N, N) = -2 * d.spray;
    Eigen::Map<Mat>(ds.data() + 2 * N, N, N) = -d.conn * E;
    Eigen::Map<Mat>(ds.data() + 2 * N + N * N, m, m) = Ap;
    Eigen::Map<Mat>(ds.data() + 2 * N + N * N + m * m, m, m) = -0.5 * (K + K.transpose()) * A;
    return ds;
  };

  double last_sign = 1;
  auto monitor = [&](const DenseStep& st, const Vec& s) {
    const JacobiState js = J.unpack(s);
    const Mat g = fundamental_tensor_at(spec, js.x, js.v);
    J.max_speed_drift = std::max(J.max_speed_drift, std::abs(std::sqrt(js.v.dot(g * js.v)) - 1));
    J.max_frame_drift = std::max(J.max_frame_drift, (js.E.transpose() * g * js.E - Mat::Identity(N, N)).cwiseAbs().maxCoeff());
    if (std::isfinite(J.conjugate_time)) return opt.stop_at_conjugate;
    // det A is positive right after t = 0; look for its first sign change.
    double ta = st.t0;
    for (int k = 1; k <= 4; ++k) {
      const double tb = st.t0 + st.h * k / 4.0;
      const double db = Eigen::Map<const Mat>(st.eval(tb).data() + 2 * N + N * N, m, m).determinant();
      if (tb > 0 && db * last_sign < 0) {
        double lo = ta, hi = tb;
        auto det_at = [&](double t) { return Eigen::Map<const Mat>(st.eval(t).data() + 2 * N + N * N, m, m).determinant(); };
        const double slo = last_sign;
        while (hi - lo > 1e-12 * std::max(1.0, hi)) {
          const double mid = 0.5 * (lo + hi);
          if (det_at(mid) * slo > 0) lo = mid;
          else hi = mid;
        }
        J.conjugate_time = 0.5 * (lo + hi);
        last_sign = -last_sign;
        return opt.stop_at_conjugate;
      }
      if (db != 0) last_sign = db > 0 ? 1 : -1;
      ta = tb;
    }
    return false;
  };
  J.sol = integrate_ode(rhs, 0, s0, length, opt.geo.ode, monitor);
  J.chart_exit = J.sol.domain_exit;
  return J;
}

/// First conjugate time along the unit geodesic from (x0, y0), searched up to
/// max_time. Infinity when none is found; throws ChartExit when the path leaves
/// the chart first.
inline double conjugate_point(const MetricSpec& spec, const Vec& x0, const Vec& y0, double max_time,
                              const JacobiOptions& base = {}) {
  JacobiOptions opt = base;
  opt.stop_at_conjugate = true;
  const JacobiSolution J = integrate_jacobi(spec, x0, y0, max_time, opt);
  if (J.chart_exit && !std::isfinite(J.conjugate_time)) throw ChartExit("geodesic left the chart before a conjugate point");
  return J.conjugate_time;
}

// ---------------------------------------------------------------------------
// index form

struct IndexFormResult {
  double value = 0;
  double error = 0;
  double tangential = 0;  // largest T component dropped from W
};

/// I(W, W) = int_0^L |W'|^2 - K(W, W) dt for W given by its coordinates in
/// the parallel frame (last entry is the T component, which is dropped).
inline IndexFormResult index_form(const JacobiSolution& J, const std::function<Vec(double)>& w,
                                  const std::function<Vec(double)>& wdot, double L, double tol = 1e-10) {
  if (L > J.t_end() + 1e-12) throw Error("index form interval exceeds the integrated path");
  const int N = J.N;
  IndexFormResult r;
  auto f = [&](double t) {
    Vec a = w(t), b = wdot(t);
    r.tangential = std::max(r.tangential, std::abs(a[N - 1]));
    a[N - 1] = 0;
    b[N - 1] = 0;
    Vec out(1);
    out[0] = b.squaredNorm() - a.dot(J.curvature_frame(t) * a);
    return out;
  };
  const QuadratureResult q = integrate_adaptive(f, 0, L, tol, tol);
  r.value = q.value[0];
  r.error = q.error;
  return r;
}

// ---------------------------------------------------------------------------
// distance Hessian

struct DistanceProbe {
  double r = 0;
  Mat H;        // Hessian of the distance on {completion..., JT} at gamma(r)
  Vec V;        // coefficients of J T(r) in that frame
  Vec T;        // unit tangent at gamma(r)
  Vec x;        // gamma(r)
  double box = 0;       // trace: Laplacian of the distance
  double box_perp = 0;  // box - H(T,T) - H(V,V)
  double hvv = 0;
  double asymmetry = 0;
  double condition = 0;
  double index_gap = std::numeric_limits<double>::quiet_NaN();  // max |H - index form matrix|
};

/// Index-form matrix I(J_i, J_j) for the Jacobi fields with J_i(r) = E_i(r).
inline Mat index_form_matrix(const JacobiSolution& J, double r, double tol = 1e-10) {
  const int m = J.m;
  const Mat B = J.at(r).A.inverse();
  auto f = [&](double t) {
    const JacobiState st = J.at(t);
    const Mat K = J.curvature_frame(t).topLeftCorner(m, m);
    const Mat Ap = st.Ap * B, A = st.A * B;
    const Mat I = Ap.transpose() * Ap - A.transpose() * K * A;
    return Vec(Eigen::Map<const Vec>(I.data(), m * m));
  };
  const QuadratureResult q = integrate_adaptive(f, 0, r, tol, tol);
  return Eigen::Map<const Mat>(q.value.data(), m, m);
}

inline DistanceProbe distance_hessian(const JacobiSolution& J, double r, bool index_check = false) {
  if (!(r > 0)) throw DomainError("distance Hessian needs r > 0");
  if (r > J.t_end() + 1e-12) throw Error("radius beyond the integrated path");
  if (r >= J.conjugate_time) throw ConjugateReached(J.conjugate_time);
  const JacobiState st = J.at(r);
  DistanceProbe p;
  p.r = r;
  Eigen::JacobiSVD<Mat> svd(st.A);
  p.condition = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
  if (!(p.condition < 1e10)) throw ConvergenceError("Jacobi matrix is ill-conditioned (near a conjugate point)");
  const Mat H = st.Ap * st.A.inverse();
  p.asymmetry = (H - H.transpose()).cwiseAbs().maxCoeff();
  p.H = 0.5 * (H + H.transpose());
  p.x = st.x;
  p.T = st.v / std::sqrt(J.spec.G(st.x, st.v));
  const Mat g = fundamental_tensor_at(J.spec, st.x, p.T);
  const Vec JT = apply_J(p.T);
  p.V = st.E.leftCols(J.m).transpose() * g * JT;
  p.box = p.H.trace();
  p.hvv = p.V.dot(p.H * p.V);
  p.box_perp = p.box - p.hvv;
  if (index_check) p.index_gap = (index_form_matrix(J, r) - p.H).cwiseAbs().maxCoeff();
  return p;
}

// ---------------------------------------------------------------------------
// distance by shooting

struct BvpOptions {
  OdeOptions ode{1e-12, 1e-14};
  double tol = 1e-11;  // |exp_p(w) - q|
  int max_iter = 40;
  int starts = 6;
  std::uint64_t seed = 7;
  bool certify = true;  // check there is no conjugate point before q
  double max_coordinate = 50;
};

struct BvpResult {
  double r = 0;
  Vec w;        // initial velocity with F(p, w) = r
  Vec y0;       // unit initial direction
  Vec T;        // unit tangent at q
  double residual = 0;
  int iterations = 0;
  int starts_used = 0;
  bool conjugate_free = true;
  double conjugate_time = std::numeric_limits<double>::infinity();
  Mat jacobian;  // d exp_p(w) / dw at the solution
};

namespace detail {

struct Shot {
  Vec x1, v1;
  Mat D;  // d x(1) / d w (empty without the variational system)
};

inline Shot shoot(const MetricSpec& spec, const Vec& p, const Vec& w, const BvpOptions& opt, bool variational) {
  const int N = static_cast<int>(p.size());
  Shot sh;
  if (!variational) {
    Vec s0(2 * N);
    s0 << p, w;
    auto rhs = [&](double, const Vec& s) {
      const Vec x = s.head(N), v = s.tail(N);
      chart_guard(spec, x, opt.max_coordinate);
      Vec ds(2 * N);
      ds << v, -2 * spray_data(spec, x, v, 0).spray;
      return ds;
    };
    const OdeSolution sol = integrate_ode(rhs, 0, s0, 1, opt.ode);
    if (sol.domain_exit) throw ChartExit("shooting path left the chart");
    sh.x1 = sol.y_end.head(N);
    sh.v1 = sol.y_end.tail(N);
    return sh;
  }
  Vec s0 = Vec::Zero(2 * N + 2 * N * N);
  s0.head(N) = p;
  s0.segment(N, N) = w;
  Eigen::Map<Mat>(s0.data() + 2 * N + N * N, N, N) = Mat::Identity(N, N);
  auto rhs = [&](double, const Vec& s) {
    const Vec x = s.head(N), v = s.segment(N, N);
    chart_guard(spec, x, opt.max_coordinate);
    const std::vector<RealJet> S = spray_jets(metric_jet(spec, {x, v}, 2, 3), v);
    Mat Sx(N, N), Sy(N, N);
    Vec sp(N);
    for (int i = 0; i < N; ++i) {
      sp[i] = S[i].value();
      for (int j = 0; j < N; ++j) {
        Sx(i, j) = S[i].dx(j).value();
        Sy(i, j) = S[i].dy(j).value();
      }
    }
    Eigen::Map<const Mat> Px(s.data() + 2 * N, N, N), Pv(s.data() + 2 * N + N * N, N, N);
    Vec ds(s.size());
    ds.head(N) = v;
    ds.segment(N, N) = -2 * sp;
    Eigen::Map<Mat>(ds.data() + 2 * N, N, N) = Pv;
    Eigen::Map<Mat>(ds.data() + 2 * N + N * N, N, N) = -2 * (Sx * Px + Sy * Pv);
    return ds;
  };
  const OdeSolution sol = integrate_ode(rhs, 0, s0, 1, opt.ode);
  if (sol.domain_exit) throw ChartExit("shooting path left the chart");
  sh.x1 = sol.y_end.head(N);
  sh.v1 = sol.y_end.segment(N, N);
  sh.D = Eigen::Map<const Mat>(sol.y_end.data() + 2 * N, N, N);
  return sh;
}

}  // namespace detail

/// Solves exp_p(w) = q by damped Newton on the shooting map. Without a guess
/// the target is reached by continuation from p; if that fails the shortest
/// solution over several starting guesses is kept. With `chord` the given
/// Jacobian is reused (chord iteration) and only plain geodesics are
/// integrated.
inline BvpResult distance_bvp(const MetricSpec& spec, const Vec& p, const Vec& q, const BvpOptions& opt = {},
                              const Vec* guess = nullptr, const Mat* chord = nullptr) {
  const int N = 2 * spec.n;
  if (p.size() != N || q.size() != N) throw Error("endpoint has wrong dimension");
  if ((p - q).norm() == 0) throw DomainError("endpoints coincide");
  std::vector<Vec> starts;
  if (guess) starts.push_back(*guess);
  const Vec d = q - p;
  starts.push_back(d);
  starts.push_back(0.5 * d);
  starts.push_back(1.5 * d);
  Rng rng(opt.seed);
  while (static_cast<int>(starts.size()) < opt.starts + (guess ? 1 : 0))
    starts.push_back(d + 0.3 * d.norm() * sample_ball(rng, N, 1.0));

  // the straight segment bounds the distance from above: a converged
  // solution longer than it is not minimizing, and iterates far beyond it
  // are heading for a wrapped geodesic
  double seg = 0;
  {
    const int K = 32;
    for (int k = 0; k <= K; ++k) {
      const double wt = (k == 0 || k == K) ? 1 : (k % 2 ? 4 : 2);
      seg += wt * std::sqrt(spec.G(p + (double(k) / K) * d, d));
    }
    seg /= 3.0 * K;
  }
  const double accept = seg * (1 + 1e-6), cap = 2 * seg;

  auto certify = [&](BvpResult& b) {
    if (opt.certify) {
      JacobiOptions jo;
      jo.geo.max_coordinate = opt.max_coordinate;
      jo.stop_at_conjugate = true;
      const JacobiSolution J = integrate_jacobi(spec, p, b.y0, b.r, jo);
      b.conjugate_time = J.conjugate_time;
      b.conjugate_free = !(J.conjugate_time < b.r);
    }
    return b;
  };
  struct Run {
    Vec w;
    detail::Shot sh;
    Mat D;
    double res = 0;
    int it = 0;
  };
  // damped Newton on |exp_p(w) - target|; D is the Jacobian at w or the
  // frozen chord matrix
  auto newton = [&](Vec w, const Vec& target, bool use_chord, int max_iter) {
    Run run;
    run.sh = detail::shoot(spec, p, w, opt, !use_chord);
    run.D = use_chord ? *chord : run.sh.D;
    run.res = (run.sh.x1 - target).norm();
    for (; run.it < max_iter && run.res > opt.tol; ++run.it) {
      const Vec step = run.D.fullPivLu().solve(run.sh.x1 - target);
      double lam = 1;
      bool improved = false;
      for (int ls = 0; ls < 12; ++ls, lam *= 0.5) {
        if (std::sqrt(spec.G(p, w - lam * step)) >= cap) continue;
        try {
          detail::Shot t = detail::shoot(spec, p, w - lam * step, opt, !use_chord);
          const double tr = (t.x1 - target).norm();
          if (tr < run.res) {
            w -= lam * step;
            run.sh = std::move(t);
            run.res = tr;
            improved = true;
            break;
          }
        } catch (const ChartExit&) {
        }
      }
      if (!improved) break;
      if (!use_chord) run.D = run.sh.D;
    }
    run.w = w;
    return run;
  };

  BvpResult best;
  bool found = false;
  std::string last_error = "no start converged";
  auto consider = [&](const Run& run, int used) {
    const double r = std::sqrt(spec.G(p, run.w));
    if (run.res > opt.tol || (!guess && r > accept) || (found && r >= best.r)) return;
    best.w = run.w;
    best.residual = run.res;
    best.iterations = run.it;
    best.starts_used = used;
    best.jacobian = run.D;
    best.r = r;
    best.y0 = run.w / r;
    best.T = run.sh.v1 / std::sqrt(spec.G(run.sh.x1, run.sh.v1));
    found = true;
  };

  if (guess) {
    try {
      consider(newton(*guess, q, chord != nullptr, opt.max_iter), 1);
    } catch (const Error& e) {
      last_error = e.what();
    }
    if (found) return certify(best);
  } else {
    // continuation: move the target along the segment from p, so the
    // solution is tracked from w = 0 and stays on the short geodesic
    try {
      double s = 0, ds = 1;
      Vec w = Vec::Zero(N);
      Mat D = Mat::Identity(N, N);
      Run run;
      bool have = false;
      int shots = 0;
      while (s < 1 && ds > 1e-3 && shots < 40 * opt.max_iter) {
        const double s1 = std::min(1.0, s + ds);
        const Vec w1 = w + D.fullPivLu().solve((s1 - s) * d);
        try {
          Run t = newton(w1, p + s1 * d, false, s1 < 1 ? 6 : opt.max_iter);
          shots += t.it + 1;
          if (t.res <= (s1 < 1 ? 1e-6 : opt.tol)) {
            s = s1;
            w = t.w;
            D = t.D;
            run = std::move(t);
            have = s >= 1;
            ds = std::min(2 * ds, 1.0);
            continue;
          }
        } catch (const ChartExit&) {
        }
        ds /= 2;
      }
      if (have) consider(run, 1);
    } catch (const Error& e) {
      last_error = e.what();
    }
    if (found) return certify(best);
  }
  for (size_t si = guess ? 1 : 0; si < starts.size(); ++si) {
    try {
      consider(newton(starts[si], q, false, opt.max_iter), static_cast<int>(si) + 2);
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  if (!found) throw ConvergenceError("distance BVP did not converge: " + last_error);
  return certify(best);
}

// ---------------------------------------------------------------------------
// second holomorphic derivative of the distance

struct R11Options {
  double h_rel = 1e-3;  // step = r * h_rel, halved once for Richardson
  BvpOptions bvp;
};

struct R11Result {
  double r = 0;
  cplx r11;
  Mat hessian;   // real Hessian of r at q (Richardson-extrapolated)
  Vec gradient;  // dr at q, from the Legendre map of T
  Vec T;         // unit tangent at q
  CVec T_o;      // (1,0) part of T in complex coordinates
  CMat d2;       // d^2 r / dz^a dz^b
  CVec dz;       // d r / dz^a
  CVec spray;    // complex spray at (q, T_o)
  BvpResult center;
};

/// r11 = T_o^a T_o^b d_a d_b r - 2 G^a(T_o) d_a r at q, with the second
/// derivatives by central differences of the shooting distance.
inline R11Result r11_direct(const MetricSpec& spec, const Vec& p, const Vec& q, const R11Options& opt = {}) {
  const int N = 2 * spec.n, n = spec.n;
  R11Result R;
  R.center = distance_bvp(spec, p, q, opt.bvp);
  R.r = R.center.r;
  R.T = R.center.T;
  BvpOptions nb = opt.bvp;
  nb.certify = false;
  auto dist = [&](const Vec& qq) {
    // chord guess: w + D^{-1} (qq - q)
    const Vec guess = R.center.w + R.center.jacobian.fullPivLu().solve(qq - q);
    return distance_bvp(spec, p, qq, nb, &guess, &R.center.jacobian).r;
  };
  auto hessian_at = [&](double h) {
    Mat H(N, N);
    std::vector<double> plus(N), minus(N);
    for (int i = 0; i < N; ++i) {
      Vec e = Vec::Unit(N, i) * h;
      plus[i] = dist(q + e);
      minus[i] = dist(q - e);
      H(i, i) = (plus[i] - 2 * R.r + minus[i]) / (h * h);
    }
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) {
        const Vec ei = Vec::Unit(N, i) * h, ej = Vec::Unit(N, j) * h;
        H(i, j) = H(j, i) = (dist(q + ei + ej) - dist(q + ei - ej) - dist(q - ei + ej) + dist(q - ei - ej)) / (4 * h * h);
      }
    return H;
  };
  const double h = R.r * opt.h_rel;
  const Mat H1 = hessian_at(h), H2 = hessian_at(h / 2);
  R.hessian = (4 * H2 - H1) / 3;
  R.gradient = fundamental_tensor_at(spec, q, R.T) * R.T;
  R.T_o = to_complex(R.T);
  R.dz = CVec(n);
  R.d2 = CMat(n, n);
  const cplx I(0, 1);
  for (int a = 0; a < n; ++a) {
    R.dz[a] = 0.5 * (R.gradient[a] - I * R.gradient[a + n]);
    for (int b = 0; b < n; ++b)
      R.d2(a, b) = 0.25 * ((R.hessian(a, b) - R.hessian(a + n, b + n)) - I * (R.hessian(a, b + n) + R.hessian(a + n, b)));
  }
  R.spray = cf_connection(spec, {q, R.T}).spray;
  R.r11 = R.T_o.transpose() * R.d2 * R.T_o;
  R.r11 -= 2.0 * (R.spray.array() * R.dz.array()).sum();
  return R;
}

// ---------------------------------------------------------------------------
// Riccati quantity f = H(V, V) / 4 along a geodesic

struct RiccatiRow {
  double t = 0;
  double f = 0;
  double fprime = 0;
  double lhs = 0;  // 4 f^2 + f'
  double rhs = 0;  // -H(T_o) / 4
  double holomorphic = 0;
  double bound = std::numeric_limits<double>::quiet_NaN();  // ct_lambda(2t) / 2, when lambda is given
};

struct RiccatiProbe {
  std::vector<RiccatiRow> rows;
  double limit = 0;  // extrapolated t f(t) as t -> 0
  double max_strong_kahler = 0;
};

/// f and f' from the Jacobi solution: H' = -H^2 - K along the path, so
/// f' = (-V.H^2 V - V.K V) / 4 + (V'.H V) / 2 with V' by central difference.
inline RiccatiRow riccati_row(const JacobiSolution& J, double t) {
  RiccatiRow row;
  row.t = t;
  const DistanceProbe p = distance_hessian(J, t);
  const Mat K = J.curvature_frame(t).topLeftCorner(J.m, J.m);
  const double dt = 1e-5 * std::max(t, 1e-2);
  Vec Vd = Vec::Zero(J.m);
  if (t + dt < J.t_end() && t - dt > 0) {
    auto coeff = [&](double s) {
      const JacobiState st = J.at(s);
      const Vec T = st.v / std::sqrt(J.spec.G(st.x, st.v));
      return Vec(st.E.leftCols(J.m).transpose() * fundamental_tensor_at(J.spec, st.x, T) * apply_J(T));
    };
    Vd = (coeff(t + dt) - coeff(t - dt)) / (2 * dt);
  }
  row.f = p.hvv / 4;
  row.fprime = (-p.V.dot(p.H * p.H * p.V) - p.V.dot(K * p.V)) / 4 + Vd.dot(p.H * p.V) / 2;
  row.lhs = 4 * row.f * row.f + row.fprime;
  row.holomorphic = holomorphic_curvature(J.spec, {p.x, p.T});
  row.rhs = -row.holomorphic / 4;
  return row;
}

/// Requires strong Kahler residual below 1e-8 at the probe points.
/// With lambda set, each row also carries the comparison bound f <= ct_lambda(2t) / 2.
inline RiccatiProbe riccati_probe(const JacobiSolution& J, const std::vector<double>& times,
                                  std::optional<double> lambda = std::nullopt) {
  RiccatiProbe out;
  for (double t : times) {
    const JacobiState st = J.at(t);
    out.max_strong_kahler = std::max(out.max_strong_kahler, kahler_residuals(J.spec, {st.x, st.v}).strong);
  }
  if (out.max_strong_kahler >= 1e-8) throw HypothesisError("Riccati probe needs a Kahler metric along the path");
  for (double t : times) {
    out.rows.push_back(riccati_row(J, t));
    if (lambda) {
      try {
        out.rows.back().bound = ct_lambda(*lambda, 2 * t) / 2;
      } catch (const PoleError&) {
      }
    }
  }
  // t f(t) = 1/4 + a t^2 + b t^4 near 0.
  const std::vector<double> ts = {0.01, 0.02, 0.03, 0.04};
  Mat M(ts.size(), 3);
  Vec b(ts.size());
  for (size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i] * std::min(1.0, J.t_end());
    M(i, 0) = 1;
    M(i, 1) = t * t;
    M(i, 2) = t * t * t * t;
    b[i] = t * distance_hessian(J, t).hvv / 4;
  }
  out.limit = M.colPivHouseholderQr().solve(b)[0];
  return out;
}

// ---------------------------------------------------------------------------
// polar volume estimates

struct VolumeConfig {
  std::size_t directions = 1000;
  std::size_t radial_samples = 1000;  // per direction and ball
  std::size_t batches = 20;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  JacobiOptions jacobi{GeodesicOptions{OdeOptions{1e-9, 1e-11}}};
  int tau_nodes = 24;  // Chebyshev nodes for e^{-tau} along each geodesic
};

struct VolumeCurve {
  std::vector<double> radii;
  std::vector<double> volume;                    // mean over all directions
  std::vector<std::vector<double>> batch_volume;  // [batch][radius]
  std::size_t directions = 0;
  std::size_t samples_per_ball = 0;
  std::size_t chart_exits = 0;
  std::size_t conjugate_truncations = 0;

  double ratio(std::size_t hi, std::size_t lo) const { return volume[hi] / volume[lo]; }
  /// Standard error of the ratio from batch means.
  double ratio_sigma(std::size_t hi, std::size_t lo) const {
    const std::size_t B = batch_volume.size();
    double mean = 0, sq = 0;
    for (const auto& b : batch_volume) mean += b[hi] / b[lo];
    mean /= B;
    for (const auto& b : batch_volume) sq += std::pow(b[hi] / b[lo] - mean, 2);
    return std::sqrt(sq / (B - 1) / B);
  }
};

namespace detail {

/// Barycentric interpolation on Chebyshev-Lobatto nodes of [0, L].
struct Chebyshev {
  std::vector<double> t, f, w;
  Chebyshev(double L, int n, const std::function<double(double)>& fn) {
    for (int k = 0; k <= n; ++k) {
      t.push_back(0.5 * L * (1 - std::cos(M_PI * k / n)));
      f.push_back(fn(t.back()));
      w.push_back((k % 2 ? -1.0 : 1.0) * (k == 0 || k == n ? 0.5 : 1.0));
    }
  }
  double operator()(double x) const {
    double num = 0, den = 0;
    for (size_t k = 0; k < t.size(); ++k) {
      const double d = x - t[k];
      if (d == 0) return f[k];
      num += w[k] * f[k] / d;
      den += w[k] / d;
    }
    return num / den;
  }
};

}  // namespace detail

/// mu(B(p, R)) = int over unit directions of int_0^R e^{-tau(gamma, gamma')} det A dt,
/// with directions theta = w / F(w) for w uniform on the Euclidean sphere and
/// the indicatrix measure d nu = sqrt(det g(p, theta)) F(w)^{-N} dw.
inline VolumeCurve volume_curve(const MetricSpec& spec, const Vec& p, const Measure& mu, const std::vector<double>& radii,
                                const VolumeConfig& cfg = {}) {
  const int N = 2 * spec.n;
  VolumeCurve out;
  out.radii = radii;
  out.directions = cfg.directions;
  out.samples_per_ball = cfg.directions * cfg.radial_samples;
  const double rmax = *std::max_element(radii.begin(), radii.end());
  std::seed_seq sq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                   static_cast<std::uint32_t>(cfg.stream), static_cast<std::uint32_t>(cfg.stream >> 32)};
  Rng rng(sq);
  std::uniform_real_distribution<double> U(0, 1);
  const double sphere = N * detail::unit_ball_volume(N);
  auto log_sqrt_det = [&](const Vec& x, const Vec& y) { return 0.5 * std::log(fundamental_tensor_at(spec, x, y).determinant()); };

  out.batch_volume.assign(cfg.batches, std::vector<double>(radii.size(), 0));
  std::vector<double> total(radii.size(), 0);
  std::vector<std::size_t> batch_count(cfg.batches, 0);
  for (std::size_t i = 0; i < cfg.directions; ++i) {
    const Vec w = sample_sphere(rng, N);
    const double Fw = std::sqrt(spec.G(p, w));
    const Vec theta = w / Fw;
    const double weight = sphere * std::pow(Fw, -N) * std::exp(log_sqrt_det(p, theta));
    std::vector<double> us(cfg.radial_samples * radii.size());
    for (double& u : us) u = U(rng);
    JacobiOptions jo = cfg.jacobi;
    jo.stop_at_conjugate = true;
    const JacobiSolution J = integrate_jacobi(spec, p, theta, rmax, jo);
    const std::size_t b = i % cfg.batches;
    ++batch_count[b];
    if (J.chart_exit) {
      ++out.chart_exits;
      continue;
    }
    const double tcut = std::min(J.conjugate_time, rmax);
    if (tcut < rmax) ++out.conjugate_truncations;
    const detail::Chebyshev etau(tcut, cfg.tau_nodes, [&](double t) {
      const JacobiState st = J.at(t);
      return std::exp(log_measure_density(spec, mu, st.x) - log_sqrt_det(st.x, st.v));
    });
    for (std::size_t k = 0; k < radii.size(); ++k) {
      const double R = std::min(radii[k], tcut);
      double acc = 0;
      for (std::size_t j = 0; j < cfg.radial_samples; ++j) {
        const double t = R * (j + us[k * cfg.radial_samples + j]) / cfg.radial_samples;
        acc += etau(t) * J.det_A(t);
      }
      const double v = weight * R * acc / cfg.radial_samples;
      total[k] += v;
      out.batch_volume[b][k] += v;
    }
  }
  out.volume.resize(radii.size());
  for (std::size_t k = 0; k < radii.size(); ++k) out.volume[k] = total[k] / cfg.directions;
  for (std::size_t b = 0; b < cfg.batches; ++b)
    for (double& v : out.batch_volume[b]) v /= std::max<std::size_t>(1, batch_count[b]);
  return out;
}

}  // namespace flab
