#pragma once

// Real <-> complex dictionary and the identities relating the two engines.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "flab/complex_engine.hpp"
#include "flab/frame.hpp"
#include "flab/metric.hpp"
#include "flab/real_engine.hpp"

namespace flab {

/// A complex test function of v (and possibly z) with declared bidegree:
/// H(zeta v) = zeta^p conj(zeta)^q H(v).
struct HomogeneitySubject {
  MetricExpr expr;
  int p = 1;
  int q = 1;

  static HomogeneitySubject parse(const std::string& text, int p, int q) { return {parse_metric(text), p, q}; }
};

struct HomogeneityResiduals {
  double declared = 0;  // max |H(zeta v) - zeta^p conj(zeta)^q H(v)| / max(1, |H|) over fixed zeta
  double R_y = 0;       // |R_k y^k - (p+q) R|
  double I_y = 0;       // |I_k y^k - (p+q) I|
  double R_u = 0;       // |R_k u^k - (q-p) I|
  double I_u = 0;       // |I_k u^k - (p-q) R|
  double holomorphic = 0;       // |H_a v^a - p H|
  double antiholomorphic = 0;   // |H_abar vbar^a - q H|
  double max() const { return std::max({declared, R_y, I_y, R_u, I_u, holomorphic, antiholomorphic}); }
};

inline HomogeneityResiduals homogeneity_check(const HomogeneitySubject& s, const EvalPoint& p) {
  const int N = static_cast<int>(p.y.size()), n = N / 2;
  const JetSpace& sp = JetSpace::get(N, 0, 1);
  auto jv = s.expr.evaluate_jet(sp, {p.x.data(), static_cast<size_t>(N)}, {p.y.data(), static_cast<size_t>(N)});
  const RealJet& R = jv.re;
  const RealJet I = jv.real ? RealJet(sp, 0.0) : jv.im;
  const Vec u = apply_J(p.y);
  double Ry = 0, Iy = 0, Ru = 0, Iu = 0;
  for (int k = 0; k < N; ++k) {
    const double rk = R.dy(k).value(), ik = I.dy(k).value();
    Ry += rk * p.y[k];
    Iy += ik * p.y[k];
    Ru += rk * u[k];
    Iu += ik * u[k];
  }
  const double Rv = R.value(), Iv = I.value();
  const double scale = std::max(1.0, std::hypot(Rv, Iv));
  HomogeneityResiduals r;
  r.R_y = std::abs(Ry - (s.p + s.q) * Rv) / scale;
  r.I_y = std::abs(Iy - (s.p + s.q) * Iv) / scale;
  r.R_u = std::abs(Ru - (s.q - s.p) * Iv) / scale;
  r.I_u = std::abs(Iu - (s.p - s.q) * Rv) / scale;
  const ComplexJet Hc = make_complex(R, &I);
  const CVec v = to_complex(p.y);
  cplx hol = 0, anti = 0;
  for (int a = 0; a < n; ++a) {
    hol += wirtinger(Hc, Block::Y, a, false).value() * v[a];
    anti += wirtinger(Hc, Block::Y, a, true).value() * std::conj(v[a]);
  }
  const cplx H(Rv, Iv);
  r.holomorphic = std::abs(hol - static_cast<double>(s.p) * H) / scale;
  r.antiholomorphic = std::abs(anti - static_cast<double>(s.q) * H) / scale;
  const CVec z = to_complex(p.x);
  for (cplx zeta : {cplx(0.6, 0.8), cplx(-1.3, 0.4), cplx(0.2, -1.7)}) {
    const CVec vz = v * zeta;
    const cplx lhs = s.expr.evaluate({z.data(), static_cast<size_t>(n)}, {vz.data(), static_cast<size_t>(n)});
    const cplx rhs = std::pow(zeta, s.p) * std::pow(std::conj(zeta), s.q) * H;
    r.declared = std::max(r.declared, std::abs(lhs - rhs) / scale);
  }
  return r;
}

struct JInvariance {
  double a = 0;  // |g_y(Jy, JX) - g_y(y, X)|
  double b = 0;  // |g_y(y, Jy)|
  double c = 0;  // |g_y(y, y) - g_y(Jy, Jy)|
  double d = 0;  // max |g_ij J^i_p J^j_q - g_pq|
  double e = 0;  // max |C_ijs J^i_p J^j_q - C_pqs|
};

/// Residuals (a)-(c) are relative to max(1, |g|); (d), (e) are absolute.
inline JInvariance j_invariance_check(const Mat& g, const Tensor& C, const Vec& y, const Vec& X) {
  const int N = static_cast<int>(g.rows()), n = N / 2;
  const Mat J = J_matrix(n);
  const Vec Jy = J * y, JX = J * X;
  JInvariance r;
  const double gyx = y.dot(g * X), gyy = y.dot(g * y);
  r.a = std::abs(Jy.dot(g * JX) - gyx) / std::max(1.0, std::abs(gyx));
  r.b = std::abs(y.dot(g * Jy)) / std::max(1.0, gyy);
  r.c = std::abs(gyy - Jy.dot(g * Jy)) / std::max(1.0, gyy);
  r.d = (J.transpose() * g * J - g).cwiseAbs().maxCoeff();
  for (int s = 0; s < N; ++s) {
    Mat Cs(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) Cs(i, j) = C(i, j, s);
    r.e = std::max(r.e, (J.transpose() * Cs * J - Cs).cwiseAbs().maxCoeff());
  }
  return r;
}

inline JInvariance j_invariance_check(const RealTensorSet& t, const Vec& X) {
  return j_invariance_check(t.g, t.C, t.point.y, X);
}

/// max_b |complex spray^b - (G^b + i G^{b+n})|.
inline double spray_correspondence(const ComplexTensorSet& c, const Vec& real_spray) {
  const CVec s = to_complex(real_spray);
  return (c.spray - s).cwiseAbs().maxCoeff();
}

inline double spray_correspondence(const MetricSpec& spec, const EvalPoint& p) {
  return spray_correspondence(cf_connection(spec, p), spray_data(spec, p.x, p.y, 0).spray);
}

struct Parallelism {
  double r0 = 0;  // max |G^i_k u^k - 2 J^i_k G^k|
  double r1 = 0;  // max |G^i_sk u^k + G^i_k J^k_s - 2 J^i_k G^k_s|
  double r2 = 0;  // max |J^i_{k|l} y^k y^l| with the Berwald horizontal derivative
};

inline Parallelism parallelism_residual(const RealTensorSet& t) {
  const int N = t.N;
  const Mat J = J_matrix(N / 2);
  const Vec& y = t.point.y;
  const Vec u = J * y;
  Parallelism r;
  r.r0 = (t.conn * u - 2 * J * t.spray).cwiseAbs().maxCoeff();
  for (int i = 0; i < N; ++i)
    for (int s = 0; s < N; ++s) {
      double v = 0;
      for (int k = 0; k < N; ++k) v += t.berwald_conn(i, s, k) * u[k] + t.conn(i, k) * J(k, s) - 2 * J(i, k) * t.conn(k, s);
      r.r1 = std::max(r.r1, std::abs(v));
    }
  // J^i_{k|l} = J^m_k G^i_ml - J^i_m G^m_kl (J is constant in x).
  for (int i = 0; i < N; ++i) {
    double v = 0;
    for (int k = 0; k < N; ++k)
      for (int l = 0; l < N; ++l) {
        double w = 0;
        for (int m = 0; m < N; ++m) w += J(m, k) * t.berwald_conn(i, m, l) - J(i, m) * t.berwald_conn(m, k, l);
        v += w * y[k] * y[l];
      }
    r.r2 = std::max(r.r2, std::abs(v));
  }
  return r;
}

inline Parallelism parallelism_residual(const MetricSpec& spec, const EvalPoint& p) {
  return parallelism_residual(spray_and_connection(eval_partials(spec, p, 4, 1)));
}

struct OrthogonalRicci {
  double value = 0;       // Ric(y) - K(y, Jy)
  double frame_sum = 0;   // sum of K(y, e_i) over the completion of {y, Jy}
  double ricci = 0;
  double holomorphic_flag = 0;  // K(y, Jy)
  bool degenerate = false;      // n = 1: identically zero
};

inline OrthogonalRicci orthogonal_ricci_from(const Mat& g, const Mat& Rik, const Vec& y) {
  OrthogonalRicci r;
  const Vec Jy = apply_J(y);
  r.ricci = ricci_from(g, Rik, y).trace;
  r.holomorphic_flag = flag_curvature_from(g, Rik, y, Jy);
  r.value = r.ricci - r.holomorphic_flag;
  r.degenerate = y.size() == 2;
  if (r.degenerate) {
    r.value = 0;
    return r;
  }
  const Mat E = orthonormal_frame(g, {y, Jy});
  for (int i = 2; i < E.cols(); ++i) r.frame_sum += flag_curvature_from(g, Rik, y, E.col(i));
  return r;
}

inline OrthogonalRicci orthogonal_ricci(const MetricSpec& spec, const EvalPoint& p) {
  const SprayData d = spray_data(spec, p.x, p.y, 2);
  return orthogonal_ricci_from(d.g, d.Rik, p.y);
}

}  // namespace flab
