#pragma once

// Complex side: Levi matrix, Chern-Finsler nonlinear connection and spray,
// Chern-Finsler connection, holomorphic curvature and the Kähler residuals.
// All complex derivatives are Wirtinger combinations of the real G jet.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "flab/error.hpp"
#include "flab/jet_engine.hpp"
#include "flab/metric.hpp"

namespace flab {

using cplx = std::complex<double>;

/// Dense complex rank-3 array, index order [a][b][c].
struct CTensor3 {
  int n = 0;
  std::vector<cplx> d;
  CTensor3() = default;
  explicit CTensor3(int n_) : n(n_), d(static_cast<size_t>(n_ * n_ * n_)) {}
  cplx& operator()(int a, int b, int c) { return d[(static_cast<size_t>(a) * n + b) * n + c]; }
  cplx operator()(int a, int b, int c) const { return d[(static_cast<size_t>(a) * n + b) * n + c]; }
  double max_abs() const {
    double m = 0;
    for (const cplx& v : d) m = std::max(m, std::abs(v));
    return m;
  }
};

struct ComplexTensorSet {
  EvalPoint point;
  int n = 0;
  double G = 0;
  CVec v;
  CVec Gv;          // G_alpha = dG/dv^alpha
  CMat levi;        // levi(a, b) = G_{a bbar}
  CMat levi_inv;    // levi_inv(t, a) = G^{tbar a}
  double levi_min_eigenvalue = 0;
  CMat nl_conn;     // nl_conn(a, b) = Gamma^a_{;b}
  CVec spray;       // complex spray (1/2) Gamma^a_{;b} v^b
  CTensor3 conn;    // conn(a, b, m) = Gamma^a_{b;m}
  CTensor3 C;       // C(a, b, g) = C^a_{bg}
  cplx curvature_contracted = 0;  // R_{a bbar; m nbar} v^a vbar^b v^m vbar^n
  double H = 0;
  double H_imag = 0;
  bool has_curvature = false;
};

namespace detail {

inline CMat cvalues(const std::vector<std::vector<ComplexJet>>& m) {
  CMat r(m.size(), m.size());
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < m.size(); ++j) r(i, j) = m[i][j].value();
  return r;
}

inline void check_pseudoconvex(const CMat& L, double& min_eig) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (L + L.adjoint()));
  min_eig = es.eigenvalues().minCoeff();
  if (!(min_eig > 1e-12)) throw NotStronglyPseudoconvex(min_eig);
}

inline ComplexJet as_complex(const RealJet& j) { return make_complex(j, nullptr); }

}  // namespace detail

/// Levi matrix G_{a bbar} and its inverse from a JetTable with y-order >= 2.
inline void levi_metric(const JetTable& jets, CMat& levi, CMat& levi_inv, double* min_eig = nullptr) {
  if (jets.max_y() < 2) throw Error("Levi matrix needs y-order 2");
  const int n = jets.dim() / 2;
  const RealJet G = jets.jet().truncated(0, 2);
  levi = CMat(n, n);
  for (int a = 0; a < n; ++a) {
    const ComplexJet Ga = wirtinger(G, Block::Y, a, false);
    for (int b = 0; b < n; ++b) levi(a, b) = wirtinger(Ga, Block::Y, b, true).value();
  }
  double me;
  detail::check_pseudoconvex(levi, me);
  // sum_t levi_inv(t, a) levi(b, t) = delta_ab, i.e. levi_inv = levi^{-1}.
  levi_inv = levi.inverse();
  if (min_eig) *min_eig = me;
}

/// Connection data; with `with_curvature`, also the holomorphic curvature
/// (G jets of order (2, 4) instead of (1, 3)).
inline ComplexTensorSet complex_tensors(const MetricSpec& spec, const EvalPoint& p, bool with_curvature = true) {
  const int n = spec.n;
  const int mx = with_curvature ? 2 : 1, my = with_curvature ? 4 : 3;
  const RealJet G = metric_jet(spec, p, mx, my);
  ComplexTensorSet t;
  t.point = p;
  t.n = n;
  t.G = G.value();
  t.v = to_complex(p.y);

  std::vector<ComplexJet> Gv(n), Gvb(n);
  for (int a = 0; a < n; ++a) {
    Gv[a] = wirtinger(G, Block::Y, a, false);
    Gvb[a] = wirtinger(G, Block::Y, a, true);
  }
  t.Gv = CVec(n);
  for (int a = 0; a < n; ++a) t.Gv[a] = Gv[a].value();
  // L[a][b] = G_{a bbar}
  std::vector<std::vector<ComplexJet>> L(n, std::vector<ComplexJet>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) L[a][b] = wirtinger(Gv[a], Block::Y, b, true);
  t.levi = detail::cvalues(L);
  detail::check_pseudoconvex(t.levi, t.levi_min_eigenvalue);
  t.levi_inv = t.levi.inverse();

  // Systems sum_a G_{a tbar} X^a = rhs_t; matrix A[t][a] = L[a][t].
  auto system = [&](int xo, int yo) {
    std::vector<std::vector<ComplexJet>> A(n, std::vector<ComplexJet>(n));
    for (int tt = 0; tt < n; ++tt)
      for (int a = 0; a < n; ++a) A[tt][a] = L[a][tt].truncated(xo, yo);
    return A;
  };

  // Nonlinear connection Gamma^a_{;b}: rhs G_{tbar;b} = d_b dG/dvbar^t.
  std::vector<std::vector<ComplexJet>> rhs(n, std::vector<ComplexJet>(n));
  for (int tt = 0; tt < n; ++tt)
    for (int b = 0; b < n; ++b) rhs[tt][b] = wirtinger(Gvb[tt], Block::X, b, false).truncated(mx - 1, my - 2);
  const auto NL = solve(system(mx - 1, my - 2), rhs);  // NL[a][b]
  t.nl_conn = detail::cvalues(NL);
  t.spray = 0.5 * t.nl_conn * t.v;

  // Third fiber derivatives G_{b tbar g}.
  std::vector<std::vector<std::vector<ComplexJet>>> G3(n, std::vector<std::vector<ComplexJet>>(n, std::vector<ComplexJet>(n)));
  for (int b = 0; b < n; ++b)
    for (int tt = 0; tt < n; ++tt)
      for (int g = 0; g < n; ++g) G3[b][tt][g] = wirtinger(L[b][tt], Block::Y, g, false);

  // Chern-Finsler connection Gamma^a_{b;m}: rhs d_m G_{b tbar} - Gamma^g_{;m} G_{b tbar g}.
  std::vector<std::vector<ComplexJet>> rhs2(n, std::vector<ComplexJet>(n * n));
  for (int tt = 0; tt < n; ++tt)
    for (int b = 0; b < n; ++b)
      for (int m = 0; m < n; ++m) {
        ComplexJet r = wirtinger(L[b][tt], Block::X, m, false).truncated(mx - 1, my - 3);
        for (int g = 0; g < n; ++g) r -= NL[g][m] * G3[b][tt][g];
        rhs2[tt][b * n + m] = r.truncated(mx - 1, my - 3);
      }
  const auto CF = solve(system(mx - 1, my - 3), rhs2);  // CF[a][b*n+m]
  t.conn = CTensor3(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int m = 0; m < n; ++m) t.conn(a, b, m) = CF[a][b * n + m].value();

  // Cartan-type tensor C^a_{bg} = G^{tbar a} G_{b tbar g}.
  t.C = CTensor3(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int g = 0; g < n; ++g) {
        cplx s = 0;
        for (int tt = 0; tt < n; ++tt) s += t.levi_inv(tt, a) * G3[b][tt][g].value();
        t.C(a, b, g) = s;
      }

  if (!with_curvature) return t;

  // delta_nbar F = d_nbar F - conj(Gamma^g_{;n}) dF/dvbar^g, at the point.
  auto delta_bar = [&](const ComplexJet& F, int nu) {
    cplx r = wirtinger(F, Block::X, nu, true).value();
    for (int g = 0; g < n; ++g) r -= std::conj(t.nl_conn(g, nu)) * wirtinger(F, Block::Y, g, true).value();
    return r;
  };
  // R^s_{a;m nbar} = -delta_nbar Gamma^s_{a;m} - C^s_{ag} delta_nbar Gamma^g_{;m}
  std::vector<cplx> dNL(static_cast<size_t>(n * n * n));  // [g][m][nu]
  for (int g = 0; g < n; ++g)
    for (int m = 0; m < n; ++m)
      for (int nu = 0; nu < n; ++nu) dNL[(g * n + m) * n + nu] = delta_bar(NL[g][m], nu);
  cplx Rc = 0;
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < n; ++a)
      for (int m = 0; m < n; ++m) {
        const cplx vam = t.v[a] * t.v[m];
        if (vam == cplx{}) continue;
        for (int nu = 0; nu < n; ++nu) {
          cplx R = -delta_bar(CF[s][a * n + m], nu);
          for (int g = 0; g < n; ++g) R -= t.C(s, a, g) * dNL[(g * n + m) * n + nu];
          // lower with G_{s bbar} and contract with vbar^b
          cplx low = 0;
          for (int b = 0; b < n; ++b) low += t.levi(s, b) * std::conj(t.v[b]);
          Rc += low * R * vam * std::conj(t.v[nu]);
        }
      }
  t.curvature_contracted = Rc;
  const cplx H = 2.0 * Rc / (t.G * t.G);
  t.H = H.real();
  t.H_imag = H.imag();
  t.has_curvature = true;
  return t;
}

inline ComplexTensorSet cf_connection(const MetricSpec& spec, const EvalPoint& p) { return complex_tensors(spec, p, false); }

inline double holomorphic_curvature(const MetricSpec& spec, const EvalPoint& p) {
  const ComplexTensorSet t = complex_tensors(spec, p, true);
  if (std::abs(t.H_imag) > 1e-9 * std::max(1.0, std::abs(t.H))) throw Error("holomorphic curvature is not real");
  return t.H;
}

struct KahlerResiduals {
  double strong = 0;  // max |Gamma^a_{b;m} - Gamma^a_{m;b}|
  double weak = 0;    // max_b |G_a (Gamma^a_{b;m} - Gamma^a_{m;b}) v^m|
};

inline KahlerResiduals kahler_residuals(const ComplexTensorSet& t) {
  KahlerResiduals r;
  const int n = t.n;
  for (int b = 0; b < n; ++b) {
    cplx w = 0;
    for (int a = 0; a < n; ++a)
      for (int m = 0; m < n; ++m) {
        const cplx d = t.conn(a, b, m) - t.conn(a, m, b);
        r.strong = std::max(r.strong, std::abs(d));
        w += t.Gv[a] * d * t.v[m];
      }
    r.weak = std::max(r.weak, std::abs(w));
  }
  return r;
}

inline KahlerResiduals kahler_residuals(const MetricSpec& spec, const EvalPoint& p) {
  return kahler_residuals(cf_connection(spec, p));
}

inline nlohmann::json to_json(const ComplexTensorSet& t) {
  auto c = [](cplx z) { return std::vector<double>{z.real(), z.imag()}; };
  auto cm = [&](const CMat& m) {
    nlohmann::json j = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < m.cols(); ++k) row.push_back(c(m(i, k)));
      j.push_back(row);
    }
    return j;
  };
  auto cv = [&](const CVec& v) {
    nlohmann::json j = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(c(v[i]));
    return j;
  };
  auto ct = [&](const CTensor3& x) {
    nlohmann::json j = nlohmann::json::array();
    for (const cplx& z : x.d) j.push_back(c(z));
    return j;
  };
  nlohmann::json j;
  j["n"] = t.n;
  j["G"] = t.G;
  j["levi"] = cm(t.levi);
  j["levi_inverse"] = cm(t.levi_inv);
  j["levi_min_eigenvalue"] = t.levi_min_eigenvalue;
  j["nonlinear_connection"] = cm(t.nl_conn);
  j["complex_spray"] = cv(t.spray);
  j["chern_finsler_connection"] = ct(t.conn);
  j["cartan_type"] = ct(t.C);
  if (t.has_curvature) {
    j["curvature_contracted"] = c(t.curvature_contracted);
    j["holomorphic_curvature"] = t.H;
    j["normalization"] = "H = (2/G^2) R v vbar v vbar; twice the convention that omits the factor 2";
  }
  return j;
}

}  // namespace flab
