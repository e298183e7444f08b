#pragma once

// Test-side oracles for Hermitian catalog metrics, written from the closed
// forms of the Hermitian matrix h(z) and differentiated with hyper-dual
// numbers. Shares no code with the jet engine.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Hyper-dual number v + a e1 + b e2 + ab e1e2 with e1^2 = e2^2 = 0.
struct HD {
  double v = 0, a = 0, b = 0, ab = 0;
  HD() = default;
  HD(double x) : v(x) {}
  HD(double v_, double a_, double b_, double ab_) : v(v_), a(a_), b(b_), ab(ab_) {}
};
inline HD operator+(HD x, HD y) { return {x.v + y.v, x.a + y.a, x.b + y.b, x.ab + y.ab}; }
inline HD operator-(HD x, HD y) { return {x.v - y.v, x.a - y.a, x.b - y.b, x.ab - y.ab}; }
inline HD operator-(HD x) { return {-x.v, -x.a, -x.b, -x.ab}; }
inline HD operator*(HD x, HD y) {
  return {x.v * y.v, x.v * y.a + x.a * y.v, x.v * y.b + x.b * y.v, x.v * y.ab + x.a * y.b + x.b * y.a + x.ab * y.v};
}
inline HD recip(HD x) {
  const double f = 1 / x.v, f1 = -f * f, f2 = 2 * f * f * f;
  return {f, f1 * x.a, f1 * x.b, f1 * x.ab + f2 * x.a * x.b};
}
inline HD operator/(HD x, HD y) { return x * recip(y); }

inline double recip_of(double x) { return 1 / x; }
inline HD recip_of(HD x) { return recip(x); }

/// Real and imaginary parts of h_{ab}(z) for fubini_study, complex_hyperbolic
/// and hermitian_nonkahler; x holds (Re z, Im z).
template <class T>
void hermitian(const std::string& name, int n, const std::vector<T>& x, std::vector<std::vector<T>>& A,
               std::vector<std::vector<T>>& B) {
  A.assign(n, std::vector<T>(n, T(0.0)));
  B.assign(n, std::vector<T>(n, T(0.0)));
  T s(0.0);
  for (int i = 0; i < 2 * n; ++i) s = s + x[i] * x[i];
  if (name == "euclidean") {
    for (int a = 0; a < n; ++a) A[a][a] = T(1.0);
    return;
  }
  if (name == "hermitian_nonkahler") {
    A[0][0] = T(1.0) + x[1] * x[1] + x[3] * x[3];
    A[1][1] = T(1.0);
    return;
  }
  const double sign = name == "fubini_study" ? 1.0 : -1.0;
  const T w = T(1.0) + T(sign) * s;
  const T inv = recip_of(w * w);
  // h = (w delta - sign conj(z_a) z_b) / w^2
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const T re = x[a] * x[b] + x[a + n] * x[b + n];
      const T im = x[a] * x[b + n] - x[a + n] * x[b];
      A[a][b] = ((a == b ? w : T(0.0)) - T(sign) * re) * inv;
      B[a][b] = (T(-sign) * im) * inv;
    }
}

/// Real metric matrix [[A, B], [-B, A]] from h = A + iB.
template <class T>
std::vector<std::vector<T>> real_metric(const std::string& name, int n, const std::vector<T>& x) {
  std::vector<std::vector<T>> A, B;
  hermitian(name, n, x, A, B);
  std::vector<std::vector<T>> g(2 * n, std::vector<T>(2 * n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      g[a][b] = A[a][b];
      g[a + n][b + n] = A[a][b];
      g[a][b + n] = B[a][b];
      g[a + n][b] = -B[a][b];
    }
  return g;
}

struct Riemann {
  Eigen::MatrixXd g;
  Eigen::VectorXd spray;       // (1/2) Gamma^i_jk y^j y^k
  std::vector<double> R;       // R^i_jkl, row-major
  Eigen::MatrixXd Rik;         // g_si R^s_jkl y^j y^l
};

/// Levi-Civita data of the real metric, with first and second metric
/// derivatives from hyper-dual evaluation.
inline Riemann riemann(const std::string& name, int n, const Eigen::VectorXd& xv, const Eigen::VectorXd& y) {
  const int N = 2 * n;
  std::vector<double> x(xv.data(), xv.data() + N);
  // dg[k][i][j], ddg[k][l][i][j]
  std::vector<std::vector<std::vector<double>>> dg(N);
  std::vector<std::vector<std::vector<std::vector<double>>>> ddg(N, std::vector<std::vector<std::vector<double>>>(N));
  Eigen::MatrixXd g(N, N);
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < N; ++l) {
      std::vector<HD> xh(N);
      for (int i = 0; i < N; ++i) xh[i] = HD(x[i], i == k ? 1 : 0, i == l ? 1 : 0, 0);
      auto gh = real_metric(name, n, xh);
      ddg[k][l].assign(N, std::vector<double>(N));
      if (l == 0) dg[k].assign(N, std::vector<double>(N));
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          ddg[k][l][i][j] = gh[i][j].ab;
          if (l == 0) dg[k][i][j] = gh[i][j].a;
          g(i, j) = gh[i][j].v;
        }
    }
  const Eigen::MatrixXd gi = g.inverse();
  // Lowered Christoffels Gl[m][j][k] = 1/2 (d_j g_mk + d_k g_mj - d_m g_jk) and derivatives.
  auto Gl = [&](int m, int j, int k) { return 0.5 * (dg[j][m][k] + dg[k][m][j] - dg[m][j][k]); };
  auto dGl = [&](int l, int m, int j, int k) { return 0.5 * (ddg[l][j][m][k] + ddg[l][k][m][j] - ddg[l][m][j][k]); };
  std::vector<double> Gam(N * N * N), dGam(N * N * N * N);
  auto at3 = [N](int i, int j, int k) { return (i * N + j) * N + k; };
  auto at4 = [N](int i, int j, int k, int l) { return ((i * N + j) * N + k) * N + l; };
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) {
        double v = 0;
        for (int m = 0; m < N; ++m) v += gi(i, m) * Gl(m, j, k);
        Gam[at3(i, j, k)] = v;
      }
  // d_l Gamma^i_jk = g^im (d_l Gl_mjk - d_l g_mp Gamma^p_jk)
  for (int l = 0; l < N; ++l)
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) {
          double v = 0;
          for (int m = 0; m < N; ++m) {
            double w = dGl(l, m, j, k);
            for (int p = 0; p < N; ++p) w -= dg[l][m][p] * Gam[at3(p, j, k)];
            v += gi(i, m) * w;
          }
          dGam[at4(l, i, j, k)] = v;
        }
  Riemann out;
  out.g = g;
  out.spray = Eigen::VectorXd::Zero(N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) out.spray[i] += 0.5 * Gam[at3(i, j, k)] * y[j] * y[k];
  out.R.assign(N * N * N * N, 0.0);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k)
        for (int l = 0; l < N; ++l) {
          double v = dGam[at4(k, i, l, j)] - dGam[at4(l, i, k, j)];
          for (int m = 0; m < N; ++m) v += Gam[at3(i, k, m)] * Gam[at3(m, l, j)] - Gam[at3(i, l, m)] * Gam[at3(m, k, j)];
          out.R[at4(i, j, k, l)] = v;
        }
  out.Rik = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k)
      for (int s = 0; s < N; ++s)
        for (int j = 0; j < N; ++j)
          for (int l = 0; l < N; ++l) out.Rik(i, k) += g(s, i) * out.R[at4(s, j, k, l)] * y[j] * y[l];
  return out;
}

/// Classical holomorphic sectional curvature 2 R(v, vbar, v, vbar) / h(v, vbar)^2
/// with R_{a bbar c dbar} = -d_c d_dbar h_{a bbar} + h^{fbar e} d_c h_{a fbar} d_dbar h_{e bbar}.
inline double holomorphic_sectional(const std::string& name, int n, const Eigen::VectorXd& xv,
                                    const Eigen::VectorXcd& v) {
  using C = std::complex<double>;
  const int N = 2 * n;
  std::vector<double> x(xv.data(), xv.data() + N);
  // real derivatives of h: dh[k], ddh[k][l] as complex n x n
  std::vector<Eigen::MatrixXcd> dh(N, Eigen::MatrixXcd(n, n));
  std::vector<std::vector<Eigen::MatrixXcd>> ddh(N, std::vector<Eigen::MatrixXcd>(N, Eigen::MatrixXcd(n, n)));
  Eigen::MatrixXcd h(n, n);
  for (int k = 0; k < N; ++k)
    for (int l = 0; l < N; ++l) {
      std::vector<HD> xh(N);
      for (int i = 0; i < N; ++i) xh[i] = HD(x[i], i == k ? 1 : 0, i == l ? 1 : 0, 0);
      std::vector<std::vector<HD>> A, B;
      hermitian(name, n, xh, A, B);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          h(a, b) = C(A[a][b].v, B[a][b].v);
          dh[k](a, b) = C(A[a][b].a, B[a][b].a);
          ddh[k][l](a, b) = C(A[a][b].ab, B[a][b].ab);
        }
    }
  const C I(0, 1);
  auto d = [&](int c) { return 0.5 * (dh[c] - I * dh[c + n]); };
  auto dbar = [&](int c) { return 0.5 * (dh[c] + I * dh[c + n]); };
  auto d_dbar = [&](int c, int e) {
    return 0.25 * (ddh[c][e] + I * ddh[c][e + n] - I * ddh[c + n][e] + ddh[c + n][e + n]);
  };
  const Eigen::MatrixXcd hinv = h.inverse();  // hinv(b, a): sum_a h(a, c) hinv(c, b) = delta
  C Rsum = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e) {
          C r = -d_dbar(c, e)(a, b);
          const Eigen::MatrixXcd dc = d(c), de = dbar(e);
          for (int f = 0; f < n; ++f)
            for (int g = 0; g < n; ++g) r += hinv(f, g) * dc(a, f) * de(g, b);
          Rsum += r * v[a] * std::conj(v[b]) * v[c] * std::conj(v[e]);
        }
  const C G = (v.transpose() * h * v.conjugate())(0, 0);
  return 2 * Rsum.real() / (G.real() * G.real());
}

}  // namespace oracle
