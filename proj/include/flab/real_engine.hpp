#pragma once

// Real Finsler side: fundamental tensor, Cartan torsion, spray, Berwald
// connection and curvature, Riemann curvature, flag/Ricci curvature and
// S-curvature.

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "flab/error.hpp"
#include "flab/frame.hpp"
#include "flab/jet_engine.hpp"
#include "flab/metric.hpp"

namespace flab {

/// Dense rank-r tensor over {0..N-1}, row-major in the listed index order.
struct Tensor {
  int N = 0;
  int rank = 0;
  std::vector<double> d;

  Tensor() = default;
  Tensor(int n, int r) : N(n), rank(r), d(static_cast<size_t>(std::pow(n, r)), 0.0) {}
  double& operator()(int i, int j, int k) { return d[(static_cast<size_t>(i) * N + j) * N + k]; }
  double operator()(int i, int j, int k) const { return d[(static_cast<size_t>(i) * N + j) * N + k]; }
  double& operator()(int i, int j, int k, int l) { return d[((static_cast<size_t>(i) * N + j) * N + k) * N + l]; }
  double operator()(int i, int j, int k, int l) const { return d[((static_cast<size_t>(i) * N + j) * N + k) * N + l]; }
  double max_abs() const {
    double m = 0;
    for (double v : d) m = std::max(m, std::abs(v));
    return m;
  }
};

struct RealTensorSet {
  EvalPoint point;
  int N = 0;
  double G = 0;
  Mat g, ginv;
  double min_eigenvalue = 0;
  double condition = 0;
  Tensor C;      // C_ijk = (1/4) G_{y^i y^j y^k}
  Vec spray;     // G^i
  Mat conn;      // G^i_j, row i
  Tensor berwald_conn;  // G^i_jk
  Tensor B;      // B^i_jkl
  Tensor R;      // R^i_jkl
  Mat Rik;       // R_ik = g_si R^s_jkl y^j y^l
  bool has_berwald = false;
  bool has_curvature = false;
};

namespace detail {

inline std::vector<std::vector<RealJet>> metric_tensor_jets(const RealJet& G) {
  const int N = G.space().dim();
  std::vector<RealJet> Gy(N);
  for (int i = 0; i < N; ++i) Gy[i] = G.dy(i);
  std::vector<std::vector<RealJet>> g(N, std::vector<RealJet>(N));
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      g[i][j] = Gy[i].dy(j) * 0.5;
      if (j != i) g[j][i] = g[i][j];
    }
  return g;
}

/// Spray jets G^i = (1/4) g^{il}(G_{y^l x^k} y^k - G_{x^l}) from a G jet of
/// orders (mx, my); the result has orders (mx - 1, my - 2).
inline std::vector<RealJet> spray_jets(const RealJet& G, const Vec& y0) {
  const JetSpace& sp = G.space();
  const int N = sp.dim(), mx = sp.max_x(), my = sp.max_y();
  if (mx < 1 || my < 2) throw Error("spray needs G jets of order (1, 2) or more");
  std::vector<std::vector<RealJet>> A(N, std::vector<RealJet>(N));
  std::vector<RealJet> Gy(N);
  for (int i = 0; i < N; ++i) Gy[i] = G.dy(i);
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      A[i][j] = (Gy[i].dy(j) * 0.5).truncated(mx - 1, my - 2);
      if (j != i) A[j][i] = A[i][j];
    }
  const JetSpace& rhs_space = JetSpace::get(N, mx - 1, my - 1);
  std::vector<RealJet> yv(N);
  for (int k = 0; k < N; ++k) yv[k] = RealJet::variable(rhs_space, Block::Y, k, y0[k]);
  std::vector<std::vector<RealJet>> b(N, std::vector<RealJet>(1));
  for (int l = 0; l < N; ++l) {
    RealJet s = -G.dx(l).truncated(mx - 1, my - 1);
    for (int k = 0; k < N; ++k) s += Gy[l].dx(k) * yv[k];
    b[l][0] = s.truncated(mx - 1, my - 2);
  }
  auto w = solve(std::move(A), std::move(b));
  std::vector<RealJet> out(N);
  for (int i = 0; i < N; ++i) out[i] = w[i][0].truncated(mx - 1, my - 2) * 0.25;
  return out;
}

inline void check_convex(const Mat& g, double& min_eig, double& cond) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  min_eig = es.eigenvalues().minCoeff();
  const double max_eig = es.eigenvalues().maxCoeff();
  if (!(min_eig > 1e-12)) throw NotStronglyConvex(min_eig);
  cond = max_eig / min_eig;
}

inline Mat jet_values(const std::vector<std::vector<RealJet>>& m) {
  Mat r(m.size(), m.size());
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < m.size(); ++j) r(i, j) = m[i][j].value();
  return r;
}

}  // namespace detail

/// g_ij = (1/2) G_{y^i y^j} and its inverse. Throws NotStronglyConvex when
/// the minimum eigenvalue is <= 1e-12.
inline void fundamental_tensor(const JetTable& jets, Mat& g, Mat& ginv, double* min_eig = nullptr,
                               double* cond = nullptr) {
  if (jets.max_y() < 2) throw Error("fundamental tensor needs y-order 2");
  const RealJet G = jets.jet().truncated(0, 2);
  g = detail::jet_values(detail::metric_tensor_jets(G));
  double me, c;
  detail::check_convex(g, me, c);
  ginv = g.partialPivLu().inverse();
  if (min_eig) *min_eig = me;
  if (cond) *cond = c;
}

namespace detail {

/// Everything up to the Berwald curvature; `S` receives the spray jets.
inline RealTensorSet connection_tensors(const JetTable& jets, std::vector<RealJet>& S) {
  RealTensorSet t;
  t.point = jets.point();
  t.N = jets.dim();
  t.G = jets.G();
  const int N = t.N;
  fundamental_tensor(jets, t.g, t.ginv, &t.min_eigenvalue, &t.condition);
  if (jets.max_x() < 1 || jets.max_y() < 3) throw Error("spray and connection need jets of order (1, 3)");
  const RealJet& G = jets.jet();
  t.C = Tensor(N, 3);
  {
    const RealJet G3 = G.truncated(0, 3);
    for (int i = 0; i < N; ++i) {
      const RealJet a = G3.dy(i);
      for (int j = i; j < N; ++j) {
        const RealJet b = a.dy(j);
        for (int k = j; k < N; ++k) {
          const double v = 0.25 * b.dy(k).value();
          t.C(i, j, k) = t.C(i, k, j) = t.C(j, i, k) = t.C(j, k, i) = t.C(k, i, j) = t.C(k, j, i) = v;
        }
      }
    }
  }
  S = spray_jets(G, t.point.y);
  t.spray = Vec(N);
  t.conn = Mat(N, N);
  t.berwald_conn = Tensor(N, 3);
  t.has_berwald = jets.max_y() >= 5;
  if (t.has_berwald) t.B = Tensor(N, 4);
  for (int i = 0; i < N; ++i) {
    t.spray[i] = S[i].value();
    for (int j = 0; j < N; ++j) {
      const RealJet Sj = S[i].dy(j);
      t.conn(i, j) = Sj.value();
      if (jets.max_y() < 4) continue;
      for (int k = j; k < N; ++k) {
        const RealJet Sjk = Sj.dy(k);
        t.berwald_conn(i, j, k) = t.berwald_conn(i, k, j) = Sjk.value();
        if (!t.has_berwald) continue;
        for (int l = k; l < N; ++l) {
          const double v = Sjk.dy(l).value();
          t.B(i, j, k, l) = t.B(i, j, l, k) = t.B(i, k, j, l) = t.B(i, k, l, j) = t.B(i, l, j, k) = t.B(i, l, k, j) = v;
        }
      }
    }
  }
  return t;
}

}  // namespace detail

/// g, C, the spray, the nonlinear connection, and (y-order >= 4) the Berwald
/// connection and (y-order 5) the Berwald curvature.
inline RealTensorSet spray_and_connection(const JetTable& jets) {
  std::vector<RealJet> S;
  return detail::connection_tensors(jets, S);
}

/// Full tensor set including the Riemann curvature; needs G jets of order (2, 5).
inline RealTensorSet real_tensors(const MetricSpec& spec, const EvalPoint& p) {
  const JetTable jets = eval_partials(spec, p, 5, 2);
  std::vector<RealJet> S;
  RealTensorSet t = detail::connection_tensors(jets, S);
  const int N = t.N;
  // dxG[i][j][l][k] = d/dx^k G^i_jl
  Tensor dx_conn(N, 4);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const RealJet Sj = S[i].dy(j);
      for (int l = j; l < N; ++l) {
        const RealJet Sjl = Sj.dy(l);
        for (int k = 0; k < N; ++k) dx_conn(i, j, l, k) = dx_conn(i, l, j, k) = Sjl.dx(k).value();
      }
    }
  // delta[i][j][l][k] = delta_k G^i_jl = d_{x^k} G^i_jl - G^m_k B^i_jlm
  auto delta = [&](int i, int j, int l, int k) {
    double v = dx_conn(i, j, l, k);
    for (int m = 0; m < N; ++m) v -= t.conn(m, k) * t.B(i, j, l, m);
    return v;
  };
  t.R = Tensor(N, 4);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k)
        for (int l = k + 1; l < N; ++l) {
          double v = delta(i, j, l, k) - delta(i, j, k, l);
          for (int s = 0; s < N; ++s)
            v += t.berwald_conn(i, k, s) * t.berwald_conn(s, j, l) - t.berwald_conn(s, j, k) * t.berwald_conn(i, l, s);
          t.R(i, j, k, l) = v;
          t.R(i, j, l, k) = -v;
        }
  t.Rik = Mat::Zero(N, N);
  const Vec& y = p.y;
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k) {
      double v = 0;
      for (int s = 0; s < N; ++s) {
        double c = 0;
        for (int j = 0; j < N; ++j)
          for (int l = 0; l < N; ++l) c += t.R(s, j, k, l) * y[j] * y[l];
        v += t.g(s, i) * c;
      }
      t.Rik(i, k) = v;
    }
  t.has_curvature = true;
  return t;
}

inline RealTensorSet riemann_curvature(const MetricSpec& spec, const EvalPoint& p) { return real_tensors(spec, p); }

/// Spray-level data at one point, computed from the smallest jets that
/// contain it. Used along geodesics.
struct SprayData {
  double G = 0;
  Mat g;      // fundamental tensor
  Vec spray;  // G^i
  Mat conn;   // G^i_j (empty below level 1)
  Mat Rop;    // R^i_k (empty below level 2)
  Mat Rik;    // g_si R^s_k
};

/// level 0: spray only, jets (1, 2). level 1: + nonlinear connection, jets
/// (1, 3). level 2: + curvature operator, jets (2, 4), via
/// R^i_k = 2 d_{x^k}G^i - y^j d_{x^j}d_{y^k}G^i + 2 G^j d_{y^j}d_{y^k}G^i - G^i_j G^j_k.
inline SprayData spray_data(const MetricSpec& spec, const Vec& x, const Vec& y, int level) {
  const int N = 2 * spec.n;
  const int mx = level >= 2 ? 2 : 1, my = level >= 2 ? 4 : level == 1 ? 3 : 2;
  const EvalPoint p{x, y};
  const RealJet G = metric_jet(spec, p, mx, my);
  SprayData d;
  d.G = G.value();
  d.g = detail::jet_values(detail::metric_tensor_jets(G.truncated(0, 2)));
  const std::vector<RealJet> S = detail::spray_jets(G, y);
  d.spray = Vec(N);
  for (int i = 0; i < N; ++i) d.spray[i] = S[i].value();
  if (level < 1) return d;
  d.conn = Mat(N, N);
  std::vector<std::vector<RealJet>> Sy(N, std::vector<RealJet>(N));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      Sy[i][j] = S[i].dy(j);
      d.conn(i, j) = Sy[i][j].value();
    }
  if (level < 2) return d;
  d.Rop = Mat(N, N);
  for (int i = 0; i < N; ++i) {
    const RealJet Si = S[i];
    std::vector<double> dxS(N);
    for (int k = 0; k < N; ++k) dxS[k] = Si.dx(k).value();
    for (int k = 0; k < N; ++k) {
      double v = 2 * dxS[k] - d.conn.row(i).dot(d.conn.col(k));
      for (int j = 0; j < N; ++j) {
        v -= y[j] * Sy[i][k].dx(j).value();
        v += 2 * d.spray[j] * Sy[i][j].dy(k).value();
      }
      d.Rop(i, k) = v;
    }
  }
  d.Rik = d.g * d.Rop;
  return d;
}

inline double flag_curvature_from(const Mat& g, const Mat& Rik, const Vec& y, const Vec& V) {
  const double gyy = y.dot(g * y), gvv = V.dot(g * V), gyv = y.dot(g * V);
  const double denom = gyy * gvv - gyv * gyv;
  if (!(denom > 1e-12 * std::max(1.0, gyy * gvv))) throw DegenerateFlag("flag plane is degenerate (V parallel to y)");
  return V.dot(Rik * V) / denom;
}

inline double flag_curvature(const RealTensorSet& t, const Vec& V) {
  if (!t.has_curvature) throw Error("tensor set has no curvature");
  return flag_curvature_from(t.g, t.Rik, t.point.y, V);
}

struct RicciResult {
  double trace = 0;      // g^{ik} R_ik / G
  double frame_sum = 0;  // sum of K(y, e_i) over a g_y-orthonormal completion of y
};

inline RicciResult ricci_from(const Mat& g, const Mat& Rik, const Vec& y) {
  RicciResult r;
  const double G = y.dot(g * y);
  r.trace = (g.inverse() * Rik).trace() / G;
  const Mat E = orthonormal_frame(g, {y});
  for (int i = 1; i < E.cols(); ++i) r.frame_sum += flag_curvature_from(g, Rik, y, E.col(i));
  return r;
}

inline RicciResult ricci(const RealTensorSet& t) {
  if (!t.has_curvature) throw Error("tensor set has no curvature");
  return ricci_from(t.g, t.Rik, t.point.y);
}

enum class MeasureKind { busemann_hausdorff, riemannian_det, explicit_density };

struct Measure {
  MeasureKind kind = MeasureKind::riemannian_det;
  MetricExpr density;  // explicit_density: real expression in z only

  static Measure parse(const std::string& s) {
    if (s == "busemann_hausdorff") return {MeasureKind::busemann_hausdorff, {}};
    if (s == "riemannian_det") return {MeasureKind::riemannian_det, {}};
    const std::string prefix = "density:";
    if (s.rfind(prefix, 0) == 0) return {MeasureKind::explicit_density, parse_metric(s.substr(prefix.size()))};
    throw Error("unknown measure '" + s + "' (expected busemann_hausdorff, riemannian_det or density:<expr>)");
  }
  std::string name() const {
    switch (kind) {
      case MeasureKind::busemann_hausdorff: return "busemann_hausdorff";
      case MeasureKind::riemannian_det: return "riemannian_det";
      case MeasureKind::explicit_density: return "density:" + density.print();
    }
    return {};
  }
};

namespace detail {

/// Fixed direction sample shared by every Busemann-Hausdorff evaluation, so
/// that finite differences in x see a smooth function.
inline const std::vector<Vec>& bh_directions(int dim) {
  static std::mutex mutex;
  static std::map<int, std::vector<Vec>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& dirs = cache[dim];
  if (dirs.empty()) {
    Rng rng(0x5eed + dim);
    for (int i = 0; i < 4096; ++i) {
      const Vec u = sample_sphere(rng, dim);
      dirs.push_back(u);
      dirs.push_back(-u);
    }
  }
  return dirs;
}

inline double unit_ball_volume(int dim) { return std::pow(M_PI, dim / 2.0) / std::tgamma(dim / 2.0 + 1); }

}  // namespace detail

/// Log of the measure density sigma(x) in the chosen volume form.
inline double log_measure_density(const MetricSpec& spec, const Measure& mu, const Vec& x) {
  const int N = 2 * spec.n;
  switch (mu.kind) {
    case MeasureKind::riemannian_det: {
      // sqrt(det g(x, e_1)): the canonical Riemannian volume when g is y-independent.
      const RealJet G = metric_jet(spec, {x, Vec::Unit(N, 0)}, 0, 2);
      const Mat g = detail::jet_values(detail::metric_tensor_jets(G));
      return 0.5 * std::log(g.determinant());
    }
    case MeasureKind::busemann_hausdorff: {
      // vol{F < 1} = |S| / (N) * mean over directions of F(w)^{-N}
      double acc = 0;
      const auto& dirs = detail::bh_directions(N);
      for (const Vec& w : dirs) acc += std::pow(spec.G(x, w), -0.5 * N);
      const double sphere = N * detail::unit_ball_volume(N);
      const double vol = sphere / N * acc / static_cast<double>(dirs.size());
      return std::log(detail::unit_ball_volume(N) / vol);
    }
    case MeasureKind::explicit_density: {
      const CVec z = to_complex(x);
      const std::vector<std::complex<double>> v(spec.n, 0.0);
      const std::complex<double> s = mu.density.evaluate({z.data(), static_cast<size_t>(z.size())}, v);
      if (!(s.real() > 0)) throw DomainError("measure density is not positive");
      return std::log(s.real());
    }
  }
  return 0;
}

/// S(y) = y^k d_{x^k} tau - 2 G^k d_{y^k} tau with tau = ln(sqrt(det g) / sigma).
/// The sigma part is differentiated by fourth-order central differences.
inline double s_curvature(const MetricSpec& spec, const EvalPoint& p, const Measure& mu) {
  const int N = 2 * spec.n;
  const RealJet G = metric_jet(spec, p, 1, 3);
  const std::vector<std::vector<RealJet>> g = detail::metric_tensor_jets(G);
  // ln det g as a jet through the LU pivots.
  std::vector<std::vector<RealJet>> A = g;
  RealJet logdet(g[0][0].space(), 0.0);
  for (int k = 0; k < N; ++k) {
    int piv = k;
    for (int r = k + 1; r < N; ++r)
      if (std::abs(A[r][k].value()) > std::abs(A[piv][k].value())) piv = r;
    std::swap(A[k], A[piv]);
    if (!(std::abs(A[k][k].value()) > 0)) throw NotStronglyConvex(0);
    logdet += log(A[k][k] * (A[k][k].value() > 0 ? 1.0 : -1.0));
    const RealJet inv = inverse(A[k][k]);
    for (int r = k + 1; r < N; ++r) {
      const RealJet f = A[r][k] * inv;
      for (int c = k + 1; c < N; ++c) A[r][c] -= f * A[k][c];
    }
  }
  const std::vector<RealJet> S = detail::spray_jets(G.truncated(1, 2), p.y);
  double s = 0;
  for (int k = 0; k < N; ++k) {
    s += p.y[k] * 0.5 * logdet.dx(k).value();
    s -= 2 * S[k].value() * 0.5 * logdet.dy(k).value();
  }
  // sigma depends on x only.
  const double h = 1e-3;
  for (int k = 0; k < N; ++k) {
    if (p.y[k] == 0) continue;
    auto at = [&](double t) {
      Vec x = p.x;
      x[k] += t;
      return log_measure_density(spec, mu, x);
    };
    const double d = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
    s -= p.y[k] * d;
  }
  return s;
}

inline nlohmann::json to_json(const RealTensorSet& t) {
  auto mat = [](const Mat& m) {
    std::vector<std::vector<double>> r(m.rows(), std::vector<double>(m.cols()));
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
    return r;
  };
  nlohmann::json j;
  j["N"] = t.N;
  j["G"] = t.G;
  j["g"] = mat(t.g);
  j["g_inv"] = mat(t.ginv);
  j["g_min_eigenvalue"] = t.min_eigenvalue;
  j["g_condition"] = t.condition;
  j["cartan"] = t.C.d;
  j["spray"] = std::vector<double>(t.spray.data(), t.spray.data() + t.spray.size());
  j["nonlinear_connection"] = mat(t.conn);
  j["berwald_connection"] = t.berwald_conn.d;
  if (t.has_berwald) j["berwald_curvature"] = t.B.d;
  if (t.has_curvature) {
    j["riemann"] = t.R.d;
    j["R_ik"] = mat(t.Rik);
  }
  return j;
}

}  // namespace flab
