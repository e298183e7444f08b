#pragma once

// Complex structure on real coordinates and g-orthonormal frames.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "flab/error.hpp"

namespace flab {

/// Multiplication by i on real coordinates: (Jy)^a = -y^{a+n}, (Jy)^{a+n} = y^a.
inline Eigen::VectorXd apply_J(const Eigen::VectorXd& y) {
  const int n = static_cast<int>(y.size() / 2);
  Eigen::VectorXd u(y.size());
  for (int a = 0; a < n; ++a) {
    u[a] = -y[a + n];
    u[a + n] = y[a];
  }
  return u;
}

/// Matrix J^i_k with J^{k+n}_k = 1 and J^{k-n}_k = -1.
inline Eigen::MatrixXd J_matrix(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int a = 0; a < n; ++a) {
    J(a + n, a) = 1;
    J(a, a + n) = -1;
  }
  return J;
}

/// Gram-Schmidt in the inner product g, starting from `seeds` (taken in
/// order) and completed by coordinate axes in index order. Candidates whose
/// orthogonal remainder has g-norm below `pivot` are skipped. Columns of the
/// result are g-orthonormal; seeds come first.
inline Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& g, const std::vector<Eigen::VectorXd>& seeds,
                                         double pivot = 1e-8) {
  const int N = static_cast<int>(g.rows());
  Eigen::MatrixXd E(N, N);
  int count = 0;
  auto add = [&](Eigen::VectorXd v) {
    // Two passes of modified Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass)
      for (int c = 0; c < count; ++c) v -= (E.col(c).dot(g * v)) * E.col(c);
    const double nrm2 = v.dot(g * v);
    if (!(nrm2 > pivot * pivot)) return false;
    E.col(count++) = v / std::sqrt(nrm2);
    return true;
  };
  for (const auto& s : seeds) {
    if (count == N) break;
    if (!add(s)) throw DegenerateFlag("frame seed is degenerate");
  }
  for (int i = 0; i < N && count < N; ++i) add(Eigen::VectorXd::Unit(N, i));
  if (count < N) throw DegenerateFlag("could not complete an orthonormal frame");
  return E;
}

}  // namespace flab
