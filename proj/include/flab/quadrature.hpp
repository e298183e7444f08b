#pragma once

// Adaptive Gauss-Kronrod (7, 15) quadrature for vector-valued integrands.

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "flab/error.hpp"

namespace flab {

struct QuadratureResult {
  Eigen::VectorXd value;
  double error = 0;  // max-norm error estimate
  int intervals = 0;
  int evaluations = 0;
};

namespace detail {

struct GK15 {
  static constexpr double x[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                  0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                  0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                  0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr double wk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                   0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
};

struct Piece {
  double a, b;
  Eigen::VectorXd value;
  double error;
  bool operator<(const Piece& o) const { return error < o.error; }
};

template <class F>
Piece gk15(const F& f, double a, double b, int& evals) {
  const double c = 0.5 * (a + b), hl = 0.5 * (b - a);
  Eigen::VectorXd fc = f(c);
  Eigen::VectorXd k = GK15::wk[7] * fc, g = GK15::wg[3] * fc;
  ++evals;
  for (int i = 0; i < 7; ++i) {
    const Eigen::VectorXd s = f(c - hl * GK15::x[i]) + f(c + hl * GK15::x[i]);
    evals += 2;
    k += GK15::wk[i] * s;
    if (i % 2 == 1) g += GK15::wg[i / 2] * s;
  }
  k *= hl;
  g *= hl;
  return {a, b, k, (k - g).cwiseAbs().maxCoeff()};
}

}  // namespace detail

/// Integrates f over [a, b] until the summed error estimate is below
/// max(abs_tol, rel_tol * |I|).
template <class F>
QuadratureResult integrate_adaptive(const F& f, double a, double b, double abs_tol = 1e-10, double rel_tol = 1e-10,
                                    int max_intervals = 2000) {
  QuadratureResult r;
  std::priority_queue<detail::Piece> heap;
  heap.push(detail::gk15(f, a, b, r.evaluations));
  double err = heap.top().error;
  Eigen::VectorXd total = heap.top().value;
  while (err > std::max(abs_tol, rel_tol * total.cwiseAbs().maxCoeff())) {
    if (static_cast<int>(heap.size()) >= max_intervals) throw ConvergenceError("adaptive quadrature did not converge");
    detail::Piece p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    detail::Piece l = detail::gk15(f, p.a, m, r.evaluations), u = detail::gk15(f, m, p.b, r.evaluations);
    total += l.value + u.value - p.value;
    err += l.error + u.error - p.error;
    heap.push(std::move(l));
    heap.push(std::move(u));
  }
  r.intervals = static_cast<int>(heap.size());
  // Re-sum to avoid drift from the running updates.
  r.value = Eigen::VectorXd::Zero(total.size());
  r.error = 0;
  while (!heap.empty()) {
    r.value += heap.top().value;
    r.error += heap.top().error;
    heap.pop();
  }
  return r;
}

}  // namespace flab
