#pragma once

// Dormand-Prince 5(4) with the quartic dense output used by scipy's RK45.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "flab/error.hpp"

namespace flab {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h0 = 0;  // 0: pick automatically
  double hmin = 1e-13;
  int max_steps = 200000;
};

struct OdeStats {
  int accepted = 0;
  int rejected = 0;
  int evaluations = 0;
};

/// One accepted step with its interpolant.
struct DenseStep {
  double t0 = 0;
  double h = 0;
  Eigen::VectorXd y0;
  Eigen::MatrixXd Q;  // dim x 4: y(t0 + s h) = y0 + h Q [s, s^2, s^3, s^4]

  Eigen::VectorXd eval(double t) const {
    const double s = (t - t0) / h;
    const Eigen::Vector4d p(s, s * s, s * s * s, s * s * s * s);
    return y0 + h * (Q * p);
  }
  double t1() const { return t0 + h; }
};

class OdeSolution {
 public:
  std::vector<DenseStep> steps;
  Eigen::VectorXd y_end;
  double t_begin = 0;
  double t_end = 0;
  bool stopped = false;      // the stop predicate ended the integration early
  bool domain_exit = false;  // the right-hand side raised DomainError; solution ends at the last good step
  OdeStats stats;

  Eigen::VectorXd operator()(double t) const {
    if (steps.empty()) return y_end;
    if (t <= steps.front().t0) return steps.front().y0;
    if (t >= t_end) return y_end;
    auto it = std::upper_bound(steps.begin(), steps.end(), t, [](double v, const DenseStep& s) { return v < s.t1(); });
    if (it == steps.end()) --it;
    return it->eval(t);
  }
};

namespace detail {

struct DP5 {
  static constexpr double c[6] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1};
  static constexpr double a[6][5] = {
      {0, 0, 0, 0, 0},
      {1.0 / 5, 0, 0, 0, 0},
      {3.0 / 40, 9.0 / 40, 0, 0, 0},
      {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656}};
  static constexpr double b[6] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84};
  static constexpr double e[7] = {-71.0 / 57600, 0, 71.0 / 16695, -71.0 / 1920, 17253.0 / 339200, -22.0 / 525, 1.0 / 40};
  static constexpr double P[7][4] = {
      {1, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
      {0, 0, 0, 0},
      {0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
      {0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
      {0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
      {0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
      {0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423}};
};

}  // namespace detail

using OdeRhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
/// Called after each accepted step; returning true stops the integration
/// at the end of that step.
using OdeStop = std::function<bool(const DenseStep&, const Eigen::VectorXd&)>;

inline OdeSolution integrate_ode(const OdeRhs& f, double t0, const Eigen::VectorXd& y0, double t1,
                                 const OdeOptions& opt = {}, const OdeStop& stop = nullptr) {
  using detail::DP5;
  const int dim = static_cast<int>(y0.size());
  OdeSolution sol;
  sol.t_begin = t0;
  sol.t_end = t0;
  sol.y_end = y0;
  if (t1 <= t0) return sol;

  auto scale = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return (opt.atol + opt.rtol * u.cwiseAbs().cwiseMax(v.cwiseAbs()).array()).matrix();
  };
  auto rms = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& s) {
    return std::sqrt((v.array() / s.array()).square().mean());
  };

  Eigen::VectorXd y = y0, fy = f(t0, y0);
  ++sol.stats.evaluations;
  double t = t0, h = opt.h0;
  if (h <= 0) {
    // Hairer-Wanner starting step.
    const Eigen::VectorXd s = scale(y, y);
    const double d0 = rms(y, s), d1 = rms(fy, s);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t1 - t0);
    double d2 = 0;
    try {
      d2 = rms(f(t + h0, y + h0 * fy) - fy, s) / h0;
    } catch (const DomainError&) {
    }
    ++sol.stats.evaluations;
    const double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min(100 * h0, h1);
  }

  Eigen::MatrixXd K(dim, 7);
  while (t < t1) {
    if (sol.stats.accepted + sol.stats.rejected >= opt.max_steps) throw IntegrationError("step budget exhausted");
    bool last = false;
    if (t + h >= t1 || t + 1.01 * h >= t1) {
      h = t1 - t;
      last = true;
    }
    K.col(0) = fy;
    Eigen::VectorXd yn = y;
    try {
      for (int s = 1; s < 6; ++s) {
        Eigen::VectorXd ys = y;
        for (int j = 0; j < s; ++j) ys += h * DP5::a[s][j] * K.col(j);
        K.col(s) = f(t + DP5::c[s] * h, ys);
      }
      for (int j = 0; j < 6; ++j) yn += h * DP5::b[j] * K.col(j);
      K.col(6) = f(t + h, yn);
    } catch (const DomainError&) {
      // A stage left the domain: retry shorter, give up once the step is tiny.
      if (h > 1e-9 * std::max(1.0, std::abs(t))) {
        h /= 4;
        ++sol.stats.rejected;
        continue;
      }
      sol.domain_exit = true;
      break;
    }
    sol.stats.evaluations += 6;
    Eigen::VectorXd err = Eigen::VectorXd::Zero(dim);
    for (int j = 0; j < 7; ++j) err += h * DP5::e[j] * K.col(j);
    const double en = rms(err, scale(y, yn));
    if (!std::isfinite(en)) throw IntegrationError("non-finite state during integration");
    if (en <= 1) {
      DenseStep st;
      st.t0 = t;
      st.h = h;
      st.y0 = y;
      st.Q = Eigen::MatrixXd::Zero(dim, 4);
      for (int j = 0; j < 7; ++j)
        for (int k = 0; k < 4; ++k) st.Q.col(k) += DP5::P[j][k] * K.col(j);
      t = last ? t1 : t + h;
      y = yn;
      fy = K.col(6);
      ++sol.stats.accepted;
      sol.steps.push_back(std::move(st));
      sol.t_end = t;
      sol.y_end = y;
      const double fac = en == 0 ? 10 : std::min(10.0, 0.9 * std::pow(en, -0.2));
      h *= fac;
      if (stop && stop(sol.steps.back(), y)) {
        sol.stopped = true;
        break;
      }
    } else {
      ++sol.stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      if (h < opt.hmin) throw IntegrationError("step size underflow");
    }
  }
  return sol;
}

}  // namespace flab
