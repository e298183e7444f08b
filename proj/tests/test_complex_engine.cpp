#include <gtest/gtest.h>

#include "flab/complex_engine.hpp"
#include "flab/real_engine.hpp"
#include "oracle.hpp"

using namespace flab;

namespace {

EvalPoint point(std::vector<double> x, std::vector<double> y) {
  return {Eigen::Map<Vec>(x.data(), x.size()), Eigen::Map<Vec>(y.data(), y.size())};
}

}  // namespace

TEST(Levi, EuclideanIdentity) {
  CMat L, Li;
  levi_metric(eval_partials(catalog_get("euclidean", 2), point({0.1, 0.2, 0.3, 0.4}, {1, 2, 3, 4}), 2, 0), L, Li);
  EXPECT_LT((L - CMat::Identity(2, 2)).norm(), 1e-15);
}

TEST(Levi, HermitianNonKahlerDiagonal) {
  CMat L, Li;
  // z2 = 0.5 - 0.3i
  levi_metric(eval_partials(catalog_get("hermitian_nonkahler", 2), point({0.7, 0.5, 0.1, -0.3}, {1, -1, 0.2, 0.4}), 2, 0), L, Li);
  CMat expect = CMat::Zero(2, 2);
  expect(0, 0) = 1 + 0.25 + 0.09;
  expect(1, 1) = 1;
  EXPECT_LT((L - expect).norm(), 1e-14);
}

TEST(Levi, QuarticAtOneOne) {
  // sympy: [[3, -1], [-1, 3]] * sqrt(2)/4, eigenvalues sqrt(2)/2 and sqrt(2).
  CMat L, Li;
  double me = 0;
  levi_metric(eval_partials(catalog_get("complex_minkowski_quartic", 2), point({0, 0, 0, 0}, {1, 1, 0, 0}), 2, 0), L, Li, &me);
  const double r = std::sqrt(2.0) / 4;
  EXPECT_NEAR(std::abs(L(0, 0) - 3 * r), 0, 1e-14);
  EXPECT_NEAR(std::abs(L(0, 1) + r), 0, 1e-14);
  EXPECT_NEAR(me, std::sqrt(2.0) / 2, 1e-14);
  EXPECT_THROW(levi_metric(eval_partials(catalog_get("complex_minkowski_quartic", 2), point({0, 0, 0, 0}, {1, 0, 1, 0}), 2, 0), L, Li),
               NotStronglyPseudoconvex);
}

TEST(ChernFinsler, HermitianNonKahlerHandValues) {
  MetricSpec m = catalog_get("hermitian_nonkahler", 2);
  ComplexTensorSet t = cf_connection(m, point({0.3, 1, -0.2, 0}, {0.4, 0.9, -0.6, 0.2}));
  EXPECT_NEAR(std::abs(t.conn(0, 0, 1) - cplx(0.5, 0)), 0, 1e-12);
  EXPECT_NEAR(std::abs(t.conn(0, 1, 0)), 0, 1e-12);
  KahlerResiduals k = kahler_residuals(t);
  EXPECT_GE(k.strong, 0.5 - 1e-12);
}

TEST(ChernFinsler, EuclideanAndOrigin) {
  ComplexTensorSet e = cf_connection(catalog_get("euclidean", 2), point({0.1, 0.2, 0.3, 0.4}, {1, 2, 3, 4}));
  EXPECT_EQ(e.nl_conn.norm(), 0.0);
  EXPECT_EQ(e.conn.max_abs(), 0.0);
  EXPECT_EQ(e.C.max_abs(), 0.0);
  ComplexTensorSet f = cf_connection(catalog_get("fubini_study", 1), point({0, 0}, {0.6, -0.8}));
  EXPECT_LT(f.nl_conn.norm(), 1e-15);
}

TEST(ChernFinsler, HermitianConnectionIsFiberIndependent) {
  for (std::string name : {"fubini_study", "complex_hyperbolic", "hermitian_nonkahler"}) {
    MetricSpec m = catalog_get(name, 2);
    Rng rng(8);
    for (int s = 0; s < 5; ++s) {
      EvalPoint p = sample_point(m, rng), q = sample_point(m, rng);
      q.x = p.x;
      ComplexTensorSet a = cf_connection(m, p), b = cf_connection(m, q);
      EXPECT_LT(a.C.max_abs(), 1e-10) << name;
      double d = 0;
      for (size_t i = 0; i < a.conn.d.size(); ++i) d = std::max(d, std::abs(a.conn.d[i] - b.conn.d[i]));
      EXPECT_LT(d, 1e-10) << name;
      EXPECT_LT((a.spray - 0.5 * a.nl_conn * a.v).norm(), 1e-15);
    }
  }
}

TEST(HolomorphicCurvature, ModelValues) {
  for (int n : {1, 2, 3}) {
    MetricSpec fs = catalog_get("fubini_study", n), hy = catalog_get("complex_hyperbolic", n), eu = catalog_get("euclidean", n);
    Rng rng(n);
    for (int s = 0; s < 5; ++s) {
      EXPECT_NEAR(holomorphic_curvature(fs, sample_point(fs, rng)), 4.0, 1e-6);
      EXPECT_NEAR(holomorphic_curvature(hy, sample_point(hy, rng)), -4.0, 1e-6);
      EXPECT_NEAR(holomorphic_curvature(eu, sample_point(eu, rng)), 0.0, 1e-12);
    }
  }
}

TEST(HolomorphicCurvature, MatchesClassicalHermitianFormula) {
  for (std::string name : {"fubini_study", "complex_hyperbolic", "hermitian_nonkahler"}) {
    MetricSpec m = catalog_get(name, 2);
    Rng rng(12);
    for (int s = 0; s < 10; ++s) {
      EvalPoint p = sample_point(m, rng);
      const double h = holomorphic_curvature(m, p);
      EXPECT_NEAR(h, oracle::holomorphic_sectional(name, 2, p.x, to_complex(p.y)), 1e-8) << name;
    }
  }
}

TEST(HolomorphicCurvature, ZeroHomogeneous) {
  for (const auto& e : catalog()) {
    MetricSpec m = catalog_get(e.name, e.fixed_n ? e.fixed_n : 2);
    Rng rng(13);
    std::uniform_real_distribution<double> u(0.5, 2), ang(0, 6.28);
    for (int s = 0; s < 5; ++s) {
      EvalPoint p = sample_point(m, rng);
      const cplx zeta = std::polar(u(rng), ang(rng));
      EvalPoint q{p.x, to_real(to_complex(p.y) * zeta)};
      ComplexTensorSet a = complex_tensors(m, p), b = complex_tensors(m, q);
      EXPECT_LT(std::abs(a.H - b.H), 1e-9 * std::max(1.0, std::abs(a.H))) << e.name;
      EXPECT_LT(std::abs(a.H_imag), 1e-9 * std::max(1.0, std::abs(a.H))) << e.name;
    }
  }
}

TEST(HolomorphicCurvature, EqualsHolomorphicFlagCurvatureOnKahlerMetrics) {
  for (const auto& e : catalog()) {
    MetricSpec m = catalog_get(e.name, e.fixed_n ? e.fixed_n : 2);
    Rng rng(14);
    for (int s = 0; s < 10; ++s) {
      EvalPoint p = sample_point(m, rng);
      ComplexTensorSet c = complex_tensors(m, p);
      if (kahler_residuals(c).weak > 1e-9) continue;
      RealTensorSet r = real_tensors(m, p);
      EXPECT_NEAR(c.H, flag_curvature(r, apply_J(p.y)), 1e-6) << e.name;
    }
  }
}

TEST(KahlerResiduals, CatalogValues) {
  for (std::string name : {"euclidean", "fubini_study", "complex_hyperbolic", "complex_minkowski_quartic"}) {
    MetricSpec m = catalog_get(name, 2);
    Rng rng(15);
    for (int s = 0; s < 5; ++s) {
      KahlerResiduals k = kahler_residuals(m, sample_point(m, rng));
      EXPECT_LT(k.strong, 1e-9) << name;
      EXPECT_LT(k.weak, 1e-9) << name;
    }
  }
}
