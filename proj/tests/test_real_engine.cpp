#include <gtest/gtest.h>

#include "flab/real_engine.hpp"
#include "oracle.hpp"

using namespace flab;

namespace {

EvalPoint point(std::vector<double> x, std::vector<double> y) {
  return {Eigen::Map<Vec>(x.data(), x.size()), Eigen::Map<Vec>(y.data(), y.size())};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(JetEngine, EuclideanPartials) {
  MetricSpec m = catalog_get("euclidean", 2);
  EvalPoint p = point({0.3, -0.1, 0.2, 0.5}, {0.7, 0.2, -0.4, 1.1});
  JetTable t = eval_partials(m, p, 5, 2);
  EXPECT_DOUBLE_EQ(t[PartialSpec::from_variables(4, {4, 4})], 2.0);
  for (const auto& s : all_partials(4, 5)) {
    if (s.x_order() > 2) continue;
    if (s.x_order() > 0 || s.y_order() >= 3) EXPECT_EQ(t[s], 0.0);
  }
}

TEST(JetEngine, ContractAndDomain) {
  MetricSpec h = catalog_get("complex_hyperbolic", 1);
  EXPECT_THROW(eval_partials(h, point({0.1, 0}, {1, 0}), 6, 0), Error);
  EXPECT_THROW(eval_partials(h, point({0.1, 0}, {1, 0}), 2, 3), Error);
  EXPECT_THROW(eval_partials(h, point({1.2, 0}, {1, 0}), 2, 0), DomainError);
  EXPECT_THROW(eval_partials(h, point({0.1, 0}, {0, 0}), 2, 0), DomainError);
}

TEST(JetEngine, SchwarzSymmetryIsExact) {
  MetricSpec m = catalog_get("fubini_study", 2);
  EvalPoint p = point({0.3, -0.1, 0.2, 0.5}, {0.7, 0.2, -0.4, 1.1});
  JetTable t = eval_partials(m, p, 3, 1);
  EXPECT_EQ(t[PartialSpec::from_variables(4, {0, 4, 5})], t[PartialSpec::from_variables(4, {5, 0, 4})]);
}

TEST(JetEngine, EulerIdentityInJets) {
  for (const auto& e : catalog()) {
    MetricSpec m = catalog_get(e.name, e.fixed_n ? e.fixed_n : 2);
    Rng rng(11);
    for (int s = 0; s < 10; ++s) {
      EvalPoint p = sample_point(m, rng);
      JetTable t = eval_partials(m, p, 1, 0);
      double sum = 0;
      for (int k = 0; k < 4; ++k) sum += p.y[k] * t[PartialSpec::from_variables(4, {4 + k})];
      EXPECT_LT(std::abs(sum - 2 * t.G()), 1e-10 * std::max(1.0, t.G())) << e.name;
    }
  }
}

TEST(JetEngine, FdCrosscheckExamples) {
  MetricSpec eu = catalog_get("euclidean", 2);
  EvalPoint p = point({0.1, 0.2, 0.3, 0.4}, {1, 0.5, -0.2, 0.3});
  EXPECT_LT(fd_crosscheck(eu, p, PartialSpec::from_variables(4, {4, 5})).error, 1e-12);

  MetricSpec fs1 = catalog_get("fubini_study", 1);
  EXPECT_LT(fd_crosscheck(fs1, point({0.3, 0}, {1, 0}), PartialSpec::from_variables(2, {0})).error, 1e-6);

  MetricSpec fs2 = catalog_get("fubini_study", 2);
  EXPECT_LT(fd_crosscheck(fs2, p, PartialSpec::from_variables(4, {4, 5, 2})).error, 1e-5);

  MetricSpec q = catalog_get("complex_minkowski_quartic", 2);
  auto r = fd_crosscheck(q, point({0, 0, 0, 0}, {1, 0, 1, 0}), PartialSpec::from_variables(4, {4, 4}));
  EXPECT_NEAR(r.jet, 2.0, 1e-14);
  EXPECT_LT(r.error, 1e-6);
}

TEST(RealEngine, EuclideanIsFlat) {
  MetricSpec m = catalog_get("euclidean", 2);
  RealTensorSet t = real_tensors(m, point({0.3, -0.1, 0.2, 0.5}, {0.7, 0.2, -0.4, 1.1}));
  EXPECT_LT((t.g - Mat::Identity(4, 4)).norm(), 1e-15);
  EXPECT_EQ(t.spray.norm(), 0.0);
  EXPECT_EQ(t.conn.norm(), 0.0);
  EXPECT_EQ(t.B.max_abs(), 0.0);
  EXPECT_EQ(t.R.max_abs(), 0.0);
  EXPECT_EQ(ricci(t).trace, 0.0);
}

TEST(RealEngine, FubiniStudyOriginMetric) {
  MetricSpec m = catalog_get("fubini_study", 1);
  Mat g, gi;
  fundamental_tensor(eval_partials(m, point({0, 0}, {0.3, 0.8}), 2, 0), g, gi);
  EXPECT_LT((g - Mat::Identity(2, 2)).norm(), 1e-15);
}

TEST(RealEngine, QuarticConvexity) {
  MetricSpec m = catalog_get("complex_minkowski_quartic", 2);
  Mat g, gi;
  double me = 0;
  // v = (1, 1); sympy: eigenvalues sqrt(2)/2 (x3) and 3 sqrt(2)/2.
  fundamental_tensor(eval_partials(m, point({0, 0, 0, 0}, {1, 1, 0, 0}), 2, 0), g, gi, &me);
  EXPECT_NEAR(me, std::sqrt(2.0) / 2, 1e-14);
  EXPECT_NEAR(g(0, 1), -std::sqrt(2.0) / 2, 1e-14);
  // v = (1+i, 0) is a degenerate direction.
  EXPECT_THROW(fundamental_tensor(eval_partials(m, point({0, 0, 0, 0}, {1, 0, 1, 0}), 2, 0), g, gi), NotStronglyConvex);
}

TEST(RealEngine, TensorInvariants) {
  for (const auto& e : catalog()) {
    MetricSpec m = catalog_get(e.name, e.fixed_n ? e.fixed_n : 2);
    Rng rng(5);
    for (int s = 0; s < 3; ++s) {
      EvalPoint p = sample_point(m, rng);
      RealTensorSet t = real_tensors(m, p);
      const int N = t.N;
      EXPECT_LT((t.g * t.ginv - Mat::Identity(N, N)).norm(), 1e-10);
      const double sc = std::max(1.0, t.conn.norm());
      for (int i = 0; i < N; ++i) {
        double hom2 = -2 * t.spray[i];
        for (int j = 0; j < N; ++j) {
          hom2 += t.conn(i, j) * p.y[j];
          double hom1 = -t.conn(i, j), cy = 0, by = 0;
          for (int k = 0; k < N; ++k) {
            hom1 += t.berwald_conn(i, j, k) * p.y[k];
            cy += t.C(i, j, k) * p.y[k];
            for (int l = 0; l < N; ++l) by = std::max(by, std::abs(t.B(i, j, k, l) - t.B(i, k, l, j)));
          }
          EXPECT_LT(std::abs(hom1), 1e-9 * sc) << e.name;
          EXPECT_LT(std::abs(cy), 1e-9) << e.name;
          EXPECT_EQ(by, 0.0);
          for (int k = 0; k < N; ++k) {
            double bl = 0;
            for (int l = 0; l < N; ++l) bl += t.B(i, j, k, l) * p.y[l];
            EXPECT_LT(std::abs(bl), 1e-9 * std::max(1.0, t.B.max_abs())) << e.name;
            for (int l = 0; l < N; ++l) EXPECT_EQ(t.R(i, j, k, l), -t.R(i, j, l, k));
          }
        }
        EXPECT_LT(std::abs(hom2), 1e-9 * sc) << e.name;
      }
      const double rs = std::max(1.0, t.Rik.norm());
      EXPECT_LT((t.Rik - t.Rik.transpose()).norm(), 1e-9 * rs) << e.name;
      EXPECT_LT((t.Rik * p.y).norm(), 1e-9 * rs * p.y.norm()) << e.name;
    }
  }
}

TEST(RealEngine, FastCurvatureOperatorMatchesFullContraction) {
  for (const auto& e : catalog()) {
    MetricSpec m = catalog_get(e.name, e.fixed_n ? e.fixed_n : 2);
    Rng rng(9);
    for (int s = 0; s < 3; ++s) {
      EvalPoint p = sample_point(m, rng);
      RealTensorSet t = real_tensors(m, p);
      SprayData d = spray_data(m, p.x, p.y, 2);
      EXPECT_LT((d.Rik - t.Rik).norm(), 1e-9 * std::max(1.0, t.Rik.norm())) << e.name;
      EXPECT_LT((d.spray - t.spray).norm(), 1e-12 * std::max(1.0, t.spray.norm())) << e.name;
      EXPECT_LT((d.conn - t.conn).norm(), 1e-12 * std::max(1.0, t.conn.norm())) << e.name;
    }
  }
}

TEST(RealEngine, FubiniStudySprayMatchesChristoffelOracle) {
  MetricSpec m = catalog_get("fubini_study", 1);
  EvalPoint p = point({0.5, 0}, {1, 0});
  RealTensorSet t = real_tensors(m, p);
  auto o = oracle::riemann("fubini_study", 1, p.x, p.y);
  EXPECT_LT((t.spray - o.spray).norm(), 1e-8);
}

TEST(RealEngine, HermitianMetricsMatchRiemannianOracle) {
  for (std::string name : {"fubini_study", "complex_hyperbolic", "hermitian_nonkahler", "euclidean"}) {
    MetricSpec m = catalog_get(name, 2);
    Rng rng(21);
    for (int s = 0; s < 20; ++s) {
      EvalPoint p = sample_point(m, rng);
      RealTensorSet t = real_tensors(m, p);
      auto o = oracle::riemann(name, 2, p.x, p.y);
      EXPECT_LT((t.g - o.g).norm(), 1e-8) << name;
      EXPECT_LT((t.spray - o.spray).norm(), 1e-8) << name;
      double rmax = 0;
      for (size_t i = 0; i < o.R.size(); ++i) rmax = std::max(rmax, std::abs(t.R.d[i] - o.R[i]));
      EXPECT_LT(rmax, 1e-8) << name;
      EXPECT_LT((t.Rik - o.Rik).norm(), 1e-8) << name;
    }
  }
}

TEST(RealEngine, FlagCurvatureFubiniStudy) {
  MetricSpec m = catalog_get("fubini_study", 2);
  EvalPoint p = point({0, 0, 0, 0}, {1, 0, 0, 0});
  RealTensorSet t = real_tensors(m, p);
  EXPECT_NEAR(flag_curvature(t, apply_J(p.y)), 4.0, 1e-10);
  EXPECT_NEAR(flag_curvature(t, Vec::Unit(4, 1)), 1.0, 1e-10);
  EXPECT_THROW(flag_curvature(t, 2.0 * p.y), DegenerateFlag);
  // Invariance under V -> aV + by and y-scaling.
  Vec V(4);
  V << 0.3, -0.7, 0.2, 0.9;
  const double k = flag_curvature(t, V);
  EXPECT_LT(rel(flag_curvature(t, -2.5 * V + 0.7 * p.y), k), 1e-9);
  RealTensorSet t2 = real_tensors(m, point({0, 0, 0, 0}, {3, 0, 0, 0}));
  EXPECT_LT(rel(flag_curvature(t2, V), k), 1e-9);
}

TEST(RealEngine, FlagCurvatureOneDimensionalModels) {
  EvalPoint p = point({0, 0}, {1, 0});
  RealTensorSet fs = real_tensors(catalog_get("fubini_study", 1), p);
  RealTensorSet hy = real_tensors(catalog_get("complex_hyperbolic", 1), p);
  EXPECT_NEAR(flag_curvature(fs, apply_J(p.y)), 4.0, 1e-10);
  EXPECT_NEAR(flag_curvature(hy, apply_J(p.y)), -4.0, 1e-10);
}

TEST(RealEngine, RicciOfModels) {
  Rng rng(3);
  for (auto [name, expect] : std::vector<std::pair<std::string, double>>{{"fubini_study", 6}, {"complex_hyperbolic", -6}, {"euclidean", 0}}) {
    MetricSpec m = catalog_get(name, 2);
    for (int s = 0; s < 5; ++s) {
      EvalPoint p = sample_point(m, rng);
      RealTensorSet t = real_tensors(m, p);
      RicciResult r = ricci(t);
      EXPECT_NEAR(r.trace, expect, 1e-8) << name;
      EXPECT_NEAR(r.frame_sum, r.trace, 1e-9) << name;
    }
  }
}

TEST(RealEngine, SCurvature) {
  Rng rng(4);
  MetricSpec eu = catalog_get("euclidean", 2), fs = catalog_get("fubini_study", 2), q = catalog_get("complex_minkowski_quartic", 2);
  for (int s = 0; s < 3; ++s) {
    EXPECT_NEAR(s_curvature(eu, sample_point(eu, rng), Measure::parse("busemann_hausdorff")), 0.0, 1e-12);
    EXPECT_NEAR(s_curvature(fs, sample_point(fs, rng), Measure::parse("riemannian_det")), 0.0, 1e-8);
    EXPECT_NEAR(s_curvature(q, sample_point(q, rng), Measure::parse("busemann_hausdorff")), 0.0, 1e-12);
  }
}
