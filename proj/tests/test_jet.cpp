#include <gtest/gtest.h>

#include <cmath>

#include "flab/jet.hpp"

using namespace flab;

namespace {

// Taylor coefficient index of dx^a (single x variable 0) in the x-space.
int xmono(const JetSpace& s, std::vector<int> e) { return s.x().index_of(e); }

}  // namespace

TEST(MonomialSpace, GradedPrefix) {
  const auto& m3 = MonomialSpace::get(3, 3);
  const auto& m2 = MonomialSpace::get(3, 2);
  ASSERT_EQ(m2.size(), 10);
  ASSERT_EQ(m3.size(), 20);
  for (int i = 0; i < m2.size(); ++i) {
    auto a = m2.exponents(i), b = m3.exponents(i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  EXPECT_EQ(m3.prefix(1), 4);
}

TEST(Jet, ProductMatchesPolynomial) {
  const auto& sp = JetSpace::get(2, 3, 3);
  // f = (x0 + 2 y1) * (x1 - y0) around (1, 2 | 3, 4)
  RealJet x0 = RealJet::variable(sp, Block::X, 0, 1.0);
  RealJet x1 = RealJet::variable(sp, Block::X, 1, 2.0);
  RealJet y0 = RealJet::variable(sp, Block::Y, 0, 3.0);
  RealJet y1 = RealJet::variable(sp, Block::Y, 1, 4.0);
  RealJet f = (x0 + 2.0 * y1) * (x1 - y0);
  EXPECT_DOUBLE_EQ(f.value(), 9.0 * -1.0);
  const int dx0[2] = {1, 0}, dx1[2] = {0, 1}, none[2] = {0, 0}, dy0[2] = {1, 0}, dy1[2] = {0, 1};
  EXPECT_DOUBLE_EQ(f.partial(dx0, none), -1.0);
  EXPECT_DOUBLE_EQ(f.partial(dx1, none), 9.0);
  EXPECT_DOUBLE_EQ(f.partial(dx0, dy0), -1.0);
  EXPECT_DOUBLE_EQ(f.partial(dx1, dy1), 2.0);
  EXPECT_DOUBLE_EQ(f.partial(none, dy1), -2.0);
}

TEST(Jet, TranscendentalDerivativesMatchClosedForms) {
  const auto& sp = JetSpace::get(1, 4, 0);
  const double a = 0.7;
  RealJet x = RealJet::variable(sp, Block::X, 0, a);
  RealJet e = exp(x), l = log(x + 1.0), r = sqrt(x), q = pow(x, -1.5), inv = 1.0 / (x * x + 1.0);
  auto [s, c] = sincos(x);
  for (int k = 0; k <= 4; ++k) {
    const int ex[1] = {k}, ey[1] = {0};
    EXPECT_NEAR(e.partial(ex, ey), std::exp(a), 1e-13);
    double dk_log = k == 0 ? std::log(1 + a) : std::pow(-1.0, k - 1) * std::tgamma(k) / std::pow(1 + a, k);
    EXPECT_NEAR(l.partial(ex, ey), dk_log, 1e-12);
    double falling = 1;
    for (int j = 0; j < k; ++j) falling *= (0.5 - j);
    EXPECT_NEAR(r.partial(ex, ey), falling * std::pow(a, 0.5 - k), 1e-12);
    falling = 1;
    for (int j = 0; j < k; ++j) falling *= (-1.5 - j);
    EXPECT_NEAR(q.partial(ex, ey), falling * std::pow(a, -1.5 - k), 1e-10);
    EXPECT_NEAR(s.partial(ex, ey), std::sin(a + k * M_PI / 2), 1e-13);
    EXPECT_NEAR(c.partial(ex, ey), std::cos(a + k * M_PI / 2), 1e-13);
  }
  // d/dx 1/(1+x^2) = -2x/(1+x^2)^2
  const int e1[1] = {1}, e0[1] = {0};
  EXPECT_NEAR(inv.partial(e1, e0), -2 * a / std::pow(1 + a * a, 2), 1e-14);
  (void)xmono;
}

TEST(Jet, DerivativeLowersOrder) {
  const auto& sp = JetSpace::get(2, 2, 3);
  RealJet y0 = RealJet::variable(sp, Block::Y, 0, 1.5);
  RealJet x1 = RealJet::variable(sp, Block::X, 1, -0.5);
  RealJet f = y0 * y0 * y0 * x1 * x1;
  RealJet fy = f.dy(0);
  EXPECT_EQ(fy.space().max_y(), 2);
  EXPECT_NEAR(fy.value(), 3 * 1.5 * 1.5 * 0.25, 1e-14);
  RealJet fyx = fy.dx(1);
  EXPECT_EQ(fyx.space().max_x(), 1);
  EXPECT_NEAR(fyx.value(), 3 * 1.5 * 1.5 * 2 * -0.5, 1e-14);
}

TEST(Jet, MixedSpacesRestrictToCommonTruncation) {
  const auto& big = JetSpace::get(1, 2, 3);
  const auto& small = JetSpace::get(1, 1, 2);
  RealJet a = RealJet::variable(big, Block::Y, 0, 2.0);
  RealJet b = RealJet::variable(small, Block::X, 0, 1.0);
  RealJet c = a * b;
  EXPECT_EQ(&c.space(), &small);
  EXPECT_DOUBLE_EQ(c.value(), 2.0);
}

TEST(Jet, SolveInvertsJetMatrix) {
  const auto& sp = JetSpace::get(1, 2, 2);
  RealJet t = RealJet::variable(sp, Block::X, 0, 0.3);
  RealJet u = RealJet::variable(sp, Block::Y, 0, 1.1);
  std::vector<std::vector<RealJet>> A = {{t + 2.0, u}, {u * t, exp(t)}};
  std::vector<std::vector<RealJet>> B = {{RealJet(sp, 1.0)}, {t}};
  auto X = solve(A, B);
  for (int r = 0; r < 2; ++r) {
    RealJet lhs = A[r][0] * X[0][0] + A[r][1] * X[1][0];
    RealJet diff = lhs - B[r][0];
    for (double c : diff.coefficients()) EXPECT_NEAR(c, 0.0, 1e-13);
  }
}

TEST(Jet, WirtingerOfHolomorphicAndAntiholomorphic) {
  // f = |w|^2 with w = y0 + i y1: df/dw = conj(w), df/dwbar = w.
  const auto& sp = JetSpace::get(2, 0, 2);
  RealJet a = RealJet::variable(sp, Block::Y, 0, 0.4);
  RealJet b = RealJet::variable(sp, Block::Y, 1, -1.2);
  RealJet f = a * a + b * b;
  ComplexJet dw = wirtinger(f, Block::Y, 0, false);
  ComplexJet dwb = wirtinger(f, Block::Y, 0, true);
  EXPECT_NEAR(std::abs(dw.value() - std::complex<double>(0.4, 1.2)), 0, 1e-15);
  EXPECT_NEAR(std::abs(dwb.value() - std::complex<double>(0.4, -1.2)), 0, 1e-15);
}
