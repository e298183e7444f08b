#include <gtest/gtest.h>

#include "flab/expr.hpp"
#include "flab/metric.hpp"

using namespace flab;

TEST(Parser, SumOfAbs2) {
  MetricExpr e = parse_metric("abs2(v1)+abs2(v2)");
  const Node& r = *e.root();
  ASSERT_EQ(r.kind, NodeKind::Add);
  EXPECT_EQ(r.args[0]->kind, NodeKind::Abs2);
  EXPECT_EQ(r.args[0]->args[0]->kind, NodeKind::Variable);
  EXPECT_EQ(r.args[0]->args[0]->var, VarKind::V);
  EXPECT_EQ(r.args[1]->args[0]->index, 2);
}

TEST(Parser, DivisionWithPow) {
  MetricExpr e = parse_metric("abs2(v1)/(1+abs2(z1))^2");
  const Node& r = *e.root();
  ASSERT_EQ(r.kind, NodeKind::Div);
  ASSERT_EQ(r.args[1]->kind, NodeKind::Pow);
  EXPECT_EQ(r.args[1]->value, 2.0);
  EXPECT_EQ(r.args[1]->args[0]->kind, NodeKind::Add);
}

TEST(Parser, UnbalancedParenthesisColumn) {
  try {
    parse_metric("abs2(v1");
    FAIL() << "expected a syntax error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.column(), 8);
    EXPECT_NE(std::string(e.what()).find("column 8"), std::string::npos);
  }
}

TEST(Parser, UnknownIdentifierAndFunction) {
  EXPECT_THROW(parse_metric("w1+v1"), ParseError);
  EXPECT_THROW(parse_metric("foo(v1)"), ParseError);
  EXPECT_THROW(parse_metric("abs2(v1))"), ParseError);
  EXPECT_THROW(parse_metric(""), ParseError);
}

TEST(Parser, SignedExponentAndUnaryMinus) {
  MetricExpr e = parse_metric("-2*abs2(v1)^-0.5 + -(abs2(z1))");
  const auto z = std::vector<std::complex<double>>{{0.5, 0}};
  const auto v = std::vector<std::complex<double>>{{2, 0}};
  EXPECT_NEAR(e.evaluate(z, v).real(), -2 * 0.5 - 0.25, 1e-15);
}

TEST(Parser, RoundTripCatalog) {
  for (const auto& entry : catalog()) {
    for (int n : {1, 2, 3}) {
      if (entry.fixed_n && n != entry.fixed_n) continue;
      MetricSpec m = catalog_get(entry.name, n);
      const std::string s1 = m.expr.print();
      MetricExpr again = parse_metric(s1);
      EXPECT_TRUE(again.structurally_equal(m.expr)) << s1;
      EXPECT_EQ(again.print(), s1);
    }
  }
}

TEST(Evaluate, DomainErrors) {
  const auto z = std::vector<std::complex<double>>{{0, 0}};
  const auto v = std::vector<std::complex<double>>{{0, 0}};
  EXPECT_THROW(parse_metric("sqrt(abs2(v1))").evaluate(z, v), DomainError);
  EXPECT_THROW(parse_metric("1/abs2(v1)").evaluate(z, v), DomainError);
  EXPECT_THROW(parse_metric("log(z1*v1)").evaluate(z, v), DomainError);
}

TEST(EvaluateJet, FubiniStudyXDerivative) {
  // FS(1): G = |v|^2/(1+|z|^2)^2, dG/dx1 = -4 x1 |v|^2/(1+|z|^2)^3.
  MetricSpec fs = catalog_get("fubini_study", 1);
  const auto& sp = JetSpace::get(2, 1, 0);
  const double x[2] = {0.3, -0.2}, y[2] = {1.0, 0.5};
  auto j = fs.expr.evaluate_jet(sp, x, y);
  ASSERT_TRUE(j.real);
  const double s = 1 + 0.09 + 0.04, v2 = 1.25;
  const int dx1[2] = {1, 0}, none[2] = {0, 0};
  EXPECT_NEAR(j.re.value(), v2 / (s * s), 1e-15);
  EXPECT_NEAR(j.re.partial(dx1, none), -4 * 0.3 * v2 / (s * s * s), 1e-14);
}

TEST(EvaluateJet, ComplexIntermediatesAgreeWithPointEvaluation) {
  MetricExpr e = parse_metric("abs2(exp(z1*v2)+conj(v1)*z2)/(2+re(z1*z2))");
  const auto& sp = JetSpace::get(4, 0, 0);
  const double x[4] = {0.1, 0.2, -0.3, 0.4}, y[4] = {0.5, -0.6, 0.7, 0.8};
  auto j = e.evaluate_jet(sp, x, y);
  std::vector<std::complex<double>> z = {{0.1, -0.3}, {0.2, 0.4}}, v = {{0.5, 0.7}, {-0.6, 0.8}};
  EXPECT_NEAR(j.re.value(), e.evaluate(z, v).real(), 1e-14);
}
