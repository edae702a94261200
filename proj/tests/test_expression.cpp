#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "chanhomog/expression.hpp"

using namespace chanhomog;

namespace {

Point at(double t, double x1, double xn, double y1, double yn) { return Point{t, x1, xn, y1, yn}; }

}  // namespace

TEST(Expression, EvaluatesArithmeticAndPrecedence) {
  EXPECT_DOUBLE_EQ(Expression::parse("1 + 2*3")(Point{}), 7.0);
  EXPECT_DOUBLE_EQ(Expression::parse("(1 + 2)*3")(Point{}), 9.0);
  EXPECT_DOUBLE_EQ(Expression::parse("2^3")(Point{}), 8.0);
  EXPECT_DOUBLE_EQ(Expression::parse("2^-2")(Point{}), 0.25);
  EXPECT_DOUBLE_EQ(Expression::parse("-2^2")(Point{}), -4.0);
  EXPECT_DOUBLE_EQ(Expression::parse("8/4/2")(Point{}), 1.0);
  EXPECT_DOUBLE_EQ(Expression::parse("1.5e1 - 5")(Point{}), 10.0);
}

TEST(Expression, ReadsAllVariables) {
  Expression e = Expression::parse("t + 10*x1 + 100*xn + 1000*y1 + 10000*yn");
  EXPECT_DOUBLE_EQ(e(at(1, 2, 3, 4, 5)), 54321.0);
}

TEST(Expression, ElementaryFunctions) {
  Expression e = Expression::parse("sin(pi*x1) + cos(pi*x1) + exp(-t)");
  double v = e(at(0.5, 0.25, 0, 0, 0));
  EXPECT_NEAR(v, std::sin(std::numbers::pi / 4) + std::cos(std::numbers::pi / 4) + std::exp(-0.5), 1e-15);
}

TEST(Expression, RejectsMalformedInput) {
  for (const char* bad : {"", "1 +", "sin(x1", "foo", "x1 ** 2", "2^x1", "1 2", "2^0.5", "2^3^2", ")"}) {
    try {
      Expression::parse(bad);
      ADD_FAILURE() << "accepted '" << bad << "'";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ExpressionSyntax) << bad;
    }
  }
}

TEST(Expression, DependencyQueries) {
  Expression e = Expression::parse("x1*sin(2*pi*y1)");
  EXPECT_TRUE(e.depends_on(Var::x1));
  EXPECT_TRUE(e.depends_on(Var::y1));
  EXPECT_FALSE(e.depends_on(Var::yn));
  EXPECT_FALSE(e.depends_on(Var::t));
  EXPECT_TRUE(Expression::parse("2*pi + 1").is_constant());
}

// symbolic derivatives against central differences of the parsed expression
TEST(Expression, DerivativeMatchesFiniteDifferences) {
  const char* sources[] = {"exp(-t)*cos(pi*x1)*cos(pi*xn)", "x1^3/(1 + xn*xn)", "sin(2*pi*y1)*yn^2 - 3*t*x1",
                           "cos(sin(x1))*exp(2*xn)"};
  const Var vars[] = {Var::t, Var::x1, Var::xn, Var::y1, Var::yn};
  Point p = at(0.3, 0.41, -0.27, 0.62, 0.35);
  for (const char* s : sources) {
    Expression e = Expression::parse(s);
    for (Var v : vars) {
      const double d = 1e-5;
      Point a = p, b = p;
      switch (v) {
        case Var::t: a.t += d; b.t -= d; break;
        case Var::x1: a.x1 += d; b.x1 -= d; break;
        case Var::xn: a.xn += d; b.xn -= d; break;
        case Var::y1: a.y1 += d; b.y1 -= d; break;
        case Var::yn: a.yn += d; b.yn -= d; break;
      }
      double fd = (e(a) - e(b)) / (2 * d);
      EXPECT_NEAR(e.derivative(v)(p), fd, 1e-8 * (1 + std::abs(fd))) << s;
    }
  }
}

TEST(Expression, SecondDerivativeOfManufacturedSolution) {
  Expression u = Expression::parse("exp(-t)*cos(pi*x1)*cos(pi*xn)");
  Expression lap = u.derivative(Var::x1).derivative(Var::x1) + u.derivative(Var::xn).derivative(Var::xn);
  Point p = at(0.2, 0.3, 0.4, 0, 0);
  EXPECT_NEAR(lap(p), -2 * std::numbers::pi * std::numbers::pi * u(p), 1e-12);
}

TEST(Expression, ConstantFoldingAndArithmeticOperators) {
  Expression x = Expression::variable(Var::x1);
  Expression e = 2.0 * x * x - x / Expression(2.0);
  EXPECT_DOUBLE_EQ(e(at(0, 3, 0, 0, 0)), 16.5);
  EXPECT_TRUE(Expression::parse("x1").derivative(Var::xn).is_constant());
  EXPECT_DOUBLE_EQ(Expression::parse("x1*xn").derivative(Var::x1).derivative(Var::x1)(Point{}), 0.0);
}

TEST(Expression, TextRoundTrip) {
  for (const char* s : {"1 + 0.5*sin(2*pi*y1)*cos(pi*yn/2)", "exp(-t)*(x1 - xn)^2", "-x1/(2 + yn)"}) {
    Expression e = Expression::parse(s);
    EXPECT_EQ(e.str(), s);
    Expression again = Expression::parse(e.canonical());
    Point p = at(0.1, 0.2, 0.3, 0.4, 0.5);
    EXPECT_DOUBLE_EQ(again(p), e(p)) << e.canonical();
  }
}
