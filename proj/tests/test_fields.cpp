#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "chanhomog/fields.hpp"
#include "support.hpp"

using namespace chanhomog;
using namespace chanhomog::testing;

TEST(EvalFast, PeriodicReductionExamples) {
  EXPECT_DOUBLE_EQ(eval_fast(Expression(2.5), 0.3, 0.7, 0.01, 0.125), 2.5);
  EXPECT_NEAR(eval_fast(Expression::parse("sin(2*pi*y1)"), 0.0, 1.25, 0.0, 0.25), 0.0, 1e-15);
  EXPECT_NEAR(eval_fast(Expression::parse("y1*yn"), 0.0, 0.3, 0.1, 0.25), 0.08, 1e-12);
}

TEST(EvalFast, ChannelPointsAndShiftInvariance) {
  Channel ch = build_channel(rect_spec());
  Expression f = Expression::parse("y1*yn + cos(2*pi*y1)");
  const double eps = 0.25;
  for (double x1 : {0.07, 0.1, 0.15}) {
    double base = eval_fast(f, 0.0, x1, 0.1, eps, ch);
    EXPECT_NEAR(base, eval_fast(f, 0.0, x1, 0.1, eps), 1e-15);
    for (int k = 1; k < 4; ++k) EXPECT_NEAR(eval_fast(f, 0.0, x1 + k * eps, 0.1, eps, ch), base, 1e-12);
  }
}

TEST(EvalFast, RejectsPointsOutsideTheChannel) {
  Channel ch = build_channel(rect_spec());
  Expression s = Expression::parse("sin(2*pi*y1)");
  try {
    eval_fast(s, 0.0, 1.25, 0.0, 0.25, ch);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PointOutsideChannel);
  }
  EXPECT_THROW(eval_fast(s, 0.0, 0.3, 0.3, 0.25, ch), Error);
}

TEST(Diffusion, LowerBoundValidation) {
  DiffusionData d;
  d.D_plus = 1.0;
  d.D_minus = 0.0;
  EXPECT_THROW(d.validate(), Error);
  d.D_minus = 1.0;
  d.c0 = 0.0;
  EXPECT_THROW(d.validate(), Error);
}

TEST(EffectiveData, AreaAndAverages) {
  Channel ch = build_channel(rect_spec());
  SourceData src;
  src.g = Expression::parse("2 + x1");
  src.h = Expression::parse("3");
  InitialData init;
  init.u_M = Expression::parse("yn*yn");
  EffectiveData eff = effective_quantities(src, init, ch, 8, 128);
  EXPECT_DOUBLE_EQ(eff.z_star_area, 1.0);
  EXPECT_DOUBLE_EQ(eff.G0(0.0, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(eff.H0(0.0, 0.5), 12.0);
  // midpoint error of y_n^2 on a 1/512 grid: w^2 / 12
  EXPECT_NEAR(eff.u_M_init_avg(0.3), 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(eff.u_M_init_avg(0.3), 1.0 / 3.0 - 1.0 / (12.0 * 512 * 512), 1e-14);
}

TEST(EffectiveData, QuadraturesExactForLinearIntegrands) {
  Channel ch = build_channel(hourglass_spec());
  EffectiveData eff = effective_quantities({}, {}, ch, 1);
  // int_{Z*} (1 + y1 + 2 yn): top rect [1/4,3/4]x[0,1], bottom [3/8,5/8]x[-1,0]
  double exact = 0.5 * (1 + 0.5 + 1.0) + 0.25 * (1 + 0.5 - 1.0);
  EXPECT_NEAR(eff.volume_integral(Expression::parse("1 + y1 + 2*yn"), 0, 0, 1), exact, 1e-14);
  // int_N y1 dS: verticals at 1/4, 3/4 (length 1 each), 3/8, 5/8 (length 1 each),
  // steps y1 in [1/4,3/8] and [5/8,3/4] at yn = 0
  double surf = 0.25 + 0.75 + 0.375 + 0.625 + 0.125 * (0.3125 + 0.6875);
  EXPECT_NEAR(eff.surface_integral(Expression::parse("y1"), 0, 0, 1), surf, 1e-14);
}

TEST(EffectiveData, MidpointRuleConvergesAtSecondOrder) {
  Channel ch = build_channel(hourglass_spec());
  EffectiveData eff = effective_quantities({}, {}, ch, 1);
  Expression f = Expression::parse("exp(yn)*sin(pi*y1)");
  // closed form: top rect int_{1/4}^{3/4} sin(pi y1) * int_0^1 e^yn + bottom rect
  auto sin_int = [](double a, double b) { return (std::cos(std::numbers::pi * a) - std::cos(std::numbers::pi * b)) / std::numbers::pi; };
  double exact = sin_int(0.25, 0.75) * (std::exp(1.0) - 1.0) + sin_int(0.375, 0.625) * (1.0 - std::exp(-1.0));
  double e1 = std::abs(eff.volume_integral(f, 0, 0, 2) - exact);
  double e2 = std::abs(eff.volume_integral(f, 0, 0, 4) - exact);
  double e3 = std::abs(eff.volume_integral(f, 0, 0, 8) - exact);
  EXPECT_GE(rate(e1, e2), 1.95);
  EXPECT_GE(rate(e2, e3), 1.95);
}

TEST(EffectiveData, SlowOnlyIntegrandsAreExact) {
  Channel ch = build_channel(hourglass_spec());
  SourceData src;
  src.g = Expression::parse("exp(x1)*t");
  src.h = Expression::parse("x1*x1");
  EffectiveData eff = effective_quantities(src, {}, ch, 1);
  EXPECT_DOUBLE_EQ(eff.G0(2.0, 0.5), 0.75 * std::exp(0.5) * 2.0);
  EXPECT_DOUBLE_EQ(eff.H0(0.0, 0.5), 4.25 * 0.25);
}

TEST(EffectiveData, RejectsBadQuadratureOrder) { EXPECT_THROW(effective_quantities({}, {}, build_channel(rect_spec()), 0), Error); }
