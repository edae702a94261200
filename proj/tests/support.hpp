#pragma once

#include <cmath>
#include <string>

#include "chanhomog/fields.hpp"
#include "chanhomog/geometry.hpp"

namespace chanhomog::testing {

inline ChannelSpec rect_spec() { return ChannelSpec{{Rect{0.25, 0.75, -1.0, 1.0}}, 4}; }

// wide top part, narrow bottom part; |Z*| = 3/4, |N| = 17/4
inline ChannelSpec hourglass_spec() {
  return ChannelSpec{{Rect{0.25, 0.75, 0.0, 1.0}, Rect{0.375, 0.625, -1.0, 0.0}}, 8};
}

inline ProblemData constant_problem(double c) {
  ProblemData p;
  p.diffusion.D_plus = 1.0;
  p.diffusion.D_minus = 1.0;
  p.diffusion.D_M = Expression(1.0);
  p.diffusion.c0 = 0.5;
  p.initial = InitialData{Expression(c), Expression(c), Expression(c)};
  return p;
}

inline ProblemData benchmark_problem() {
  ProblemData p;
  p.diffusion.D_plus = 1.0;
  p.diffusion.D_minus = 1.0;
  p.diffusion.D_M = Expression::parse("1 + 0.5*sin(2*pi*y1)*cos(pi*yn/2)");
  p.diffusion.c0 = 0.25;
  p.sources.f_plus = Expression::parse("cos(pi*x1)*(1 + xn)");
  p.sources.f_minus = Expression::parse("sin(pi*x1)");
  p.sources.g = Expression::parse("(1 + x1)*(1 + 0.5*yn)");
  p.sources.h = Expression::parse("0.5*cos(2*pi*x1)");
  p.initial.u_plus = Expression::parse("cos(pi*x1)*cos(pi*xn)");
  p.initial.u_minus = Expression::parse("x1*x1");
  p.initial.u_M = Expression::parse("1 + x1*yn");
  return p;
}

inline double rate(double coarse, double fine) { return std::log2(coarse / fine); }

}  // namespace chanhomog::testing
