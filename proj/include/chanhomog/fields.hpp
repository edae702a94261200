#pragma once

// Problem data: diffusion coefficients, reaction terms, boundary and initial
// data, and the cell-averaged quantities entering the effective interface law.

#include <cmath>
#include <vector>

#include "chanhomog/error.hpp"
#include "chanhomog/expression.hpp"
#include "chanhomog/geometry.hpp"

namespace chanhomog {

struct DiffusionData {
  double D_plus = 1.0;
  double D_minus = 1.0;
  Expression D_M{1.0};  // function of (y1, yn), 1-periodic in y1
  double c0 = 1.0;      // declared lower bound for D_M

  void validate() const {
    if (!(D_plus > 0.0) || !(D_minus > 0.0)) throw Error(ErrorCode::DiffusionBelowBound, "bulk diffusivities must be positive");
    if (!(c0 > 0.0)) throw Error(ErrorCode::DiffusionBelowBound, "lower bound c0 must be positive");
  }
};

/// Reaction terms. g and h are evaluated in the separated form
/// g(t, x1, x/eps); expressions may also read xn.
struct SourceData {
  Expression f_plus{0.0};
  Expression f_minus{0.0};
  Expression g{0.0};
  Expression h{0.0};
};

struct InitialData {
  Expression u_plus{0.0};
  Expression u_minus{0.0};
  Expression u_M{0.0};  // function of (x1, y), 1-periodic in y1
};

struct ProblemData {
  DiffusionData diffusion;
  SourceData sources;
  InitialData initial;
};

/// Fast coordinates of a physical point: y = x / eps with y1 reduced into [0, 1).
inline Point fast_point(double t, double x1, double xn, double eps) {
  double y1 = x1 / eps;
  y1 -= std::floor(y1);
  return Point{t, x1, xn, y1, xn / eps};
}

/// field(x / eps), periodic reduction only.
inline double eval_fast(const Expression& field, double t, double x1, double xn, double eps) {
  return field(fast_point(t, x1, xn, eps));
}

/// field(x / eps) for x in the channels of the layer.
inline double eval_fast(const Expression& field, double t, double x1, double xn, double eps, const Channel& channel) {
  Point p = fast_point(t, x1, xn, eps);
  if (p.yn < -1.0 - 1e-12 || p.yn > 1.0 + 1e-12 || !channel.contains(p.y1, p.yn)) {
    throw Error(ErrorCode::PointOutsideChannel, "point does not map into the channel");
  }
  return field(p);
}

/// Effective data of the limit problem: channel area, cell integrals of g
/// (volume) and h (lateral boundary), and the cell average of u_M.
/// Cell integrals use a composite midpoint rule with `quad_n` points per
/// (1/den) edge; integrands free of y are integrated exactly.
class EffectiveData {
 public:
  EffectiveData() = default;
  EffectiveData(const Channel& channel, SourceData src, InitialData init, int quad_n, int init_quad_n)
      : channel_(channel), src_(std::move(src)), init_(std::move(init)), quad_n_(quad_n), init_quad_n_(init_quad_n) {
    auto m = channel_measures(channel_);
    z_star_area = m.area.value();
    lateral_length = m.lateral.value();
  }

  double z_star_area = 0.0;     // |Z*|
  double lateral_length = 0.0;  // |N|

  double G0(double t, double x1) const { return volume_integral(src_.g, t, x1, quad_n_); }
  double H0(double t, double x1) const { return surface_integral(src_.h, t, x1, quad_n_); }
  double u_M_init_avg(double x1) const { return volume_integral(init_.u_M, 0.0, x1, init_quad_n_) / z_star_area; }

  int quad_n() const { return quad_n_; }
  const Channel& channel() const { return channel_; }

  /// Integral over Z* of f(t, x1, y) (xn = 0 on the limit interface).
  double volume_integral(const Expression& f, double t, double x1, int n) const {
    if (!f.depends_on(Var::y1) && !f.depends_on(Var::yn)) return f(Point{t, x1, 0.0, 0.0, 0.0}) * z_star_area;
    const int q = channel_.den();
    const double w = 1.0 / (static_cast<double>(q) * n);
    double sum = 0.0;
    for (int r = 0; r < channel_.rows(); ++r) {
      for (int c = 0; c < channel_.columns(); ++c) {
        if (!channel_.occupied(c, r)) continue;
        for (int b = 0; b < n; ++b) {
          double yn = -1.0 + r * (1.0 / q) + (b + 0.5) * w;
          for (int a = 0; a < n; ++a) {
            double y1 = c * (1.0 / q) + (a + 0.5) * w;
            sum += f(Point{t, x1, 0.0, y1, yn});
          }
        }
      }
    }
    return sum * w * w;
  }

  /// Integral over N of f(t, x1, y) dS(y).
  double surface_integral(const Expression& f, double t, double x1, int n) const {
    if (!f.depends_on(Var::y1) && !f.depends_on(Var::yn)) return f(Point{t, x1, 0.0, 0.0, 0.0}) * lateral_length;
    const double len = 1.0 / channel_.den();
    double sum = 0.0;
    for (const BoundaryEdge& e : channel_.boundary()) {
      if (e.kind != EdgeKind::Lateral) continue;
      for (int a = 0; a < n; ++a) {
        double s = (a + 0.5) / n;
        sum += f(Point{t, x1, 0.0, e.y1_a + s * (e.y1_b - e.y1_a), e.yn_a + s * (e.yn_b - e.yn_a)});
      }
    }
    return sum * len / n;
  }

 private:
  Channel channel_;
  SourceData src_;
  InitialData init_;
  int quad_n_ = 8;
  int init_quad_n_ = 8;
};

inline EffectiveData effective_quantities(const SourceData& src, const InitialData& init, const Channel& channel,
                                          int quad_n, int init_quad_n = -1) {
  if (quad_n < 1) throw Error(ErrorCode::InvalidConfig, "quad_n must be >= 1");
  return EffectiveData(channel, src, init, quad_n, init_quad_n < 1 ? quad_n : init_quad_n);
}

}  // namespace chanhomog
