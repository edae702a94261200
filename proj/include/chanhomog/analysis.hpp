#pragma once

// Post-processing of microscopic and effective solutions: scaled norms,
// two-scale pairings, the lateral trace check and micro/macro errors.
// All time integrals use the theta-rule of the generating scheme.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "chanhomog/error.hpp"
#include "chanhomog/expression.hpp"
#include "chanhomog/geometry.hpp"
#include "chanhomog/macro_solver.hpp"
#include "chanhomog/micro_solver.hpp"

namespace chanhomog {

struct ScaledNormReport {
  double L_eps_max = 0.0;      // max_t ||u(t)||_{L_eps}
  double H_gamma = 0.0;        // ||u||_{L^2(0,T; H_gamma,eps)}
  double grad_bulk = 0.0;      // ||grad u||_{L^2((0,T) x bulk)}
  double grad_layer = 0.0;     // eps^{gamma/2} ||grad u||_{L^2((0,T) x layer)}
  double dual_proxy = 0.0;     // L^2 in time of max over test battery of <d_t u, phi>
};

struct PairingResult {
  double value = 0.0;
  double reference = 0.0;
  double gap = 0.0;
};

/// Reference limit field v0 at snapshot k: (k, t, x1, y1, yn) -> value.
using ReferenceField = std::function<double(std::size_t, double, double, double, double)>;

namespace detail {

struct EnergySplit {
  double bulk = 0.0;       // sum over bulk/bulk faces of (du)^2
  double layer = 0.0;      // channel/channel faces
  double interface = 0.0;  // bulk/channel faces
};

inline EnergySplit gradient_energy(const MicroMesh& mesh, std::span<const double> u) {
  EnergySplit e;
  const auto& cells = mesh.cells();
  for (const Face& f : mesh.faces()) {
    if (f.b < 0) continue;
    double d = u[static_cast<std::size_t>(f.b)] - u[static_cast<std::size_t>(f.a)];
    bool ca = cells[static_cast<std::size_t>(f.a)].kind == CellKind::Channel;
    bool cb = cells[static_cast<std::size_t>(f.b)].kind == CellKind::Channel;
    if (ca && cb) {
      e.layer += d * d;
    } else if (ca || cb) {
      e.interface += d * d;
    } else {
      e.bulk += d * d;
    }
  }
  return e;
}

inline double weighted_l2_squared(std::span<const double> w, std::span<const double> u) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * u[i] * u[i];
  return s;
}

// Squared discrete H_gamma,eps norm with unit bulk diffusivity and eps^gamma in
// channels; bulk/channel faces use the harmonic mean of the two weights.
inline double h_gamma_squared(const MicroMesh& mesh, std::span<const double> mass, std::span<const double> u,
                              double gamma) {
  double eg = std::pow(mesh.eps(), gamma);
  EnergySplit e = gradient_energy(mesh, u);
  return weighted_l2_squared(mass, u) + e.bulk + eg * e.layer + harmonic_mean(1.0, eg) * e.interface;
}

}  // namespace detail

/// Smooth slow test fields used for the dual-norm proxy.
inline std::vector<std::vector<double>> dual_test_battery(const MicroMesh& mesh, std::span<const double> mass,
                                                          double gamma) {
  const double L = mesh.sigma_length();
  const double H = mesh.height();
  const double pi = std::numbers::pi;
  std::vector<std::function<double(double, double)>> shapes = {
      [](double, double) { return 1.0; },
      [&](double x1, double) { return std::cos(pi * x1 / L); },
      [&](double, double xn) { return std::sin(0.5 * pi * xn / H); },
      [&](double x1, double xn) { return std::cos(pi * x1 / L) * std::sin(0.5 * pi * xn / H); },
      [&](double x1, double xn) { return std::cos(2.0 * pi * x1 / L) * std::cos(pi * xn / H); },
  };
  std::vector<std::vector<double>> out;
  for (const auto& s : shapes) {
    std::vector<double> phi(mesh.size());
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = s(mesh.cells()[i].x1, mesh.cells()[i].xn);
    double n = std::sqrt(detail::h_gamma_squared(mesh, mass, phi, gamma));
    for (double& v : phi) v /= n;
    out.push_back(std::move(phi));
  }
  return out;
}

inline ScaledNormReport scaled_norms(const MicroSolution& sol, const MicroMesh& mesh, double gamma) {
  const TimeSeries& ts = sol.series;
  const std::size_t nt = ts.times.size();
  std::span<const double> mass = sol.mass_weights;
  const double eg = std::pow(mesh.eps(), gamma);
  std::vector<double> h2(nt), gb(nt), gl(nt);
  ScaledNormReport r;
  for (std::size_t k = 0; k < nt; ++k) {
    const auto& u = ts.values[k];
    double l2 = detail::weighted_l2_squared(mass, u);
    detail::EnergySplit e = detail::gradient_energy(mesh, u);
    r.L_eps_max = std::max(r.L_eps_max, std::sqrt(l2));
    h2[k] = l2 + e.bulk + eg * e.layer + harmonic_mean(1.0, eg) * e.interface;
    gb[k] = e.bulk;
    gl[k] = eg * e.layer;
  }
  r.H_gamma = std::sqrt(ts.integrate(h2));
  r.grad_bulk = std::sqrt(ts.integrate(gb));
  r.grad_layer = std::sqrt(ts.integrate(gl));

  auto battery = dual_test_battery(mesh, mass, gamma);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < nt; ++k) {
    double dt = ts.times[k + 1] - ts.times[k];
    double worst = 0.0;
    for (const auto& phi : battery) {
      double s = 0.0;
      for (std::size_t i = 0; i < phi.size(); ++i) s += mass[i] * (ts.values[k + 1][i] - ts.values[k][i]) * phi[i];
      worst = std::max(worst, std::abs(s / dt));
    }
    acc += dt * worst * worst;
  }
  r.dual_proxy = std::sqrt(acc);
  return r;
}

/// Reference triple integral int_0^T int_Sigma int_{Z*} v0 psi, midpoint rule
/// with `nx` points along Sigma and `ny` points per (1/den) edge of Z*.
inline double reference_volume_integral(const Channel& channel, int sigma_length, const std::vector<double>& times,
                                        double theta, const Expression& psi, const ReferenceField& v0, int nx,
                                        int ny) {
  const int q = channel.den();
  const double wy = 1.0 / (static_cast<double>(q) * ny);
  const double wx = static_cast<double>(sigma_length) / nx;
  std::vector<double> f(times.size(), 0.0);
  for (std::size_t k = 0; k < times.size(); ++k) {
    double s = 0.0;
    for (int ix = 0; ix < nx; ++ix) {
      double x1 = (ix + 0.5) * wx;
      for (int r = 0; r < channel.rows(); ++r) {
        for (int c = 0; c < channel.columns(); ++c) {
          if (!channel.occupied(c, r)) continue;
          for (int b = 0; b < ny; ++b) {
            double yn = -1.0 + static_cast<double>(r) / q + (b + 0.5) * wy;
            for (int a = 0; a < ny; ++a) {
              double y1 = static_cast<double>(c) / q + (a + 0.5) * wy;
              s += v0(k, times[k], x1, y1, yn) * psi(Point{times[k], x1, 0.0, y1, yn});
            }
          }
        }
      }
    }
    f[k] = s * wx * wy * wy;
  }
  TimeSeries tmp;
  tmp.times = times;
  tmp.theta = theta;
  return tmp.integrate(f);
}

inline double reference_surface_integral(const Channel& channel, int sigma_length, const std::vector<double>& times,
                                         double theta, const Expression& psi, const ReferenceField& v0, int nx,
                                         int ns) {
  const double len = 1.0 / channel.den();
  const double wx = static_cast<double>(sigma_length) / nx;
  std::vector<double> f(times.size(), 0.0);
  for (std::size_t k = 0; k < times.size(); ++k) {
    double s = 0.0;
    for (int ix = 0; ix < nx; ++ix) {
      double x1 = (ix + 0.5) * wx;
      for (const BoundaryEdge& e : channel.boundary()) {
        if (e.kind != EdgeKind::Lateral) continue;
        for (int a = 0; a < ns; ++a) {
          double sfrac = (a + 0.5) / ns;
          double y1 = e.y1_a + sfrac * (e.y1_b - e.y1_a);
          double yn = e.yn_a + sfrac * (e.yn_b - e.yn_a);
          s += v0(k, times[k], x1, y1, yn) * psi(Point{times[k], x1, 0.0, y1, yn});
        }
      }
    }
    f[k] = s * wx * len / ns;
  }
  TimeSeries tmp;
  tmp.times = times;
  tmp.theta = theta;
  return tmp.integrate(f);
}

/// Quadrature resolution of reference integrals.
struct ReferenceQuadrature {
  int nx = 256;  // points along Sigma
  int ny = 4;    // points per (1/den) edge of the standard cell
};

/// (1/eps) int_0^T int_{layer} v psi(t, x1, x/eps) against the reference.
inline PairingResult two_scale_pair_volume(const MicroMesh& mesh, const TimeSeries& v, const Expression& psi,
                                           const ReferenceField& v0, const ReferenceQuadrature& rq) {
  const double h2 = mesh.h() * mesh.h();
  std::vector<double> f(v.times.size(), 0.0);
  for (std::size_t k = 0; k < v.times.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < mesh.size(); ++i) {
      const ActiveCell& c = mesh.cells()[i];
      if (c.kind != CellKind::Channel) continue;
      s += v.values[k][i] * psi(Point{v.times[k], c.x1, c.xn, c.y1, c.yn});
    }
    f[k] = s * h2 / mesh.eps();
  }
  PairingResult r;
  r.value = v.integrate(f);
  r.reference = reference_volume_integral(mesh.channel(), mesh.sigma_length(), v.times, v.theta, psi, v0, rq.nx, rq.ny);
  r.gap = std::abs(r.value - r.reference);
  return r;
}

/// int_0^T int_{N_eps} v psi(t, x1, x/eps) dS against the reference on N.
/// The trace of v on a lateral face is the adjacent channel-cell value.
inline PairingResult two_scale_pair_surface(const MicroMesh& mesh, const TimeSeries& v, const Expression& psi,
                                            const ReferenceField& v0, const ReferenceQuadrature& rq) {
  std::vector<double> f(v.times.size(), 0.0);
  for (std::size_t k = 0; k < v.times.size(); ++k) {
    double s = 0.0;
    for (const Face& face : mesh.faces()) {
      if (face.kind != FaceKind::Lateral) continue;
      s += v.values[k][static_cast<std::size_t>(face.a)] * psi(Point{v.times[k], face.x1, face.xn, face.y1, face.yn});
    }
    f[k] = s * mesh.h();
  }
  PairingResult r;
  r.value = v.integrate(f);
  r.reference = reference_surface_integral(mesh.channel(), mesh.sigma_length(), v.times, v.theta, psi, v0, rq.nx, rq.ny);
  r.gap = std::abs(r.value - r.reference);
  return r;
}

/// Vector test field psi = (psi_1, psi_n) over (t, x1, y).
struct VectorField {
  Expression psi_1{0.0};
  Expression psi_n{0.0};
};

/// (1/eps) int_0^T int_{layer} grad u^M . psi(t, x1, x/eps). Channel/channel
/// faces carry the two-point gradient over a full dual cell; on S faces the
/// channel half-cell gradient towards the flux-consistent face value is used.
/// The limit is 0 for gamma = -1.
inline PairingResult gradient_two_scale_null(const MicroMesh& mesh, const MicroSolution& sol, const VectorField& psi) {
  const double h = mesh.h();
  const auto& cells = mesh.cells();
  const TimeSeries& u = sol.series;
  const auto& D = sol.cell_diffusivity;
  std::vector<double> f(u.times.size(), 0.0);
  for (std::size_t k = 0; k < u.times.size(); ++k) {
    const auto& uk = u.values[k];
    double s = 0.0;
    for (const Face& face : mesh.faces()) {
      if (face.b < 0) continue;
      const auto ia = static_cast<std::size_t>(face.a);
      const auto ib = static_cast<std::size_t>(face.b);
      bool ca = cells[ia].kind == CellKind::Channel;
      bool cb = cells[ib].kind == CellKind::Channel;
      if (!ca && !cb) continue;
      const ActiveCell& c = ca ? cells[ia] : cells[ib];
      double y1 = c.y1, yn = c.yn;
      double half = 0.5 / mesh.per_cell();
      double dir = ca ? 1.0 : -1.0;  // face lies on the +axis side of a
      if (face.axis == Axis::X1) {
        y1 += dir * half;
      } else {
        yn += dir * half;
      }
      double grad, w;
      if (ca && cb) {
        grad = (uk[ib] - uk[ia]) / h;
        w = h * h;
      } else {
        double uf = (D[ia] * uk[ia] + D[ib] * uk[ib]) / (D[ia] + D[ib]);
        grad = ca ? (uf - uk[ia]) / (0.5 * h) : (uk[ib] - uf) / (0.5 * h);
        w = 0.5 * h * h;
      }
      const Expression& comp = face.axis == Axis::X1 ? psi.psi_1 : psi.psi_n;
      s += w * grad * comp(Point{u.times[k], face.x1, face.xn, y1, yn});
    }
    f[k] = s / mesh.eps();
  }
  PairingResult r;
  r.value = u.integrate(f);
  r.reference = 0.0;
  r.gap = std::abs(r.value);
  return r;
}

struct TraceCheckResult {
  double worst_ratio = -std::numeric_limits<double>::infinity();
  double constant_ratio = 0.0;  // ratio of the constant field
  double analytic_constant_ratio = 0.0;  // sqrt(|N| / |Z*|)
  int samples = 0;
};

namespace detail {

struct LayerNorms {
  double lateral = 0.0;  // ||v||_{L^2(N_eps)}
  double grad = 0.0;     // ||grad v||_{L^2(layer)}
  double l2 = 0.0;       // ||v||_{L^2(layer)}
};

inline LayerNorms layer_norms(const MicroMesh& mesh, std::span<const double> v) {
  const auto& cells = mesh.cells();
  const double h = mesh.h();
  LayerNorms n;
  double lat = 0.0, grad = 0.0, l2 = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].kind == CellKind::Channel) l2 += h * h * v[i] * v[i];
  }
  for (const Face& f : mesh.faces()) {
    if (f.kind == FaceKind::Lateral) {
      lat += h * v[static_cast<std::size_t>(f.a)] * v[static_cast<std::size_t>(f.a)];
    } else if (f.b >= 0 && cells[static_cast<std::size_t>(f.a)].kind == CellKind::Channel &&
               cells[static_cast<std::size_t>(f.b)].kind == CellKind::Channel) {
      double d = v[static_cast<std::size_t>(f.b)] - v[static_cast<std::size_t>(f.a)];
      grad += d * d;
    }
  }
  n.lateral = std::sqrt(lat);
  n.grad = std::sqrt(grad);
  n.l2 = std::sqrt(l2);
  return n;
}

}  // namespace detail

/// Trace inequality with theta = 1:
///   ratio(v) = (||v||_{N_eps} - sqrt(eps) ||grad v||) / (eps^{-1/2} ||v||_layer)
/// over the constant field and `samples` random fields (values on the full
/// active vector; only channel cells are read). The zero field is skipped.
inline TraceCheckResult trace_check(const MicroMesh& mesh, int samples, std::uint64_t seed) {
  const double eps = mesh.eps();
  auto ratio = [&](std::span<const double> v, bool& ok) {
    detail::LayerNorms n = detail::layer_norms(mesh, v);
    ok = n.l2 > 0.0;
    return ok ? (n.lateral - std::sqrt(eps) * n.grad) / (n.l2 / std::sqrt(eps)) : 0.0;
  };
  TraceCheckResult res;
  auto m = channel_measures(mesh.channel());
  res.analytic_constant_ratio = std::sqrt(m.lateral.value() / m.area.value());

  std::vector<double> v(mesh.size(), 1.0);
  bool ok = false;
  res.constant_ratio = ratio(v, ok);
  res.worst_ratio = res.constant_ratio;

  // distance in cell coordinates to the nearest lateral edge
  const auto& edges = mesh.channel().boundary();
  auto dist_to_lateral = [&](double y1, double yn) {
    double best = std::numeric_limits<double>::infinity();
    for (const BoundaryEdge& e : edges) {
      if (e.kind != EdgeKind::Lateral) continue;
      double px = std::clamp(y1, std::min(e.y1_a, e.y1_b), std::max(e.y1_a, e.y1_b));
      double py = std::clamp(yn, std::min(e.yn_a, e.yn_b), std::max(e.yn_a, e.yn_b));
      best = std::min(best, std::hypot(y1 - px, yn - py));
    }
    return best;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double pi = std::numbers::pi;
  for (int s = 0; s < samples; ++s) {
    int kind = s % 3;
    if (kind == 0) {
      for (double& x : v) x = unif(rng);
    } else if (kind == 1) {
      double a[4];
      for (double& x : a) x = unif(rng);
      int k1 = 1 + static_cast<int>(std::abs(unif(rng)) * 3);
      int k2 = 1 + static_cast<int>(std::abs(unif(rng)) * 3);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const ActiveCell& c = mesh.cells()[i];
        v[i] = a[0] + a[1] * std::cos(k1 * pi * c.y1) + a[2] * std::cos(k2 * pi * c.yn) +
               a[3] * std::cos(pi * c.x1) * c.yn;
      }
    } else {
      double len = 0.05 + 0.25 * std::abs(unif(rng));
      double amp = 1.0 + std::abs(unif(rng));
      for (std::size_t i = 0; i < v.size(); ++i) {
        const ActiveCell& c = mesh.cells()[i];
        v[i] = c.kind == CellKind::Channel ? amp * std::exp(-dist_to_lateral(c.y1, c.yn) / len) : 0.0;
      }
    }
    double r = ratio(v, ok);
    if (ok) {
      res.worst_ratio = std::max(res.worst_ratio, r);
      ++res.samples;
    }
  }
  return res;
}

struct ConvergenceRow {
  double eps = 0.0;
  double gamma = 0.0;
  double e_bulk_plus = 0.0;
  double e_bulk_minus = 0.0;
  double e_trace_plus = 0.0;
  double e_trace_minus = 0.0;
  double e_layer = 0.0;
  std::vector<double> layer_gaps;  // one per test function of the battery
};

/// Bilinear interpolation of the effective solution: the interface value is
/// the node row at xn = 0; constant extension beyond the outermost centres.
class MacroInterpolator {
 public:
  MacroInterpolator(const MacroSolution& sol) : sol_(sol) {}

  double interface(std::size_t k, double x1) const {
    const MacroMesh& m = sol_.mesh;
    auto [i0, w] = bracket_x1(x1);
    return (1.0 - w) * sol_.u_M(k, i0) + w * sol_.u_M(k, std::min(i0 + 1, m.nx() - 1));
  }

  double bulk(std::size_t k, double x1, double xn) const {
    const MacroMesh& m = sol_.mesh;
    auto [i0, w] = bracket_x1(x1);
    int i1 = std::min(i0 + 1, m.nx() - 1);
    const bool plus = xn >= 0.0;
    double a = std::abs(xn);
    auto node = [&](int i, int level) {
      if (level == 0) return sol_.u_M(k, i);
      int j = level - 1;
      return sol_.series.values[k][plus ? m.plus(i, j) : m.minus(i, j)];
    };
    int l0;
    double wl;
    if (a <= 0.5 * m.h()) {
      l0 = 0;
      wl = a / (0.5 * m.h());
    } else {
      double r = a / m.h() + 0.5;
      l0 = static_cast<int>(std::floor(r));
      wl = r - l0;
      if (l0 >= m.ny()) {
        l0 = m.ny();
        wl = 0.0;
      }
    }
    int l1 = std::min(l0 + 1, m.ny());
    double lo = (1.0 - w) * node(i0, l0) + w * node(i1, l0);
    double hi = (1.0 - w) * node(i0, l1) + w * node(i1, l1);
    return (1.0 - wl) * lo + wl * hi;
  }

 private:
  std::pair<int, double> bracket_x1(double x1) const {
    const MacroMesh& m = sol_.mesh;
    if (m.nx() == 1) return {0, 0.0};
    double s = std::clamp(x1 / m.h() - 0.5, 0.0, static_cast<double>(m.nx() - 1));
    int i0 = std::min(static_cast<int>(std::floor(s)), m.nx() - 2);
    return {i0, s - i0};
  }

  const MacroSolution& sol_;
};

inline void check_commensurate(const MicroMesh& mesh, const TimeSeries& micro, const MacroSolution& macro) {
  const MacroMesh& mm = macro.mesh;
  double ratio = mesh.h() / mm.h();
  if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw Error(ErrorCode::IncommensurateGrids, "macro spacing must equal or refine the micro spacing along Sigma");
  }
  if (mm.sigma_length() != mesh.sigma_length() || std::abs(mm.height() - mesh.height()) > 1e-12) {
    throw Error(ErrorCode::IncommensurateGrids, "micro and macro domains differ");
  }
  const auto& ta = micro.times;
  const auto& tb = macro.series.times;
  if (ta.size() != tb.size()) throw Error(ErrorCode::IncommensurateGrids, "snapshot counts differ");
  for (std::size_t k = 0; k < ta.size(); ++k) {
    if (std::abs(ta[k] - tb[k]) > 1e-9 * std::max(1.0, std::abs(ta[k]))) {
      throw Error(ErrorCode::IncommensurateGrids, "snapshot times differ");
    }
  }
  if (micro.theta != macro.series.theta) throw Error(ErrorCode::IncommensurateGrids, "time schemes differ");
}

/// Trace of the micro bulk solution on xn = +-eps for column i: two-point
/// flux-consistent face value where a channel opens, cell value elsewhere.
inline double micro_trace(const MicroMesh& mesh, const MicroSolution& sol, std::size_t k, int i, bool plus) {
  int jb = plus ? mesh.plus_begin() : mesh.layer_begin() - 1;
  int jl = plus ? mesh.plus_begin() - 1 : mesh.layer_begin();
  auto b = static_cast<std::size_t>(mesh.active_index(i, jb));
  int c = mesh.active_index(i, jl);
  const auto& u = sol.series.values[k];
  if (c < 0) return u[b];
  auto ci = static_cast<std::size_t>(c);
  double db = sol.cell_diffusivity[b];
  double dc = sol.cell_diffusivity[ci];
  return (db * u[b] + dc * u[ci]) / (db + dc);
}

inline ConvergenceRow micro_macro_error(const MicroMesh& mesh, const MicroSolution& micro, const MacroSolution& macro,
                                        const std::vector<Expression>& psi_battery, const ReferenceQuadrature& rq) {
  const TimeSeries& ts = micro.series;
  check_commensurate(mesh, ts, macro);
  MacroInterpolator interp(macro);
  const std::size_t nt = ts.times.size();
  const double h = mesh.h();
  std::vector<double> bp(nt, 0.0), bm(nt, 0.0), tp(nt, 0.0), tm(nt, 0.0);
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t i = 0; i < mesh.size(); ++i) {
      const ActiveCell& c = mesh.cells()[i];
      if (c.kind == CellKind::Channel) continue;
      double d = ts.values[k][i] - interp.bulk(k, c.x1, c.xn);
      (c.kind == CellKind::BulkPlus ? bp[k] : bm[k]) += h * h * d * d;
    }
    for (int i = 0; i < mesh.nx(); ++i) {
      double ref = interp.interface(k, (i + 0.5) * h);
      double dp = micro_trace(mesh, micro, k, i, true) - ref;
      double dm = micro_trace(mesh, micro, k, i, false) - ref;
      tp[k] += h * dp * dp;
      tm[k] += h * dm * dm;
    }
  }
  ConvergenceRow row;
  row.eps = mesh.eps();
  row.gamma = micro.gamma;
  row.e_bulk_plus = std::sqrt(ts.integrate(bp));
  row.e_bulk_minus = std::sqrt(ts.integrate(bm));
  row.e_trace_plus = std::sqrt(ts.integrate(tp));
  row.e_trace_minus = std::sqrt(ts.integrate(tm));
  ReferenceField v0 = [&](std::size_t k, double, double x1, double, double) { return interp.interface(k, x1); };
  for (const Expression& psi : psi_battery) {
    PairingResult p = two_scale_pair_volume(mesh, ts, psi, v0, rq);
    row.layer_gaps.push_back(p.gap);
    row.e_layer = std::max(row.e_layer, p.gap);
  }
  return row;
}

/// L^2((0,T) x bulk) distance of two micro solutions on the same mesh.
inline double bulk_l2_difference(const MicroMesh& mesh, const MicroSolution& a, const MicroSolution& b) {
  const std::size_t nt = a.series.times.size();
  if (b.series.times.size() != nt || a.series.values.front().size() != b.series.values.front().size()) {
    throw Error(ErrorCode::IncommensurateGrids, "solutions are not on the same mesh and time grid");
  }
  const double h2 = mesh.h() * mesh.h();
  std::vector<double> f(nt, 0.0);
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t i = 0; i < mesh.size(); ++i) {
      if (mesh.cells()[i].kind == CellKind::Channel) continue;
      double d = a.series.values[k][i] - b.series.values[k][i];
      f[k] += h2 * d * d;
    }
  }
  return std::sqrt(a.series.integrate(f));
}

}  // namespace chanhomog
