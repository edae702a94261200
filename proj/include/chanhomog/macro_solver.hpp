#pragma once

// Effective problem: diffusion in Omega+ and Omega-, coupled through a single
// interface unknown per Sigma cell. The interface value is the shared trace of
// both bulk columns; its row carries the flux-jump law
//   |Z*| h du_M/dt = flux from Omega+ + flux from Omega- + h (G0 - H0).
// Nothing here depends on gamma.

#include <span>
#include <vector>

#include "chanhomog/fields.hpp"
#include "chanhomog/geometry.hpp"
#include "chanhomog/sparse.hpp"
#include "chanhomog/time_stepping.hpp"

namespace chanhomog {

/// Bulk data of the effective problem (diffusivities and volume sources).
struct MacroData {
  double D_plus = 1.0;
  double D_minus = 1.0;
  Expression f_plus{0.0};
  Expression f_minus{0.0};
  Expression u_plus{0.0};
  Expression u_minus{0.0};

  static MacroData from_problem(const ProblemData& p) {
    return {p.diffusion.D_plus, p.diffusion.D_minus, p.sources.f_plus, p.sources.f_minus, p.initial.u_plus,
            p.initial.u_minus};
  }
};

class MacroSystem {
 public:
  std::span<const double> mass() const { return mass_; }
  const CsrMatrix& stiffness() const { return stiffness_; }

  void load(double t, std::span<double> b) const {
    const int nx = mesh_.nx();
    const double h = mesh_.h();
    for (int j = 0; j < mesh_.ny(); ++j) {
      for (int i = 0; i < nx; ++i) {
        double x1 = mesh_.x1(i);
        b[mesh_.plus(i, j)] = h * h * data_.f_plus(Point{t, x1, mesh_.xn_plus(j), 0.0, 0.0});
        b[mesh_.minus(i, j)] = h * h * data_.f_minus(Point{t, x1, mesh_.xn_minus(j), 0.0, 0.0});
      }
    }
    for (int i = 0; i < nx; ++i) {
      double x1 = mesh_.x1(i);
      b[mesh_.interface(i)] = h * (eff_.G0(t, x1) - eff_.H0(t, x1));
    }
  }

  const MacroMesh& mesh() const { return mesh_; }

  friend MacroSystem assemble_macro(const MacroMesh&, const MacroData&, const EffectiveData&);

 private:
  MacroMesh mesh_;
  MacroData data_;
  EffectiveData eff_;
  std::vector<double> mass_;
  CsrMatrix stiffness_;
};

inline MacroSystem assemble_macro(const MacroMesh& mesh, const MacroData& data, const EffectiveData& eff) {
  MacroSystem sys;
  sys.mesh_ = mesh;
  sys.data_ = data;
  sys.eff_ = eff;
  const int nx = mesh.nx();
  const int ny = mesh.ny();
  const double h = mesh.h();
  sys.mass_.assign(mesh.size(), h * h);
  for (int i = 0; i < nx; ++i) sys.mass_[mesh.interface(i)] = eff.z_star_area * h;

  std::vector<CsrMatrix::Triplet> trip;
  auto couple = [&](int a, int b, double tr) {
    trip.push_back({a, a, tr});
    trip.push_back({b, b, tr});
    trip.push_back({a, b, -tr});
    trip.push_back({b, a, -tr});
  };
  for (int side = 0; side < 2; ++side) {
    const double D = side == 0 ? data.D_plus : data.D_minus;
    auto id = [&](int i, int j) { return side == 0 ? mesh.plus(i, j) : mesh.minus(i, j); };
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        if (i + 1 < nx) couple(id(i, j), id(i + 1, j), D);
        if (j + 1 < ny) couple(id(i, j), id(i, j + 1), D);
      }
    }
    // half-cell one-sided flux to the interface value: D (u - u_M) / (h/2) * h
    for (int i = 0; i < nx; ++i) couple(id(i, 0), mesh.interface(i), 2.0 * D);
  }
  sys.stiffness_ = CsrMatrix::from_triplets(mesh.size(), std::move(trip));
  return sys;
}

inline std::vector<double> macro_initial_field(const MacroMesh& mesh, const MacroData& data, const EffectiveData& eff) {
  std::vector<double> u(mesh.size());
  for (int j = 0; j < mesh.ny(); ++j) {
    for (int i = 0; i < mesh.nx(); ++i) {
      u[mesh.plus(i, j)] = data.u_plus(Point{0.0, mesh.x1(i), mesh.xn_plus(j), 0.0, 0.0});
      u[mesh.minus(i, j)] = data.u_minus(Point{0.0, mesh.x1(i), mesh.xn_minus(j), 0.0, 0.0});
    }
  }
  for (int i = 0; i < mesh.nx(); ++i) u[mesh.interface(i)] = eff.u_M_init_avg(mesh.x1(i));
  return u;
}

struct MacroSolution {
  MacroMesh mesh;
  TimeSeries series;
  double z_star_area = 0.0;

  /// Interface value at snapshot k, cell i.
  double u_M(std::size_t k, int i) const { return series.values[k][mesh.interface(i)]; }
  /// Traces of the two bulk solutions on Sigma: both read the shared unknown.
  double trace_plus(std::size_t k, int i) const { return series.values[k][mesh.interface(i)]; }
  double trace_minus(std::size_t k, int i) const { return series.values[k][mesh.interface(i)]; }
};

inline MacroSolution solve_macro(const MacroMesh& mesh, const MacroData& data, const EffectiveData& eff,
                                 const TimeConfig& cfg) {
  cfg.validate();
  MacroSystem sys = assemble_macro(mesh, data, eff);
  MacroSolution sol;
  sol.mesh = mesh;
  sol.z_star_area = eff.z_star_area;
  sol.series = integrate_in_time(sys, macro_initial_field(mesh, data, eff), cfg);
  return sol;
}

}  // namespace chanhomog
