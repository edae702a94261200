#pragma once

// Finite-volume discretization of the microscopic problem on a MicroMesh.
//
// Unknowns live on active cells (bulk and channel). Mass weights follow the
// scaled L_eps inner product: h^2 in the bulk, h^2/eps in channel cells. The
// stiffness uses two-point fluxes with harmonic face diffusivities, where a
// channel cell carries eps^gamma * D_M(x/eps). Continuity of the solution and
// of the normal flux across bulk/channel faces is built into the two-point
// flux; lateral channel faces receive the Neumann datum h.

#include <cmath>
#include <span>
#include <vector>

#include "chanhomog/error.hpp"
#include "chanhomog/fields.hpp"
#include "chanhomog/geometry.hpp"
#include "chanhomog/sparse.hpp"
#include "chanhomog/time_stepping.hpp"

namespace chanhomog {

struct MicroConfig {
  double gamma = 0.0;
  TimeConfig time;

  void validate() const {
    if (!(gamma >= -1.0 && gamma < 1.0)) {
      throw Error(ErrorCode::GammaOutOfRange, "gamma must lie in [-1, 1)");
    }
    time.validate();
  }
};

inline double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

class DiscreteSystem {
 public:
  std::span<const double> mass() const { return mass_; }
  const CsrMatrix& stiffness() const { return stiffness_; }

  /// Per active cell diffusivity: D+/D- in the bulk, eps^gamma D_M in channels.
  const std::vector<double>& cell_diffusivity() const { return diffusivity_; }

  /// Load vector b(t): bulk f h^2, channel g h^2/eps, minus h * len on N_eps.
  void load(double t, std::span<double> b) const {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      const LoadPoint& c = cells_[i];
      Point p{t, c.x1, c.xn, c.y1, c.yn};
      const Expression& src = c.kind == CellKind::BulkPlus    ? sources_.f_plus
                              : c.kind == CellKind::BulkMinus ? sources_.f_minus
                                                              : sources_.g;
      b[i] = mass_[i] * src(p);
    }
    for (const LateralLoad& f : lateral_) {
      b[static_cast<std::size_t>(f.cell)] -= f.length * sources_.h(Point{t, f.x1, f.xn, f.y1, f.yn});
    }
  }

  double eps() const { return eps_; }
  double gamma() const { return gamma_; }

  friend DiscreteSystem assemble(const MicroMesh&, const ProblemData&, const MicroConfig&);

 private:
  struct LoadPoint {
    CellKind kind;
    double x1, xn, y1, yn;
  };
  struct LateralLoad {
    int cell;
    double length;
    double x1, xn, y1, yn;
  };

  double eps_ = 1.0;
  double gamma_ = 0.0;
  std::vector<double> mass_;
  std::vector<double> diffusivity_;
  CsrMatrix stiffness_;
  SourceData sources_;
  std::vector<LoadPoint> cells_;
  std::vector<LateralLoad> lateral_;
};

inline DiscreteSystem assemble(const MicroMesh& mesh, const ProblemData& data, const MicroConfig& cfg) {
  if (!(cfg.gamma >= -1.0 && cfg.gamma < 1.0)) throw Error(ErrorCode::GammaOutOfRange, "gamma must lie in [-1, 1)");
  data.diffusion.validate();
  const double eps = mesh.eps();
  const double h = mesh.h();
  const double scale = std::pow(eps, cfg.gamma);

  DiscreteSystem sys;
  sys.eps_ = eps;
  sys.gamma_ = cfg.gamma;
  sys.sources_ = data.sources;
  const auto& cells = mesh.cells();
  sys.mass_.resize(cells.size());
  sys.diffusivity_.resize(cells.size());
  sys.cells_.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const ActiveCell& c = cells[i];
    switch (c.kind) {
      case CellKind::BulkPlus:
        sys.mass_[i] = h * h;
        sys.diffusivity_[i] = data.diffusion.D_plus;
        break;
      case CellKind::BulkMinus:
        sys.mass_[i] = h * h;
        sys.diffusivity_[i] = data.diffusion.D_minus;
        break;
      default: {
        sys.mass_[i] = h * h / eps;
        double dm = data.diffusion.D_M(Point{0.0, c.x1, c.xn, c.y1, c.yn});
        if (!(dm >= data.diffusion.c0)) {
          throw Error(ErrorCode::DiffusionBelowBound, "D_M(y) = " + std::to_string(dm) + " below c0");
        }
        sys.diffusivity_[i] = scale * dm;
        break;
      }
    }
    sys.cells_.push_back({c.kind, c.x1, c.xn, c.y1, c.yn});
  }

  std::vector<CsrMatrix::Triplet> trip;
  trip.reserve(4 * mesh.faces().size());
  for (const Face& f : mesh.faces()) {
    if (f.b >= 0) {
      // face length h over centre distance h
      double tr = harmonic_mean(sys.diffusivity_[static_cast<std::size_t>(f.a)], sys.diffusivity_[static_cast<std::size_t>(f.b)]);
      trip.push_back({f.a, f.a, tr});
      trip.push_back({f.b, f.b, tr});
      trip.push_back({f.a, f.b, -tr});
      trip.push_back({f.b, f.a, -tr});
    } else if (f.kind == FaceKind::Lateral) {
      sys.lateral_.push_back({f.a, h, f.x1, f.xn, f.y1, f.yn});
    }
  }
  sys.stiffness_ = CsrMatrix::from_triplets(cells.size(), std::move(trip));
  return sys;
}

/// Initial field: u_i+- in bulk cells, u_i^M(x1, x/eps) in channel cells.
inline std::vector<double> micro_initial_field(const MicroMesh& mesh, const InitialData& init) {
  std::vector<double> u(mesh.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const ActiveCell& c = mesh.cells()[i];
    Point p{0.0, c.x1, c.xn, c.y1, c.yn};
    u[i] = c.kind == CellKind::BulkPlus    ? init.u_plus(p)
           : c.kind == CellKind::BulkMinus ? init.u_minus(p)
                                           : init.u_M(p);
  }
  return u;
}

using MicroState = DiscreteState;

/// Single theta-step. Builds the system matrix on every call; use solve() or
/// ThetaStepper for repeated stepping.
inline MicroState step(const MicroState& state, const DiscreteSystem& sys, const MicroConfig& cfg) {
  cfg.validate();
  if (state.t + cfg.time.dt > cfg.time.T * (1.0 + 1e-12) + 1e-14) {
    throw Error(ErrorCode::InvalidTimeConfig, "step would exceed the horizon T");
  }
  return ThetaStepper<DiscreteSystem>(sys, cfg.time).step(state);
}

struct MicroSolution {
  double eps = 1.0;
  double gamma = 0.0;
  TimeSeries series;
  std::vector<double> cell_diffusivity;
  std::vector<double> mass_weights;
};

inline MicroSolution solve(const MicroMesh& mesh, const ProblemData& data, const MicroConfig& cfg) {
  cfg.validate();
  DiscreteSystem sys = assemble(mesh, data, cfg);
  MicroSolution sol;
  sol.eps = mesh.eps();
  sol.gamma = cfg.gamma;
  sol.series = integrate_in_time(sys, micro_initial_field(mesh, data.initial), cfg.time);
  sol.cell_diffusivity = sys.cell_diffusivity();
  sol.mass_weights.assign(sys.mass().begin(), sys.mass().end());
  return sol;
}

}  // namespace chanhomog
