#pragma once

// theta-scheme shared by the microscopic and the effective solver:
//   (M + theta dt K) u^{n+1} = (M - (1 - theta) dt K) u^n
//                              + dt (theta b^{n+1} + (1 - theta) b^n)

#include <cmath>
#include <concepts>
#include <numeric>
#include <span>
#include <vector>

#include "chanhomog/error.hpp"
#include "chanhomog/sparse.hpp"

namespace chanhomog {

struct TimeConfig {
  double dt = 0.01;
  double T = 1.0;
  double theta = 1.0;
  double lin_tol = 1e-12;
  int lin_maxit = 20000;
  int stride = 1;  // store every stride-th state

  int steps() const { return static_cast<int>(std::lround(T / dt)); }

  void validate() const {
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidTimeConfig, "dt must be positive");
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidTimeConfig, "T must be positive");
    if (std::abs(T / dt - std::round(T / dt)) > 1e-9 * std::max(1.0, T / dt)) {
      throw Error(ErrorCode::InvalidTimeConfig, "T must be an integer multiple of dt");
    }
    if (!(theta >= 0.5 && theta <= 1.0)) throw Error(ErrorCode::InvalidTimeConfig, "theta must lie in [1/2, 1]");
    if (!(lin_tol > 0.0)) throw Error(ErrorCode::InvalidTimeConfig, "lin_tol must be positive");
    if (lin_maxit < 1 || stride < 1) throw Error(ErrorCode::InvalidTimeConfig, "lin_maxit and stride must be >= 1");
  }
};

/// Anything with a lumped mass, a stiffness matrix and a time-dependent load.
template <class System>
concept DiscreteOperator = requires(const System& s, double t, std::span<double> b) {
  { s.mass() } -> std::convertible_to<std::span<const double>>;
  { s.stiffness() } -> std::convertible_to<const CsrMatrix&>;
  s.load(t, b);
};

/// Discrete state with conservation bookkeeping.
struct DiscreteState {
  double t = 0.0;
  std::vector<double> u;
  std::vector<double> load;      // b(t)
  double mass = 0.0;             // sum_i M_i u_i
  double source_integral = 0.0;  // time integral of sum_i b_i up to t
  int iterations = 0;            // CG iterations of the last step
};

template <DiscreteOperator System>
DiscreteState initial_state(const System& sys, std::vector<double> u0, double t0 = 0.0) {
  DiscreteState s;
  s.t = t0;
  s.u = std::move(u0);
  s.load.assign(s.u.size(), 0.0);
  sys.load(t0, s.load);
  auto m = sys.mass();
  s.mass = std::inner_product(m.begin(), m.end(), s.u.begin(), 0.0);
  return s;
}

template <DiscreteOperator System>
class ThetaStepper {
 public:
  ThetaStepper(const System& sys, const TimeConfig& cfg) : sys_(sys), cfg_(cfg) {
    cfg_.validate();
    auto m = sys_.mass();
    system_ = sys_.stiffness().scaled_plus_diagonal(cfg_.theta * cfg_.dt, m);
    diag_ = system_.diagonal();
  }

  DiscreteState step(const DiscreteState& s) const {
    const std::size_t n = s.u.size();
    const double dt = cfg_.dt;
    const double th = cfg_.theta;
    auto m = sys_.mass();
    DiscreteState next;
    next.t = s.t + dt;
    next.load.assign(n, 0.0);
    sys_.load(next.t, next.load);

    std::vector<double> rhs(n, 0.0);
    if (th < 1.0) sys_.stiffness().multiply(s.u, rhs);
    for (std::size_t i = 0; i < n; ++i) {
      rhs[i] = m[i] * s.u[i] - (1.0 - th) * dt * rhs[i] + dt * (th * next.load[i] + (1.0 - th) * s.load[i]);
    }
    next.u = s.u;
    CgResult cg = conjugate_gradient(system_, diag_, rhs, next.u, cfg_.lin_tol, cfg_.lin_maxit);
    next.iterations = cg.iterations;
    for (double v : next.u) {
      if (!std::isfinite(v)) throw Error(ErrorCode::LinearSolveDiverged, "non-finite solution entry");
    }
    next.mass = std::inner_product(m.begin(), m.end(), next.u.begin(), 0.0);
    double src_new = std::accumulate(next.load.begin(), next.load.end(), 0.0);
    double src_old = std::accumulate(s.load.begin(), s.load.end(), 0.0);
    next.source_integral = s.source_integral + dt * (th * src_new + (1.0 - th) * src_old);
    return next;
  }

  const TimeConfig& config() const { return cfg_; }

 private:
  const System& sys_;
  TimeConfig cfg_;
  CsrMatrix system_;
  std::vector<double> diag_;
};

/// Stored time series of a run (snapshots every `stride` steps, t = 0 included).
struct TimeSeries {
  std::vector<double> times;
  std::vector<std::vector<double>> values;
  std::vector<double> mass;
  std::vector<double> source_integral;
  double theta = 1.0;
  int total_iterations = 0;

  /// theta-weighted time quadrature of per-snapshot values F_k.
  double integrate(std::span<const double> f) const {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
      s += (times[k + 1] - times[k]) * (theta * f[k + 1] + (1.0 - theta) * f[k]);
    }
    return s;
  }

  /// Largest relative deviation from the discrete balance
  /// mass(t) - mass(0) = integral of the total load.
  double mass_drift() const {
    double ref = std::max(std::abs(mass.front()), 1e-300);
    double worst = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      worst = std::max(worst, std::abs(mass[k] - mass.front() - source_integral[k]) / ref);
    }
    return worst;
  }
};

template <DiscreteOperator System>
TimeSeries integrate_in_time(const System& sys, std::vector<double> u0, const TimeConfig& cfg) {
  ThetaStepper<System> stepper(sys, cfg);
  DiscreteState s = initial_state(sys, std::move(u0));
  TimeSeries ts;
  ts.theta = cfg.theta;
  auto record = [&](const DiscreteState& st) {
    ts.times.push_back(st.t);
    ts.values.push_back(st.u);
    ts.mass.push_back(st.mass);
    ts.source_integral.push_back(st.source_integral);
  };
  record(s);
  const int n = cfg.steps();
  for (int k = 1; k <= n; ++k) {
    s = stepper.step(s);
    ts.total_iterations += s.iterations;
    if (k % cfg.stride == 0 || k == n) record(s);
  }
  return ts;
}

}  // namespace chanhomog
