#pragma once

// Experiment orchestration: single runs, eps/gamma sweeps with verdicts,
// the verification batch and on-disk artifacts.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "chanhomog/analysis.hpp"
#include "chanhomog/config.hpp"
#include "chanhomog/fields.hpp"
#include "chanhomog/geometry.hpp"
#include "chanhomog/macro_solver.hpp"
#include "chanhomog/micro_solver.hpp"

namespace chanhomog {

struct RunOptions {
  std::string out_dir;  // empty: no files
  bool emit_plotdata = false;
  int jobs = 1;
  std::function<void(const std::string&)> log;

  void info(const std::string& s) const {
    if (log) log(s);
  }
};

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string run_key(double eps, double gamma) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "inv_eps%d_gamma%g", inverse_eps(eps), gamma);
  return buf;
}

// ---------------------------------------------------------------- artifacts

namespace io {

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir + ": " + ec.message());
  return p;
}

inline std::ofstream open(const std::filesystem::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  return out;
}

inline void write_json(const std::filesystem::path& p, const json& j) { open(p) << j.dump(2) << '\n'; }

/// Grid image of one snapshot: row-major over (row, column), NaN where no
/// unknown lives.
using GridWriter = std::function<void(std::size_t k, std::vector<double>& grid)>;

/// Flat float64 little-endian snapshots (snapshot-major, then row-major)
/// plus a JSON sidecar describing rows, columns and times.
inline void write_snapshots(const std::filesystem::path& base, const TimeSeries& ts, int stride, int columns,
                            const std::vector<double>& row_xn, double h, const GridWriter& grid_of, json meta) {
  std::vector<std::size_t> picked;
  for (std::size_t k = 0; k < ts.times.size(); ++k) {
    if (k % static_cast<std::size_t>(stride) == 0 || k + 1 == ts.times.size()) picked.push_back(k);
  }
  auto bin = open(base.string() + ".bin", true);
  std::vector<double> grid(static_cast<std::size_t>(columns) * row_xn.size());
  json times = json::array();
  for (std::size_t k : picked) {
    std::fill(grid.begin(), grid.end(), std::numeric_limits<double>::quiet_NaN());
    grid_of(k, grid);
    bin.write(reinterpret_cast<const char*>(grid.data()), static_cast<std::streamsize>(grid.size() * sizeof(double)));
    times.push_back(ts.times[k]);
  }
  meta["format"] = "float64 little-endian, snapshot-major, each snapshot rows x columns row-major, NaN = no cell";
  meta["file"] = base.filename().string() + ".bin";
  meta["columns"] = columns;
  meta["rows"] = row_xn.size();
  meta["column_x1"] = {{"first", 0.5 * h}, {"spacing", h}};
  meta["row_xn"] = row_xn;
  meta["times"] = times;
  write_json(base.string() + ".json", meta);
}

/// Final snapshot as CSV (x1, xn, u) and optionally as a gnuplot table.
inline void write_final_tables(const std::filesystem::path& base, int columns, const std::vector<double>& row_xn,
                               double h, const std::vector<double>& grid, bool csv, bool plot) {
  if (csv) {
    auto out = open(base.string() + "_final.csv");
    out << "x1,xn,u\n";
    for (std::size_t r = 0; r < row_xn.size(); ++r) {
      for (int c = 0; c < columns; ++c) {
        double v = grid[r * columns + c];
        if (std::isnan(v)) continue;
        out << fmt_double((c + 0.5) * h) << ',' << fmt_double(row_xn[r]) << ',' << fmt_double(v) << '\n';
      }
    }
  }
  if (plot) {
    auto out = open(base.string() + "_final.dat");
    out << "# x1 xn u\n";
    for (std::size_t r = 0; r < row_xn.size(); ++r) {
      for (int c = 0; c < columns; ++c) {
        double v = grid[r * columns + c];
        out << fmt_double((c + 0.5) * h) << ' ' << fmt_double(row_xn[r]) << ' ' << (std::isnan(v) ? "nan" : fmt_double(v))
            << '\n';
      }
      out << '\n';
    }
  }
}

inline json norms_json(const ScaledNormReport& n) {
  return {{"L_eps_max", n.L_eps_max},
          {"H_gamma", n.H_gamma},
          {"grad_bulk", n.grad_bulk},
          {"grad_layer", n.grad_layer},
          {"dual_proxy", n.dual_proxy}};
}

}  // namespace io

// ---------------------------------------------------------------- single runs

struct MicroRun {
  double eps = 0.0;
  double gamma = 0.0;
  std::shared_ptr<const MicroMesh> mesh;
  MicroSolution solution;
  ScaledNormReport norms;
  TraceCheckResult trace;
  std::vector<double> grad_null;  // one per gradient test field
};

inline MicroMesh micro_mesh_for(const ExperimentConfig& cfg, double eps) {
  return build_micro_mesh(build_channel(cfg.geometry.channel), eps, cfg.numerics.m, cfg.geometry.H,
                          cfg.geometry.sigma_length);
}

inline void write_micro_artifacts(const ExperimentConfig& cfg, const MicroRun& r, const RunOptions& opt) {
  if (opt.out_dir.empty()) return;
  auto dir = io::ensure_dir(opt.out_dir);
  const MicroMesh& mesh = *r.mesh;
  auto base = dir / ("micro_" + run_key(r.eps, r.gamma));
  std::vector<double> row_xn(static_cast<std::size_t>(mesh.ny()));
  for (int j = 0; j < mesh.ny(); ++j) row_xn[static_cast<std::size_t>(j)] = -mesh.height() + (j + 0.5) * mesh.h();
  auto grid_of = [&](std::size_t k, std::vector<double>& g) {
    for (int j = 0; j < mesh.ny(); ++j) {
      for (int i = 0; i < mesh.nx(); ++i) {
        int a = mesh.active_index(i, j);
        if (a >= 0) g[static_cast<std::size_t>(j) * mesh.nx() + i] = r.solution.series.values[k][static_cast<std::size_t>(a)];
      }
    }
  };
  json meta = {{"kind", "micro"}, {"eps", r.eps}, {"gamma", r.gamma}, {"h", mesh.h()}, {"m", mesh.m()}};
  if (cfg.outputs.wants("binary")) {
    io::write_snapshots(base, r.solution.series, cfg.outputs.snapshot_stride, mesh.nx(), row_xn, mesh.h(), grid_of, meta);
  }
  std::vector<double> last(static_cast<std::size_t>(mesh.nx()) * row_xn.size(), std::numeric_limits<double>::quiet_NaN());
  grid_of(r.solution.series.times.size() - 1, last);
  io::write_final_tables(base, mesh.nx(), row_xn, mesh.h(), last, cfg.outputs.wants("csv"), opt.emit_plotdata);
  json report = {{"eps", r.eps},
                 {"gamma", r.gamma},
                 {"norms", io::norms_json(r.norms)},
                 {"trace_ratio", r.trace.worst_ratio},
                 {"trace_constant_ratio", r.trace.analytic_constant_ratio},
                 {"grad_null", r.grad_null},
                 {"mass_drift", r.solution.series.mass_drift()},
                 {"cg_iterations", r.solution.series.total_iterations}};
  io::write_json(base.string() + "_report.json", report);
}

/// Micro solve at (eps, gamma) with scaled norms, trace check and the
/// gradient pairing battery.
inline MicroRun run_micro(const ExperimentConfig& cfg, double eps, double gamma, const RunOptions& opt = {}) {
  MicroRun r;
  r.eps = eps;
  r.gamma = gamma;
  r.mesh = std::make_shared<const MicroMesh>(micro_mesh_for(cfg, eps));
  MicroConfig mc{gamma, cfg.numerics.time()};
  opt.info("micro " + run_key(eps, gamma) + ": " + std::to_string(r.mesh->size()) + " cells");
  r.solution = solve(*r.mesh, cfg.physics, mc);
  r.norms = scaled_norms(r.solution, *r.mesh, gamma);
  r.trace = trace_check(*r.mesh, cfg.analysis.trace_samples, cfg.analysis.seed);
  for (const VectorField& v : cfg.analysis.grad_psi) {
    r.grad_null.push_back(gradient_two_scale_null(*r.mesh, r.solution, v).gap);
  }
  write_micro_artifacts(cfg, r, opt);
  return r;
}

struct MacroRun {
  MacroSolution solution;
  EffectiveData effective;
};

inline EffectiveData effective_for(const ExperimentConfig& cfg) {
  return effective_quantities(cfg.physics.sources, cfg.physics.initial, build_channel(cfg.geometry.channel),
                              cfg.numerics.quad_n, cfg.numerics.init_quad_n);
}

inline json effective_echo(const ExperimentConfig& cfg, const EffectiveData& eff, int samples = 5) {
  Channel ch = build_channel(cfg.geometry.channel);
  ChannelMeasures m = channel_measures(ch);
  auto rat = [](const Rational& r) {
    Rational q = r.reduced();
    return json{{"num", q.num}, {"den", q.den}, {"value", q.value()}};
  };
  json j = {{"Z_star_area", rat(m.area)},
            {"N_length", rat(m.lateral)},
            {"S_plus_length", rat(m.top)},
            {"S_minus_length", rat(m.bottom)},
            {"delta", rat(m.delta)}};
  json s = json::array();
  const double L = cfg.geometry.sigma_length;
  for (int k = 0; k < samples; ++k) {
    double x1 = (k + 0.5) * L / samples;
    for (double t : {0.0, cfg.numerics.T}) {
      s.push_back({{"t", t}, {"x1", x1}, {"G0", eff.G0(t, x1)}, {"H0", eff.H0(t, x1)}});
    }
  }
  j["samples"] = s;
  json init = json::array();
  for (int k = 0; k < samples; ++k) {
    double x1 = (k + 0.5) * L / samples;
    init.push_back({{"x1", x1}, {"u_M_init", eff.u_M_init_avg(x1)}});
  }
  j["u_M_initial_average"] = init;
  return j;
}

inline void write_macro_artifacts(const ExperimentConfig& cfg, const MacroRun& r, const RunOptions& opt) {
  if (opt.out_dir.empty()) return;
  auto dir = io::ensure_dir(opt.out_dir);
  const MacroMesh& mm = r.solution.mesh;
  const TimeSeries& ts = r.solution.series;
  auto base = dir / "macro";
  // rows: Omega- from xn = -H upwards, the interface row at xn = 0, then Omega+
  std::vector<double> row_xn;
  for (int j = mm.ny() - 1; j >= 0; --j) row_xn.push_back(mm.xn_minus(j));
  row_xn.push_back(0.0);
  for (int j = 0; j < mm.ny(); ++j) row_xn.push_back(mm.xn_plus(j));
  const int nx = mm.nx();
  auto grid_of = [&](std::size_t k, std::vector<double>& g) {
    const auto& u = ts.values[k];
    std::size_t r = 0;
    for (int j = mm.ny() - 1; j >= 0; --j, ++r) {
      for (int i = 0; i < nx; ++i) g[r * nx + i] = u[static_cast<std::size_t>(mm.minus(i, j))];
    }
    for (int i = 0; i < nx; ++i) g[r * nx + i] = u[static_cast<std::size_t>(mm.interface(i))];
    ++r;
    for (int j = 0; j < mm.ny(); ++j, ++r) {
      for (int i = 0; i < nx; ++i) g[r * nx + i] = u[static_cast<std::size_t>(mm.plus(i, j))];
    }
  };
  if (cfg.outputs.wants("binary")) {
    json meta = {{"kind", "macro"}, {"h", mm.h()}, {"Z_star_area", r.solution.z_star_area}};
    io::write_snapshots(base, ts, cfg.outputs.snapshot_stride, nx, row_xn, mm.h(), grid_of, meta);
  }
  std::vector<double> last(static_cast<std::size_t>(nx) * row_xn.size());
  grid_of(ts.times.size() - 1, last);
  io::write_final_tables(base, nx, row_xn, mm.h(), last, cfg.outputs.wants("csv"), opt.emit_plotdata);
  {
    auto out = io::open(dir / "macro_interface.csv");
    out << "t,x1,u_M\n";
    for (std::size_t k = 0; k < ts.times.size(); k += static_cast<std::size_t>(cfg.outputs.snapshot_stride)) {
      for (int i = 0; i < nx; ++i) {
        out << fmt_double(ts.times[k]) << ',' << fmt_double(mm.x1(i)) << ',' << fmt_double(r.solution.u_M(k, i)) << '\n';
      }
    }
    std::size_t k = ts.times.size() - 1;
    if (k % static_cast<std::size_t>(cfg.outputs.snapshot_stride) != 0) {
      for (int i = 0; i < nx; ++i) {
        out << fmt_double(ts.times[k]) << ',' << fmt_double(mm.x1(i)) << ',' << fmt_double(r.solution.u_M(k, i)) << '\n';
      }
    }
  }
  json echo = effective_echo(cfg, r.effective);
  echo["mass_drift"] = ts.mass_drift();
  echo["cg_iterations"] = ts.total_iterations;
  io::write_json(dir / "macro_effective.json", echo);
}

inline MacroRun run_macro(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  MacroRun r;
  r.effective = effective_for(cfg);
  MacroMesh mm = build_macro_mesh(cfg.numerics.h_macro, cfg.geometry.H, cfg.geometry.sigma_length);
  opt.info("macro: " + std::to_string(mm.size()) + " unknowns");
  r.solution = solve_macro(mm, MacroData::from_problem(cfg.physics), r.effective, cfg.numerics.time());
  write_macro_artifacts(cfg, r, opt);
  return r;
}

// ---------------------------------------------------------------- sweeps

struct ReportRow {
  ConvergenceRow error;
  ScaledNormReport norms;
  std::vector<double> grad_null;
  double trace_ratio = 0.0;
  double trace_constant = 0.0;
  double mass_drift = 0.0;

  double grad_null_max() const {
    double m = 0.0;
    for (double g : grad_null) m = std::max(m, g);
    return m;
  }
};

struct GammaPair {
  double eps = 0.0;
  double gamma_a = 0.0;
  double gamma_b = 0.0;
  double bulk_difference = 0.0;
};

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ConvergenceReport {
  std::vector<ReportRow> rows;  // decreasing eps, then increasing gamma
  std::vector<GammaPair> gamma_pairs;
  double macro_mass_drift = 0.0;
  std::vector<Verdict> verdicts;

  bool ok() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
  }
};

inline const std::vector<std::string>& error_columns() {
  static const std::vector<std::string> c{"e_bulk_plus", "e_bulk_minus", "e_trace_plus", "e_trace_minus", "e_layer"};
  return c;
}

inline double error_column(const ConvergenceRow& r, std::size_t c) {
  switch (c) {
    case 0: return r.e_bulk_plus;
    case 1: return r.e_bulk_minus;
    case 2: return r.e_trace_plus;
    case 3: return r.e_trace_minus;
    default: return r.e_layer;
  }
}

inline const std::vector<std::string>& norm_columns() {
  static const std::vector<std::string> c{"L_eps_max", "H_gamma", "grad_bulk", "grad_layer", "dual_proxy"};
  return c;
}

inline double norm_column(const ScaledNormReport& n, std::size_t c) {
  switch (c) {
    case 0: return n.L_eps_max;
    case 1: return n.H_gamma;
    case 2: return n.grad_bulk;
    case 3: return n.grad_layer;
    default: return n.dual_proxy;
  }
}

/// Verdict thresholds.
struct VerdictRules {
  double reduction = 0.5;        // e(eps_min) / e(eps_max)
  double gamma_factor = 3.0;     // micro/micro vs largest micro/macro bulk error
  double norm_spread = 4.0;      // max/min of each scaled norm over eps
  double trace_factor = 10.0;    // worst trace ratio vs constant-field ratio
  double mass_drift = 1e-8;
  double error_floor_factor = 10.0;  // columns below factor * lin_tol count as converged
};

namespace detail {

inline std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%.3e", i ? " " : "", v[i]);
    s += buf;
  }
  return s;
}

inline std::string gamma_tag(double g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "[gamma=%g]", g);
  return buf;
}

}  // namespace detail

/// Verdicts derived from report data only.
inline std::vector<Verdict> evaluate_verdicts(const ConvergenceReport& rep, const SweepConfig& sweep, double lin_tol,
                                              const VerdictRules& rules = {}) {
  std::vector<Verdict> out;
  const double primary = sweep.gamma.front();
  const double floor = rules.error_floor_factor * lin_tol;

  std::map<double, std::vector<const ReportRow*>> by_gamma;
  for (const ReportRow& r : rep.rows) by_gamma[r.error.gamma].push_back(&r);

  for (auto& [g, rows] : by_gamma) {
    if (rows.size() < 2) continue;
    std::string tag = detail::gamma_tag(g);
    if (g == primary) {
      for (std::size_t c = 0; c < error_columns().size(); ++c) {
        std::vector<double> v;
        for (const ReportRow* r : rows) v.push_back(error_column(r->error, c));
        bool at_floor = *std::max_element(v.begin(), v.end()) <= floor;
        bool mono = true;
        for (std::size_t k = 1; k < v.size(); ++k) mono = mono && v[k] < v[k - 1];
        out.push_back({"monotone_" + error_columns()[c] + tag, at_floor || mono, detail::join_values(v)});
        double ratio = v.back() / v.front();
        char buf[64];
        std::snprintf(buf, sizeof buf, "ratio %.4f", ratio);
        out.push_back({"reduction_" + error_columns()[c] + tag, at_floor || ratio <= rules.reduction, buf});
      }
    }
    for (std::size_t c = 0; g == primary && c < norm_columns().size(); ++c) {
      std::vector<double> v;
      for (const ReportRow* r : rows) v.push_back(norm_column(r->norms, c));
      double lo = *std::min_element(v.begin(), v.end());
      double hi = *std::max_element(v.begin(), v.end());
      bool pass = hi == 0.0 || (lo > 0.0 && hi / lo <= rules.norm_spread);
      out.push_back({"norm_uniformity_" + norm_columns()[c] + tag, pass, detail::join_values(v)});
    }
    if (g == -1.0 && !rows.front()->grad_null.empty()) {
      for (std::size_t p = 0; p < rows.front()->grad_null.size(); ++p) {
        std::vector<double> v;
        for (const ReportRow* r : rows) v.push_back(r->grad_null[p]);
        bool mono = true;
        for (std::size_t k = 1; k < v.size(); ++k) mono = mono && (v[k] < v[k - 1] || v[k - 1] <= floor);
        out.push_back({"gradient_null_decrease_psi" + std::to_string(p) + tag, mono, detail::join_values(v)});
      }
    }
  }

  // rows at other gamma: every error column at most the primary-gamma value
  // at the largest eps of the sweep
  const auto& prim = by_gamma[primary];
  const ReportRow* coarsest = nullptr;
  for (const ReportRow* p : prim) {
    if (!coarsest || p->error.eps > coarsest->error.eps) coarsest = p;
  }
  for (const ReportRow& r : rep.rows) {
    if (r.error.gamma == primary || !coarsest || coarsest->error.eps <= r.error.eps) continue;
    std::vector<double> v;
    bool pass = true;
    for (std::size_t c = 0; c < error_columns().size(); ++c) {
      double e = error_column(r.error, c);
      double b = error_column(coarsest->error, c);
      v.push_back(e);
      pass = pass && (e <= b || std::max(e, b) <= floor);
    }
    out.push_back({"gamma_error_bound_inv_eps" + std::to_string(inverse_eps(r.error.eps)) + detail::gamma_tag(r.error.gamma),
                   pass, detail::join_values(v)});
  }

  for (const GammaPair& gp : rep.gamma_pairs) {
    double worst = 0.0;
    for (const ReportRow& r : rep.rows) {
      if (r.error.eps == gp.eps) worst = std::max({worst, r.error.e_bulk_plus, r.error.e_bulk_minus});
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "diff %.3e vs %g x %.3e", gp.bulk_difference, rules.gamma_factor, worst);
    char name[96];
    std::snprintf(name, sizeof name, "gamma_independence_inv_eps%d[%g,%g]", inverse_eps(gp.eps), gp.gamma_a, gp.gamma_b);
    out.push_back({name, gp.bulk_difference <= rules.gamma_factor * worst || gp.bulk_difference <= floor, buf});
  }

  double worst_drift = rep.macro_mass_drift;
  bool trace_ok = true;
  for (const ReportRow& r : rep.rows) {
    worst_drift = std::max(worst_drift, r.mass_drift);
    trace_ok = trace_ok && r.trace_ratio <= rules.trace_factor * r.trace_constant;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "worst %.3e", worst_drift);
  out.push_back({"mass_drift", worst_drift <= rules.mass_drift, buf});
  out.push_back({"trace_inequality", trace_ok, "worst ratio within factor of constant-field ratio"});
  return out;
}

inline void write_report(const ConvergenceReport& rep, const std::filesystem::path& dir, bool plotdata) {
  auto ensure = io::ensure_dir(dir.string());
  {
    auto out = io::open(ensure / "convergence.csv");
    out << "eps,gamma";
    for (const auto& c : error_columns()) out << ',' << c;
    for (const auto& c : norm_columns()) out << ',' << c;
    out << ",grad_null,trace_ratio,mass_drift\n";
    for (const ReportRow& r : rep.rows) {
      out << fmt_double(r.error.eps) << ',' << fmt_double(r.error.gamma);
      for (std::size_t c = 0; c < error_columns().size(); ++c) out << ',' << fmt_double(error_column(r.error, c));
      for (std::size_t c = 0; c < norm_columns().size(); ++c) out << ',' << fmt_double(norm_column(r.norms, c));
      out << ',' << fmt_double(r.grad_null_max()) << ',' << fmt_double(r.trace_ratio) << ',' << fmt_double(r.mass_drift)
          << '\n';
    }
  }
  json j;
  j["pass"] = rep.ok();
  json v = json::array();
  for (const Verdict& x : rep.verdicts) v.push_back({{"name", x.name}, {"pass", x.pass}, {"detail", x.detail}});
  j["verdicts"] = v;
  json pairs = json::array();
  for (const GammaPair& p : rep.gamma_pairs) {
    pairs.push_back({{"eps", p.eps}, {"gamma_a", p.gamma_a}, {"gamma_b", p.gamma_b}, {"bulk_difference", p.bulk_difference}});
  }
  j["gamma_pairs"] = pairs;
  j["macro_mass_drift"] = rep.macro_mass_drift;
  io::write_json(ensure / "convergence.json", j);
  if (plotdata) {
    auto out = io::open(ensure / "convergence.dat");
    out << "# eps gamma";
    for (const auto& c : error_columns()) out << ' ' << c;
    out << '\n';
    for (const ReportRow& r : rep.rows) {
      out << fmt_double(r.error.eps) << ' ' << fmt_double(r.error.gamma);
      for (std::size_t c = 0; c < error_columns().size(); ++c) out << ' ' << fmt_double(error_column(r.error, c));
      out << '\n';
    }
  }
}

/// Runs `n` tasks on up to `jobs` threads. Results are indexed, so the
/// outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Macro solve once, micro solve per sweep run, errors and verdicts.
inline ConvergenceReport converge(const ExperimentConfig& cfg, const RunOptions& opt = {},
                                  const VerdictRules& rules = {}) {
  cfg.validate();
  std::vector<SweepRun> runs = cfg.sweep.runs();
  std::sort(runs.begin(), runs.end(), [](const SweepRun& a, const SweepRun& b) {
    return a.eps != b.eps ? a.eps > b.eps : a.gamma < b.gamma;
  });
  MacroMesh mm = build_macro_mesh(cfg.numerics.h_macro, cfg.geometry.H, cfg.geometry.sigma_length);
  for (const SweepRun& r : runs) {
    MicroMesh probe_h = micro_mesh_for(cfg, r.eps);
    double ratio = probe_h.h() / mm.h();
    if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
      throw Error(ErrorCode::IncommensurateGrids, "h_macro does not refine the micro grid at " + run_key(r.eps, r.gamma));
    }
  }
  MacroRun macro = run_macro(cfg, opt);

  std::map<double, int> per_eps;
  for (const SweepRun& r : runs) ++per_eps[r.eps];

  ConvergenceReport rep;
  rep.rows.resize(runs.size());
  rep.macro_mass_drift = macro.solution.series.mass_drift();
  std::vector<std::optional<MicroRun>> kept(runs.size());
  parallel_for(runs.size(), opt.jobs, [&](std::size_t i) {
    MicroRun mr = run_micro(cfg, runs[i].eps, runs[i].gamma, opt);
    ReportRow row;
    row.error = micro_macro_error(*mr.mesh, mr.solution, macro.solution, cfg.analysis.psi, cfg.analysis.quadrature());
    row.norms = mr.norms;
    row.grad_null = mr.grad_null;
    row.trace_ratio = mr.trace.worst_ratio;
    row.trace_constant = mr.trace.analytic_constant_ratio;
    row.mass_drift = mr.solution.series.mass_drift();
    opt.info("row " + run_key(runs[i].eps, runs[i].gamma) + " done");
    rep.rows[i] = std::move(row);
    if (per_eps[runs[i].eps] > 1) kept[i] = std::move(mr);
  });

  for (std::size_t a = 0; a < runs.size(); ++a) {
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      if (!kept[a] || !kept[b] || runs[a].eps != runs[b].eps) continue;
      rep.gamma_pairs.push_back({runs[a].eps, runs[a].gamma, runs[b].gamma,
                                 bulk_l2_difference(*kept[a]->mesh, kept[a]->solution, kept[b]->solution)});
    }
  }
  rep.verdicts = evaluate_verdicts(rep, cfg.sweep, cfg.numerics.lin_tol, rules);
  if (!opt.out_dir.empty()) write_report(rep, opt.out_dir, opt.emit_plotdata);
  return rep;
}

// ---------------------------------------------------------------- verification batch

/// Independent raster count of the channel area: subcell centres on a grid
/// `refine` times finer than the corner grid, tested against the rectangles.
inline double raster_area(const ChannelSpec& spec, int refine) {
  const int n = spec.den * refine;
  const double w = 1.0 / n;
  long inside = 0;
  for (int b = 0; b < 2 * n; ++b) {
    double yn = -1.0 + (b + 0.5) * w;
    for (int a = 0; a < n; ++a) {
      double y1 = (a + 0.5) * w;
      for (const Rect& r : spec.rects) {
        if (y1 > r.y1_lo && y1 < r.y1_hi && yn > r.yn_lo && yn < r.yn_hi) {
          ++inside;
          break;
        }
      }
    }
  }
  return static_cast<double>(inside) * w * w;
}

struct OscillationCheck {
  std::vector<double> eps;
  std::vector<double> volume_gap;
  std::vector<double> surface_gap;
};

/// Oscillation gaps of v_eps = v(t, x1, x/eps) paired with psi, against the
/// direct (t, x1, y) quadrature of v psi, per eps of the list.
inline OscillationCheck oscillation_gaps(const ExperimentConfig& cfg, const Expression& psi, const Expression& v_field,
                                         const std::vector<double>& eps_list, const TimeConfig& time) {
  OscillationCheck out;
  Channel ch = build_channel(cfg.geometry.channel);
  for (double eps : eps_list) {
    MicroMesh mesh = build_micro_mesh(ch, eps, cfg.numerics.m, cfg.geometry.H, cfg.geometry.sigma_length);
    TimeSeries v;
    v.theta = time.theta;
    for (int k = 0; k <= time.steps(); ++k) {
      double t = k * time.dt;
      v.times.push_back(t);
      std::vector<double> u(mesh.size(), 0.0);
      for (std::size_t i = 0; i < mesh.size(); ++i) {
        const ActiveCell& c = mesh.cells()[i];
        if (c.kind == CellKind::Channel) u[i] = v_field(Point{t, c.x1, c.xn, c.y1, c.yn});
      }
      v.values.push_back(std::move(u));
    }
    ReferenceField v0 = [&](std::size_t, double t, double x1, double y1, double yn) {
      return v_field(Point{t, x1, 0.0, y1, yn});
    };
    PairingResult pv = two_scale_pair_volume(mesh, v, psi, v0, cfg.analysis.quadrature());
    // on N_eps the trace of v_eps is v at the face midpoint
    std::vector<double> f(v.times.size(), 0.0);
    for (std::size_t k = 0; k < v.times.size(); ++k) {
      double s = 0.0;
      for (const Face& face : mesh.faces()) {
        if (face.kind != FaceKind::Lateral) continue;
        Point at{v.times[k], face.x1, face.xn, face.y1, face.yn};
        s += v_field(at) * psi(at);
      }
      f[k] = s * mesh.h();
    }
    double surf = v.integrate(f);
    double surf_ref = reference_surface_integral(ch, cfg.geometry.sigma_length, v.times, v.theta, psi, v0,
                                                 cfg.analysis.ref_nx, cfg.analysis.ref_ny);
    out.eps.push_back(eps);
    out.volume_gap.push_back(pv.gap);
    out.surface_gap.push_back(std::abs(surf - surf_ref));
  }
  return out;
}

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Batch of closed-form checks on the configured geometry and data.
inline std::vector<CheckLine> verify(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  std::vector<CheckLine> out;
  auto add = [&](std::string name, bool pass, std::string detail) {
    opt.info(name + (pass ? " PASS " : " FAIL ") + detail);
    out.push_back({std::move(name), pass, std::move(detail)});
  };
  char buf[160];
  Channel ch = build_channel(cfg.geometry.channel);
  ChannelMeasures m = channel_measures(ch);
  double raster = raster_area(cfg.geometry.channel, 8);
  std::snprintf(buf, sizeof buf, "|Z*| = %.12g, raster %.12g", m.area.value(), raster);
  add("channel_area", std::abs(m.area.value() - raster) <= 1e-12, buf);
  std::snprintf(buf, sizeof buf, "|N| = %.12g, |S+| = %.12g, |S-| = %.12g, delta = %.12g", m.lateral.value(), m.top.value(),
                m.bottom.value(), m.delta.value());
  add("channel_faces", m.lateral.value() > 0.0 && m.top.value() > 0.0 && m.bottom.value() > 0.0 && m.delta.value() > 0.0,
      buf);

  const double eps = cfg.sweep.eps.front();
  const double gamma = cfg.sweep.gamma.front();

  ExperimentConfig still = cfg;
  still.physics.sources = SourceData{};
  still.physics.initial = InitialData{Expression(1.0), Expression(1.0), Expression(1.0)};
  {
    MicroMesh mesh = micro_mesh_for(still, eps);
    MicroSolution s = solve(mesh, still.physics, MicroConfig{gamma, still.numerics.time()});
    double dev = 0.0;
    for (const auto& u : s.series.values) {
      for (double x : u) dev = std::max(dev, std::abs(x - 1.0));
    }
    std::snprintf(buf, sizeof buf, "max deviation %.3e", dev);
    add("micro_constant_preservation", dev <= 1e-9, buf);
  }
  {
    MacroRun mr = run_macro(still);
    double dev = 0.0;
    for (const auto& u : mr.solution.series.values) {
      for (double x : u) dev = std::max(dev, std::abs(x - 1.0));
    }
    std::snprintf(buf, sizeof buf, "max deviation %.3e", dev);
    add("macro_constant_preservation", dev <= 1e-9, buf);
  }

  ExperimentConfig closed = cfg;
  closed.physics.sources = SourceData{};
  {
    MicroMesh mesh = micro_mesh_for(closed, eps);
    MicroSolution s = solve(mesh, closed.physics, MicroConfig{gamma, closed.numerics.time()});
    std::snprintf(buf, sizeof buf, "relative drift %.3e", s.series.mass_drift());
    add("micro_conservation", s.series.mass_drift() <= 1e-8, buf);
    TraceCheckResult tc = trace_check(mesh, cfg.analysis.trace_samples, cfg.analysis.seed);
    std::snprintf(buf, sizeof buf, "constant %.12g vs sqrt(|N|/|Z*|) = %.12g, worst %.6g", tc.constant_ratio,
                  tc.analytic_constant_ratio, tc.worst_ratio);
    add("trace_constant_field", std::abs(tc.constant_ratio - tc.analytic_constant_ratio) <= 1e-10, buf);
    add("trace_bounded", tc.worst_ratio <= 10.0 * tc.analytic_constant_ratio, buf);
  }
  {
    MacroRun mr = run_macro(closed);
    std::snprintf(buf, sizeof buf, "relative drift %.3e", mr.solution.series.mass_drift());
    add("macro_conservation", mr.solution.series.mass_drift() <= 1e-8, buf);
  }

  // oscillation lemma with a profile whose first-order gap does not cancel
  {
    Expression psi = Expression::parse("(1 + t)*x1*(1 + y1)");
    TimeConfig tc;
    tc.dt = 0.25;
    tc.T = 1.0;
    OscillationCheck oc = oscillation_gaps(cfg, psi, Expression(1.0), {0.25, 0.125, 0.0625}, tc);
    bool vol = true, sur = true;
    std::string d;
    for (std::size_t k = 1; k < oc.eps.size(); ++k) {
      double rv = oc.volume_gap[k] / oc.volume_gap[k - 1];
      double rs = oc.surface_gap[k] / oc.surface_gap[k - 1];
      vol = vol && rv >= 0.3 && rv <= 0.8;
      sur = sur && rs >= 0.3 && rs <= 0.8;
      std::snprintf(buf, sizeof buf, "%s%.3f/%.3f", k > 1 ? ", " : "volume/surface gap ratios ", rv, rs);
      d += buf;
    }
    add("oscillation_volume", vol, d);
    add("oscillation_surface", sur, d);
  }
  return out;
}

}  // namespace chanhomog
