#pragma once

// JSON experiment configuration.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chanhomog/analysis.hpp"
#include "chanhomog/error.hpp"
#include "chanhomog/expression.hpp"
#include "chanhomog/fields.hpp"
#include "chanhomog/geometry.hpp"
#include "chanhomog/time_stepping.hpp"

namespace chanhomog {

using json = nlohmann::ordered_json;

struct GeometryConfig {
  ChannelSpec channel;
  double H = 1.0;
  int sigma_length = 1;
};

struct NumericsConfig {
  int m = 2;
  double h_macro = 1.0 / 256.0;
  double dt = 0.01;
  double T = 0.5;
  double theta = 1.0;
  double lin_tol = 1e-10;
  int lin_maxit = 20000;
  int quad_n = 8;
  int init_quad_n = 8;

  TimeConfig time() const {
    TimeConfig t;
    t.dt = dt;
    t.T = T;
    t.theta = theta;
    t.lin_tol = lin_tol;
    t.lin_maxit = lin_maxit;
    return t;
  }
};

struct SweepRun {
  double eps = 0.0;
  double gamma = 0.0;
};

/// eps x gamma product plus extra single runs. gamma.front() is the
/// primary exponent of the convergence verdicts.
struct SweepConfig {
  std::vector<double> eps;
  std::vector<double> gamma{0.0};
  std::vector<SweepRun> extra;

  std::vector<SweepRun> runs() const {
    std::vector<SweepRun> out;
    for (double g : gamma) {
      for (double e : eps) out.push_back({e, g});
    }
    for (const SweepRun& r : extra) {
      bool dup = false;
      for (const SweepRun& o : out) dup = dup || (o.eps == r.eps && o.gamma == r.gamma);
      if (!dup) out.push_back(r);
    }
    return out;
  }
};

struct AnalysisConfig {
  std::vector<Expression> psi;          // layer pairing battery
  std::vector<VectorField> grad_psi;    // gradient-null battery, compact in Z* u S*+-
  int trace_samples = 30;
  std::uint64_t seed = 20240601;
  int ref_nx = 512;
  int ref_ny = 4;

  ReferenceQuadrature quadrature() const { return {ref_nx, ref_ny}; }
};

struct OutputConfig {
  std::string directory = "out";
  int snapshot_stride = 10;
  std::vector<std::string> formats{"binary", "csv"};

  bool wants(const std::string& f) const {
    for (const auto& s : formats) {
      if (s == f) return true;
    }
    return false;
  }
};

struct ExperimentConfig {
  GeometryConfig geometry;
  ProblemData physics;
  NumericsConfig numerics;
  SweepConfig sweep;
  AnalysisConfig analysis;
  OutputConfig outputs;

  void validate() const;
};

namespace detail {

inline Expression expr_field(const json& j, const char* key, const char* fallback) {
  if (!j.contains(key)) return Expression::parse(fallback);
  const json& v = j.at(key);
  if (v.is_number()) return Expression(v.get<double>());
  if (!v.is_string()) throw Error(ErrorCode::InvalidConfig, std::string("expression expected for '") + key + "'");
  return Expression::parse(v.get<std::string>());
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad value for '") + key + "': " + e.what());
  }
}

inline const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw Error(ErrorCode::InvalidConfig, std::string("section '") + key + "' must be an object");
  return j.at(key);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "configuration must be a JSON object");
  ExperimentConfig c;
  using detail::expr_field;
  using detail::get_or;

  const json& g = detail::section(j, "geometry");
  const json& ch = detail::section(g, "channel");
  c.geometry.channel.den = get_or<int>(ch, "den", 4);
  if (ch.contains("rects")) {
    for (const json& r : ch.at("rects")) {
      if (!r.is_array() || r.size() != 4) throw Error(ErrorCode::InvalidConfig, "rect must be [y1_lo, y1_hi, yn_lo, yn_hi]");
      c.geometry.channel.rects.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()});
    }
  } else {
    c.geometry.channel.rects.push_back({0.25, 0.75, -1.0, 1.0});
  }
  c.geometry.H = get_or<double>(g, "H", 1.0);
  c.geometry.sigma_length = get_or<int>(g, "sigma_length", 1);

  const json& p = detail::section(j, "physics");
  c.physics.diffusion.D_plus = get_or<double>(p, "D_plus", 1.0);
  c.physics.diffusion.D_minus = get_or<double>(p, "D_minus", 1.0);
  c.physics.diffusion.D_M = expr_field(p, "D_M", "1");
  c.physics.diffusion.c0 = get_or<double>(p, "c0", 0.5);
  const json& s = detail::section(p, "sources");
  c.physics.sources.f_plus = expr_field(s, "f_plus", "0");
  c.physics.sources.f_minus = expr_field(s, "f_minus", "0");
  c.physics.sources.g = expr_field(s, "g", "0");
  c.physics.sources.h = expr_field(s, "h", "0");
  const json& in = detail::section(p, "initial");
  c.physics.initial.u_plus = expr_field(in, "u_plus", "0");
  c.physics.initial.u_minus = expr_field(in, "u_minus", "0");
  c.physics.initial.u_M = expr_field(in, "u_M", "0");

  const json& n = detail::section(j, "numerics");
  NumericsConfig& nc = c.numerics;
  nc.m = get_or<int>(n, "m", nc.m);
  nc.h_macro = get_or<double>(n, "h_macro", nc.h_macro);
  nc.dt = get_or<double>(n, "dt", nc.dt);
  nc.T = get_or<double>(n, "T", nc.T);
  nc.theta = get_or<double>(n, "theta", nc.theta);
  nc.lin_tol = get_or<double>(n, "lin_tol", nc.lin_tol);
  nc.lin_maxit = get_or<int>(n, "lin_maxit", nc.lin_maxit);
  nc.quad_n = get_or<int>(n, "quad_n", nc.quad_n);
  nc.init_quad_n = get_or<int>(n, "init_quad_n", nc.init_quad_n);

  const json& sw = detail::section(j, "sweep");
  c.sweep.eps = get_or<std::vector<double>>(sw, "eps", {0.25});
  c.sweep.gamma = get_or<std::vector<double>>(sw, "gamma", {0.0});
  if (sw.contains("extra")) {
    for (const json& r : sw.at("extra")) {
      c.sweep.extra.push_back({r.at("eps").get<double>(), r.at("gamma").get<double>()});
    }
  }

  const json& a = detail::section(j, "analysis");
  if (a.contains("psi")) {
    for (const json& e : a.at("psi")) c.analysis.psi.push_back(Expression::parse(e.get<std::string>()));
  } else {
    c.analysis.psi.push_back(Expression::parse("1"));
  }
  if (a.contains("grad_psi")) {
    for (const json& e : a.at("grad_psi")) {
      if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::InvalidConfig, "grad_psi entries are [psi_1, psi_n]");
      c.analysis.grad_psi.push_back({Expression::parse(e[0].get<std::string>()), Expression::parse(e[1].get<std::string>())});
    }
  }
  c.analysis.trace_samples = get_or<int>(a, "trace_samples", c.analysis.trace_samples);
  c.analysis.seed = get_or<std::uint64_t>(a, "seed", c.analysis.seed);
  c.analysis.ref_nx = get_or<int>(a, "ref_nx", c.analysis.ref_nx);
  c.analysis.ref_ny = get_or<int>(a, "ref_ny", c.analysis.ref_ny);

  const json& o = detail::section(j, "outputs");
  c.outputs.directory = get_or<std::string>(o, "directory", c.outputs.directory);
  c.outputs.snapshot_stride = get_or<int>(o, "snapshot_stride", c.outputs.snapshot_stride);
  c.outputs.formats = get_or<std::vector<std::string>>(o, "formats", c.outputs.formats);

  c.validate();
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  json rects = json::array();
  for (const Rect& r : c.geometry.channel.rects) rects.push_back({r.y1_lo, r.y1_hi, r.yn_lo, r.yn_hi});
  j["geometry"] = {{"channel", {{"den", c.geometry.channel.den}, {"rects", rects}}},
                   {"H", c.geometry.H},
                   {"sigma_length", c.geometry.sigma_length}};
  const ProblemData& p = c.physics;
  j["physics"] = {{"D_plus", p.diffusion.D_plus},
                  {"D_minus", p.diffusion.D_minus},
                  {"D_M", p.diffusion.D_M.str()},
                  {"c0", p.diffusion.c0},
                  {"sources",
                   {{"f_plus", p.sources.f_plus.str()},
                    {"f_minus", p.sources.f_minus.str()},
                    {"g", p.sources.g.str()},
                    {"h", p.sources.h.str()}}},
                  {"initial",
                   {{"u_plus", p.initial.u_plus.str()},
                    {"u_minus", p.initial.u_minus.str()},
                    {"u_M", p.initial.u_M.str()}}}};
  const NumericsConfig& n = c.numerics;
  j["numerics"] = {{"m", n.m},           {"h_macro", n.h_macro},     {"dt", n.dt},
                   {"T", n.T},           {"theta", n.theta},         {"lin_tol", n.lin_tol},
                   {"lin_maxit", n.lin_maxit}, {"quad_n", n.quad_n}, {"init_quad_n", n.init_quad_n}};
  json extra = json::array();
  for (const SweepRun& r : c.sweep.extra) extra.push_back({{"eps", r.eps}, {"gamma", r.gamma}});
  j["sweep"] = {{"eps", c.sweep.eps}, {"gamma", c.sweep.gamma}, {"extra", extra}};
  json psi = json::array();
  for (const Expression& e : c.analysis.psi) psi.push_back(e.str());
  json gpsi = json::array();
  for (const VectorField& v : c.analysis.grad_psi) gpsi.push_back({v.psi_1.str(), v.psi_n.str()});
  j["analysis"] = {{"psi", psi},
                   {"grad_psi", gpsi},
                   {"trace_samples", c.analysis.trace_samples},
                   {"seed", c.analysis.seed},
                   {"ref_nx", c.analysis.ref_nx},
                   {"ref_ny", c.analysis.ref_ny}};
  j["outputs"] = {{"directory", c.outputs.directory},
                  {"snapshot_stride", c.outputs.snapshot_stride},
                  {"formats", c.outputs.formats}};
  return j;
}

inline void ExperimentConfig::validate() const {
  build_channel(geometry.channel);
  if (geometry.sigma_length < 1) throw Error(ErrorCode::InvalidConfig, "sigma_length must be a positive integer");
  if (!(geometry.H > 0.0)) throw Error(ErrorCode::InvalidConfig, "H must be positive");
  physics.diffusion.validate();
  if (numerics.m < 1) throw Error(ErrorCode::NonConformingResolution, "m must be >= 1");
  if (!(numerics.h_macro > 0.0)) throw Error(ErrorCode::InvalidConfig, "h_macro must be positive");
  checked_ratio(geometry.H, numerics.h_macro, "H / h_macro");
  checked_ratio(geometry.sigma_length, numerics.h_macro, "sigma_length / h_macro");
  numerics.time().validate();
  if (numerics.quad_n < 1 || numerics.init_quad_n < 1) throw Error(ErrorCode::InvalidConfig, "quadrature orders must be >= 1");
  if (sweep.eps.empty() || sweep.gamma.empty()) throw Error(ErrorCode::InvalidConfig, "sweep needs eps and gamma values");
  for (const SweepRun& r : sweep.runs()) {
    inverse_eps(r.eps);
    if (!(r.gamma >= -1.0 && r.gamma < 1.0)) throw Error(ErrorCode::GammaOutOfRange, "gamma must lie in [-1, 1)");
  }
  if (analysis.trace_samples < 0 || analysis.ref_nx < 1 || analysis.ref_ny < 1) {
    throw Error(ErrorCode::InvalidConfig, "analysis quadrature and sample counts must be positive");
  }
  if (outputs.snapshot_stride < 1) throw Error(ErrorCode::InvalidConfig, "snapshot_stride must be >= 1");
}

inline ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize(const ExperimentConfig& c) { return to_json(c).dump(2); }

}  // namespace chanhomog
