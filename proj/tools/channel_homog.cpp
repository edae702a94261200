// Command-line driver: run-micro, run-macro, converge, cell-quantities, verify.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "chanhomog/config.hpp"
#include "chanhomog/experiment.hpp"

namespace ch = chanhomog;

namespace {

void configure_logging() {
  const char* lvl = std::getenv("CHANNEL_HOMOG_LOG");
  spdlog::set_level(lvl ? spdlog::level::from_str(lvl) : spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

ch::RunOptions options(const std::string& out, int jobs, bool plot) {
  ch::RunOptions o;
  o.out_dir = out;
  o.jobs = jobs;
  o.emit_plotdata = plot;
  o.log = [](const std::string& s) { spdlog::info("{}", s); };
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Diffusion through a thin layer of periodic channels: microscopic and effective solvers"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int jobs = 1;
  bool plot = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (defaults to outputs.directory)");
    sub->add_option("--jobs", jobs, "concurrent solver runs")->check(CLI::PositiveNumber);
    sub->add_flag("--emit-plotdata", plot, "write gnuplot tables next to the CSV files");
  };

  double eps = 0.0, gamma = 0.0;
  bool eps_set = false;
  auto* micro = app.add_subcommand("run-micro", "solve the microscopic problem at one (eps, gamma)");
  common(micro);
  micro->add_option("--eps", eps, "layer thickness, 1/eps integer (default: first sweep value)")
      ->each([&](const std::string&) { eps_set = true; });
  micro->add_option("--gamma", gamma, "diffusivity exponent (default: first sweep value)");
  auto* macro = app.add_subcommand("run-macro", "solve the effective interface problem");
  common(macro);
  auto* conv = app.add_subcommand("converge", "eps/gamma sweep against the effective solution");
  common(conv);
  auto* cell = app.add_subcommand("cell-quantities", "channel measures and effective data");
  common(cell);
  auto* ver = app.add_subcommand("verify", "closed-form checks on the configured setup");
  common(ver);

  CLI11_PARSE(app, argc, argv);

  try {
    ch::ExperimentConfig cfg = ch::load_config(config_path);
    if (out_dir.empty()) out_dir = cfg.outputs.directory;
    ch::RunOptions opt = options(out_dir, jobs, plot);

    if (*micro) {
      if (!eps_set) eps = cfg.sweep.eps.front();
      if (micro->count("--gamma") == 0) gamma = cfg.sweep.gamma.front();
      ch::MicroRun r = ch::run_micro(cfg, eps, gamma, opt);
      spdlog::info("L_eps max {:.6e}  H_gamma {:.6e}  dual proxy {:.6e}  mass drift {:.3e}", r.norms.L_eps_max,
                   r.norms.H_gamma, r.norms.dual_proxy, r.solution.series.mass_drift());
      return 0;
    }
    if (*macro) {
      ch::MacroRun r = ch::run_macro(cfg, opt);
      spdlog::info("|Z*| {}  mass drift {:.3e}", r.solution.z_star_area, r.solution.series.mass_drift());
      return 0;
    }
    if (*conv) {
      ch::ConvergenceReport rep = ch::converge(cfg, opt);
      for (const ch::Verdict& v : rep.verdicts) {
        std::cout << (v.pass ? "PASS " : "FAIL ") << v.name << "  " << v.detail << '\n';
      }
      std::cout << (rep.ok() ? "all verdicts pass" : "some verdicts fail") << '\n';
      return rep.ok() ? 0 : 2;
    }
    if (*cell) {
      ch::json j = ch::effective_echo(cfg, ch::effective_for(cfg));
      std::cout << j.dump(2) << '\n';
      if (!out_dir.empty()) ch::io::write_json(ch::io::ensure_dir(out_dir) / "cell_quantities.json", j);
      return 0;
    }
    if (*ver) {
      bool ok = true;
      for (const ch::CheckLine& c : ch::verify(cfg)) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
        ok = ok && c.pass;
      }
      return ok ? 0 : 2;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
