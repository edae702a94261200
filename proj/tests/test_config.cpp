#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "chanhomog/config.hpp"
#include "chanhomog/experiment.hpp"

using namespace chanhomog;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig smoke() { return load_config(CHANHOMOG_CONFIG_DIR "/smoke.json"); }

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("chanhomog_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

void expect_code(const std::string& text, ErrorCode code) {
  try {
    parse_config(text);
    FAIL() << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Config, BenchmarkLoads) {
  ExperimentConfig c = load_config(CHANHOMOG_CONFIG_DIR "/benchmark.json");
  EXPECT_EQ(c.geometry.channel.den, 4);
  EXPECT_EQ(c.sweep.eps.size(), 4u);
  EXPECT_EQ(c.sweep.runs().size(), 9u);
  EXPECT_EQ(c.sweep.gamma.front(), 0.0);
  EXPECT_EQ(c.analysis.grad_psi.size(), 3u);
  EXPECT_DOUBLE_EQ(c.numerics.h_macro, 1.0 / 256);
}

TEST(Config, RoundTrip) {
  ExperimentConfig a = smoke();
  std::string text = serialize(a);
  ExperimentConfig b = parse_config(text);
  EXPECT_EQ(serialize(b), text);
  Point p{0.3, 0.2, 0.1, 0.4, -0.5};
  EXPECT_EQ(a.physics.diffusion.D_M(p), b.physics.diffusion.D_M(p));
  EXPECT_EQ(a.physics.sources.g(p), b.physics.sources.g(p));
}

TEST(Config, Defaults) {
  ExperimentConfig c = parse_config("{}");
  EXPECT_EQ(c.geometry.channel.rects.size(), 1u);
  EXPECT_EQ(c.sweep.runs().size(), 1u);
  EXPECT_EQ(c.analysis.psi.size(), 1u);
}

TEST(Config, Rejections) {
  expect_code("[1, 2]", ErrorCode::InvalidConfig);
  expect_code("{\"geometry\": ", ErrorCode::InvalidConfig);
  expect_code(R"({"sweep": {"gamma": [1.0]}})", ErrorCode::GammaOutOfRange);
  expect_code(R"({"sweep": {"eps": [0.3]}})", ErrorCode::NonConformingResolution);
  expect_code(R"({"numerics": {"h_macro": 0.3}})", ErrorCode::NonConformingResolution);
  expect_code(R"({"numerics": {"dt": 0.3, "T": 1}})", ErrorCode::InvalidTimeConfig);
  expect_code(R"({"physics": {"D_M": "1 +"}})", ErrorCode::ExpressionSyntax);
  expect_code(R"({"physics": {"D_plus": 0}})", ErrorCode::DiffusionBelowBound);
  expect_code(R"({"geometry": {"channel": {"den": 4, "rects": [[0, 1, -1, 1]]}}})", ErrorCode::ChannelTouchesCellWall);
  expect_code(R"({"geometry": {"channel": {"den": 4, "rects": [[0.25, 0.75, -1]]}}})", ErrorCode::InvalidConfig);
  expect_code(R"({"analysis": {"grad_psi": [["1"]]}})", ErrorCode::InvalidConfig);
}

TEST(Converge, DeterministicAcrossJobCounts) {
  ExperimentConfig c = smoke();
  auto d1 = scratch("jobs1");
  auto d2 = scratch("jobs2");
  RunOptions o1;
  o1.out_dir = d1.string();
  RunOptions o2 = o1;
  o2.out_dir = d2.string();
  o2.jobs = 2;
  ConvergenceReport r1 = converge(c, o1);
  ConvergenceReport r2 = converge(c, o2);
  ASSERT_EQ(r1.rows.size(), 4u);
  EXPECT_EQ(slurp(d1 / "convergence.csv"), slurp(d2 / "convergence.csv"));
  EXPECT_EQ(r1.gamma_pairs.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(d1 / "convergence.json"));
  EXPECT_TRUE(std::filesystem::exists(d1 / "macro_interface.csv"));
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST(Converge, MatchedConstantsPass) {
  ExperimentConfig c = smoke();
  c.physics.sources = SourceData{};
  c.physics.initial = InitialData{Expression(2.0), Expression(2.0), Expression(2.0)};
  ConvergenceReport r = converge(c);
  for (const ReportRow& row : r.rows) {
    for (std::size_t k = 0; k < error_columns().size(); ++k) EXPECT_LE(error_column(row.error, k), 1e-9);
  }
  for (const Verdict& v : r.verdicts) EXPECT_TRUE(v.pass) << v.name << ": " << v.detail;
}

TEST(Converge, IncommensurateMacroGrid) {
  ExperimentConfig c = smoke();
  c.numerics.h_macro = 1.0 / 20;
  try {
    converge(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncommensurateGrids);
  }
}

TEST(Verdicts, ReductionAndMonotonicity) {
  SweepConfig sweep;
  sweep.eps = {0.25, 0.125};
  sweep.gamma = {0.0};
  ConvergenceReport rep;
  for (double eps : sweep.eps) {
    ReportRow row;
    row.error.eps = eps;
    row.error.e_bulk_plus = row.error.e_bulk_minus = row.error.e_trace_plus = row.error.e_trace_minus =
        row.error.e_layer = eps;
    row.norms = ScaledNormReport{1.0, 1.0, 1.0, 1.0, 1.0};
    row.trace_ratio = row.trace_constant = 2.0;
    rep.rows.push_back(row);
  }
  for (const Verdict& v : evaluate_verdicts(rep, sweep, 1e-10)) EXPECT_TRUE(v.pass) << v.name;
  rep.rows[1].error.e_layer = 0.2;
  bool failed = false;
  for (const Verdict& v : evaluate_verdicts(rep, sweep, 1e-10)) failed = failed || !v.pass;
  EXPECT_TRUE(failed);
}

TEST(Verify, SmokeConfigChecksPass) {
  ExperimentConfig c = smoke();
  c.numerics.m = 2;
  for (const CheckLine& l : verify(c)) EXPECT_TRUE(l.pass) << l.name << ": " << l.detail;
}

TEST(Artifacts, MicroRunWritesSnapshots) {
  ExperimentConfig c = smoke();
  auto dir = scratch("micro");
  RunOptions o;
  o.out_dir = dir.string();
  o.emit_plotdata = true;
  MicroRun r = run_micro(c, 0.25, 0.0, o);
  std::string key = "micro_" + run_key(0.25, 0.0);
  EXPECT_TRUE(std::filesystem::exists(dir / (key + ".bin")));
  EXPECT_TRUE(std::filesystem::exists(dir / (key + ".json")));
  EXPECT_TRUE(std::filesystem::exists(dir / (key + "_report.json")));
  EXPECT_TRUE(std::filesystem::exists(dir / (key + "_final.csv")));
  EXPECT_TRUE(std::filesystem::exists(dir / (key + "_final.dat")));
  EXPECT_EQ(r.grad_null.size(), 2u);
  auto side = json::parse(slurp(dir / (key + ".json")));
  // snapshots 0, 2, 4 of the 4 steps
  EXPECT_EQ(side.at("times").size(), 3u);
  auto bytes = std::filesystem::file_size(dir / (key + ".bin"));
  EXPECT_EQ(bytes, 3u * side.at("row_xn").size() * side.at("columns").get<std::size_t>() * sizeof(double));
  std::filesystem::remove_all(dir);
}
