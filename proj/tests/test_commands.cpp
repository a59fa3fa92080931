#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "pmap/commands.hpp"

using namespace pmap;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(const RunConfig& cfg) {
  std::ostringstream out, err;
  const int code = run_command(cfg, out, err);
  return {code, out.str(), err.str()};
}

RunConfig grid_config(const std::string& command) {
  RunConfig cfg;
  cfg.command = command;
  cfg.grid_rows = 2;
  cfg.grid_cols = 2;
  cfg.coupling = 1.0;
  cfg.mode = "mixed";
  cfg.seed = 13;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_CASE("gen then exact is reproducible byte for byte") {
  const std::string path = "test_cmd_model.uai";
  RunConfig gen = grid_config("gen");
  gen.grid_rows = 3;
  gen.grid_cols = 3;
  gen.out_path = path;
  CHECK(run(gen).code == 0);

  RunConfig exact;
  exact.command = "exact";
  exact.model_path = path;
  exact.threads = 1;
  const RunResult a = run(exact);
  const RunResult b = run(exact);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("log_partition") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("sweep-alpha emits the documented columns deterministically") {
  RunConfig cfg = grid_config("sweep-alpha");
  cfg.alphas = "-0.04:0.29:0.83";
  cfg.samples = 200;
  cfg.replicates = 20;
  const RunResult a = run(cfg);
  REQUIRE(a.code == 0);
  CHECK(a.out.find("alpha,mean,bias,variance,mse,se,alpha_safe") !=
        std::string::npos);

  cfg.threads = 2;
  const RunResult b = run(cfg);
  CHECK(a.out == b.out);  // worker count never changes bytes
}

TEST_CASE("estimate and bounds run end to end") {
  RunConfig est = grid_config("estimate");
  est.trick = "exponential";
  est.target = "z";
  est.samples = 500;
  const RunResult r = run(est);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("trick,target,M,estimate,std_error,debiased") !=
        std::string::npos);

  RunConfig bounds = grid_config("bounds");
  bounds.alpha = 0.5;
  bounds.alpha_set = true;
  bounds.samples = 500;
  bounds.subset = "0,1";
  const RunResult rb = run(bounds);
  REQUIRE(rb.code == 0);
  CHECK(rb.out.find("upper,") != std::string::npos);
  CHECK(rb.out.find("lower_avg,") != std::string::npos);
  CHECK(rb.out.find("lower_subset,") != std::string::npos);
}

TEST_CASE("sample command reports acceptance and TV distance") {
  RunConfig cfg = grid_config("sample");
  cfg.alpha = 1.0;
  cfg.alpha_set = true;
  cfg.inner_samples = 300;
  cfg.count = 40;
  const RunResult r = run(cfg);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("# accepted=") != std::string::npos);
  CHECK(r.out.find("# tv_distance=") != std::string::npos);
  const RunResult again = run(cfg);
  CHECK(r.out == again.out);
}

TEST_CASE("mse-study and diagnostics emit finite tables") {
  RunConfig mse = grid_config("mse-study");
  mse.alphas = "0,1";
  mse.sample_sizes = "5,20";
  mse.replicates = 50;
  mse.target = "z";
  const RunResult r = run(mse);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("alpha,M,K,") != std::string::npos);
  CHECK(r.out.find("nan") == std::string::npos);
  CHECK(r.out.find("inf") == std::string::npos);

  RunConfig diag = grid_config("diagnostics");
  diag.samples = 2000;
  const RunResult d = run(diag);
  REQUIRE(d.code == 0);
  CHECK(d.out.find("identity_residual") != std::string::npos);
  CHECK(d.out.find("nan") == std::string::npos);
}

TEST_CASE("argument and execution errors map to exit codes") {
  RunConfig bad;
  bad.command = "estimate";  // no model at all
  CHECK(run(bad).code == 2);

  RunConfig unknown = grid_config("frobnicate");
  CHECK(run(unknown).code == 2);

  RunConfig missing;
  missing.command = "exact";
  missing.model_path = "no_such_file.uai";
  CHECK(run(missing).code == 1);

  RunConfig bad_mode = grid_config("exact");
  bad_mode.mode = "sideways";
  CHECK(run(bad_mode).code == 2);
}

TEST_CASE("alpha grid parsing") {
  const auto grid = parse_alpha_grid("-0.04:0.05:0.11");
  REQUIRE(grid.size() == 4);
  CHECK(grid[0] == doctest::Approx(-0.04));
  CHECK(grid[3] == doctest::Approx(0.11));
  const auto list = parse_alpha_grid("0,0.25,1");
  REQUIRE(list.size() == 3);
  CHECK_THROWS(parse_alpha_grid("1:0:-1"));
}
