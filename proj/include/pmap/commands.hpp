#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pmap/model.hpp"

namespace pmap {

// Fully resolved invocation of one toolkit command. The seed is recorded in
// every output header; thread count is execution detail and never affects
// output bytes.
struct RunConfig {
  std::string command;

  // model source: a UAI file, or an inline spin-glass grid
  std::string model_path;
  int grid_rows = 0;
  int grid_cols = 0;
  double coupling = 1.0;
  std::string mode = "mixed";

  // estimator / bound parameters
  std::string trick = "gumbel";
  double alpha = 0.0;
  bool alpha_set = false;
  std::string alphas;  // start:step:stop or comma list
  double t = 1.0;
  std::string target = "lnz";
  bool debias = false;

  std::int64_t samples = 1000;      // M
  std::int64_t replicates = 100;    // K
  std::int64_t inner_samples = 1000;  // M_inner
  std::int64_t count = 100;         // requested sampler outputs
  std::string sample_sizes;         // comma list of M values (mse-study)

  std::string solver = "exhaustive";
  int restarts = 20;
  int max_restarts = 100;
  std::string subset;  // comma-separated variable indices

  std::uint64_t seed = 0;
  std::uint64_t cap = kDefaultEnumerationCap;
  std::string out_path;  // empty writes to stdout
  int threads = 0;       // 0 = hardware concurrency
};

// Executes one command; result text goes to out_path or `out`. Returns 0 on
// success, 1 on execution errors, 2 on argument errors (one-line diagnostic
// on err either way).
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

// start:step:stop (inclusive) or comma-separated values.
std::vector<double> parse_alpha_grid(const std::string& text);

}  // namespace pmap
