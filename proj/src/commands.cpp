#include "pmap/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pmap/exact.hpp"
#include "pmap/lowrank.hpp"
#include "pmap/parallel.hpp"
#include "pmap/solvers.hpp"
#include "pmap/stats.hpp"
#include "pmap/tricks.hpp"
#include "pmap/version.hpp"

namespace pmap {

namespace {

class ArgumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_number(double v) {
  if (!std::isfinite(v))
    throw std::runtime_error("refusing to write a non-finite value");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_config(std::span<const int> x) {
  std::string out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(x[i]);
  }
  return out;
}

std::vector<double> parse_number_list(const std::string& text,
                                      const char* what) {
  std::vector<double> values;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ArgumentError(std::string("bad value in ") + what + ": " + item);
    }
  }
  if (values.empty())
    throw ArgumentError(std::string("empty list for ") + what);
  return values;
}

std::vector<int> parse_index_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (double v : parse_number_list(text, what)) {
    if (v != std::floor(v))
      throw ArgumentError(std::string(what) + " entries must be integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

GraphicalModel resolve_model(const RunConfig& cfg) {
  if (!cfg.model_path.empty()) {
    std::ifstream in(cfg.model_path);
    if (!in) throw std::runtime_error("cannot open model: " + cfg.model_path);
    std::ostringstream text;
    text << in.rdbuf();
    return load_uai(text.str());
  }
  if (cfg.grid_rows > 0 && cfg.grid_cols > 0) {
    CouplingMode mode;
    if (cfg.mode == "attractive")
      mode = CouplingMode::attractive;
    else if (cfg.mode == "mixed")
      mode = CouplingMode::mixed;
    else
      throw ArgumentError("mode must be attractive or mixed");
    return spin_glass_grid(cfg.grid_rows, cfg.grid_cols, cfg.coupling, mode,
                           cfg.seed);
  }
  throw ArgumentError("need --model or --grid RxC");
}

SolverSpec resolve_solver(const RunConfig& cfg) {
  if (cfg.solver == "exhaustive") return SolverSpec::exhaustive(cfg.cap);
  if (cfg.solver == "icm") return SolverSpec::icm(cfg.restarts);
  throw ArgumentError("solver must be exhaustive or icm");
}

TrickSpec resolve_trick(const RunConfig& cfg) {
  if (cfg.trick == "gumbel") return TrickSpec::gumbel();
  if (cfg.trick == "exponential") return TrickSpec::exponential();
  if (cfg.trick == "weibull") {
    if (!cfg.alpha_set) throw ArgumentError("weibull trick needs --alpha");
    return TrickSpec::weibull(cfg.alpha);
  }
  if (cfg.trick == "frechet") {
    if (!cfg.alpha_set) throw ArgumentError("frechet trick needs --alpha");
    return TrickSpec::frechet(cfg.alpha);
  }
  if (cfg.trick == "pareto") return TrickSpec::pareto();
  if (cfg.trick == "tail") return TrickSpec::tail(cfg.t);
  throw ArgumentError("unknown trick: " + cfg.trick);
}

Target resolve_target(const RunConfig& cfg) {
  if (cfg.target == "z") return Target::z;
  if (cfg.target == "lnz") return Target::ln_z;
  if (cfg.target == "f") return Target::f_of_z;
  throw ArgumentError("target must be z, lnz or f");
}

// Every CSV starts with the toolkit version and the full invocation, so a
// run can be reproduced from its output alone.
void write_header(std::string& text, const RunConfig& cfg) {
  text += "# perturbmap ";
  text += kVersion;
  text += '\n';
  text += "# command=" + cfg.command;
  if (!cfg.model_path.empty()) text += " model=" + cfg.model_path;
  if (cfg.grid_rows > 0)
    text += " grid=" + std::to_string(cfg.grid_rows) + "x" +
            std::to_string(cfg.grid_cols) + " coupling=" +
            format_number(cfg.coupling) + " mode=" + cfg.mode;
  if (!cfg.alphas.empty()) text += " alphas=" + cfg.alphas;
  if (cfg.alpha_set) text += " alpha=" + format_number(cfg.alpha);
  if (cfg.command == "estimate" || cfg.command == "mse-study")
    text += " trick=" + cfg.trick + " target=" + cfg.target +
            (cfg.debias ? " debias=1" : "");
  if (cfg.command != "gen" && cfg.command != "exact")
    text += " M=" + std::to_string(cfg.samples);
  if (cfg.command == "sweep-alpha" || cfg.command == "mse-study")
    text += " K=" + std::to_string(cfg.replicates);
  if (cfg.command == "sample")
    text += " M_inner=" + std::to_string(cfg.inner_samples) +
            " count=" + std::to_string(cfg.count) +
            " max_restarts=" + std::to_string(cfg.max_restarts);
  if (!cfg.sample_sizes.empty()) text += " Ms=" + cfg.sample_sizes;
  if (!cfg.subset.empty()) text += " subset=" + cfg.subset;
  text += " solver=" + cfg.solver;
  if (cfg.solver == "icm") text += " restarts=" + std::to_string(cfg.restarts);
  text += " seed=" + std::to_string(cfg.seed);
  text += '\n';
}

std::string cmd_gen(const RunConfig& cfg) {
  if (cfg.grid_rows < 1 || cfg.grid_cols < 1)
    throw ArgumentError("gen needs --grid RxC");
  return save_uai(resolve_model(cfg));
}

std::string cmd_exact(const RunConfig& cfg) {
  const GraphicalModel model = resolve_model(cfg);
  const ExactSummary summary = summarize(model, cfg.cap);
  std::string text;
  write_header(text, cfg);
  text += "log_partition,map_value,map_config,entropy\n";
  text += format_number(summary.log_partition) + "," +
          format_number(summary.map_value) + "," +
          format_config(summary.map_config) + "," +
          format_number(entropy(summary.gibbs)) + "\n";
  return text;
}

std::string cmd_estimate(const RunConfig& cfg) {
  const GraphicalModel model = resolve_model(cfg);
  const TrickSpec trick = resolve_trick(cfg);
  const Target target = resolve_target(cfg);
  if (cfg.samples < 1) throw ArgumentError("--M must be >= 1");

  const FullRankSampler sampler(model, cfg.cap);
  std::vector<double> values(static_cast<std::size_t>(cfg.samples));
  for_each_chunk(values.size(), 1024,
                 [&](std::size_t, std::size_t begin, std::size_t end) {
                   for (std::size_t m = begin; m < end; ++m) {
                     Rng rng =
                         Rng::derive(cfg.seed, {static_cast<std::uint64_t>(m)});
                     values[m] = sampler.sample(rng).value;
                   }
                 });

  const EstimateReport report = estimate(trick, values, target, cfg.debias);
  std::string text;
  write_header(text, cfg);
  text += "trick,target,M,estimate,std_error,debiased\n";
  text += report.trick.name() + "," + target_name(report.target) + "," +
          std::to_string(report.sample_count) + "," +
          format_number(report.estimate) + "," +
          format_number(report.std_error) + "," +
          (report.debiased ? "1" : "0") + "\n";
  return text;
}

std::string cmd_bounds(const RunConfig& cfg) {
  const GraphicalModel model = resolve_model(cfg);
  const SolverSpec solver = resolve_solver(cfg);
  if (cfg.samples < 2) throw ArgumentError("--M must be >= 2");
  const double alpha = cfg.alpha_set ? cfg.alpha : 0.0;

  std::vector<BoundReport> reports;
  reports.push_back(upper_bound(model, alpha, cfg.samples, solver,
                                Rng::derive_key(cfg.seed, {0})));
  reports.push_back(lower_bound_avg(model, alpha, cfg.samples, solver,
                                    Rng::derive_key(cfg.seed, {1})));
  if (!cfg.subset.empty()) {
    const std::vector<int> subset = parse_index_list(cfg.subset, "--subset");
    reports.push_back(lower_bound_subset(model, subset, alpha, cfg.samples,
                                         solver,
                                         Rng::derive_key(cfg.seed, {2})));
  }

  std::string text;
  write_header(text, cfg);
  text += "bound,alpha,estimate,std_error,M,solver,alpha_safe\n";
  for (const auto& r : reports)
    text += bound_kind_name(r.kind) + "," + format_number(r.alpha) + "," +
            format_number(r.estimate) + "," + format_number(r.std_error) +
            "," + std::to_string(r.sample_count) + "," + r.solver + "," +
            (r.alpha_safe ? "1" : "0") + "\n";
  return text;
}

// Bound-as-estimator study: each of K replicates draws a fresh batch of M
// summed-offset values, reused across every alpha in the grid; the resulting
// upper-bound estimates are scored against the exact log partition function.
std::string cmd_sweep_alpha(const RunConfig& cfg) {
  const GraphicalModel model = resolve_model(cfg);
  const SolverSpec solver = resolve_solver(cfg);
  if (cfg.alphas.empty()) throw ArgumentError("sweep-alpha needs --alphas");
  const std::vector<double> alphas = parse_alpha_grid(cfg.alphas);
  if (cfg.samples < 2) throw ArgumentError("--M must be >= 2");
  if (cfg.replicates < 2) throw ArgumentError("--K must be >= 2");

  const double ln_z = summarize(model, cfg.cap).log_partition;
  const auto K = static_cast<std::size_t>(cfg.replicates);

  std::vector<std::vector<double>> estimates(
      alphas.size(), std::vector<double>(K));
  for_each_chunk(K, 8, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto values = draw_sum_unary_values(
          model, cfg.samples, solver,
          Rng::derive_key(cfg.seed, {static_cast<std::uint64_t>(k)}));
      for (std::size_t a = 0; a < alphas.size(); ++a)
        estimates[a][k] = upper_bound_from_values(model.variable_count(),
                                                  alphas[a], values,
                                                  solver.name())
                              .estimate;
    }
  });

  std::string text;
  write_header(text, cfg);
  text += "alpha,mean,bias,variance,mse,se,alpha_safe\n";
  const double n_sqrt = std::sqrt(static_cast<double>(model.variable_count()));
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const auto& est = estimates[a];
    const double kd = static_cast<double>(K);
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= kd;
    double var = 0.0, mse = 0.0, mse_ss = 0.0;
    for (double e : est) {
      var += (e - mean) * (e - mean);
      mse += (e - ln_z) * (e - ln_z);
    }
    var /= kd;
    mse /= kd;
    for (double e : est) {
      const double d = (e - ln_z) * (e - ln_z) - mse;
      mse_ss += d * d;
    }
    const double se_mse = std::sqrt(mse_ss / (kd - 1.0) / kd);
    const bool safe = alphas[a] > -0.5 / n_sqrt;
    text += format_number(alphas[a]) + "," + format_number(mean) + "," +
            format_number(mean - ln_z) + "," + format_number(var) + "," +
            format_number(mse) + "," + format_number(se_mse) + "," +
            (safe ? "1" : "0") + "\n";
  }
  return text;
}

std::string cmd_sample(const RunConfig& cfg) {
  const GraphicalModel model = resolve_model(cfg);
  const SolverSpec solver = resolve_solver(cfg);
  if (!cfg.alpha_set) throw ArgumentError("sample needs --alpha");
  if (cfg.count < 1) throw ArgumentError("--count must be >= 1");

  std::vector<SamplerTrace> traces(static_cast<std::size_t>(cfg.count));
  for_each_chunk(traces.size(), 4,
                 [&](std::size_t, std::size_t begin, std::size_t end) {
                   for (std::size_t s = begin; s < end; ++s)
                     traces[s] = sequential_sample(
                         model, cfg.alpha, cfg.inner_samples, solver,
                         Rng::derive_key(cfg.seed,
                                         {static_cast<std::uint64_t>(s)}),
                         cfg.max_restarts);
                 });

  std::string text;
  write_header(text, cfg);
  text += "sample,accepted,restarts,reject_clamped,config\n";
  std::int64_t accepted = 0, total_restarts = 0;
  for (std::size_t s = 0; s < traces.size(); ++s) {
    const auto& tr = traces[s];
    accepted += tr.accepted ? 1 : 0;
    total_restarts += tr.restarts;
    text += std::to_string(s) + "," + (tr.accepted ? "1" : "0") + "," +
            std::to_string(tr.restarts) + "," +
            (tr.reject_clamped ? "1" : "0") + "," +
            (tr.accepted ? format_config(tr.config) : "") + "\n";
  }
  const double attempts =
      static_cast<double>(cfg.count) + static_cast<double>(total_restarts);
  text += "# accepted=" + std::to_string(accepted) +
          " accept_rate=" + format_number(static_cast<double>(accepted) /
                                          attempts) +
          " restarts=" + std::to_string(total_restarts) + "\n";

  if (model.configuration_count() <= cfg.cap && accepted > 0) {
    const ExactSummary oracle = summarize(model, cfg.cap);
    std::vector<double> freq(oracle.gibbs.size(), 0.0);
    for (const auto& tr : traces)
      if (tr.accepted)
        freq[static_cast<std::size_t>(index_of_configuration(
            tr.config, model.cardinalities()))] += 1.0;
    double tv = 0.0;
    for (std::size_t x = 0; x < freq.size(); ++x)
      tv += std::abs(freq[x] / static_cast<double>(accepted) -
                     oracle.gibbs[x]);
    text += "# tv_distance=" + format_number(tv / 2.0) + "\n";
  }
  return text;
}

std::string cmd_mse_study(const RunConfig& cfg) {
  const GraphicalModel model = resolve_model(cfg);
  if (cfg.alphas.empty()) throw ArgumentError("mse-study needs --alphas");
  const std::vector<double> alphas = parse_alpha_grid(cfg.alphas);
  std::vector<std::int64_t> sizes;
  if (cfg.sample_sizes.empty()) {
    sizes.push_back(cfg.samples);
  } else {
    for (double v : parse_number_list(cfg.sample_sizes, "--Ms"))
      sizes.push_back(static_cast<std::int64_t>(v));
  }
  const Target target = resolve_target(cfg);

  const auto cells = mse_sweep(model, alphas, sizes, cfg.replicates, target,
                               cfg.seed, cfg.cap);
  std::string text;
  write_header(text, cfg);
  text += "alpha,M,K,bias,bias_sq,variance,mse,se_bias_sq,se_variance,se_mse,"
          "stable\n";
  for (const auto& c : cells)
    text += format_number(c.alpha) + "," + std::to_string(c.sample_count) +
            "," + std::to_string(c.replicates) + "," + format_number(c.bias) +
            "," + format_number(c.bias_sq) + "," + format_number(c.variance) +
            "," + format_number(c.mse) + "," + format_number(c.se_bias_sq) +
            "," + format_number(c.se_variance) + "," +
            format_number(c.se_mse) + "," + (c.stable ? "1" : "0") + "\n";
  return text;
}

std::string cmd_diagnostics(const RunConfig& cfg) {
  const GraphicalModel model = resolve_model(cfg);
  const SolverSpec solver = resolve_solver(cfg);
  const DiagnosticsReport report =
      diagnostics(model, cfg.samples, solver, cfg.seed, cfg.cap);
  std::string text;
  write_header(text, cfg);
  text +=
      "M,gap_upper,gap_lower,entropy_bound_sum,entropy_bound_avg,kl_sum,"
      "kl_avg,h_sum,h_avg,identity_residual,identity_se,lower_gap_margin,"
      "lower_gap_se,entropy_margin,entropy_margin_se\n";
  text += std::to_string(report.sample_count) + "," +
          format_number(report.gap_upper) + "," +
          format_number(report.gap_lower) + "," +
          format_number(report.entropy_bound_sum) + "," +
          format_number(report.entropy_bound_avg) + "," +
          format_number(report.kl_sum) + "," + format_number(report.kl_avg) +
          "," + format_number(report.h_sum) + "," +
          format_number(report.h_avg) + "," +
          format_number(report.identity_residual) + "," +
          format_number(report.identity_se) + "," +
          format_number(report.lower_gap_margin) + "," +
          format_number(report.lower_gap_se) + "," +
          format_number(report.entropy_margin) + "," +
          format_number(report.entropy_margin_se) + "\n";
  return text;
}

}  // namespace

std::vector<double> parse_alpha_grid(const std::string& text) {
  if (text.find(':') == std::string::npos)
    return parse_number_list(text, "--alphas");
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ':')) parts.push_back(item);
  if (parts.size() != 3)
    throw ArgumentError("--alphas range must be start:step:stop");
  double start = 0, step = 0, stop = 0;
  try {
    start = std::stod(parts[0]);
    step = std::stod(parts[1]);
    stop = std::stod(parts[2]);
  } catch (const std::exception&) {
    throw ArgumentError("bad --alphas range: " + text);
  }
  if (!(step > 0.0)) throw ArgumentError("--alphas step must be positive");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = start + step * i;
    if (v > stop + step * 1e-9) break;
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError("--alphas range is empty");
  return out;
}

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const int saved_workers = worker_count_setting();
  set_worker_count(cfg.threads);
  std::string text;
  int code = 0;
  try {
    if (cfg.command == "gen")
      text = cmd_gen(cfg);
    else if (cfg.command == "exact")
      text = cmd_exact(cfg);
    else if (cfg.command == "estimate")
      text = cmd_estimate(cfg);
    else if (cfg.command == "bounds")
      text = cmd_bounds(cfg);
    else if (cfg.command == "sweep-alpha")
      text = cmd_sweep_alpha(cfg);
    else if (cfg.command == "sample")
      text = cmd_sample(cfg);
    else if (cfg.command == "mse-study")
      text = cmd_mse_study(cfg);
    else if (cfg.command == "diagnostics")
      text = cmd_diagnostics(cfg);
    else
      throw ArgumentError("unknown command: " + cfg.command);
  } catch (const ArgumentError& e) {
    err << "argument error: " << e.what() << "\n";
    code = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = 1;
  }
  set_worker_count(saved_workers);
  if (code != 0) return code;

  if (cfg.out_path.empty()) {
    out << text;
    return 0;
  }
  std::ofstream file(cfg.out_path, std::ios::binary);
  if (!file) {
    err << "error: cannot write " << cfg.out_path << "\n";
    return 1;
  }
  file << text;
  return 0;
}

}  // namespace pmap
