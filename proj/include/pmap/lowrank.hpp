#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmap/model.hpp"
#include "pmap/solvers.hpp"

namespace pmap {

// Perturbed-MAP machinery built from unary (per variable, per state)
// Gumbel(-c) noise instead of one noise term per configuration:
//
//   U = max_x { phi(x) + sum_i gamma_i(x_i) }        (summed offsets)
//   L = max_x { phi(x) + (1/n) sum_i gamma_i(x_i) }  (averaged offsets)
//
// plus partial variants with a leading block of variables fixed, and subset
// variants with one noise term per joint setting of a variable subset.
//
// Moment bounds on the log partition function, for alpha in (-1,0)+(0,inf):
//   upper:      n lnGamma(1+alpha)/alpha + nc - (1/alpha) ln E[e^{-alpha U}]
//   lower(avg): c + lnGamma(1+alpha)/alpha - (1/(n alpha)) ln E[e^{-n alpha L}]
//   lower(S):   c + lnGamma(1+alpha)/alpha - (1/alpha) ln E[e^{-alpha V_S}]
// with V_S the subset-perturbed max. alpha = 0 takes the continuity limit
// (plain means E[U], E[L], E[V_S]).

enum class PerturbKind { sum_unary, partial, avg_unary, subset };

struct PerturbationSample {
  double value = 0.0;
  PerturbKind kind = PerturbKind::sum_unary;
  bool solver_exact = false;
};

enum class BoundKind { upper, lower_avg, lower_subset };

std::string bound_kind_name(BoundKind kind);

struct BoundReport {
  BoundKind kind = BoundKind::upper;
  double alpha = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t sample_count = 0;
  std::string solver;
  // alpha > -1/(2 sqrt(n)): the exponential moment has provably finite
  // variance there, so the Monte Carlo estimate is well-behaved.
  bool alpha_safe = true;
};

// Single draws. Partial draws add the clamped-away constant back in, so the
// value is the max over suffixes of the full potential plus remaining noise;
// a prefix covering every variable returns the deterministic potential.
PerturbationSample sample_U(const GraphicalModel& model,
                            const SolverSpec& solver, Rng& rng);
PerturbationSample sample_partial_U(const GraphicalModel& model,
                                    std::span<const int> prefix,
                                    const SolverSpec& solver, Rng& rng);
PerturbationSample sample_L(const GraphicalModel& model,
                            const SolverSpec& solver, Rng& rng);
PerturbationSample sample_subset(const GraphicalModel& model,
                                 std::span<const int> subset,
                                 const SolverSpec& solver, Rng& rng);

// Batched draws; draw m runs on the stream derived from (seed, m), so the
// batch is bit-identical at any worker count. Bound sweeps over several
// alpha values reuse one batch (shared noise).
std::vector<double> draw_sum_unary_values(const GraphicalModel& model,
                                          std::int64_t count,
                                          const SolverSpec& solver,
                                          std::uint64_t seed);
std::vector<double> draw_avg_unary_values(const GraphicalModel& model,
                                          std::int64_t count,
                                          const SolverSpec& solver,
                                          std::uint64_t seed);
std::vector<double> draw_subset_values(const GraphicalModel& model,
                                       std::span<const int> subset,
                                       std::int64_t count,
                                       const SolverSpec& solver,
                                       std::uint64_t seed);

// Bound evaluation from existing draws. Standard errors come from the
// delta method on the log of the exponential-moment mean (plain sample-mean
// standard error at alpha = 0).
BoundReport upper_bound_from_values(int variable_count, double alpha,
                                    std::span<const double> u_values,
                                    std::string solver_name);
BoundReport lower_bound_avg_from_values(int variable_count, double alpha,
                                        std::span<const double> l_values,
                                        std::string solver_name);
BoundReport lower_bound_subset_from_values(int variable_count, double alpha,
                                           std::span<const double> values,
                                           std::string solver_name);

BoundReport upper_bound(const GraphicalModel& model, double alpha,
                        std::int64_t count, const SolverSpec& solver,
                        std::uint64_t seed);
BoundReport lower_bound_avg(const GraphicalModel& model, double alpha,
                            std::int64_t count, const SolverSpec& solver,
                            std::uint64_t seed);
BoundReport lower_bound_subset(const GraphicalModel& model,
                               std::span<const int> subset, double alpha,
                               std::int64_t count, const SolverSpec& solver,
                               std::uint64_t seed);

// d/dalpha of the upper bound at alpha = 0, estimated from U samples:
// n pi^2/12 - var(U)/2. Non-negative when unary noise removes less variance
// than independent noise would, in which case negative alpha tightens the
// bound.
double derivative_at_zero(std::span<const double> u_values, int variable_count);

// Monte Carlo check of the clamping inequality at the given prefix: fixing
// the next variable and combining the per-state moment terms never exceeds
// the unclamped term. lhs/rhs are the two sides (linear scale); holds allows
// three combined standard errors of Monte Carlo slack.
struct ClampingCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  bool holds = false;
};

ClampingCheck clamping_check(const GraphicalModel& model, double alpha,
                             std::span<const int> prefix, std::int64_t count,
                             const SolverSpec& solver, std::uint64_t seed);

// One step of the sequential sampler: acceptance probabilities for each
// state of the variable just sampled, plus the leftover reject mass.
struct SamplerStep {
  int variable = 0;
  std::vector<double> probs;
  double reject_prob = 0.0;
};

// Outcome of one sequential-sampler run. steps accumulates across restarts;
// reject_clamped records that a negative estimated reject mass (a
// finite-sample artifact; the exact mass is non-negative) was clamped to 0.
struct SamplerTrace {
  bool accepted = false;
  Configuration config;
  int restarts = 0;
  std::vector<SamplerStep> steps;
  bool reject_clamped = false;
};

// Samples variables one at a time. At step j the acceptance probability of
// state x_j is
//   (e^{-c} / Gamma(1+alpha)^{1/alpha}) *
//     E[e^{-alpha U_{j+1}(x_1..x_j)}]^{-1/alpha} /
//     E[e^{-alpha U_j(x_1..x_{j-1})}]^{-1/alpha},
// each expectation re-estimated fresh from inner_count draws; leftover mass
// restarts the pass. Accepted configurations follow the Gibbs distribution
// up to the inner estimation error.
SamplerTrace sequential_sample(const GraphicalModel& model, double alpha,
                               std::int64_t inner_count,
                               const SolverSpec& solver, std::uint64_t seed,
                               int max_restarts);

// Error diagnostics from matched sum-unary and average-unary batches:
//  - identity_residual: (gap_upper + kl_sum) - (entropy_bound_sum - h_sum),
//    zero in expectation;
//  - lower_gap_margin: gap_lower - kl_avg, non-negative in expectation;
//  - entropy_margin: h_avg - entropy_bound_avg, non-negative in expectation.
// Standard errors are block-jackknife estimates over the draws. Empirical
// distributions are smoothed by add-1/(M |X|) before KL evaluation.
struct DiagnosticsReport {
  std::vector<double> q_sum;
  std::vector<double> q_avg;
  double entropy_bound_sum = 0.0;  // mean of sum_i gamma_i at the U argmax
  double entropy_bound_avg = 0.0;  // mean of (1/n) sum_i gamma_i at the L argmax
  double gap_upper = 0.0;          // mean(U) - lnZ
  double gap_lower = 0.0;          // lnZ - mean(L)
  double kl_sum = 0.0;
  double kl_avg = 0.0;
  double h_sum = 0.0;
  double h_avg = 0.0;
  double identity_residual = 0.0;
  double identity_se = 0.0;
  double lower_gap_margin = 0.0;
  double lower_gap_se = 0.0;
  double entropy_margin = 0.0;
  double entropy_margin_se = 0.0;
  std::int64_t sample_count = 0;
};

DiagnosticsReport diagnostics(const GraphicalModel& model, std::int64_t count,
                              const SolverSpec& solver, std::uint64_t seed,
                              std::uint64_t cap = kDefaultEnumerationCap);

// Merged view used by subset perturbations: the subset becomes variable 0
// with one state per joint setting (flat order over the sorted subset);
// remaining variables follow in original order.
struct SubsetModel {
  GraphicalModel model;
  std::vector<int> subset;  // sorted original indices merged into variable 0
  std::vector<int> rest;    // original indices of variables 1..
};

SubsetModel flatten_subset(const GraphicalModel& model,
                           std::span<const int> subset,
                           std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace pmap
