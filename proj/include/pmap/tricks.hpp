#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmap/model.hpp"
#include "pmap/rng.hpp"

namespace pmap {

// One member of the estimator family. Each trick applies a transformation g
// to the minimum of competing exponential clocks with rates p~(x); the
// transformed minimum has a known mean f(Z), giving an unbiased estimator of
// that transformation of the partition function.
//
//   kind         g(x)        mean f(Z)
//   gumbel       -ln x - c   ln Z
//   exponential  x           1/Z
//   weibull a>0  x^a         Z^-a Gamma(1+a)
//   frechet a    x^a         Z^-a Gamma(1+a)   for a in (-1, 0)
//   pareto       e^x         Z/(Z-1)           for Z > 1
//   tail t>0     1{x > t}    e^{-tZ}
enum class TrickKind { gumbel, exponential, weibull, frechet, pareto, tail };

struct TrickSpec {
  TrickKind kind = TrickKind::gumbel;
  double alpha = 0.0;  // weibull/frechet shape parameter
  double t = 0.0;      // tail threshold

  static TrickSpec gumbel() { return {TrickKind::gumbel, 0.0, 0.0}; }
  static TrickSpec exponential() { return {TrickKind::exponential, 1.0, 0.0}; }
  static TrickSpec weibull(double alpha);
  static TrickSpec frechet(double alpha);
  static TrickSpec pareto() { return {TrickKind::pareto, 0.0, 0.0}; }
  static TrickSpec tail(double t);

  // alpha = 0 is the gumbel limit, alpha = 1 the exponential trick; other
  // positive values are weibull, values in (-1, 0) frechet.
  static TrickSpec from_alpha(double alpha);

  // 0 for gumbel, 1 for exponential, the shape parameter otherwise.
  double effective_alpha() const;
  std::string name() const;
  void validate() const;
};

enum class Target { f_of_z, z, ln_z };

std::string target_name(Target target);

struct EstimateReport {
  Target target = Target::f_of_z;
  double estimate = 0.0;
  double std_error = 0.0;  // sample-based; delta-method for transformed targets
  std::int64_t sample_count = 0;
  TrickSpec trick;
  bool debiased = false;
};

// Closed-form estimator statistics (gumbel and exponential tricks, Z and lnZ
// targets). valid is false where the exact moments are infinite; the
// infinite fields are set to +inf in that case.
struct AnalyticStats {
  double bias_sq = 0.0;
  double variance = 0.0;
  double mse = 0.0;
  bool valid = false;
};

struct FullRankSample {
  double value = 0.0;  // distributed Gumbel(-c + ln Z)
  Configuration config;  // distributed according to the Gibbs distribution
};

// Thrown when a back-transform is undefined at the realized sample mean
// (e.g. a tail trick where no sample cleared the threshold). Carries the raw
// mean so callers can report it.
class EstimateDomainError : public std::runtime_error {
 public:
  EstimateDomainError(const std::string& message, double raw_mean)
      : std::runtime_error(message), raw_mean_(raw_mean) {}
  double raw_mean() const { return raw_mean_; }

 private:
  double raw_mean_;
};

// g from the table above. Requires x > 0 for gumbel/frechet/pareto and
// x >= 0 for weibull/exponential/tail.
double g_transform(const TrickSpec& trick, double x);

// Mean f(Z) and its inverse. f_inverse throws EstimateDomainError outside
// the range of f (pareto needs m > 1, tail needs 0 < m <= 1, weibull and
// frechet need m > 0).
double f_of_Z(const TrickSpec& trick, double Z);
double f_inverse(const TrickSpec& trick, double m);

// Perturbs every configuration's potential with i.i.d. Gumbel(-c) noise over
// the flattened joint variable and maximizes: the value follows
// Gumbel(-c + ln Z) and the argmax follows the Gibbs distribution.
FullRankSample full_rank_max_sample(const GraphicalModel& model, Rng& rng,
                                    std::uint64_t cap = kDefaultEnumerationCap);

// Same draw, with the flattened potential table built once up front. Noise is
// drawn per configuration in flat-index order.
class FullRankSampler {
 public:
  explicit FullRankSampler(const GraphicalModel& model,
                           std::uint64_t cap = kDefaultEnumerationCap);
  FullRankSample sample(Rng& rng) const;

 private:
  std::vector<int> cards_;
  std::vector<double> phi_;
};

// Builds the requested estimator from M full-rank max values. For f(Z) the
// estimate is the sample mean of g applied to the recovered exponential
// clocks; Z and lnZ are back-transformed through f_inverse with delta-method
// standard errors. debias applies the known closed-form corrections (gumbel
// and exponential tricks, M >= 2); the report records whether it did.
EstimateReport estimate(const TrickSpec& trick, std::span<const double> values,
                        Target target, bool debias);

// Exact bias^2 / variance / MSE of the gumbel and exponential trick
// estimators of Z and lnZ built from M samples.
AnalyticStats analytic_stats(const TrickSpec& trick, Target target, double Z,
                             std::int64_t M);

// Coefficient of the asymptotic variance of the back-transformed Z
// estimator. Frechet requires alpha > -1/2 and pareto Z > 2.
double asymptotic_variance(const TrickSpec& trick, double Z);

// Posterior mean of Z under the scale-invariant prior 1/Z given exponential
// clock observations: M / sum(values). Coincides with the exponential-trick
// Z estimator.
double bayes_posterior_mean(std::span<const double> exponential_scale_values);

// One cell of an empirical estimator study: K independent estimators, each
// built from a fresh batch of M full-rank samples, scored against the exact
// partition function.
struct MseCell {
  double alpha = 0.0;
  std::int64_t sample_count = 0;  // M
  std::int64_t replicates = 0;    // K
  double bias = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;  // population form, so mse == bias_sq + variance
  double mse = 0.0;
  double se_bias = 0.0;
  double se_bias_sq = 0.0;
  double se_variance = 0.0;
  double se_mse = 0.0;
  bool stable = true;  // false where the exact moments are infinite
};

// Full grid study over alpha values and sample sizes. Replicate r of cell c
// draws from the stream derived from (seed, r, c), so results do not depend
// on worker count.
std::vector<MseCell> mse_sweep(const GraphicalModel& model,
                               std::span<const double> alphas,
                               std::span<const std::int64_t> sample_sizes,
                               std::int64_t replicates, Target target,
                               std::uint64_t seed,
                               std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace pmap
