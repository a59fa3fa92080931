#include "pmap/tricks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pmap/exact.hpp"
#include "pmap/parallel.hpp"
#include "pmap/stats.hpp"

namespace pmap {

TrickSpec TrickSpec::weibull(double alpha) {
  TrickSpec spec{TrickKind::weibull, alpha, 0.0};
  spec.validate();
  return spec;
}

TrickSpec TrickSpec::frechet(double alpha) {
  TrickSpec spec{TrickKind::frechet, alpha, 0.0};
  spec.validate();
  return spec;
}

TrickSpec TrickSpec::tail(double t) {
  TrickSpec spec{TrickKind::tail, 0.0, t};
  spec.validate();
  return spec;
}

TrickSpec TrickSpec::from_alpha(double alpha) {
  if (alpha == 0.0) return gumbel();
  if (alpha == 1.0) return exponential();
  if (alpha > 0.0) return weibull(alpha);
  if (alpha > -1.0) return frechet(alpha);
  throw std::invalid_argument("alpha must lie in (-1, 0) or [0, inf)");
}

double TrickSpec::effective_alpha() const {
  switch (kind) {
    case TrickKind::gumbel:
      return 0.0;
    case TrickKind::exponential:
      return 1.0;
    case TrickKind::weibull:
    case TrickKind::frechet:
      return alpha;
    default:
      throw std::domain_error("trick has no alpha parameter");
  }
}

std::string TrickSpec::name() const {
  char buf[64];
  switch (kind) {
    case TrickKind::gumbel:
      return "gumbel";
    case TrickKind::exponential:
      return "exponential";
    case TrickKind::weibull:
      std::snprintf(buf, sizeof buf, "weibull[alpha=%.17g]", alpha);
      return buf;
    case TrickKind::frechet:
      std::snprintf(buf, sizeof buf, "frechet[alpha=%.17g]", alpha);
      return buf;
    case TrickKind::pareto:
      return "pareto";
    case TrickKind::tail:
      std::snprintf(buf, sizeof buf, "tail[t=%.17g]", t);
      return buf;
  }
  return "unknown";
}

void TrickSpec::validate() const {
  switch (kind) {
    case TrickKind::weibull:
      if (!(alpha > 0.0))
        throw std::invalid_argument("weibull trick needs alpha > 0");
      break;
    case TrickKind::frechet:
      if (!(alpha > -1.0 && alpha < 0.0))
        throw std::invalid_argument("frechet trick needs alpha in (-1, 0)");
      break;
    case TrickKind::tail:
      if (!(t > 0.0)) throw std::invalid_argument("tail trick needs t > 0");
      break;
    default:
      break;
  }
}

std::string target_name(Target target) {
  switch (target) {
    case Target::f_of_z:
      return "f(Z)";
    case Target::z:
      return "Z";
    case Target::ln_z:
      return "lnZ";
  }
  return "unknown";
}

double g_transform(const TrickSpec& trick, double x) {
  trick.validate();
  const bool needs_positive = trick.kind == TrickKind::gumbel ||
                              trick.kind == TrickKind::frechet ||
                              trick.kind == TrickKind::pareto;
  if (std::isnan(x) || (needs_positive ? !(x > 0.0) : !(x >= 0.0)))
    throw std::domain_error("g_transform: argument outside domain");
  switch (trick.kind) {
    case TrickKind::gumbel:
      return -std::log(x) - kEulerGamma;
    case TrickKind::exponential:
      return x;
    case TrickKind::weibull:
    case TrickKind::frechet:
      return std::pow(x, trick.alpha);
    case TrickKind::pareto:
      return std::exp(x);
    case TrickKind::tail:
      return x > trick.t ? 1.0 : 0.0;
  }
  throw std::logic_error("unreachable");
}

double f_of_Z(const TrickSpec& trick, double Z) {
  trick.validate();
  if (!(Z > 0.0)) throw std::domain_error("f_of_Z: Z must be positive");
  switch (trick.kind) {
    case TrickKind::gumbel:
      return std::log(Z);
    case TrickKind::exponential:
      return 1.0 / Z;
    case TrickKind::weibull:
    case TrickKind::frechet:
      return std::exp(-trick.alpha * std::log(Z) + ln_gamma(1.0 + trick.alpha));
    case TrickKind::pareto:
      if (!(Z > 1.0))
        throw std::domain_error("f_of_Z: pareto trick needs Z > 1");
      return Z / (Z - 1.0);
    case TrickKind::tail:
      return std::exp(-trick.t * Z);
  }
  throw std::logic_error("unreachable");
}

double f_inverse(const TrickSpec& trick, double m) {
  trick.validate();
  switch (trick.kind) {
    case TrickKind::gumbel:
      return std::exp(m);
    case TrickKind::exponential:
      if (!(m > 0.0))
        throw EstimateDomainError("f_inverse: exponential mean must be > 0", m);
      return 1.0 / m;
    case TrickKind::weibull:
    case TrickKind::frechet:
      if (!(m > 0.0))
        throw EstimateDomainError("f_inverse: power-trick mean must be > 0", m);
      return std::exp((std::log(m) - ln_gamma(1.0 + trick.alpha)) /
                      -trick.alpha);
    case TrickKind::pareto:
      if (!(m > 1.0))
        throw EstimateDomainError("f_inverse: pareto mean must be > 1", m);
      return m / (m - 1.0);
    case TrickKind::tail:
      if (!(m > 0.0) || m > 1.0)
        throw EstimateDomainError("f_inverse: tail mean must be in (0, 1]", m);
      return -std::log(m) / trick.t;
  }
  throw std::logic_error("unreachable");
}

FullRankSampler::FullRankSampler(const GraphicalModel& model,
                                 std::uint64_t cap)
    : cards_(model.cardinalities()), phi_(potential_table(model, cap)) {
  bool any_finite = false;
  for (double v : phi_) any_finite = any_finite || v != kNegInf;
  if (!any_finite)
    throw std::runtime_error("all configurations have zero probability");
}

FullRankSample FullRankSampler::sample(Rng& rng) const {
  // One Gumbel per configuration, drawn in flat-index order.
  double best = kNegInf;
  std::size_t best_idx = 0;
  bool found = false;
  for (std::size_t i = 0; i < phi_.size(); ++i) {
    const double noise = rng.gumbel();
    if (phi_[i] == kNegInf) continue;
    const double value = phi_[i] + noise;
    if (!found || value > best) {
      best = value;
      best_idx = i;
      found = true;
    }
  }
  FullRankSample out;
  out.value = best;
  out.config = configuration_of_index(static_cast<std::uint64_t>(best_idx),
                                      cards_);
  return out;
}

FullRankSample full_rank_max_sample(const GraphicalModel& model, Rng& rng,
                                    std::uint64_t cap) {
  return FullRankSampler(model, cap).sample(rng);
}

namespace {

// Gumbel-scale max values V relate to exponential clock minima T through
// T = e^{-c} e^{-V}; all trick statistics below work on a_m = -c - V_m so
// that extreme magnitudes stay in log space.
std::vector<double> clock_logs(std::span<const double> values) {
  std::vector<double> a(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    a[i] = -kEulerGamma - values[i];
  return a;
}

}  // namespace

EstimateReport estimate(const TrickSpec& trick, std::span<const double> values,
                        Target target, bool debias) {
  trick.validate();
  const auto M = static_cast<std::int64_t>(values.size());
  if (M < 1) throw std::invalid_argument("estimate: needs at least one value");

  EstimateReport report;
  report.target = target;
  report.sample_count = M;
  report.trick = trick;
  report.debiased = false;

  switch (trick.kind) {
    case TrickKind::gumbel: {
      const SampleMoments mom = sample_moments(values);
      if (target == Target::f_of_z || target == Target::ln_z) {
        report.estimate = mom.mean;
        report.std_error = mom.std_error;
        report.debiased = debias;  // already unbiased
      } else {
        const double z = std::exp(mom.mean);
        report.estimate = z;
        report.std_error = z * mom.std_error;
        if (debias && M >= 2) {
          const double factor = std::exp(
              static_cast<double>(M) *
                  ln_gamma(1.0 - 1.0 / static_cast<double>(M)) -
              kEulerGamma);
          report.estimate /= factor;
          report.std_error /= factor;
          report.debiased = true;
        }
      }
      return report;
    }
    case TrickKind::exponential: {
      const std::vector<double> a = clock_logs(values);
      const LogMeanExp lme = log_mean_exp(a);
      if (target == Target::f_of_z) {
        report.estimate = std::exp(lme.log_mean);
        report.std_error = report.estimate * lme.se_log;
      } else if (target == Target::z) {
        report.estimate = std::exp(-lme.log_mean);
        report.std_error = report.estimate * lme.se_log;
        if (debias && M >= 2) {
          const double factor =
              static_cast<double>(M - 1) / static_cast<double>(M);
          report.estimate *= factor;
          report.std_error *= factor;
          report.debiased = true;
        }
      } else {
        report.estimate = -lme.log_mean;
        report.std_error = lme.se_log;
        if (debias) {
          report.estimate -=
              std::log(static_cast<double>(M)) - digamma_int(M);
          report.debiased = true;
        }
      }
      return report;
    }
    case TrickKind::weibull:
    case TrickKind::frechet: {
      const double alpha = trick.alpha;
      std::vector<double> a = clock_logs(values);
      for (double& v : a) v *= alpha;
      const LogMeanExp lme = log_mean_exp(a);
      if (target == Target::f_of_z) {
        report.estimate = std::exp(lme.log_mean);
        report.std_error = report.estimate * lme.se_log;
      } else {
        const double ln_z =
            (lme.log_mean - ln_gamma(1.0 + alpha)) / -alpha;
        if (target == Target::z) {
          report.estimate = std::exp(ln_z);
          report.std_error = report.estimate * lme.se_log / std::abs(alpha);
        } else {
          report.estimate = ln_z;
          report.std_error = lme.se_log / std::abs(alpha);
        }
      }
      return report;
    }
    case TrickKind::pareto: {
      // g(T) = e^T; work with e^T - 1 so tiny clocks keep precision.
      std::vector<double> w(values.size());
      const std::vector<double> a = clock_logs(values);
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = std::expm1(std::exp(a[i]));
      const SampleMoments mom = sample_moments(w);
      const double mean = 1.0 + mom.mean;
      if (target == Target::f_of_z) {
        report.estimate = mean;
        report.std_error = mom.std_error;
      } else {
        if (!(mom.mean > 0.0))
          throw EstimateDomainError("pareto sample mean must exceed 1", mean);
        if (target == Target::z) {
          report.estimate = 1.0 + 1.0 / mom.mean;
          report.std_error = mom.std_error / (mom.mean * mom.mean);
        } else {
          report.estimate = std::log1p(1.0 / mom.mean);
          report.std_error = mom.std_error / (mean * mom.mean);
        }
      }
      return report;
    }
    case TrickKind::tail: {
      const double log_t = std::log(trick.t);
      double hits = 0.0;
      for (double v : values)
        if (-kEulerGamma - v > log_t) hits += 1.0;
      const double mean = hits / static_cast<double>(M);
      const double se =
          M > 1 ? std::sqrt(mean * (1.0 - mean) / static_cast<double>(M - 1))
                : 0.0;
      if (target == Target::f_of_z) {
        report.estimate = mean;
        report.std_error = se;
      } else if (target == Target::z) {
        if (mean == 0.0)
          throw EstimateDomainError("tail trick: no sample cleared t", mean);
        report.estimate = -std::log(mean) / trick.t;
        report.std_error = se / (trick.t * mean);
      } else {
        if (mean == 0.0 || mean == 1.0)
          throw EstimateDomainError("tail trick: lnZ undefined at this mean",
                                    mean);
        report.estimate = std::log(-std::log(mean) / trick.t);
        report.std_error = se / std::abs(mean * std::log(mean));
      }
      return report;
    }
  }
  throw std::logic_error("unreachable");
}

AnalyticStats analytic_stats(const TrickSpec& trick, Target target, double Z,
                             std::int64_t M) {
  TrickKind kind = trick.kind;
  if (kind == TrickKind::weibull && trick.alpha == 1.0)
    kind = TrickKind::exponential;
  if (kind != TrickKind::gumbel && kind != TrickKind::exponential)
    throw std::invalid_argument(
        "analytic_stats: closed forms exist for the gumbel and exponential "
        "tricks only");
  if (target == Target::f_of_z)
    throw std::invalid_argument("analytic_stats: target must be Z or lnZ");
  if (M < 1) throw std::invalid_argument("analytic_stats: M must be >= 1");
  if (!(Z > 0.0)) throw std::invalid_argument("analytic_stats: Z must be > 0");

  const double Md = static_cast<double>(M);
  const double Z2 = Z * Z;
  AnalyticStats out;

  if (target == Target::ln_z) {
    out.valid = true;
    if (kind == TrickKind::gumbel) {
      out.bias_sq = 0.0;
      out.variance = std::numbers::pi * std::numbers::pi / (6.0 * Md);
      out.mse = out.variance;
    } else {
      const double bias = std::log(Md) - digamma_int(M);
      out.bias_sq = bias * bias;
      out.variance = trigamma_int(M);
      out.mse = out.bias_sq + out.variance;
    }
    return out;
  }

  // Z target: both estimators have infinite moments below M = 3.
  if (kind == TrickKind::gumbel) {
    if (M == 1) {
      out.bias_sq = out.variance = out.mse = kPosInf;
      return out;
    }
    const double g1 = std::exp(Md * ln_gamma(1.0 - 1.0 / Md) - kEulerGamma);
    const double b = g1 - 1.0;
    out.bias_sq = Z2 * b * b;
    if (M == 2) {
      out.variance = out.mse = kPosInf;
      return out;
    }
    const double g2 =
        std::exp(Md * ln_gamma(1.0 - 2.0 / Md) - 2.0 * kEulerGamma);
    out.variance = Z2 * (g2 - g1 * g1);
    out.mse = out.bias_sq + out.variance;
    out.valid = true;
    return out;
  }

  if (M == 1) {
    out.bias_sq = out.variance = out.mse = kPosInf;
    return out;
  }
  out.bias_sq = Z2 / ((Md - 1.0) * (Md - 1.0));
  if (M == 2) {
    out.variance = out.mse = kPosInf;
    return out;
  }
  out.variance = Z2 * Md * Md / ((Md - 1.0) * (Md - 1.0) * (Md - 2.0));
  out.mse = out.bias_sq + out.variance;
  out.valid = true;
  return out;
}

double asymptotic_variance(const TrickSpec& trick, double Z) {
  trick.validate();
  if (!(Z > 0.0))
    throw std::domain_error("asymptotic_variance: Z must be > 0");
  const double Z2 = Z * Z;
  switch (trick.kind) {
    case TrickKind::gumbel:
      return std::numbers::pi * std::numbers::pi / 6.0 * Z2;
    case TrickKind::exponential:
      return Z2;
    case TrickKind::weibull:
    case TrickKind::frechet: {
      const double alpha = trick.alpha;
      if (!(alpha > -0.5))
        throw std::domain_error(
            "asymptotic_variance: infinite for alpha <= -1/2");
      const double ratio =
          std::expm1(ln_gamma(1.0 + 2.0 * alpha) - 2.0 * ln_gamma(1.0 + alpha));
      return ratio / (alpha * alpha) * Z2;
    }
    case TrickKind::pareto:
      if (!(Z > 2.0))
        throw std::domain_error("asymptotic_variance: pareto needs Z > 2");
      return Z2 / ((Z - 2.0) * (Z - 2.0));
    case TrickKind::tail: {
      const double r = -std::expm1(-trick.t * Z) / trick.t;
      return r * r;
    }
  }
  throw std::logic_error("unreachable");
}

double bayes_posterior_mean(std::span<const double> values) {
  if (values.empty())
    throw std::invalid_argument("bayes_posterior_mean: empty input");
  double sum = 0.0;
  for (double v : values) {
    if (std::isnan(v) || v < 0.0)
      throw std::invalid_argument("bayes_posterior_mean: negative value");
    sum += v;
  }
  if (sum == 0.0)
    throw std::invalid_argument("bayes_posterior_mean: zero-sum input");
  return static_cast<double>(values.size()) / sum;
}

std::vector<MseCell> mse_sweep(const GraphicalModel& model,
                               std::span<const double> alphas,
                               std::span<const std::int64_t> sample_sizes,
                               std::int64_t replicates, Target target,
                               std::uint64_t seed, std::uint64_t cap) {
  if (replicates < 1)
    throw std::invalid_argument("mse_sweep: replicates must be >= 1");
  for (std::int64_t m : sample_sizes)
    if (m < 1) throw std::invalid_argument("mse_sweep: sample sizes must be >= 1");

  const ExactSummary oracle = summarize(model, cap);
  const double Z = std::exp(oracle.log_partition);
  const FullRankSampler sampler(model, cap);

  std::vector<MseCell> cells;
  cells.reserve(alphas.size() * sample_sizes.size());

  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    const TrickSpec trick = TrickSpec::from_alpha(alphas[ai]);
    const double truth = target == Target::ln_z ? oracle.log_partition
                         : target == Target::z ? Z
                                               : f_of_Z(trick, Z);
    for (std::size_t mi = 0; mi < sample_sizes.size(); ++mi) {
      const std::int64_t M = sample_sizes[mi];
      const std::uint64_t cell_index = ai * sample_sizes.size() + mi;

      std::vector<double> estimates(static_cast<std::size_t>(replicates));
      for_each_chunk(
          static_cast<std::size_t>(replicates), 256,
          [&](std::size_t, std::size_t begin, std::size_t end) {
            std::vector<double> draws(static_cast<std::size_t>(M));
            for (std::size_t k = begin; k < end; ++k) {
              Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(k),
                                           cell_index});
              for (auto& v : draws) v = sampler.sample(rng).value;
              estimates[k] = estimate(trick, draws, target, false).estimate;
            }
          });

      MseCell cell;
      cell.alpha = alphas[ai];
      cell.sample_count = M;
      cell.replicates = replicates;

      const double K = static_cast<double>(replicates);
      double sum = 0.0;
      for (double e : estimates) sum += e;
      const double mean = sum / K;
      double ss = 0.0, s4 = 0.0, sq_sum = 0.0, sq_ss = 0.0;
      for (double e : estimates) {
        const double d = e - mean;
        ss += d * d;
        s4 += d * d * d * d;
        const double err = e - truth;
        sq_sum += err * err;
      }
      const double mse_raw = sq_sum / K;
      for (double e : estimates) {
        const double err = e - truth;
        const double d = err * err - mse_raw;
        sq_ss += d * d;
      }

      cell.bias = mean - truth;
      cell.bias_sq = cell.bias * cell.bias;
      cell.variance = ss / K;
      cell.mse = cell.bias_sq + cell.variance;
      if (replicates > 1) {
        const double s2 = ss / (K - 1.0);
        cell.se_bias = std::sqrt(s2 / K);
        cell.se_bias_sq = std::sqrt(4.0 * cell.bias_sq * s2 / K +
                                    2.0 * s2 * s2 / (K * K));
        const double m4 = s4 / K;
        cell.se_variance =
            std::sqrt(std::max(0.0, m4 - cell.variance * cell.variance) / K);
        cell.se_mse = std::sqrt(sq_ss / (K - 1.0) / K);
      }
      const double eff_alpha = trick.effective_alpha();
      cell.stable = !(eff_alpha <= -0.5) &&
                    !(target == Target::z && M < 3);
      cells.push_back(cell);
    }
  }
  return cells;
}

}  // namespace pmap
