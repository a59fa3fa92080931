#include "pmap/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pmap/exact.hpp"
#include "pmap/parallel.hpp"
#include "pmap/stats.hpp"

namespace pmap {

namespace {

constexpr std::uint64_t kSampleRole = 1u << 20;

void check_alpha(double alpha, bool allow_zero) {
  if (std::isnan(alpha) || alpha <= -1.0)
    throw std::invalid_argument("alpha must lie in (-1, 0) or (0, inf)");
  if (alpha == 0.0 && !allow_zero)
    throw std::invalid_argument("alpha must be non-zero here");
}

bool alpha_is_safe(double alpha, int n) {
  return alpha > -0.5 / std::sqrt(static_cast<double>(std::max(1, n)));
}

void fill_gumbel_offsets(UnaryOffsets& offsets, Rng& rng) {
  for (auto& table : offsets.delta)
    for (auto& cell : table) cell = rng.gumbel();
}

double unscaled_noise_at(const UnaryOffsets& offsets,
                         std::span<const int> config) {
  double sum = 0.0;
  for (std::size_t i = 0; i < config.size(); ++i)
    sum += offsets.delta[i][static_cast<std::size_t>(config[i])];
  return sum;
}

PerturbationSample draw_unary(const MapSolver& solver, double scale,
                              PerturbKind kind, Rng& rng) {
  UnaryOffsets offsets = UnaryOffsets::zeros(solver.model(), scale);
  fill_gumbel_offsets(offsets, rng);
  const MapResult result = solver.solve(offsets, rng);
  return PerturbationSample{result.value, kind, result.exact};
}

struct UnaryBatch {
  std::vector<double> values;
  std::vector<std::uint64_t> argmax;        // flat configuration indices
  std::vector<double> noise_at_argmax;      // unscaled offset sums
};

UnaryBatch draw_unary_batch(const GraphicalModel& model, std::int64_t count,
                            const SolverSpec& spec, std::uint64_t seed,
                            double scale, bool record_argmax) {
  if (count < 1) throw std::invalid_argument("batch size must be >= 1");
  auto solver = spec.build(model);
  UnaryBatch batch;
  batch.values.resize(static_cast<std::size_t>(count));
  if (record_argmax) {
    batch.argmax.resize(static_cast<std::size_t>(count));
    batch.noise_at_argmax.resize(static_cast<std::size_t>(count));
  }
  for_each_chunk(
      static_cast<std::size_t>(count), 512,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        UnaryOffsets offsets = UnaryOffsets::zeros(model, scale);
        for (std::size_t m = begin; m < end; ++m) {
          Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(m)});
          fill_gumbel_offsets(offsets, rng);
          const MapResult result = solver->solve(offsets, rng);
          batch.values[m] = result.value;
          if (record_argmax) {
            batch.argmax[m] = index_of_configuration(result.config,
                                                     model.cardinalities());
            batch.noise_at_argmax[m] = unscaled_noise_at(offsets, result.config);
          }
        }
      });
  return batch;
}

// Summed-offset maximum for the exhaustive solver without per-draw solver
// bookkeeping. Noise order (variables ascending, states ascending) and every
// arithmetic step match fill_gumbel_offsets + ExhaustiveMapSolver::solve at
// scale 1, so values are bit-identical to the generic path; this only exists
// because the sequential sampler evaluates millions of these on tiny clamped
// models.
class UnaryMaxKernel {
 public:
  UnaryMaxKernel(const GraphicalModel& model, std::uint64_t cap)
      : cards_(model.cardinalities()), phi_(potential_table(model, cap)) {}

  double sample_value(Rng& rng) const {
    thread_local std::vector<double> buf;
    thread_local std::vector<double> delta;
    buf.resize(phi_.size());
    std::size_t size = 1;
    buf[0] = 0.0;
    for (int card_int : cards_) {
      const auto card = static_cast<std::size_t>(card_int);
      delta.resize(card);
      for (std::size_t s = 0; s < card; ++s) delta[s] = rng.gumbel();
      for (std::size_t b = size; b-- > 0;) {
        const double base = buf[b];
        for (std::size_t s = card; s-- > 0;) buf[b * card + s] = base + delta[s];
      }
      size *= card;
    }
    double best = kNegInf;
    bool found = false;
    for (std::size_t i = 0; i < phi_.size(); ++i) {
      if (phi_[i] == kNegInf) continue;
      const double value = phi_[i] + 1.0 * buf[i];
      if (!found || value > best) {
        best = value;
        found = true;
      }
    }
    return found ? best : kNegInf;
  }

 private:
  std::vector<int> cards_;
  std::vector<double> phi_;
};

// ln of the sample mean of exp(-alpha * U_prefix) over `count` fresh draws;
// exact (zero-variance) when the prefix covers every variable.
LogMeanExp partial_moment(const GraphicalModel& model,
                          std::span<const int> prefix, double alpha,
                          std::int64_t count, const SolverSpec& spec,
                          std::uint64_t seed_key) {
  const int n = model.variable_count();
  if (static_cast<int>(prefix.size()) == n) {
    return LogMeanExp{-alpha * potential(model, prefix), 0.0};
  }
  const ClampedModel clamped = clamp(model, prefix);
  thread_local std::vector<double> terms;
  terms.resize(static_cast<std::size_t>(count));

  if (spec.kind == SolverSpec::Kind::exhaustive) {
    const UnaryMaxKernel kernel(clamped.model, spec.enumeration_cap);
    for (std::size_t m = 0; m < terms.size(); ++m) {
      Rng rng = Rng::derive(seed_key, {static_cast<std::uint64_t>(m)});
      const double value = kernel.sample_value(rng) + clamped.log_offset;
      if (value == kNegInf)
        return LogMeanExp{alpha > 0.0 ? kPosInf : kNegInf, 0.0};
      terms[m] = -alpha * value;
    }
    return log_mean_exp(terms);
  }

  auto solver = spec.build(clamped.model);
  UnaryOffsets offsets = UnaryOffsets::zeros(clamped.model, 1.0);
  for (std::size_t m = 0; m < terms.size(); ++m) {
    Rng rng = Rng::derive(seed_key, {static_cast<std::uint64_t>(m)});
    fill_gumbel_offsets(offsets, rng);
    const double value = solver->solve(offsets, rng).value + clamped.log_offset;
    if (value == kNegInf) {
      // Impossible region under this prefix; the moment term degenerates.
      return LogMeanExp{alpha > 0.0 ? kPosInf : kNegInf, 0.0};
    }
    terms[m] = -alpha * value;
  }
  return log_mean_exp(terms);
}

}  // namespace

std::string bound_kind_name(BoundKind kind) {
  switch (kind) {
    case BoundKind::upper:
      return "upper";
    case BoundKind::lower_avg:
      return "lower_avg";
    case BoundKind::lower_subset:
      return "lower_subset";
  }
  return "unknown";
}

PerturbationSample sample_U(const GraphicalModel& model,
                            const SolverSpec& spec, Rng& rng) {
  auto solver = spec.build(model);
  return draw_unary(*solver, 1.0, PerturbKind::sum_unary, rng);
}

PerturbationSample sample_L(const GraphicalModel& model,
                            const SolverSpec& spec, Rng& rng) {
  const int n = model.variable_count();
  if (n < 1) throw std::invalid_argument("model needs at least one variable");
  auto solver = spec.build(model);
  return draw_unary(*solver, 1.0 / static_cast<double>(n),
                    PerturbKind::avg_unary, rng);
}

PerturbationSample sample_partial_U(const GraphicalModel& model,
                                    std::span<const int> prefix,
                                    const SolverSpec& spec, Rng& rng) {
  if (static_cast<int>(prefix.size()) == model.variable_count()) {
    // Nothing left to perturb: the value is the potential itself.
    return PerturbationSample{potential(model, prefix), PerturbKind::partial,
                              true};
  }
  const ClampedModel clamped = clamp(model, prefix);
  auto solver = spec.build(clamped.model);
  PerturbationSample sample =
      draw_unary(*solver, 1.0, PerturbKind::partial, rng);
  sample.value += clamped.log_offset;
  return sample;
}

PerturbationSample sample_subset(const GraphicalModel& model,
                                 std::span<const int> subset,
                                 const SolverSpec& spec, Rng& rng) {
  const SubsetModel flat = flatten_subset(model, subset, spec.enumeration_cap);
  auto solver = spec.build(flat.model);
  UnaryOffsets offsets = UnaryOffsets::zeros(flat.model, 1.0);
  // Noise on the merged variable only: one Gumbel per joint subset setting.
  for (auto& cell : offsets.delta[0]) cell = rng.gumbel();
  const MapResult result = solver->solve(offsets, rng);
  return PerturbationSample{result.value, PerturbKind::subset, result.exact};
}

std::vector<double> draw_sum_unary_values(const GraphicalModel& model,
                                          std::int64_t count,
                                          const SolverSpec& spec,
                                          std::uint64_t seed) {
  return draw_unary_batch(model, count, spec, seed, 1.0, false).values;
}

std::vector<double> draw_avg_unary_values(const GraphicalModel& model,
                                          std::int64_t count,
                                          const SolverSpec& spec,
                                          std::uint64_t seed) {
  const int n = model.variable_count();
  if (n < 1) throw std::invalid_argument("model needs at least one variable");
  return draw_unary_batch(model, count, spec, seed,
                          1.0 / static_cast<double>(n), false)
      .values;
}

std::vector<double> draw_subset_values(const GraphicalModel& model,
                                       std::span<const int> subset,
                                       std::int64_t count,
                                       const SolverSpec& spec,
                                       std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("batch size must be >= 1");
  const SubsetModel flat = flatten_subset(model, subset, spec.enumeration_cap);
  auto solver = spec.build(flat.model);
  std::vector<double> values(static_cast<std::size_t>(count));
  for_each_chunk(
      static_cast<std::size_t>(count), 512,
      [&](std::size_t, std::size_t begin, std::size_t end) {
        UnaryOffsets offsets = UnaryOffsets::zeros(flat.model, 1.0);
        for (std::size_t m = begin; m < end; ++m) {
          Rng rng = Rng::derive(seed, {static_cast<std::uint64_t>(m)});
          for (auto& cell : offsets.delta[0]) cell = rng.gumbel();
          values[m] = solver->solve(offsets, rng).value;
        }
      });
  return values;
}

namespace {

BoundReport bound_from_values(BoundKind kind, int n, double alpha,
                              std::span<const double> values,
                              std::string solver_name,
                              double exponent_scale, double constant) {
  check_alpha(alpha, true);
  if (values.size() < 2)
    throw std::invalid_argument("bound estimation needs at least two draws");

  BoundReport report;
  report.kind = kind;
  report.alpha = alpha;
  report.sample_count = static_cast<std::int64_t>(values.size());
  report.solver = std::move(solver_name);
  report.alpha_safe = alpha_is_safe(alpha, n);

  if (alpha == 0.0) {
    const SampleMoments mom = sample_moments(values);
    report.estimate = mom.mean;
    report.std_error = mom.std_error;
    return report;
  }

  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    terms[i] = -exponent_scale * values[i];
  const LogMeanExp lme = log_mean_exp(terms);
  report.estimate = constant - lme.log_mean / exponent_scale;
  report.std_error = lme.se_log / std::abs(exponent_scale);
  return report;
}

}  // namespace

BoundReport upper_bound_from_values(int n, double alpha,
                                    std::span<const double> u_values,
                                    std::string solver_name) {
  check_alpha(alpha, true);
  const double constant =
      alpha == 0.0 ? 0.0
                   : static_cast<double>(n) *
                         (ln_gamma(1.0 + alpha) / alpha + kEulerGamma);
  return bound_from_values(BoundKind::upper, n, alpha, u_values,
                           std::move(solver_name), alpha, constant);
}

BoundReport lower_bound_avg_from_values(int n, double alpha,
                                        std::span<const double> l_values,
                                        std::string solver_name) {
  check_alpha(alpha, true);
  const double constant =
      alpha == 0.0 ? 0.0 : ln_gamma(1.0 + alpha) / alpha + kEulerGamma;
  return bound_from_values(BoundKind::lower_avg, n, alpha, l_values,
                           std::move(solver_name),
                           static_cast<double>(n) * alpha, constant);
}

BoundReport lower_bound_subset_from_values(int n, double alpha,
                                           std::span<const double> values,
                                           std::string solver_name) {
  check_alpha(alpha, true);
  const double constant =
      alpha == 0.0 ? 0.0 : ln_gamma(1.0 + alpha) / alpha + kEulerGamma;
  return bound_from_values(BoundKind::lower_subset, n, alpha, values,
                           std::move(solver_name), alpha, constant);
}

BoundReport upper_bound(const GraphicalModel& model, double alpha,
                        std::int64_t count, const SolverSpec& spec,
                        std::uint64_t seed) {
  const auto values = draw_sum_unary_values(model, count, spec, seed);
  return upper_bound_from_values(model.variable_count(), alpha, values,
                                 spec.name());
}

BoundReport lower_bound_avg(const GraphicalModel& model, double alpha,
                            std::int64_t count, const SolverSpec& spec,
                            std::uint64_t seed) {
  const auto values = draw_avg_unary_values(model, count, spec, seed);
  return lower_bound_avg_from_values(model.variable_count(), alpha, values,
                                     spec.name());
}

BoundReport lower_bound_subset(const GraphicalModel& model,
                               std::span<const int> subset, double alpha,
                               std::int64_t count, const SolverSpec& spec,
                               std::uint64_t seed) {
  const auto values = draw_subset_values(model, subset, count, spec, seed);
  return lower_bound_subset_from_values(model.variable_count(), alpha, values,
                                        spec.name());
}

double derivative_at_zero(std::span<const double> u_values, int n) {
  if (u_values.size() < 2)
    throw std::invalid_argument("derivative_at_zero needs at least two draws");
  const SampleMoments mom = sample_moments(u_values);
  return static_cast<double>(n) * std::numbers::pi * std::numbers::pi / 12.0 -
         mom.variance / 2.0;
}

ClampingCheck clamping_check(const GraphicalModel& model, double alpha,
                             std::span<const int> prefix, std::int64_t count,
                             const SolverSpec& spec, std::uint64_t seed) {
  check_alpha(alpha, false);
  const int n = model.variable_count();
  const int fixed = static_cast<int>(prefix.size());
  if (fixed >= n)
    throw std::invalid_argument("clamping_check: prefix must leave the next "
                                "variable free");
  const double ln_gamma_term = ln_gamma(1.0 + alpha);
  const int next_card =
      model.cardinalities()[static_cast<std::size_t>(fixed)];

  // Each side is [Gamma(1+a)^{-r} e^{-a r c} E[e^{-a U}]]^{-1/a} with r the
  // number of perturbed variables; everything assembles in log space.
  const auto side = [&](std::span<const int> pfx, std::uint64_t key,
                        double* se_out) {
    const int perturbed = n - static_cast<int>(pfx.size());
    const LogMeanExp lme =
        partial_moment(model, pfx, alpha, count, spec, key);
    const double log_inner = -static_cast<double>(perturbed) *
                                 (ln_gamma_term + alpha * kEulerGamma) +
                             lme.log_mean;
    const double log_side = -log_inner / alpha;
    const double value = std::exp(log_side);
    *se_out = value * lme.se_log / std::abs(alpha);
    return value;
  };

  ClampingCheck check;
  check.rhs = side(prefix, Rng::derive_key(seed, {0}), &check.rhs_se);

  std::vector<int> extended(prefix.begin(), prefix.end());
  extended.push_back(0);
  double lhs_var = 0.0;
  for (int s = 0; s < next_card; ++s) {
    extended.back() = s;
    double se = 0.0;
    check.lhs += side(extended,
                      Rng::derive_key(seed, {static_cast<std::uint64_t>(1 + s)}),
                      &se);
    lhs_var += se * se;
  }
  check.lhs_se = std::sqrt(lhs_var);
  check.holds =
      check.lhs <=
      check.rhs + 3.0 * std::sqrt(check.lhs_se * check.lhs_se +
                                  check.rhs_se * check.rhs_se);
  return check;
}

SamplerTrace sequential_sample(const GraphicalModel& model, double alpha,
                               std::int64_t inner_count,
                               const SolverSpec& spec, std::uint64_t seed,
                               int max_restarts) {
  check_alpha(alpha, false);
  if (inner_count < 1)
    throw std::invalid_argument("inner sample count must be >= 1");
  const int n = model.variable_count();
  const double log_norm = -kEulerGamma - ln_gamma(1.0 + alpha) / alpha;

  SamplerTrace trace;
  Configuration prefix;
  prefix.reserve(static_cast<std::size_t>(n));

  for (std::uint64_t attempt = 0;; ++attempt) {
    prefix.clear();
    bool rejected = false;
    for (int j = 0; j < n && !rejected; ++j) {
      const int card = model.cardinalities()[static_cast<std::size_t>(j)];
      const LogMeanExp denom = partial_moment(
          model, prefix, alpha, inner_count, spec,
          Rng::derive_key(seed, {attempt, static_cast<std::uint64_t>(j), 0}));

      SamplerStep step;
      step.variable = j;
      step.probs.resize(static_cast<std::size_t>(card));
      std::vector<int> extended(prefix);
      extended.push_back(0);
      double total = 0.0;
      for (int s = 0; s < card; ++s) {
        extended.back() = s;
        const LogMeanExp numer = partial_moment(
            model, extended, alpha, inner_count, spec,
            Rng::derive_key(seed, {attempt, static_cast<std::uint64_t>(j),
                                   static_cast<std::uint64_t>(1 + s)}));
        const double log_p =
            log_norm + (denom.log_mean - numer.log_mean) / alpha;
        step.probs[static_cast<std::size_t>(s)] = std::exp(log_p);
        total += step.probs[static_cast<std::size_t>(s)];
      }
      if (total > 1.0) {
        // Finite-sample overshoot; the exact mass never exceeds one.
        for (auto& p : step.probs) p /= total;
        total = 1.0;
        trace.reject_clamped = true;
      }
      step.reject_prob = 1.0 - total;

      Rng pick = Rng::derive(
          seed, {attempt, static_cast<std::uint64_t>(j), kSampleRole});
      const double u = pick.next_double();
      double cum = 0.0;
      int chosen = -1;
      for (int s = 0; s < card; ++s) {
        cum += step.probs[static_cast<std::size_t>(s)];
        if (u < cum) {
          chosen = s;
          break;
        }
      }
      trace.steps.push_back(std::move(step));
      if (chosen < 0) {
        rejected = true;
      } else {
        prefix.push_back(chosen);
      }
    }

    if (!rejected) {
      trace.accepted = true;
      trace.config = prefix;
      return trace;
    }
    ++trace.restarts;
    if (trace.restarts > max_restarts) {
      trace.accepted = false;
      return trace;
    }
  }
}

DiagnosticsReport diagnostics(const GraphicalModel& model, std::int64_t count,
                              const SolverSpec& spec, std::uint64_t seed,
                              std::uint64_t cap) {
  if (count < 2) throw std::invalid_argument("diagnostics needs count >= 2");
  const int n = model.variable_count();
  const ExactSummary oracle = summarize(model, cap);
  const std::size_t space = oracle.gibbs.size();

  const UnaryBatch sum_batch = draw_unary_batch(
      model, count, spec, Rng::derive_key(seed, {0}), 1.0, true);
  const UnaryBatch avg_batch = draw_unary_batch(
      model, count, spec, Rng::derive_key(seed, {1}),
      1.0 / static_cast<double>(n), true);

  const double m = static_cast<double>(count);
  DiagnosticsReport report;
  report.sample_count = count;

  std::vector<double> counts_sum(space, 0.0), counts_avg(space, 0.0);
  double u_total = 0.0, l_total = 0.0, noise_sum_total = 0.0,
         noise_avg_total = 0.0;
  for (std::int64_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    u_total += sum_batch.values[idx];
    l_total += avg_batch.values[idx];
    noise_sum_total += sum_batch.noise_at_argmax[idx];
    noise_avg_total += avg_batch.noise_at_argmax[idx];
    counts_sum[static_cast<std::size_t>(sum_batch.argmax[idx])] += 1.0;
    counts_avg[static_cast<std::size_t>(avg_batch.argmax[idx])] += 1.0;
  }

  report.q_sum.resize(space);
  report.q_avg.resize(space);
  for (std::size_t x = 0; x < space; ++x) {
    report.q_sum[x] = counts_sum[x] / m;
    report.q_avg[x] = counts_avg[x] / m;
  }
  report.gap_upper = u_total / m - oracle.log_partition;
  report.gap_lower = oracle.log_partition - l_total / m;
  report.entropy_bound_sum = noise_sum_total / m;
  report.entropy_bound_avg = noise_avg_total / (m * static_cast<double>(n));

  const auto smoothed = [&](std::span<const double> q, double draws) {
    const double lambda = 1.0 / (draws * static_cast<double>(q.size()));
    const double norm = 1.0 + 1.0 / draws;
    std::vector<double> out(q.size());
    for (std::size_t x = 0; x < q.size(); ++x)
      out[x] = (q[x] + lambda) / norm;
    return out;
  };

  report.kl_sum = kl_divergence(smoothed(report.q_sum, m), oracle.gibbs);
  report.kl_avg = kl_divergence(smoothed(report.q_avg, m), oracle.gibbs);
  report.h_sum = entropy(report.q_sum);
  report.h_avg = entropy(report.q_avg);

  // The identity links plug-in estimates of its four terms, so it is checked
  // with the raw (unsmoothed) empirical KL: that one is always defined here
  // because an argmax configuration carries positive Gibbs mass. The
  // smoothing on the reported KLs would otherwise inject an O(1/M) offset
  // that swamps the Monte Carlo residual.
  report.identity_residual =
      (report.gap_upper + kl_divergence(report.q_sum, oracle.gibbs)) -
      (report.entropy_bound_sum - report.h_sum);
  report.lower_gap_margin = report.gap_lower - report.kl_avg;
  report.entropy_margin = report.h_avg - report.entropy_bound_avg;

  // Block jackknife over the draw sequence for the three composite
  // statistics; each deleted block recomputes every ingredient.
  const std::int64_t blocks = std::min<std::int64_t>(25, count);
  std::vector<double> res_jk, gap_jk, ent_jk;
  res_jk.reserve(static_cast<std::size_t>(blocks));
  gap_jk.reserve(static_cast<std::size_t>(blocks));
  ent_jk.reserve(static_cast<std::size_t>(blocks));
  std::vector<double> q_tmp_sum(space), q_tmp_avg(space);

  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::int64_t begin = b * count / blocks;
    const std::int64_t end = (b + 1) * count / blocks;
    const double kept = m - static_cast<double>(end - begin);
    if (kept < 1.0) continue;

    double u_b = u_total, l_b = l_total, ns_b = noise_sum_total,
           na_b = noise_avg_total;
    std::copy(counts_sum.begin(), counts_sum.end(), q_tmp_sum.begin());
    std::copy(counts_avg.begin(), counts_avg.end(), q_tmp_avg.begin());
    for (std::int64_t i = begin; i < end; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      u_b -= sum_batch.values[idx];
      l_b -= avg_batch.values[idx];
      ns_b -= sum_batch.noise_at_argmax[idx];
      na_b -= avg_batch.noise_at_argmax[idx];
      q_tmp_sum[static_cast<std::size_t>(sum_batch.argmax[idx])] -= 1.0;
      q_tmp_avg[static_cast<std::size_t>(avg_batch.argmax[idx])] -= 1.0;
    }
    for (std::size_t x = 0; x < space; ++x) {
      q_tmp_sum[x] /= kept;
      q_tmp_avg[x] /= kept;
    }
    const double gap_u_b = u_b / kept - oracle.log_partition;
    const double gap_l_b = oracle.log_partition - l_b / kept;
    const double kl_sum_raw_b = kl_divergence(q_tmp_sum, oracle.gibbs);
    const double kl_avg_b =
        kl_divergence(smoothed(q_tmp_avg, kept), oracle.gibbs);
    const double h_sum_b = entropy(q_tmp_sum);
    const double h_avg_b = entropy(q_tmp_avg);

    res_jk.push_back((gap_u_b + kl_sum_raw_b) - (ns_b / kept - h_sum_b));
    gap_jk.push_back(gap_l_b - kl_avg_b);
    ent_jk.push_back(h_avg_b - na_b / (kept * static_cast<double>(n)));
    // restore counts for the next block via fresh copies above
  }

  const auto jackknife_se = [](std::span<const double> leave_outs) {
    const double b = static_cast<double>(leave_outs.size());
    if (b < 2.0) return 0.0;
    double mean = 0.0;
    for (double v : leave_outs) mean += v;
    mean /= b;
    double ss = 0.0;
    for (double v : leave_outs) ss += (v - mean) * (v - mean);
    return std::sqrt((b - 1.0) / b * ss);
  };

  report.identity_se = jackknife_se(res_jk);
  report.lower_gap_se = jackknife_se(gap_jk);
  report.entropy_margin_se = jackknife_se(ent_jk);
  return report;
}

SubsetModel flatten_subset(const GraphicalModel& model,
                           std::span<const int> subset, std::uint64_t cap) {
  const int n = model.variable_count();
  if (subset.empty())
    throw std::invalid_argument("subset must be non-empty");
  std::vector<int> sorted(subset.begin(), subset.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= n)
      throw std::invalid_argument("subset index out of range");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw std::invalid_argument("duplicate subset index");
  }

  const auto& cards = model.cardinalities();
  std::uint64_t merged_card = 1;
  for (int v : sorted) {
    merged_card *= static_cast<std::uint64_t>(cards[static_cast<std::size_t>(v)]);
    if (merged_card > cap)
      throw std::runtime_error("enumeration cap exceeded");
  }

  // position of each original variable in the merged model: subset members
  // map into variable 0 (position_in_subset), others to 1 + rank.
  std::vector<int> in_subset(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < sorted.size(); ++i)
    in_subset[static_cast<std::size_t>(sorted[i])] = static_cast<int>(i);
  std::vector<int> rest;
  std::vector<int> new_index(static_cast<std::size_t>(n), -1);
  for (int v = 0; v < n; ++v)
    if (in_subset[static_cast<std::size_t>(v)] < 0) {
      new_index[static_cast<std::size_t>(v)] =
          1 + static_cast<int>(rest.size());
      rest.push_back(v);
    }

  std::vector<int> new_cards;
  new_cards.push_back(static_cast<int>(merged_card));
  for (int v : rest) new_cards.push_back(cards[static_cast<std::size_t>(v)]);

  std::vector<Factor> new_factors;
  for (const auto& f : model.factors()) {
    bool touches = false;
    for (int v : f.scope)
      touches = touches || in_subset[static_cast<std::size_t>(v)] >= 0;
    if (!touches) {
      Factor nf;
      for (int v : f.scope)
        nf.scope.push_back(new_index[static_cast<std::size_t>(v)]);
      nf.log_table = f.log_table;
      new_factors.push_back(std::move(nf));
      continue;
    }

    // Expand over (merged, untouched scope vars): each entry reads the
    // original table with subset states decoded from the merged index.
    Factor nf;
    nf.scope.push_back(0);
    std::vector<int> free_scope;
    for (int v : f.scope)
      if (in_subset[static_cast<std::size_t>(v)] < 0) {
        nf.scope.push_back(new_index[static_cast<std::size_t>(v)]);
        free_scope.push_back(v);
      }
    std::uint64_t size = merged_card;
    for (int v : free_scope)
      size *= static_cast<std::uint64_t>(cards[static_cast<std::size_t>(v)]);
    if (size > cap) throw std::runtime_error("enumeration cap exceeded");
    nf.log_table.resize(static_cast<std::size_t>(size));

    std::vector<int> subset_state(sorted.size());
    std::vector<int> free_state(free_scope.size());
    for (std::uint64_t out = 0; out < size; ++out) {
      std::uint64_t rem = out;
      for (std::size_t i = free_scope.size(); i-- > 0;) {
        const auto card = static_cast<std::uint64_t>(
            cards[static_cast<std::size_t>(free_scope[i])]);
        free_state[i] = static_cast<int>(rem % card);
        rem /= card;
      }
      for (std::size_t i = sorted.size(); i-- > 0;) {
        const auto card = static_cast<std::uint64_t>(
            cards[static_cast<std::size_t>(sorted[i])]);
        subset_state[i] = static_cast<int>(rem % card);
        rem /= card;
      }
      std::uint64_t idx = 0;
      for (int v : f.scope) {
        const auto card =
            static_cast<std::uint64_t>(cards[static_cast<std::size_t>(v)]);
        int value;
        const int pos = in_subset[static_cast<std::size_t>(v)];
        if (pos >= 0) {
          value = subset_state[static_cast<std::size_t>(pos)];
        } else {
          const auto it =
              std::find(free_scope.begin(), free_scope.end(), v);
          value = free_state[static_cast<std::size_t>(
              std::distance(free_scope.begin(), it))];
        }
        idx = idx * card + static_cast<std::uint64_t>(value);
      }
      nf.log_table[static_cast<std::size_t>(out)] = f.log_table[idx];
    }
    new_factors.push_back(std::move(nf));
  }

  SubsetModel out{GraphicalModel(1 + static_cast<int>(rest.size()),
                                 std::move(new_cards), std::move(new_factors)),
                  std::move(sorted), std::move(rest)};
  return out;
}

}  // namespace pmap
