#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "pmap/exact.hpp"
#include "pmap/stats.hpp"
#include "pmap/tricks.hpp"

using namespace pmap;

namespace {

constexpr double kPi = std::numbers::pi;

GraphicalModel z6_model() {
  return GraphicalModel(
      2, {2, 2}, {Factor{{0, 1}, {std::log(2.0), 0.0, 0.0, std::log(2.0)}}});
}

GraphicalModel point_model(double phi0) {
  // Single variable, single state: Z = e^{phi0}.
  return GraphicalModel(1, {1}, {Factor{{0}, {phi0}}});
}

std::vector<double> exp_clock_draws(double Z, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> t(static_cast<std::size_t>(count));
  for (auto& v : t) v = rng.exponential() / Z;
  return t;
}

}  // namespace

TEST_CASE("g_transform: table values") {
  CHECK(g_transform(TrickSpec::gumbel(), 1.0) ==
        doctest::Approx(-kEulerGamma).epsilon(1e-12));
  CHECK(g_transform(TrickSpec::weibull(2.0), 3.0) == doctest::Approx(9.0));
  CHECK(g_transform(TrickSpec::tail(1.0), 0.5) == 0.0);
  CHECK(g_transform(TrickSpec::tail(1.0), 1.5) == 1.0);
  CHECK(g_transform(TrickSpec::exponential(), 0.7) == doctest::Approx(0.7));
  CHECK(g_transform(TrickSpec::pareto(), 0.1) ==
        doctest::Approx(std::exp(0.1)));
  CHECK_THROWS_AS(g_transform(TrickSpec::gumbel(), 0.0), std::domain_error);
  CHECK_THROWS_AS(g_transform(TrickSpec::frechet(-0.5), 0.0),
                  std::domain_error);
  CHECK_THROWS_AS(g_transform(TrickSpec::weibull(1.0), -0.1),
                  std::domain_error);
}

TEST_CASE("f and its inverse") {
  CHECK(f_of_Z(TrickSpec::exponential(), 2.0) == doctest::Approx(0.5));
  CHECK(f_inverse(TrickSpec::exponential(), 0.5) == doctest::Approx(2.0));
  for (double z : {0.5, 1.0, 3.0})
    CHECK(f_of_Z(TrickSpec::weibull(1.0), z) ==
          doctest::Approx(f_of_Z(TrickSpec::exponential(), z)).epsilon(1e-12));
  CHECK_THROWS_AS(f_of_Z(TrickSpec::pareto(), 1.0), std::domain_error);
  CHECK_THROWS_AS(f_inverse(TrickSpec::tail(1.0), 0.0), EstimateDomainError);

  const std::vector<TrickSpec> tricks{
      TrickSpec::gumbel(),       TrickSpec::exponential(),
      TrickSpec::weibull(0.5),   TrickSpec::weibull(2.0),
      TrickSpec::frechet(-0.3),  TrickSpec::pareto(),
      TrickSpec::tail(0.7)};
  for (const auto& trick : tricks) {
    for (double z : {0.5, 1.0, 6.0}) {
      if (trick.kind == TrickKind::pareto && z <= 1.0) continue;
      CHECK(f_inverse(trick, f_of_Z(trick, z)) ==
            doctest::Approx(z).epsilon(1e-10));
    }
  }
}

TEST_CASE("every trick's transformed clock mean is f(Z)") {
  // 10^6 unit-rate exponential clocks scaled to rate Z; each trick's g(T)
  // must average to f(Z) within four standard errors.
  const double Z = 6.0;
  const auto t = exp_clock_draws(Z, 1000000, 11);
  const std::vector<TrickSpec> tricks{
      TrickSpec::gumbel(),      TrickSpec::exponential(),
      TrickSpec::weibull(0.5),  TrickSpec::weibull(2.0),
      TrickSpec::frechet(-0.3), TrickSpec::pareto(),
      TrickSpec::tail(0.1)};
  for (const auto& trick : tricks) {
    std::vector<double> g(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) g[i] = g_transform(trick, t[i]);
    const SampleMoments mom = sample_moments(g);
    const double want = f_of_Z(trick, Z);
    INFO(trick.name());
    CHECK(std::abs(mom.mean - want) <= 4.0 * mom.std_error);
  }
}

TEST_CASE("full-rank max: location and argmax law") {
  // Z = 1: the max value itself is centred Gumbel noise.
  {
    const GraphicalModel m = point_model(0.0);
    Rng rng(3);
    std::vector<double> v(100000);
    const FullRankSampler sampler(m);
    for (auto& x : v) x = sampler.sample(rng).value;
    const SampleMoments mom = sample_moments(v);
    CHECK(std::abs(mom.mean) <= 4.0 * mom.std_error);
  }
  // Flat two-variable model: mean ln 4.
  {
    const GraphicalModel m(2, {2, 2}, {});
    Rng rng(4);
    const FullRankSampler sampler(m);
    std::vector<double> v(100000);
    for (auto& x : v) x = sampler.sample(rng).value;
    const SampleMoments mom = sample_moments(v);
    CHECK(std::abs(mom.mean - std::log(4.0)) <=
          3.0 * (kPi / std::sqrt(6.0)) / std::sqrt(100000.0));
  }
  // Argmax frequencies against the exact Gibbs table.
  {
    const GraphicalModel m = z6_model();
    const ExactSummary oracle = summarize(m);
    const FullRankSampler sampler(m);
    Rng rng(5);
    const int draws = 100000;
    std::vector<double> freq(4, 0.0);
    for (int i = 0; i < draws; ++i) {
      const FullRankSample s = sampler.sample(rng);
      freq[static_cast<std::size_t>(
          index_of_configuration(s.config, m.cardinalities()))] += 1.0;
    }
    for (int x = 0; x < 4; ++x) {
      const double p = oracle.gibbs[static_cast<std::size_t>(x)];
      const double se = std::sqrt(p * (1.0 - p) / draws);
      CHECK(std::abs(freq[static_cast<std::size_t>(x)] / draws - p) <=
            3.0 * se);
    }
  }
}

TEST_CASE("estimate: single gumbel value is returned unchanged") {
  const std::vector<double> one{1.234};
  const EstimateReport r =
      estimate(TrickSpec::gumbel(), one, Target::ln_z, false);
  CHECK(r.estimate == doctest::Approx(1.234));
  CHECK(r.std_error == 0.0);
  CHECK(r.sample_count == 1);
}

TEST_CASE("estimate: exponential-trick Z lands near the oracle") {
  const GraphicalModel m = z6_model();
  const FullRankSampler sampler(m);
  Rng rng(6);
  std::vector<double> v(10000);
  for (auto& x : v) x = sampler.sample(rng).value;
  const EstimateReport r =
      estimate(TrickSpec::exponential(), v, Target::z, false);
  CHECK(std::abs(r.estimate - 6.0) <= 3.0 * r.std_error);
}

TEST_CASE("estimate: debiased exponential lnZ at M=1 matches the gumbel form") {
  const std::vector<double> v{0.897};  // arbitrary max value
  const double t = std::exp(-kEulerGamma - v[0]);
  const EstimateReport r =
      estimate(TrickSpec::exponential(), v, Target::ln_z, true);
  CHECK(r.debiased);
  CHECK(r.estimate == doctest::Approx(-std::log(t) - kEulerGamma).epsilon(1e-12));
  // which equals the gumbel estimator's value at M = 1:
  CHECK(r.estimate == doctest::Approx(v[0]).epsilon(1e-12));
}

TEST_CASE("estimate: gumbel Z debiasing divides out the exact factor") {
  Rng rng(14);
  std::vector<double> v(500);
  for (auto& x : v) x = rng.gumbel();  // Z = 1 draws
  const EstimateReport raw =
      estimate(TrickSpec::gumbel(), v, Target::z, false);
  const EstimateReport fixed =
      estimate(TrickSpec::gumbel(), v, Target::z, true);
  const double factor =
      std::exp(500.0 * ln_gamma(1.0 - 1.0 / 500.0) - kEulerGamma);
  CHECK(fixed.debiased);
  CHECK(fixed.estimate == doctest::Approx(raw.estimate / factor).epsilon(1e-12));
}

TEST_CASE("estimate: tail trick error carries the raw mean") {
  const std::vector<double> v(8, 50.0);  // clocks far below any threshold
  try {
    estimate(TrickSpec::tail(1.0), v, Target::z, false);
    FAIL("expected EstimateDomainError");
  } catch (const EstimateDomainError& e) {
    CHECK(e.raw_mean() == 0.0);
  }
}

TEST_CASE("analytic stats: frozen values") {
  const AnalyticStats exp_z =
      analytic_stats(TrickSpec::exponential(), Target::z, 1.0, 10);
  CHECK(exp_z.valid);
  CHECK(exp_z.mse == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

  const AnalyticStats gum_ln =
      analytic_stats(TrickSpec::gumbel(), Target::ln_z, 3.7, 6);
  CHECK(gum_ln.valid);
  CHECK(gum_ln.bias_sq == 0.0);
  CHECK(gum_ln.mse == doctest::Approx(kPi * kPi / 36.0).epsilon(1e-12));

  const AnalyticStats gum_z2 =
      analytic_stats(TrickSpec::gumbel(), Target::z, 1.0, 2);
  CHECK_FALSE(gum_z2.valid);

  const AnalyticStats exp_ln =
      analytic_stats(TrickSpec::exponential(), Target::ln_z, 1.0, 1);
  CHECK(exp_ln.valid);
  CHECK(exp_ln.bias_sq ==
        doctest::Approx(kEulerGamma * kEulerGamma).epsilon(1e-12));
  CHECK(exp_ln.variance == doctest::Approx(kPi * kPi / 6.0).epsilon(1e-12));

  CHECK_THROWS_AS(
      analytic_stats(TrickSpec::pareto(), Target::z, 1.0, 10),
      std::invalid_argument);
}

TEST_CASE("analytic stats: mse decomposes into bias^2 + variance") {
  for (std::int64_t m : {3, 5, 10, 50, 200}) {
    for (Target target : {Target::z, Target::ln_z}) {
      for (const auto& trick :
           {TrickSpec::gumbel(), TrickSpec::exponential()}) {
        const AnalyticStats s = analytic_stats(trick, target, 2.5, m);
        REQUIRE(s.valid);
        CHECK(std::abs(s.mse - (s.bias_sq + s.variance)) <= 1e-12 * s.mse);
      }
    }
  }
}

TEST_CASE("asymptotic variance: table constants") {
  CHECK(asymptotic_variance(TrickSpec::gumbel(), 1.0) ==
        doctest::Approx(kPi * kPi / 6.0).epsilon(1e-12));
  CHECK(asymptotic_variance(TrickSpec::weibull(1.0), 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // The power-trick constant approaches the gumbel constant as alpha -> 0.
  CHECK(std::abs(asymptotic_variance(TrickSpec::weibull(1e-3), 1.0) -
                 kPi * kPi / 6.0) < 1e-2);
  CHECK(asymptotic_variance(TrickSpec::pareto(), 3.0) ==
        doctest::Approx(9.0).epsilon(1e-12));
  CHECK_THROWS_AS(asymptotic_variance(TrickSpec::frechet(-0.5), 1.0),
                  std::domain_error);
  CHECK_THROWS_AS(asymptotic_variance(TrickSpec::pareto(), 2.0),
                  std::domain_error);
  const double t = 0.5, z = 2.0;
  CHECK(asymptotic_variance(TrickSpec::tail(t), z) ==
        doctest::Approx(std::pow((1.0 - std::exp(-t * z)) / t, 2.0)));
}

TEST_CASE("bayes posterior mean equals the exponential-trick Z estimator") {
  CHECK(bayes_posterior_mean(std::vector<double>{0.5}) == doctest::Approx(2.0));
  CHECK(bayes_posterior_mean(std::vector<double>{1, 1, 1, 1}) ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(bayes_posterior_mean(std::vector<double>{0.0, 0.0}),
                  std::invalid_argument);

  const auto t = exp_clock_draws(3.0, 1000, 8);
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    v[i] = -std::log(t[i]) - kEulerGamma;  // back to max-value scale
  const EstimateReport r =
      estimate(TrickSpec::exponential(), v, Target::z, false);
  CHECK(bayes_posterior_mean(t) ==
        doctest::Approx(r.estimate).epsilon(1e-9));
}

TEST_CASE("clock recovery: transformed max values match direct clocks") {
  // The two constructions of g(T) are distributionally identical.
  const double Z = 6.0;
  const GraphicalModel m = z6_model();
  const FullRankSampler sampler(m);
  Rng rng(9);
  const int draws = 200000;
  for (const auto& trick :
       {TrickSpec::exponential(), TrickSpec::weibull(0.5),
        TrickSpec::tail(0.05)}) {
    std::vector<double> via_max(draws), via_clock(draws);
    Rng clock_rng(10);
    for (int i = 0; i < draws; ++i) {
      const double v = sampler.sample(rng).value;
      via_max[static_cast<std::size_t>(i)] =
          g_transform(trick, std::exp(-kEulerGamma - v));
      via_clock[static_cast<std::size_t>(i)] =
          g_transform(trick, clock_rng.exponential() / Z);
    }
    const SampleMoments a = sample_moments(via_max);
    const SampleMoments b = sample_moments(via_clock);
    const double combined =
        std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    INFO(trick.name());
    CHECK(std::abs(a.mean - b.mean) <= 4.0 * combined);
  }
}

TEST_CASE("gumbel lnZ estimator spread does not depend on Z") {
  const int draws = 200000;
  std::vector<double> v1(draws), v2(draws);
  const FullRankSampler s1(point_model(0.0));           // Z = 1
  const FullRankSampler s2(point_model(std::log(100.0)));  // Z = 100
  Rng r1(21), r2(22);
  for (int i = 0; i < draws; ++i) {
    v1[static_cast<std::size_t>(i)] = s1.sample(r1).value;
    v2[static_cast<std::size_t>(i)] = s2.sample(r2).value;
  }
  const SampleMoments m1 = sample_moments(v1);
  const SampleMoments m2 = sample_moments(v2);
  // Compare variances using the fourth-moment standard error.
  const auto var_se = [&](const std::vector<double>& v, double mean) {
    double m4 = 0.0, m2c = 0.0;
    for (double x : v) {
      const double d = x - mean;
      m2c += d * d;
      m4 += d * d * d * d;
    }
    m2c /= v.size();
    m4 /= v.size();
    return std::sqrt((m4 - m2c * m2c) / v.size());
  };
  const double combined = std::sqrt(std::pow(var_se(v1, m1.mean), 2) +
                                    std::pow(var_se(v2, m2.mean), 2));
  CHECK(std::abs(m1.variance - m2.variance) <= 4.0 * combined);
}

TEST_CASE("mse sweep: flags and cell bookkeeping") {
  const GraphicalModel m = point_model(0.0);
  const std::vector<double> alphas{0.0, 1.0};
  const std::vector<std::int64_t> sizes{1, 10};
  const auto cells = mse_sweep(m, alphas, sizes, 500, Target::z, 77);
  REQUIRE(cells.size() == 4);
  for (const auto& c : cells) {
    if (c.sample_count == 1) CHECK_FALSE(c.stable);
    if (c.sample_count == 10) CHECK(c.stable);
    CHECK(c.replicates == 500);
    CHECK(c.mse == doctest::Approx(c.bias_sq + c.variance).epsilon(1e-12));
  }
}

TEST_CASE("mse sweep is deterministic") {
  const GraphicalModel m = point_model(0.0);
  const std::vector<double> alphas{0.5};
  const std::vector<std::int64_t> sizes{20};
  const auto a = mse_sweep(m, alphas, sizes, 200, Target::ln_z, 5);
  const auto b = mse_sweep(m, alphas, sizes, 200, Target::ln_z, 5);
  CHECK(a[0].mse == b[0].mse);
  CHECK(a[0].bias == b[0].bias);
}
