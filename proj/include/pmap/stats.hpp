#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

namespace pmap {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// ln(sum exp(a_i)); -inf entries drop out, all -inf gives -inf.
inline double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased, 0 when fewer than two samples
  double std_error = 0.0;
  std::int64_t count = 0;
};

inline SampleMoments sample_moments(std::span<const double> values) {
  SampleMoments m;
  m.count = static_cast<std::int64_t>(values.size());
  if (m.count == 0) throw std::invalid_argument("sample_moments: empty input");
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(m.count);
  if (m.count > 1) {
    double ss = 0.0;
    for (double v : values) {
      const double d = v - m.mean;
      ss += d * d;
    }
    m.variance = ss / static_cast<double>(m.count - 1);
    m.std_error = std::sqrt(m.variance / static_cast<double>(m.count));
  }
  return m;
}

// ln of the sample mean of exp(a_i), with a delta-method standard error for
// that log-mean. Computed through log-sum-exp so large |a_i| cannot overflow.
struct LogMeanExp {
  double log_mean;
  double se_log;  // sd(exp a) / (mean * sqrt(M)), 0 when M == 1
};

inline LogMeanExp log_mean_exp(std::span<const double> values) {
  const auto count = static_cast<double>(values.size());
  if (values.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf)
    throw std::domain_error("log_mean_exp: all terms vanish");
  double s1 = 0.0, s2 = 0.0;
  for (double v : values) {
    const double e = std::exp(v - hi);
    s1 += e;
    s2 += e * e;
  }
  LogMeanExp out;
  out.log_mean = hi + std::log(s1) - std::log(count);
  if (values.size() > 1) {
    // ratio = mean(y^2)/mean(y)^2 >= 1; relative sample variance is
    // (ratio - 1) * M / (M - 1).
    const double ratio = std::max(1.0, s2 * count / (s1 * s1));
    out.se_log = std::sqrt((ratio - 1.0) / (count - 1.0));
  } else {
    out.se_log = 0.0;
  }
  return out;
}

// Digamma at positive integer argument: psi(m) = -gamma + sum_{k<m} 1/k.
inline double digamma_int(std::int64_t m) {
  if (m < 1) throw std::invalid_argument("digamma_int: m must be positive");
  double acc = 0.0;
  for (std::int64_t k = m - 1; k >= 1; --k) acc += 1.0 / static_cast<double>(k);
  return acc - 0.57721566490153286;
}

// Trigamma at positive integer argument: psi1(m) = pi^2/6 - sum_{k<m} 1/k^2.
inline double trigamma_int(std::int64_t m) {
  if (m < 1) throw std::invalid_argument("trigamma_int: m must be positive");
  double acc = 0.0;
  for (std::int64_t k = m - 1; k >= 1; --k) {
    const double kd = static_cast<double>(k);
    acc += 1.0 / (kd * kd);
  }
  return std::numbers::pi * std::numbers::pi / 6.0 - acc;
}

inline double ln_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("ln_gamma: argument must be > 0");
  return std::lgamma(x);
}

}  // namespace pmap
