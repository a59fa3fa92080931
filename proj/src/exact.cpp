#include "pmap/exact.hpp"

#include <cmath>
#include <stdexcept>

namespace pmap {

ExactSummary summarize(const GraphicalModel& model, std::uint64_t cap) {
  std::vector<double> table = potential_table(model, cap);

  double hi = kNegInf;
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i] > hi) {
      hi = table[i];
      argmax = i;
    }
  }
  if (hi == kNegInf)
    throw std::runtime_error("all configurations have zero probability");

  double acc = 0.0;
  for (double v : table) acc += std::exp(v - hi);
  const double log_z = hi + std::log(acc);

  ExactSummary summary;
  summary.log_partition = log_z;
  summary.map_value = hi;
  summary.map_config =
      configuration_of_index(static_cast<std::uint64_t>(argmax),
                             model.cardinalities());
  summary.gibbs.resize(table.size());
  for (std::size_t i = 0; i < table.size(); ++i)
    summary.gibbs[i] = std::exp(table[i] - log_z);
  return summary;
}

double entropy(std::span<const double> dist) {
  double total = 0.0;
  for (double q : dist) {
    if (std::isnan(q) || q < 0.0)
      throw std::invalid_argument("entropy: negative entry");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("entropy: input is not normalized");
  double h = 0.0;
  for (double q : dist)
    if (q > 0.0) h -= q * std::log(q);
  return h < 0.0 ? 0.0 : h;
}

double kl_divergence(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size())
    throw std::invalid_argument("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    if (p[i] == 0.0)
      throw std::invalid_argument(
          "kl_divergence: q has mass outside the support of p");
    kl += q[i] * std::log(q[i] / p[i]);
  }
  return kl;
}

}  // namespace pmap
