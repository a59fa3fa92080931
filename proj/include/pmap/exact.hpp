#pragma once

#include <span>
#include <vector>

#include "pmap/model.hpp"

namespace pmap {

// Brute-force ground truth over the full configuration space. The Gibbs
// table is indexed like index_of_configuration; the MAP tie-break is the
// lexicographically smallest configuration, so the summary is deterministic.
struct ExactSummary {
  double log_partition = 0.0;
  std::vector<double> gibbs;
  Configuration map_config;
  double map_value = 0.0;
};

// Enumerates all configurations (throws past cap) accumulating via streaming
// log-sum-exp; throws when every configuration has -inf potential.
ExactSummary summarize(const GraphicalModel& model,
                       std::uint64_t cap = kDefaultEnumerationCap);

// -sum q ln q with 0 ln 0 = 0. Input must be a distribution: entries >= 0,
// total within 1e-9 of 1.
double entropy(std::span<const double> dist);

// sum q ln(q/p), terms with q = 0 contribute 0. Throws when q puts mass
// where p has none.
double kl_divergence(std::span<const double> q, std::span<const double> p);

}  // namespace pmap
