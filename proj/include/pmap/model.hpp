#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmap/rng.hpp"
#include "pmap/stats.hpp"

namespace pmap {

// Largest configuration space that exhaustive operations will enumerate.
inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 22;

using Configuration = std::vector<int>;

// One dense log-potential table over an ordered variable scope. Tables are
// row-major with the last scope variable fastest, matching the UAI text
// format.
struct Factor {
  std::vector<int> scope;
  std::vector<double> log_table;
};

// Entries of every stored log-table are kept in log(exp(v)) canonical form.
// 17-significant-digit decimal output round-trips doubles exactly, and
// log(exp(.)) is idempotent, so a canonical model survives a save/load cycle
// with bit-identical log-tables.
double canonical_log(double v);

// A discrete graphical model: n variables with given cardinalities and a set
// of log-space factors. Immutable after construction; all operations on it
// are pure, so models can be shared freely across concurrent workers.
//
// Construction validates structure: factor scopes are non-empty,
// duplicate-free and in range, table sizes match scope cardinalities, and no
// entry is NaN or +inf. Zero probability is represented as -inf and
// propagates through potential sums. (Whether some configuration has finite
// total potential is checked by the enumerating consumers, not here.)
class GraphicalModel {
 public:
  GraphicalModel(int variable_count, std::vector<int> cardinalities,
                 std::vector<Factor> factors);

  int variable_count() const { return n_; }
  const std::vector<int>& cardinalities() const { return cards_; }
  const std::vector<Factor>& factors() const { return factors_; }

  // Product of all cardinalities, saturating at 2^63.
  std::uint64_t configuration_count() const;

  bool valid_configuration(std::span<const int> x) const;

 private:
  int n_;
  std::vector<int> cards_;
  std::vector<Factor> factors_;
};

// phi(x): sum of factor log-values at x; -inf as soon as any factor vanishes.
double potential(const GraphicalModel& model, std::span<const int> x);

// Dense phi over all configurations, indexed like index_of_configuration.
// Throws when the configuration count exceeds cap.
std::vector<double> potential_table(const GraphicalModel& model,
                                    std::uint64_t cap = kDefaultEnumerationCap);

// Mixed-radix mapping between configurations and flat indices. Variable 0 is
// the most significant digit (last variable fastest), so flat-index order is
// lexicographic order on configurations.
std::uint64_t index_of_configuration(std::span<const int> x,
                                     std::span<const int> cards);
Configuration configuration_of_index(std::uint64_t index,
                                     std::span<const int> cards);

// Result of fixing a leading block of variables. The remaining model is over
// variables prefix.size()..n-1 (re-indexed from 0); factors fully covered by
// the prefix are folded into log_offset, so
//   potential(original, prefix+suffix) ==
//   potential(clamped.model, suffix) + clamped.log_offset.
// A full prefix leaves a zero-variable model with the whole potential in
// log_offset.
struct ClampedModel {
  GraphicalModel model;
  double log_offset = 0.0;
};

ClampedModel clamp(const GraphicalModel& model, std::span<const int> prefix);

// UAI-MARKOV text format. Tables hold probabilities; the loader takes natural
// logs entrywise (0 maps to -inf) and the writer prints exp(log_value) with
// 17 significant digits.
GraphicalModel load_uai(const std::string& text);
std::string save_uai(const GraphicalModel& model);

enum class CouplingMode { attractive, mixed };

// Binary pairwise grid with rows*cols variables (row-major node order).
// Unary strength theta_i ~ U[-1,1] gives the log-table (-theta_i, +theta_i);
// edge strength theta_ij ~ U[0,C] (attractive) or U[-C,C] (mixed) gives
// +theta_ij on agreeing states and -theta_ij on disagreeing ones, i.e. the
// usual Ising energy on spins {-1,+1} mapped from states {0,1}.
//
// Draw order (one Rng(seed) stream): first theta_i for i = 0..n-1, then edge
// parameters in node order, right neighbour before down neighbour.
GraphicalModel spin_glass_grid(int rows, int cols, double coupling,
                               CouplingMode mode, std::uint64_t seed);

}  // namespace pmap
