#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pmap/model.hpp"
#include "pmap/rng.hpp"

namespace pmap {

// Per-variable additive offset tables delta_i, applied as
// scale * sum_i delta_i(x_i). scale is 1 for summed offsets and 1/n for
// averaged ones. Every perturbation scheme in this library is expressed this
// way (joint flattening turns full-configuration and subset noise into a
// single-variable table).
struct UnaryOffsets {
  std::vector<std::vector<double>> delta;
  double scale = 1.0;

  static UnaryOffsets zeros(const GraphicalModel& model, double scale = 1.0);
};

struct MapResult {
  Configuration config;
  double value = 0.0;  // phi(config) + scale * sum_i delta_i(config_i)
  bool exact = false;
};

// Common solver contract for max_x { phi(x) + scale * sum delta_i(x_i) }.
// A solver is bound to one model at construction so that per-model
// preprocessing is paid once per model rather than once per solve. Solvers
// are safe to call concurrently: solve() only touches per-call state.
class MapSolver {
 public:
  virtual ~MapSolver() = default;
  virtual MapResult solve(const UnaryOffsets& offsets, Rng& rng) const = 0;
  virtual const GraphicalModel& model() const = 0;
  virtual std::string name() const = 0;
};

// Globally optimal by enumeration; ties broken by the lexicographically
// smallest configuration. Throws at construction when the configuration
// count exceeds the cap.
class ExhaustiveMapSolver final : public MapSolver {
 public:
  explicit ExhaustiveMapSolver(const GraphicalModel& model,
                               std::uint64_t cap = kDefaultEnumerationCap);
  MapResult solve(const UnaryOffsets& offsets, Rng& rng) const override;
  const GraphicalModel& model() const override { return model_; }
  std::string name() const override { return "exhaustive"; }

 private:
  GraphicalModel model_;
  std::vector<double> phi_;
};

// Iterated conditional modes: coordinate ascent from random initial
// configurations (drawn from the rng passed to solve), sweeping variables in
// ascending index order until a full sweep changes nothing; the best local
// maximum over all restarts is kept. Never exceeds the true maximum.
class IcmMapSolver final : public MapSolver {
 public:
  IcmMapSolver(const GraphicalModel& model, int restarts);
  MapResult solve(const UnaryOffsets& offsets, Rng& rng) const override;
  const GraphicalModel& model() const override { return model_; }
  std::string name() const override;

 private:
  GraphicalModel model_;
  int restarts_;
  std::vector<std::vector<std::size_t>> factors_of_var_;
};

MapResult solve_exhaustive(const GraphicalModel& model,
                           const UnaryOffsets& offsets,
                           std::uint64_t cap = kDefaultEnumerationCap);
MapResult solve_icm(const GraphicalModel& model, const UnaryOffsets& offsets,
                    int restarts, std::uint64_t seed);

// Recipe for building a solver on any (sub)model; the perturbation machinery
// clamps and reshapes models on the fly, so it carries one of these instead
// of a solver instance.
struct SolverSpec {
  enum class Kind { exhaustive, icm };
  Kind kind = Kind::exhaustive;
  int icm_restarts = 20;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;

  std::unique_ptr<MapSolver> build(const GraphicalModel& model) const;
  std::string name() const;

  static SolverSpec exhaustive(std::uint64_t cap = kDefaultEnumerationCap);
  static SolverSpec icm(int restarts);
};

}  // namespace pmap
