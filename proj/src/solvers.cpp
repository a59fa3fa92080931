#include "pmap/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pmap {

namespace {

void check_offsets(const GraphicalModel& model, const UnaryOffsets& offsets) {
  if (!(offsets.scale > 0.0))
    throw std::invalid_argument("offset scale must be positive");
  if (offsets.delta.size() !=
      static_cast<std::size_t>(model.variable_count()))
    throw std::invalid_argument("offset table count mismatch");
  for (int i = 0; i < model.variable_count(); ++i) {
    const auto& table = offsets.delta[static_cast<std::size_t>(i)];
    if (table.size() != static_cast<std::size_t>(
                            model.cardinalities()[static_cast<std::size_t>(i)]))
      throw std::invalid_argument("offset table length mismatch");
    for (double v : table)
      if (!std::isfinite(v))
        throw std::invalid_argument("offset entries must be finite");
  }
}

double offsets_at(const UnaryOffsets& offsets, std::span<const int> x) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    sum += offsets.delta[i][static_cast<std::size_t>(x[i])];
  return offsets.scale * sum;
}

}  // namespace

UnaryOffsets UnaryOffsets::zeros(const GraphicalModel& model, double scale) {
  UnaryOffsets o;
  o.scale = scale;
  o.delta.resize(static_cast<std::size_t>(model.variable_count()));
  for (int i = 0; i < model.variable_count(); ++i)
    o.delta[static_cast<std::size_t>(i)].assign(
        static_cast<std::size_t>(
            model.cardinalities()[static_cast<std::size_t>(i)]),
        0.0);
  return o;
}

ExhaustiveMapSolver::ExhaustiveMapSolver(const GraphicalModel& model,
                                         std::uint64_t cap)
    : model_(model), phi_(potential_table(model, cap)) {}

MapResult ExhaustiveMapSolver::solve(const UnaryOffsets& offsets,
                                     Rng& /*rng*/) const {
  check_offsets(model_, offsets);
  const auto& cards = model_.cardinalities();
  const int n = model_.variable_count();

  // Expand scale * sum_i delta_i(x_i) over all configurations in place,
  // variable by variable: after step i the buffer holds sums over the first
  // i+1 variables. Backward iteration keeps the expansion in place.
  thread_local std::vector<double> buf;
  buf.resize(phi_.size());
  std::size_t size = 1;
  buf[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& table = offsets.delta[static_cast<std::size_t>(i)];
    const std::size_t card = table.size();
    for (std::size_t b = size; b-- > 0;) {
      const double base = buf[b];
      for (std::size_t s = card; s-- > 0;)
        buf[b * card + s] = base + table[s];
    }
    size *= card;
  }

  double best = kNegInf;
  std::size_t best_idx = 0;
  bool found = false;
  for (std::size_t idx = 0; idx < phi_.size(); ++idx) {
    if (phi_[idx] == kNegInf) continue;
    const double value = phi_[idx] + offsets.scale * buf[idx];
    if (!found || value > best) {
      best = value;
      best_idx = idx;
      found = true;
    }
  }

  MapResult result;
  result.exact = true;
  if (!found) {
    result.value = kNegInf;
    result.config = configuration_of_index(0, cards);
    return result;
  }
  result.value = best;
  result.config =
      configuration_of_index(static_cast<std::uint64_t>(best_idx), cards);
  return result;
}

IcmMapSolver::IcmMapSolver(const GraphicalModel& model, int restarts)
    : model_(model), restarts_(restarts) {
  if (restarts_ < 1) throw std::invalid_argument("restarts must be >= 1");
  factors_of_var_.resize(static_cast<std::size_t>(model_.variable_count()));
  for (std::size_t f = 0; f < model_.factors().size(); ++f)
    for (int v : model_.factors()[f].scope)
      factors_of_var_[static_cast<std::size_t>(v)].push_back(f);
}

std::string IcmMapSolver::name() const {
  return "icm[restarts=" + std::to_string(restarts_) + "]";
}

MapResult IcmMapSolver::solve(const UnaryOffsets& offsets, Rng& rng) const {
  check_offsets(model_, offsets);
  const auto& cards = model_.cardinalities();
  const int n = model_.variable_count();

  MapResult best;
  best.value = kNegInf;
  best.exact = false;
  Configuration x(static_cast<std::size_t>(n));

  for (int restart = 0; restart < restarts_; ++restart) {
    for (int i = 0; i < n; ++i)
      x[static_cast<std::size_t>(i)] = static_cast<int>(
          rng.next_u64() %
          static_cast<std::uint64_t>(cards[static_cast<std::size_t>(i)]));

    bool changed = true;
    while (changed) {
      changed = false;
      for (int i = 0; i < n; ++i) {
        const int card = cards[static_cast<std::size_t>(i)];
        const int before = x[static_cast<std::size_t>(i)];
        int best_state = before;
        double best_local = kNegInf;
        for (int s = 0; s < card; ++s) {
          x[static_cast<std::size_t>(i)] = s;
          double local =
              offsets.scale * offsets.delta[static_cast<std::size_t>(i)]
                                           [static_cast<std::size_t>(s)];
          for (std::size_t f : factors_of_var_[static_cast<std::size_t>(i)]) {
            const auto& factor = model_.factors()[f];
            std::uint64_t idx = 0;
            for (int v : factor.scope)
              idx = idx * static_cast<std::uint64_t>(
                              cards[static_cast<std::size_t>(v)]) +
                    static_cast<std::uint64_t>(x[static_cast<std::size_t>(v)]);
            const double entry = factor.log_table[idx];
            if (entry == kNegInf) {
              local = kNegInf;
              break;
            }
            local += entry;
          }
          if (local > best_local) {
            best_local = local;
            best_state = s;
          }
        }
        x[static_cast<std::size_t>(i)] = best_state;
        if (best_state != before) changed = true;
      }
    }

    const double value = potential(model_, x) + offsets_at(offsets, x);
    if (value > best.value || best.config.empty()) {
      best.value = value;
      best.config = x;
    }
  }
  return best;
}

MapResult solve_exhaustive(const GraphicalModel& model,
                           const UnaryOffsets& offsets, std::uint64_t cap) {
  Rng rng(0);
  return ExhaustiveMapSolver(model, cap).solve(offsets, rng);
}

MapResult solve_icm(const GraphicalModel& model, const UnaryOffsets& offsets,
                    int restarts, std::uint64_t seed) {
  Rng rng(seed);
  return IcmMapSolver(model, restarts).solve(offsets, rng);
}

std::unique_ptr<MapSolver> SolverSpec::build(
    const GraphicalModel& model) const {
  if (kind == Kind::exhaustive)
    return std::make_unique<ExhaustiveMapSolver>(model, enumeration_cap);
  return std::make_unique<IcmMapSolver>(model, icm_restarts);
}

std::string SolverSpec::name() const {
  if (kind == Kind::exhaustive) return "exhaustive";
  return "icm[restarts=" + std::to_string(icm_restarts) + "]";
}

SolverSpec SolverSpec::exhaustive(std::uint64_t cap) {
  SolverSpec spec;
  spec.kind = Kind::exhaustive;
  spec.enumeration_cap = cap;
  return spec;
}

SolverSpec SolverSpec::icm(int restarts) {
  SolverSpec spec;
  spec.kind = Kind::icm;
  spec.icm_restarts = restarts;
  return spec;
}

}  // namespace pmap
