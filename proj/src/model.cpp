#include "pmap/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace pmap {

namespace {

std::uint64_t checked_table_size(std::span<const int> scope,
                                 std::span<const int> cards) {
  std::uint64_t size = 1;
  for (int v : scope) {
    size *= static_cast<std::uint64_t>(cards[static_cast<std::size_t>(v)]);
    if (size > (std::uint64_t{1} << 40))
      throw std::invalid_argument("factor table too large");
  }
  return size;
}

}  // namespace

double canonical_log(double v) {
  if (std::isnan(v)) return v;
  if (std::isinf(v)) return v;
  return std::log(std::exp(v));
}

GraphicalModel::GraphicalModel(int variable_count,
                               std::vector<int> cardinalities,
                               std::vector<Factor> factors)
    : n_(variable_count),
      cards_(std::move(cardinalities)),
      factors_(std::move(factors)) {
  if (n_ < 0) throw std::invalid_argument("negative variable count");
  if (static_cast<int>(cards_.size()) != n_)
    throw std::invalid_argument("cardinality list length mismatch");
  for (int c : cards_)
    if (c < 1) throw std::invalid_argument("cardinality must be >= 1");
  if (n_ == 0 && !factors_.empty())
    throw std::invalid_argument("factors on a zero-variable model");

  for (auto& f : factors_) {
    if (f.scope.empty()) throw std::invalid_argument("empty factor scope");
    std::unordered_set<int> seen;
    for (int v : f.scope) {
      if (v < 0 || v >= n_)
        throw std::invalid_argument("scope index out of range");
      if (!seen.insert(v).second)
        throw std::invalid_argument("duplicate variable in factor scope");
    }
    const std::uint64_t want = checked_table_size(f.scope, cards_);
    if (f.log_table.size() != want)
      throw std::invalid_argument("table-length mismatch");
    for (auto& v : f.log_table) {
      v = canonical_log(v);
      if (std::isnan(v) || v == kPosInf)
        throw std::invalid_argument("non-finite log-potential entry");
    }
  }
}

std::uint64_t GraphicalModel::configuration_count() const {
  std::uint64_t count = 1;
  for (int c : cards_) {
    if (count > (std::uint64_t{1} << 63) / static_cast<std::uint64_t>(c))
      return std::uint64_t{1} << 63;
    count *= static_cast<std::uint64_t>(c);
  }
  return count;
}

bool GraphicalModel::valid_configuration(std::span<const int> x) const {
  if (static_cast<int>(x.size()) != n_) return false;
  for (int i = 0; i < n_; ++i)
    if (x[i] < 0 || x[i] >= cards_[static_cast<std::size_t>(i)]) return false;
  return true;
}

double potential(const GraphicalModel& model, std::span<const int> x) {
  if (!model.valid_configuration(x))
    throw std::invalid_argument("configuration out of range");
  double total = 0.0;
  for (const auto& f : model.factors()) {
    std::uint64_t idx = 0;
    for (int v : f.scope) {
      idx = idx * static_cast<std::uint64_t>(
                      model.cardinalities()[static_cast<std::size_t>(v)]) +
            static_cast<std::uint64_t>(x[static_cast<std::size_t>(v)]);
    }
    const double entry = f.log_table[idx];
    if (entry == kNegInf) return kNegInf;
    total += entry;
  }
  return total;
}

std::uint64_t index_of_configuration(std::span<const int> x,
                                     std::span<const int> cards) {
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    idx = idx * static_cast<std::uint64_t>(cards[i]) +
          static_cast<std::uint64_t>(x[i]);
  return idx;
}

Configuration configuration_of_index(std::uint64_t index,
                                     std::span<const int> cards) {
  Configuration x(cards.size());
  for (std::size_t i = cards.size(); i-- > 0;) {
    const auto c = static_cast<std::uint64_t>(cards[i]);
    x[i] = static_cast<int>(index % c);
    index /= c;
  }
  return x;
}

std::vector<double> potential_table(const GraphicalModel& model,
                                    std::uint64_t cap) {
  const std::uint64_t count = model.configuration_count();
  if (count > cap)
    throw std::runtime_error("enumeration cap exceeded");
  std::vector<double> table(static_cast<std::size_t>(count), 0.0);
  const auto& cards = model.cardinalities();
  for (const auto& f : model.factors()) {
    // Stride of each scope variable in the global flat index.
    std::vector<std::uint64_t> strides(f.scope.size());
    std::uint64_t run = 1;
    for (int i = model.variable_count() - 1; i >= 0; --i) {
      for (std::size_t k = 0; k < f.scope.size(); ++k)
        if (f.scope[k] == i) strides[k] = run;
      run *= static_cast<std::uint64_t>(cards[static_cast<std::size_t>(i)]);
    }
    for (std::uint64_t idx = 0; idx < count; ++idx) {
      std::uint64_t t = 0;
      for (std::size_t k = 0; k < f.scope.size(); ++k) {
        const auto card = static_cast<std::uint64_t>(
            cards[static_cast<std::size_t>(f.scope[k])]);
        t = t * card + (idx / strides[k]) % card;
      }
      const double entry = f.log_table[t];
      double& cell = table[static_cast<std::size_t>(idx)];
      cell = (entry == kNegInf || cell == kNegInf) ? kNegInf : cell + entry;
    }
  }
  return table;
}

ClampedModel clamp(const GraphicalModel& model, std::span<const int> prefix) {
  const int fixed = static_cast<int>(prefix.size());
  if (fixed > model.variable_count())
    throw std::invalid_argument("prefix longer than variable count");
  const auto& cards = model.cardinalities();
  for (int i = 0; i < fixed; ++i)
    if (prefix[i] < 0 || prefix[i] >= cards[static_cast<std::size_t>(i)])
      throw std::invalid_argument("prefix value out of range");

  const int remaining = model.variable_count() - fixed;
  std::vector<int> new_cards(cards.begin() + fixed, cards.end());
  std::vector<Factor> new_factors;
  double offset = 0.0;

  for (const auto& f : model.factors()) {
    std::vector<std::size_t> free_pos;
    for (std::size_t k = 0; k < f.scope.size(); ++k)
      if (f.scope[k] >= fixed) free_pos.push_back(k);

    if (free_pos.empty()) {
      // Fully covered: a single entry folds into the additive constant.
      std::uint64_t idx = 0;
      for (int v : f.scope)
        idx = idx * static_cast<std::uint64_t>(
                        cards[static_cast<std::size_t>(v)]) +
              static_cast<std::uint64_t>(prefix[v]);
      const double entry = f.log_table[idx];
      offset = (entry == kNegInf || offset == kNegInf) ? kNegInf
                                                       : offset + entry;
      continue;
    }

    Factor nf;
    nf.scope.reserve(free_pos.size());
    std::uint64_t new_size = 1;
    for (std::size_t k : free_pos) {
      nf.scope.push_back(f.scope[k] - fixed);
      new_size *= static_cast<std::uint64_t>(
          cards[static_cast<std::size_t>(f.scope[k])]);
    }
    nf.log_table.resize(static_cast<std::size_t>(new_size));
    // Each new entry selects the old entry with prefix values substituted.
    std::vector<int> state(f.scope.size(), 0);
    for (std::uint64_t out = 0; out < new_size; ++out) {
      std::uint64_t rem = out;
      for (std::size_t k = free_pos.size(); k-- > 0;) {
        const auto card = static_cast<std::uint64_t>(
            cards[static_cast<std::size_t>(f.scope[free_pos[k]])]);
        state[free_pos[k]] = static_cast<int>(rem % card);
        rem /= card;
      }
      std::uint64_t idx = 0;
      for (std::size_t k = 0; k < f.scope.size(); ++k) {
        const int v = f.scope[k];
        const auto card =
            static_cast<std::uint64_t>(cards[static_cast<std::size_t>(v)]);
        const int value = v < fixed ? prefix[v] : state[k];
        idx = idx * card + static_cast<std::uint64_t>(value);
      }
      nf.log_table[static_cast<std::size_t>(out)] = f.log_table[idx];
    }
    new_factors.push_back(std::move(nf));
  }

  return ClampedModel{
      GraphicalModel(remaining, std::move(new_cards), std::move(new_factors)),
      offset};
}

namespace {

class TokenReader {
 public:
  explicit TokenReader(const std::string& text) : in_(text) {}

  std::string next_token(const char* what) {
    std::string tok;
    if (!(in_ >> tok))
      throw std::invalid_argument(std::string("unexpected end of input: ") +
                                  what);
    return tok;
  }

  long long next_int(const char* what) {
    const std::string tok = next_token(what);
    std::size_t pos = 0;
    long long value = 0;
    try {
      value = std::stoll(tok, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("expected integer for ") + what);
    }
    if (pos != tok.size())
      throw std::invalid_argument(std::string("expected integer for ") + what);
    return value;
  }

  double next_real(const char* what) {
    const std::string tok = next_token(what);
    std::size_t pos = 0;
    double value = 0;
    try {
      value = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("expected number for ") + what);
    }
    if (pos != tok.size())
      throw std::invalid_argument(std::string("expected number for ") + what);
    return value;
  }

  bool at_end() {
    std::string tok;
    return !(in_ >> tok);
  }

 private:
  std::istringstream in_;
};

}  // namespace

GraphicalModel load_uai(const std::string& text) {
  TokenReader reader(text);
  const std::string header = reader.next_token("header");
  if (header != "MARKOV")
    throw std::invalid_argument("malformed header: expected MARKOV");

  const long long n = reader.next_int("variable count");
  if (n < 1) throw std::invalid_argument("variable count must be >= 1");
  std::vector<int> cards(static_cast<std::size_t>(n));
  for (auto& c : cards) {
    const long long v = reader.next_int("cardinality");
    if (v < 1) throw std::invalid_argument("cardinality must be >= 1");
    c = static_cast<int>(v);
  }

  const long long factor_count = reader.next_int("factor count");
  if (factor_count < 0) throw std::invalid_argument("negative factor count");
  std::vector<Factor> factors(static_cast<std::size_t>(factor_count));

  for (auto& f : factors) {
    const long long scope_size = reader.next_int("scope size");
    if (scope_size < 1) throw std::invalid_argument("scope must be non-empty");
    f.scope.resize(static_cast<std::size_t>(scope_size));
    for (auto& v : f.scope) {
      const long long idx = reader.next_int("scope index");
      if (idx < 0 || idx >= n)
        throw std::invalid_argument("scope index out of range");
      v = static_cast<int>(idx);
    }
  }

  for (auto& f : factors) {
    const long long table_size = reader.next_int("table size");
    std::uint64_t want = 1;
    for (int v : f.scope)
      want *= static_cast<std::uint64_t>(cards[static_cast<std::size_t>(v)]);
    if (table_size < 0 || static_cast<std::uint64_t>(table_size) != want)
      throw std::invalid_argument("table-length mismatch");
    f.log_table.resize(static_cast<std::size_t>(table_size));
    for (auto& entry : f.log_table) {
      const double p = reader.next_real("table entry");
      if (std::isnan(p) || p < 0.0)
        throw std::invalid_argument("negative entry in probability table");
      entry = std::log(p);  // log(0) = -inf
    }
  }

  if (!reader.at_end())
    throw std::invalid_argument("trailing tokens after last table");

  return GraphicalModel(static_cast<int>(n), std::move(cards),
                        std::move(factors));
}

std::string save_uai(const GraphicalModel& model) {
  std::string out = "MARKOV\n";
  char buf[64];
  out += std::to_string(model.variable_count());
  out += '\n';
  const auto& cards = model.cardinalities();
  for (int i = 0; i < model.variable_count(); ++i) {
    if (i) out += ' ';
    out += std::to_string(cards[static_cast<std::size_t>(i)]);
  }
  out += '\n';
  out += std::to_string(model.factors().size());
  out += '\n';
  for (const auto& f : model.factors()) {
    out += std::to_string(f.scope.size());
    for (int v : f.scope) {
      out += ' ';
      out += std::to_string(v);
    }
    out += '\n';
  }
  for (const auto& f : model.factors()) {
    out += '\n';
    out += std::to_string(f.log_table.size());
    out += '\n';
    for (std::size_t i = 0; i < f.log_table.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", std::exp(f.log_table[i]));
      out += buf;
      out += (i + 1) % 8 == 0 || i + 1 == f.log_table.size() ? '\n' : ' ';
    }
  }
  return out;
}

GraphicalModel spin_glass_grid(int rows, int cols, double coupling,
                               CouplingMode mode, std::uint64_t seed) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("grid dimensions must be >= 1");
  if (coupling < 0.0)
    throw std::invalid_argument("coupling strength must be >= 0");

  const int n = rows * cols;
  std::vector<int> cards(static_cast<std::size_t>(n), 2);
  std::vector<Factor> factors;
  factors.reserve(static_cast<std::size_t>(n) * 3);

  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double theta = rng.uniform(-1.0, 1.0);
    factors.push_back(Factor{{i}, {-theta, theta}});
  }
  const double lo = mode == CouplingMode::attractive ? 0.0 : -coupling;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) {
        const double theta = rng.uniform(lo, coupling);
        factors.push_back(Factor{{i, i + 1}, {theta, -theta, -theta, theta}});
      }
      if (r + 1 < rows) {
        const double theta = rng.uniform(lo, coupling);
        factors.push_back(
            Factor{{i, i + cols}, {theta, -theta, -theta, theta}});
      }
    }
  }
  return GraphicalModel(n, std::move(cards), std::move(factors));
}

}  // namespace pmap
