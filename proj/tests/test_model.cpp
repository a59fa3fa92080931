#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "pmap/model.hpp"

using namespace pmap;

namespace {

bool bit_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0 ||
         (std::isinf(a) && std::isinf(b) && (a < 0) == (b < 0));
}

bool tables_bit_equal(const GraphicalModel& a, const GraphicalModel& b) {
  if (a.factors().size() != b.factors().size()) return false;
  for (std::size_t f = 0; f < a.factors().size(); ++f) {
    const auto& fa = a.factors()[f];
    const auto& fb = b.factors()[f];
    if (fa.scope != fb.scope) return false;
    if (fa.log_table.size() != fb.log_table.size()) return false;
    for (std::size_t i = 0; i < fa.log_table.size(); ++i)
      if (!bit_equal(fa.log_table[i], fb.log_table[i])) return false;
  }
  return true;
}

const char* kTwoVarUai =
    "MARKOV\n2\n2 2\n1\n2 0 1\n\n4\n2 1 1 2\n";

GraphicalModel two_var_model() { return load_uai(kTwoVarUai); }

}  // namespace

TEST_CASE("load_uai: single all-ones unary gives zero potential") {
  const GraphicalModel m = load_uai("MARKOV\n1\n2\n1\n1 0\n\n2\n1 1\n");
  CHECK(m.variable_count() == 1);
  REQUIRE(m.factors().size() == 1);
  CHECK(m.factors()[0].log_table == std::vector<double>{0.0, 0.0});
  CHECK(potential(m, std::vector<int>{0}) == 0.0);
  CHECK(potential(m, std::vector<int>{1}) == 0.0);
}

TEST_CASE("load_uai: pairwise table (2,1,1,2)") {
  const GraphicalModel m = two_var_model();
  const double ln2 = std::log(2.0);
  CHECK(potential(m, std::vector<int>{0, 0}) == doctest::Approx(ln2));
  CHECK(potential(m, std::vector<int>{0, 1}) == doctest::Approx(0.0));
  CHECK(potential(m, std::vector<int>{1, 0}) == doctest::Approx(0.0));
  CHECK(potential(m, std::vector<int>{1, 1}) == doctest::Approx(ln2));
}

TEST_CASE("load_uai: validation failures") {
  CHECK_THROWS_WITH_AS(
      load_uai("MARKOV\n2\n2 2\n1\n1 5\n\n2\n1 1\n"),
      doctest::Contains("scope index out of range"), std::invalid_argument);
  CHECK_THROWS_AS(load_uai("BAYES\n1\n2\n0\n"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(load_uai("MARKOV\n1\n2\n1\n1 0\n\n3\n1 1 1\n"),
                       doctest::Contains("table-length mismatch"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(load_uai("MARKOV\n1\n2\n1\n1 0\n\n2\n1 -0.5\n"),
                       doctest::Contains("negative entry"),
                       std::invalid_argument);
  CHECK_THROWS_AS(load_uai("MARKOV\n1\n2\n1\n1 0\n\n2\n1 1\nextra\n"),
                  std::invalid_argument);
}

TEST_CASE("zero probability loads as -inf and propagates") {
  const GraphicalModel m = load_uai("MARKOV\n1\n2\n1\n1 0\n\n2\n0 1\n");
  CHECK(potential(m, std::vector<int>{0}) == kNegInf);
  CHECK(potential(m, std::vector<int>{1}) == 0.0);
}

TEST_CASE("save/load round trip reproduces log tables bit for bit") {
  const GraphicalModel loaded = two_var_model();
  CHECK(tables_bit_equal(loaded, load_uai(save_uai(loaded))));

  for (std::uint64_t seed : {7ULL, 13ULL, 99ULL}) {
    const GraphicalModel g =
        spin_glass_grid(3, 3, 1.5, CouplingMode::mixed, seed);
    CHECK(tables_bit_equal(g, load_uai(save_uai(g))));
  }

  const GraphicalModel with_zero =
      load_uai("MARKOV\n1\n3\n1\n1 0\n\n3\n0 1 2.5\n");
  CHECK(tables_bit_equal(with_zero, load_uai(save_uai(with_zero))));
}

TEST_CASE("spin glass structure") {
  const GraphicalModel one = spin_glass_grid(1, 1, 1.0, CouplingMode::attractive, 7);
  CHECK(one.variable_count() == 1);
  CHECK(one.factors().size() == 1);

  const GraphicalModel sq = spin_glass_grid(2, 2, 1.0, CouplingMode::mixed, 7);
  CHECK(sq.variable_count() == 4);
  int unary = 0, pairwise = 0;
  for (const auto& f : sq.factors())
    (f.scope.size() == 1 ? unary : pairwise) += 1;
  CHECK(unary == 4);
  CHECK(pairwise == 4);
}

TEST_CASE("spin glass draws follow the documented stream") {
  // Reconstruct the parameter stream independently: unaries first, then edge
  // parameters in node order (right edge before down edge), all from one
  // Rng(seed) uniform stream.
  const int rows = 3, cols = 3;
  const double coupling = 2.0;
  const GraphicalModel g =
      spin_glass_grid(rows, cols, coupling, CouplingMode::attractive, 13);

  Rng ref(13);
  std::vector<double> unaries;
  for (int i = 0; i < rows * cols; ++i)
    unaries.push_back(ref.uniform(-1.0, 1.0));
  std::vector<double> edges;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.push_back(ref.uniform(0.0, coupling));
      if (r + 1 < rows) edges.push_back(ref.uniform(0.0, coupling));
    }
  CHECK(edges.size() == 12);
  for (double theta : edges) {
    CHECK(theta >= 0.0);
    CHECK(theta <= coupling);
  }

  std::size_t u_seen = 0, e_seen = 0;
  for (const auto& f : g.factors()) {
    if (f.scope.size() == 1) {
      const double theta = unaries.at(u_seen++);
      CHECK(bit_equal(f.log_table[0], canonical_log(-theta)));
      CHECK(bit_equal(f.log_table[1], canonical_log(theta)));
    } else {
      const double theta = edges.at(e_seen++);
      CHECK(bit_equal(f.log_table[0], canonical_log(theta)));
      CHECK(bit_equal(f.log_table[1], canonical_log(-theta)));
      CHECK(bit_equal(f.log_table[2], canonical_log(-theta)));
      CHECK(bit_equal(f.log_table[3], canonical_log(theta)));
    }
  }
  CHECK(u_seen == unaries.size());
  CHECK(e_seen == edges.size());
}

TEST_CASE("spin glass generation is deterministic") {
  const GraphicalModel a = spin_glass_grid(3, 2, 1.0, CouplingMode::mixed, 5);
  const GraphicalModel b = spin_glass_grid(3, 2, 1.0, CouplingMode::mixed, 5);
  CHECK(tables_bit_equal(a, b));
}

TEST_CASE("potential sums factor entries") {
  // All-zero tables: empty sum.
  const GraphicalModel zero(2, {2, 2},
                            {Factor{{0}, {0, 0}}, Factor{{1}, {0, 0}}});
  CHECK(potential(zero, std::vector<int>{1, 0}) == 0.0);

  // Hand-summed seeded 2x2 grid at the all-zeros configuration.
  const GraphicalModel g = spin_glass_grid(2, 2, 1.0, CouplingMode::mixed, 7);
  double expected = 0.0;
  for (const auto& f : g.factors()) expected += f.log_table[0];
  CHECK(potential(g, std::vector<int>{0, 0, 0, 0}) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("clamp: identity, row restriction, brute-force consistency") {
  const GraphicalModel m = two_var_model();

  const ClampedModel same = clamp(m, std::vector<int>{});
  CHECK(same.log_offset == 0.0);
  CHECK(tables_bit_equal(same.model, m));

  const ClampedModel row = clamp(m, std::vector<int>{0});
  CHECK(row.model.variable_count() == 1);
  CHECK(row.log_offset == 0.0);
  CHECK(potential(row.model, std::vector<int>{0}) ==
        doctest::Approx(std::log(2.0)));
  CHECK(potential(row.model, std::vector<int>{1}) == doctest::Approx(0.0));

  CHECK_THROWS_AS(clamp(m, std::vector<int>{2}), std::invalid_argument);

  // Fixing three of four grid variables: the clamped partition function must
  // match a direct sum over the last variable.
  const GraphicalModel g = spin_glass_grid(2, 2, 1.0, CouplingMode::mixed, 11);
  const std::vector<int> prefix{1, 0, 1};
  const ClampedModel c = clamp(g, prefix);
  CHECK(c.model.variable_count() == 1);
  double direct = 0.0;
  for (int s = 0; s < 2; ++s)
    direct += std::exp(potential(g, std::vector<int>{1, 0, 1, s}));
  double clamped = 0.0;
  for (int s = 0; s < 2; ++s)
    clamped += std::exp(potential(c.model, std::vector<int>{s}));
  CHECK(std::log(clamped) + c.log_offset ==
        doctest::Approx(std::log(direct)).epsilon(1e-12));
}

TEST_CASE("clamp decomposition holds exhaustively") {
  const GraphicalModel g = spin_glass_grid(2, 3, 1.0, CouplingMode::mixed, 3);
  const auto& cards = g.cardinalities();
  const int n = g.variable_count();
  for (int fixed = 0; fixed <= n; ++fixed) {
    // enumerate all prefixes of this length
    const std::vector<int> pre_cards(cards.begin(), cards.begin() + fixed);
    std::uint64_t prefix_count = 1;
    for (int c : pre_cards) prefix_count *= static_cast<std::uint64_t>(c);
    for (std::uint64_t p = 0; p < prefix_count; ++p) {
      const Configuration prefix = configuration_of_index(p, pre_cards);
      const ClampedModel c = clamp(g, prefix);
      const std::vector<int> suf_cards(cards.begin() + fixed, cards.end());
      std::uint64_t suffix_count = 1;
      for (int cc : suf_cards) suffix_count *= static_cast<std::uint64_t>(cc);
      for (std::uint64_t s = 0; s < suffix_count; ++s) {
        const Configuration suffix = configuration_of_index(s, suf_cards);
        Configuration full = prefix;
        full.insert(full.end(), suffix.begin(), suffix.end());
        CHECK(potential(g, full) ==
              doctest::Approx(potential(c.model, suffix) + c.log_offset)
                  .epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("full prefix clamps to a zero-variable model") {
  const GraphicalModel m = two_var_model();
  const ClampedModel c = clamp(m, std::vector<int>{1, 1});
  CHECK(c.model.variable_count() == 0);
  CHECK(c.log_offset == doctest::Approx(std::log(2.0)));
  CHECK(potential(c.model, std::vector<int>{}) == 0.0);
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(GraphicalModel(1, {2}, {Factor{{}, {}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(GraphicalModel(1, {2}, {Factor{{0, 0}, {0, 0, 0, 0}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(GraphicalModel(1, {2}, {Factor{{0}, {0.0}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(GraphicalModel(1, {2}, {Factor{{0}, {kPosInf, 0.0}}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(GraphicalModel(1, {0}, {}), std::invalid_argument);
}
