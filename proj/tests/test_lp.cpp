#include "deftree/lp.hpp"

#include "deftree/process_set.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <vector>

using namespace deftree;
using deftree::test::vertex_enumeration_max;

namespace {

LinearProgram random_small_lp(SplitMix64& rng) {
  LinearProgram lp;
  size_t n = 2 + rng.below(2);
  for (size_t j = 0; j < n; ++j)
    lp.add_var("x" + std::to_string(j), Rat(static_cast<long>(rng.below(5)) - 1));
  size_t m = 2 + rng.below(3);
  for (size_t i = 0; i < m; ++i) {
    auto& row = lp.add_row("r" + std::to_string(i), Rat(static_cast<long>(rng.below(6))));
    for (size_t j = 0; j < n; ++j)
      row.coeff[j] = Rat(static_cast<long>(rng.below(7)) - 2, 1 + static_cast<long>(rng.below(3)));
  }
  // Keep the value bounded: cap every variable.
  for (size_t j = 0; j < n; ++j) {
    auto& row = lp.add_row("cap" + std::to_string(j), Rat(9));
    row.coeff[j] = 1;
  }
  return lp;
}

}  // namespace

TEST_CASE("simplex: textbook two-variable maximum") {
  LinearProgram lp;
  lp.add_var("x", Rat(3));
  lp.add_var("y", Rat(5));
  lp.add_row("a", Rat(4)).coeff = {Rat(1), Rat(0)};
  lp.add_row("b", Rat(12)).coeff = {Rat(0), Rat(2)};
  lp.add_row("c", Rat(18)).coeff = {Rat(3), Rat(2)};
  auto res = solve_lp(lp);
  REQUIRE(res.value == Rat(36));
  REQUIRE(res.x == std::vector<Rat>{Rat(2), Rat(6)});
}

TEST_CASE("simplex: duals certify the optimum") {
  LinearProgram lp;
  lp.add_var("x", Rat(1));
  lp.add_row("up", Rat(5)).coeff = {Rat(1)};
  auto res = solve_lp(lp);
  REQUIRE(res.value == Rat(5));
  REQUIRE(res.dual == std::vector<Rat>{Rat(1)});
  REQUIRE(res.certificate_rows == std::vector<size_t>{0});
}

TEST_CASE("simplex: degenerate ties terminate under Bland's rule") {
  LinearProgram lp;
  lp.add_var("x", Rat(1));
  lp.add_var("y", Rat(1));
  lp.add_row("a", Rat(0)).coeff = {Rat(1), Rat(-1)};
  lp.add_row("b", Rat(0)).coeff = {Rat(-1), Rat(1)};
  lp.add_row("c", Rat(2)).coeff = {Rat(1), Rat(1)};
  auto res = solve_lp(lp);
  REQUIRE(res.value == Rat(2));
}

TEST_CASE("simplex: rejects negative right-hand sides") {
  LinearProgram lp;
  lp.add_var("x", Rat(1));
  lp.add_row("bad", Rat(-1)).coeff = {Rat(1)};
  REQUIRE_THROWS(solve_lp(lp));
}

TEST_CASE("simplex agrees with vertex enumeration on random LPs") {
  SplitMix64 rng(2024);
  for (int rep = 0; rep < 60; ++rep) {
    LinearProgram lp = random_small_lp(rng);
    auto res = solve_lp(lp);
    auto oracle = vertex_enumeration_max(lp);
    REQUIRE(oracle.has_value());  // origin is feasible
    REQUIRE(res.value == *oracle);
    // Weak duality at the reported multipliers: y >= 0 and y.b = value.
    Rat yb = 0;
    for (size_t i = 0; i < lp.rows.size(); ++i) {
      REQUIRE(res.dual[i] >= 0);
      yb += res.dual[i] * lp.rows[i].rhs;
    }
    REQUIRE(yb == res.value);
    // y^T A dominates the objective coefficients.
    for (size_t j = 0; j < lp.var_names.size(); ++j) {
      Rat ya = 0;
      for (size_t i = 0; i < lp.rows.size(); ++i) ya += res.dual[i] * lp.rows[i].coeff[j];
      REQUIRE(ya >= lp.objective[j]);
    }
  }
}
