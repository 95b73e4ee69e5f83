#include <cmath>
#include <random>

#include "doctest.h"
#include "evagg/optim.hpp"

using namespace evagg;

namespace {

struct RandomMilp {
  LinearProgram lp;
  std::vector<std::size_t> binaries;
};

// Mixed instance: `nb` binaries, a few continuous variables, packing rows.
RandomMilp random_milp(std::mt19937_64& rng, int nb, int nc, int rows) {
  std::uniform_real_distribution<double> coef(0.0, 5.0);
  std::uniform_real_distribution<double> gain(-2.0, 10.0);
  RandomMilp out;
  std::vector<std::size_t> vars;
  for (int i = 0; i < nb; ++i) {
    const auto id = out.lp.add_binary("b" + std::to_string(i));
    out.binaries.push_back(id);
    vars.push_back(id);
  }
  for (int i = 0; i < nc; ++i) vars.push_back(out.lp.add_variable("x" + std::to_string(i), 0.0, 3.0));
  for (auto v : vars) out.lp.set_objective(v, gain(rng));
  for (int r = 0; r < rows; ++r) {
    std::vector<Term> terms;
    double total = 0.0;
    for (auto v : vars) {
      const double c = coef(rng);
      terms.push_back({v, c});
      total += c;
    }
    out.lp.add_constraint("r" + std::to_string(r), terms, Relation::less_equal, 0.4 * total);
  }
  // A coupling row between a binary and a continuous variable (big-M style).
  if (nb > 0 && nc > 0) {
    out.lp.add_constraint("link", {{vars[nb], 1.0}, {vars[0], -3.0}}, Relation::less_equal, 0.0);
  }
  return out;
}

double enumerate_binaries(const RandomMilp& inst) {
  const std::size_t nb = inst.binaries.size();
  double best = -INFINITY;
  for (std::size_t mask = 0; mask < (std::size_t{1} << nb); ++mask) {
    LinearProgram fixed = inst.lp;
    for (std::size_t b = 0; b < nb; ++b) {
      const double v = (mask >> b) & 1U ? 1.0 : 0.0;
      fixed.set_bounds(inst.binaries[b], v, v);
    }
    const auto s = solve_lp(fixed);
    if (s.optimal()) best = std::max(best, s.objective);
  }
  return best;
}

}  // namespace

TEST_CASE("single bounded variable") {
  LinearProgram lp;
  const auto x = lp.add_variable("x", 0.0, 5.0);
  lp.set_objective(x, 1.0);
  const auto s = solve_lp(lp);
  REQUIRE(s.optimal());
  CHECK(s.values[x] == doctest::Approx(5.0));
  CHECK(s.objective == doctest::Approx(5.0));
}

TEST_CASE("two-variable vertex") {
  LinearProgram lp;
  const auto x = lp.add_variable("x", 0.0, 100.0);
  const auto y = lp.add_variable("y", 0.0, 100.0);
  lp.set_objective(x, 3.0);
  lp.set_objective(y, 2.0);
  lp.add_constraint("cap", {{x, 1.0}, {y, 1.0}}, Relation::less_equal, 4.0);
  lp.add_constraint("xmax", {{x, 1.0}}, Relation::less_equal, 2.0);
  const auto s = solve_lp(lp);
  REQUIRE(s.optimal());
  CHECK(s.value(lp, "x") == doctest::Approx(2.0));
  CHECK(s.value(lp, "y") == doctest::Approx(2.0));
  CHECK(s.objective == doctest::Approx(10.0));
  CHECK(s.assignment(lp).at("y") == doctest::Approx(2.0));
}

TEST_CASE("contradictory constraints are infeasible") {
  LinearProgram lp;
  const auto x = lp.add_variable("x", -10.0, 10.0);
  lp.set_objective(x, 1.0);
  lp.add_constraint("lo", {{x, 1.0}}, Relation::greater_equal, 3.0);
  lp.add_constraint("hi", {{x, 1.0}}, Relation::less_equal, 1.0);
  CHECK(solve_lp(lp).status == SolveStatus::infeasible);
  CHECK(solve_milp(lp).status == SolveStatus::infeasible);
}

TEST_CASE("crossed bounds are infeasible") {
  LinearProgram lp;
  const auto x = lp.add_variable("x", 0.0, 1.0);
  lp.set_bounds(x, 2.0, 1.0);
  CHECK(solve_lp(lp).status == SolveStatus::infeasible);
}

TEST_CASE("equalities, negative bounds and minimizing through negative costs") {
  LinearProgram lp;
  const auto x = lp.add_variable("x", -5.0, 5.0);
  const auto y = lp.add_variable("y", -5.0, 5.0);
  const auto z = lp.add_variable("z", 0.0, 10.0);
  lp.set_objective(x, -1.0);
  lp.set_objective(y, -2.0);
  lp.set_objective(z, -0.5);
  lp.add_constraint("sum", {{x, 1.0}, {y, 1.0}, {z, 1.0}}, Relation::equal, 2.0);
  lp.add_constraint("floor", {{x, 1.0}, {y, -1.0}}, Relation::greater_equal, -1.0);
  const auto s = solve_lp(lp);
  REQUIRE(s.optimal());
  CHECK(lp.max_violation(s.values) < 1e-9);
  // Objective reduces to -1 - x/2 - 3y/2 on the equality; y hits its floor
  // and z its cap: x=-3, y=-5, z=10.
  CHECK(s.objective == doctest::Approx(8.0));
  CHECK(s.values[y] == doctest::Approx(-5.0));
  CHECK(s.values[x] == doctest::Approx(-3.0));
}

TEST_CASE("single binary is set") {
  LinearProgram lp;
  const auto b = lp.add_binary("b");
  lp.set_objective(b, 1.0);
  const auto s = solve_milp(lp);
  REQUIRE(s.optimal());
  CHECK(s.values[b] == 1.0);
}

TEST_CASE("two-item knapsack") {
  LinearProgram lp;
  const auto a = lp.add_binary("a");
  const auto b = lp.add_binary("b");
  lp.set_objective(a, 5.0);
  lp.set_objective(b, 4.0);
  lp.add_constraint("w", {{a, 2.0}, {b, 3.0}}, Relation::less_equal, 4.0);
  const auto s = solve_milp(lp);
  REQUIRE(s.optimal());
  CHECK(s.values[a] == 1.0);
  CHECK(s.values[b] == 0.0);
  CHECK(s.objective == doctest::Approx(5.0));
  // The relaxation is strictly better than the integer optimum here.
  CHECK(solve_lp(lp).objective > 5.0 + 1e-6);
}

TEST_CASE("branch and bound matches exhaustive enumeration on 10-binary instances") {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 12; ++trial) {
    const auto inst = random_milp(rng, 10, 3, 4);
    const auto s = solve_milp(inst.lp);
    REQUIRE(s.optimal());
    CHECK(inst.lp.max_violation(s.values) < 1e-7);
    const double oracle = enumerate_binaries(inst);
    CHECK(s.objective == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("LP duality on random feasible instances") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(0.0, 1.0);
  std::uniform_real_distribution<double> uc(-1.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6;
    const int m = 5;
    std::vector<std::vector<double>> A(m, std::vector<double>(n));
    std::vector<double> b(m), c(n), u(n);
    for (auto& row : A)
      for (auto& v : row) v = ua(rng);
    for (auto& v : b) v = 1.0 + 3.0 * ua(rng);
    for (auto& v : c) v = uc(rng);
    for (auto& v : u) v = 0.5 + 2.0 * ua(rng);

    LinearProgram primal;
    for (int j = 0; j < n; ++j) {
      const auto x = primal.add_variable("x" + std::to_string(j), 0.0, u[j]);
      primal.set_objective(x, c[j]);
    }
    for (int i = 0; i < m; ++i) {
      std::vector<Term> t;
      for (int j = 0; j < n; ++j) t.push_back({static_cast<std::size_t>(j), A[i][j]});
      primal.add_constraint("r" + std::to_string(i), t, Relation::less_equal, b[i]);
    }

    // min b'y + u'z  s.t.  A'y + z >= c,  y, z >= 0   (as max of the negation)
    LinearProgram dual;
    const double big = 1e4;
    for (int i = 0; i < m; ++i) {
      const auto y = dual.add_variable("y" + std::to_string(i), 0.0, big);
      dual.set_objective(y, -b[i]);
    }
    for (int j = 0; j < n; ++j) {
      const auto z = dual.add_variable("z" + std::to_string(j), 0.0, big);
      dual.set_objective(z, -u[j]);
    }
    for (int j = 0; j < n; ++j) {
      std::vector<Term> t;
      for (int i = 0; i < m; ++i) t.push_back({static_cast<std::size_t>(i), A[i][j]});
      t.push_back({static_cast<std::size_t>(m + j), 1.0});
      dual.add_constraint("d" + std::to_string(j), t, Relation::greater_equal, c[j]);
    }

    const auto ps = solve_lp(primal);
    const auto ds = solve_lp(dual);
    REQUIRE(ps.optimal());
    REQUIRE(ds.optimal());
    for (double v : ds.values) REQUIRE(v < big / 10.0);
    CHECK(ps.objective == doctest::Approx(-ds.objective).epsilon(1e-6));
  }
}

TEST_CASE("solves are deterministic") {
  std::mt19937_64 rng(99);
  const auto inst = random_milp(rng, 8, 4, 5);
  const auto a = solve_milp(inst.lp);
  const auto b = solve_milp(inst.lp);
  REQUIRE(a.optimal());
  CHECK(a.values == b.values);
  CHECK(a.objective == b.objective);
}

TEST_CASE("cutoff stops when nothing beats the bound") {
  LinearProgram lp;
  const auto a = lp.add_binary("a");
  lp.set_objective(a, 2.0);
  MilpOptions opts;
  opts.cutoff = 2.0;
  CHECK(solve_milp(lp, opts).status == SolveStatus::cutoff);
  opts.cutoff = 1.0;
  CHECK(solve_milp(lp, opts).objective == doctest::Approx(2.0));
}

TEST_CASE("node limit carries the incumbent") {
  std::mt19937_64 rng(3);
  const auto inst = random_milp(rng, 10, 2, 6);
  MilpOptions opts;
  opts.node_limit = 2;
  bool thrown = false;
  try {
    (void)solve_milp(inst.lp, opts);
  } catch (const NodeLimitError& e) {
    thrown = true;
    if (e.incumbent().optimal()) CHECK(inst.lp.max_violation(e.incumbent().values) < 1e-7);
  }
  CHECK(thrown);
}

TEST_CASE("LP text dump") {
  LinearProgram lp;
  const auto x = lp.add_variable("p_ch[7]", 0.0, 2.5);
  const auto d = lp.add_binary("delta[7]");
  lp.set_objective(x, -30.0);
  lp.add_constraint("bigM_ch[7]", {{x, 1.0}, {d, -2.5}}, Relation::less_equal, 0.0);
  const std::string text = lp.to_lp_text();
  CHECK(text.find("Maximize") != std::string::npos);
  CHECK(text.find("bigM_ch[7]: 1 p_ch[7] - 2.5 delta[7] <= 0") != std::string::npos);
  CHECK(text.find("0 <= p_ch[7] <= 2.5") != std::string::npos);
  CHECK(text.find("Binaries\n delta[7]") != std::string::npos);
}

TEST_CASE("variables need finite, unique bounds") {
  LinearProgram lp;
  CHECK_THROWS_AS(lp.add_variable("x", 0.0, INFINITY), std::invalid_argument);
  lp.add_variable("x", 0.0, 1.0);
  CHECK_THROWS_AS(lp.add_variable("x", 0.0, 1.0), std::invalid_argument);
}
