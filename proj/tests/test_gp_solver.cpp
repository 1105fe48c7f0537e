#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "mcofdma/gp/solver.hpp"
#include "test_util.hpp"

using namespace mcofdma;
using namespace mcofdma::gp;

namespace {

/// Random bounded 2-variable GP: box e^-2 <= x_i <= e^2 plus one or two
/// random posynomial constraints that hold with slack at x = (1, 1).
GpProblem random_gp(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> coef(0.1, 2.0), ex(-2.0, 2.0);
  GpProblem p;
  p.num_variables = 2;
  Posynomial obj;
  const int terms = 1 + static_cast<int>(gen() % 3);
  for (int t = 0; t < terms; ++t) obj += Monomial(coef(gen), {{0, ex(gen)}, {1, ex(gen)}});
  p.objective.push_back(obj);
  for (VarId v = 0; v < 2; ++v) {
    p.inequalities.push_back(Monomial(std::exp(-2.0), {{v, 1.0}}));
    p.inequalities.push_back(Monomial(std::exp(-2.0), {{v, -1.0}}));
  }
  const int extra = 1 + static_cast<int>(gen() % 2);
  for (int c = 0; c < extra; ++c) {
    Posynomial g;
    const int gt = 1 + static_cast<int>(gen() % 3);
    for (int t = 0; t < gt; ++t) g += Monomial(coef(gen), {{0, ex(gen)}, {1, ex(gen)}});
    const std::vector<double> one{1.0, 1.0};
    g /= Monomial(g.eval(one) / 0.7);
    p.inequalities.push_back(g);
  }
  return p;
}

double grid_oracle(const GpProblem& p) {
  auto eval = [&](double a, double b) {
    const std::vector<double> x{std::exp(a), std::exp(b)};
    return posy_eval(p.objective[0], x);
  };
  auto feasible = [&](double a, double b) {
    const std::vector<double> x{std::exp(a), std::exp(b)};
    for (const auto& g : p.inequalities) {
      if (posy_eval(g, x) > 1.0) return false;
    }
    return true;
  };
  return testutil::grid_minimize_2d(eval, feasible, -2.0, 2.0, -2.0, 2.0).value;
}

}  // namespace

TEST(SolveGp, ActiveLowerBound) {
  // minimize x s.t. 2/x <= 1
  GpProblem p;
  p.num_variables = 1;
  p.objective.push_back(Monomial::variable(0));
  p.inequalities.push_back(Monomial(2.0, {{0, -1.0}}));
  const auto sol = solve_gp(p);
  ASSERT_TRUE(sol.optimal()) << to_string(sol.status);
  EXPECT_NEAR(sol.values[0], 2.0, 1e-6);
  EXPECT_LE(sol.kkt_residual, 1e-6);
}

TEST(SolveGp, MonotoneProduct) {
  // minimize 1/(x y) s.t. x <= 1, y <= 1
  GpProblem p;
  p.num_variables = 2;
  p.objective.push_back(Monomial(1.0, {{0, -1.0}, {1, -1.0}}));
  p.inequalities.push_back(Monomial::variable(0));
  p.inequalities.push_back(Monomial::variable(1));
  const std::vector<double> x0{0.3, 0.2};
  const auto sol = solve_gp(p, x0);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.values[0], 1.0, 1e-6);
  EXPECT_NEAR(sol.values[1], 1.0, 1e-6);
  EXPECT_NEAR(sol.objective_value, 1.0, 1e-6);
}

TEST(SolveGp, ClosedFormBudgetSplit) {
  // minimize 1/(x y^3) s.t. x + y <= 4 -> x = 1, y = 3 (weights 1:3)
  GpProblem p;
  p.num_variables = 2;
  p.objective.push_back(Monomial(1.0, {{0, -1.0}, {1, -3.0}}));
  p.inequalities.push_back(Posynomial(Monomial::variable(0, 0.25)) + Posynomial(Monomial::variable(1, 0.25)));
  const auto sol = solve_gp(p);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.values[0], 1.0, 1e-6);
  EXPECT_NEAR(sol.values[1], 3.0, 1e-6);
}

TEST(SolveGp, EqualityConstraint) {
  // minimize x + y s.t. x y = 4 -> x = y = 2
  GpProblem p;
  p.num_variables = 2;
  p.objective.push_back(Posynomial(Monomial::variable(0)) + Posynomial(Monomial::variable(1)));
  p.equalities.push_back(Monomial(0.25, {{0, 1.0}, {1, 1.0}}));
  const auto sol = solve_gp(p);
  ASSERT_TRUE(sol.optimal()) << sol.kkt_residual;
  EXPECT_NEAR(sol.values[0], 2.0, 1e-6);
  EXPECT_NEAR(sol.values[1], 2.0, 1e-6);
}

TEST(SolveGp, ProductObjectiveOfFactors) {
  // minimize (1 + 1/x)(1 + 1/y) s.t. x + y <= 2 -> symmetric x = y = 1, value 4
  GpProblem p;
  p.num_variables = 2;
  p.objective.push_back(Posynomial::constant(1.0) + Posynomial(Monomial(1.0, {{0, -1.0}})));
  p.objective.push_back(Posynomial::constant(1.0) + Posynomial(Monomial(1.0, {{1, -1.0}})));
  p.inequalities.push_back(Posynomial(Monomial::variable(0, 0.5)) + Posynomial(Monomial::variable(1, 0.5)));
  const auto sol = solve_gp(p);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.values[0], 1.0, 1e-5);
  EXPECT_NEAR(sol.objective_value, 4.0, 1e-6);
}

TEST(SolveGp, Infeasible) {
  // x <= 1 and 2/x <= 1 cannot both hold
  GpProblem p;
  p.num_variables = 1;
  p.objective.push_back(Monomial::variable(0));
  p.inequalities.push_back(Monomial::variable(0));
  p.inequalities.push_back(Monomial(2.0, {{0, -1.0}}));
  EXPECT_EQ(solve_gp(p).status, GpStatus::kInfeasible);
}

TEST(SolveGp, UnboundedHitsIterationCap) {
  GpProblem p;
  p.num_variables = 1;
  p.objective.push_back(Monomial::variable(0));
  SolverOptions opt;
  opt.max_iters = 50;
  const auto sol = solve_gp(p, std::nullopt, opt);
  EXPECT_EQ(sol.status, GpStatus::kMaxIters);
  EXPECT_EQ(sol.iterations, 50u);
}

TEST(SolveGp, RejectsBadInput) {
  GpProblem p;
  p.num_variables = 1;
  p.objective.push_back(Monomial::variable(3));
  EXPECT_THROW(solve_gp(p), UsageError);
  GpProblem q;
  q.num_variables = 1;
  q.objective.push_back(Monomial::variable(0));
  const std::vector<double> bad{0.0};
  EXPECT_THROW(solve_gp(q, bad), UsageError);
}

TEST(SolveGp, TraceEmitsOneRecordPerStep) {
  GpProblem p;
  p.num_variables = 1;
  p.objective.push_back(Monomial::variable(0));
  p.inequalities.push_back(Monomial(2.0, {{0, -1.0}}));
  std::ostringstream os;
  SolverOptions opt;
  opt.trace = &os;
  const auto sol = solve_gp(p, std::nullopt, opt);
  std::size_t lines = 0;
  for (char c : os.str()) lines += c == '\n';
  EXPECT_GE(lines, sol.iterations);
  EXPECT_NE(os.str().find("\"phase\":\"phase1\""), std::string::npos);
}

TEST(SolveGp, MatchesGridOracleOnRandomTwoVariablePrograms) {
  std::mt19937_64 gen(2718);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_gp(gen);
    const auto sol = solve_gp(p);
    ASSERT_TRUE(sol.optimal()) << "instance " << i;
    const double oracle = grid_oracle(p);
    EXPECT_NEAR(sol.objective_value / oracle, 1.0, 1e-4) << "instance " << i;
    // log transform is consistent with direct evaluation
    EXPECT_NEAR(posy_eval(p.objective[0], sol.values) / sol.objective_value, 1.0, 1e-9);
    for (const auto& g : p.inequalities) EXPECT_LE(posy_eval(g, sol.values), 1.0 + 1e-12);
  }
}

TEST(SolveGp, Deterministic) {
  std::mt19937_64 gen(5);
  const auto p = random_gp(gen);
  const auto a = solve_gp(p), b = solve_gp(p);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.iterations, b.iterations);
}
