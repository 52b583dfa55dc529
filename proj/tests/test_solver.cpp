#include "ncu/solver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ncu;

namespace
{

FiniteMarket two_state()
{
  Eigen::VectorXd p(2), z(2);
  p << 0.5, 0.5;
  z << 0.5, 1.5;
  return FiniteMarket(p, z);
}

FiniteMarket single_state()
{
  return FiniteMarket(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
}

const GridSpec kGrid{0.0, 20.0, 2001, Spacing::Linear};

PiecewiseUtility min_x_one()
{
  return PiecewiseUtility({{0.0, 1.0, Linear{1.0, 0.0}}, {1.0, kInf, Constant{1.0}}});
}

}  // namespace

TEST(Argmax, Examples)
{
  const auto step = prepare(step_utility(), kGrid);
  auto a = pointwise_argmax(step.conjugate, 0.5, 1.0);
  EXPECT_EQ(a.lo, 1.0);
  EXPECT_EQ(a.hi, 1.0);
  a = pointwise_argmax(step.conjugate, 1.0, 1.0);
  EXPECT_EQ(a.lo, 0.0);
  EXPECT_EQ(a.hi, 1.0);

  const auto sq = prepare(power_utility(0.5, 2.0), {0.0, 1.0, 100001, Spacing::Linear});
  a = pointwise_argmax(sq.conjugate, 2.0, 2.0);
  EXPECT_NEAR(a.lo, 1.0 / 16.0, 1e-4);
  EXPECT_NEAR(a.hi, 1.0 / 16.0, 1e-4);
}

TEST(Solve, StepFullBudget)
{
  const auto r = solve(two_state(), prepare(step_utility(), kGrid), 1.0);
  EXPECT_NEAR(r.payoff[0], 1.0, 1e-12);
  EXPECT_NEAR(r.payoff[1], 1.0, 1e-12);
  EXPECT_NEAR(r.primal_value, 1.0, 1e-12);
  EXPECT_NEAR(r.duality_gap, 0.0, 1e-12);
}

TEST(Solve, StepGapInstance)
{
  const auto m = two_state();
  const auto r = solve(m, prepare(step_utility(), kGrid), 0.5);
  EXPECT_NEAR(r.concavified_value, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.primal_value, 0.5, 1e-12);
  EXPECT_NEAR(r.duality_gap, 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.concavified_payoff[0], 1.0, 1e-12);
  EXPECT_NEAR(r.concavified_payoff[1], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.multiplier, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.dual_value, r.concavified_value, 1e-9);
  EXPECT_EQ(r.primal_method, PrimalMethod::Exhaustive);
  EXPECT_NEAR(m.weights().dot(r.payoff), 0.5, 1e-9);

  // oracles: brute force on U and on U_c = min(x, 1)
  const auto grid = default_wealth_grid(m, step_utility(), 0.5, 1000);
  EXPECT_NEAR(brute_force(m, step_utility(), 0.5, grid).value, 0.5, 1e-12);
  EXPECT_NEAR(brute_force(m, min_x_one(), 0.5, grid).value, 2.0 / 3.0, 1e-12);
}

TEST(Solve, FundsTheLikelierStateWhenOnlyOneKinkIsAffordable)
{
  Eigen::VectorXd p(2), z(2);
  p << 0.3, 0.7;
  z << 1.0, 1.0;
  const FiniteMarket m(p, z);
  const auto r = solve(m, prepare(step_utility(), kGrid), 0.8);
  EXPECT_NEAR(r.primal_value, 0.7, 1e-12);
  const auto bf = brute_force(m, step_utility(), 0.8, default_wealth_grid(m, step_utility(), 0.8, 1000));
  EXPECT_NEAR(r.primal_value, bf.value, 1e-12);
}

TEST(Solve, SqrtClosedForm)
{
  const auto m = two_state();
  const auto prep = prepare(power_utility(0.5, 2.0), {0.0, 10.0, 100001, Spacing::Linear});
  const auto r = solve(m, prep, 1.0);
  const auto cf = oracle::sqrt_solution(m.probabilities(), m.density(), 1.0);
  EXPECT_NEAR(cf.multiplier * cf.multiplier, 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.multiplier, cf.multiplier, 1e-3);
  EXPECT_NEAR(r.payoff[0], cf.payoff[0], 1e-3);
  EXPECT_NEAR(r.payoff[1], cf.payoff[1], 1e-3);
  EXPECT_NEAR(r.primal_value, cf.value, 1e-6);
  EXPECT_NEAR(m.weights().dot(r.payoff), 1.0, 1e-9);
  EXPECT_EQ(r.primal_method, PrimalMethod::Concave);
  EXPECT_EQ(r.duality_gap, 0.0);
}

TEST(Solve, Satiation)
{
  const auto m = two_state();
  const auto r = solve(m, prepare(step_utility(), kGrid), 10.0);
  EXPECT_TRUE(r.budget_slack);
  EXPECT_EQ(r.multiplier, 0.0);
  EXPECT_NEAR(r.primal_value, 1.0, 1e-12);
  EXPECT_LE(m.weights().dot(r.concavified_payoff), 10.0 + 1e-9);
}

TEST(Solve, RejectsNonPositiveWealth)
{
  EXPECT_THROW(solve(two_state(), prepare(step_utility(), kGrid), 0.0), std::invalid_argument);
}

TEST(Solve, RandomMarketsInvariants)
{
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ux(0.05, 2.5);
  const auto prep = prepare(two_bump_utility(), kGrid);
  for (int k = 0; k < 40; ++k) {
    const auto rm = oracle::random_market(rng, 2 + k % 4);
    const FiniteMarket m(rm.p, rm.z);
    const double x = ux(rng);
    const auto r = solve(m, prep, x);
    ASSERT_FALSE(r.budget_slack);
    EXPECT_NEAR(m.weights().dot(r.concavified_payoff), x, 1e-9);
    EXPECT_NEAR(r.concavified_value, r.dual_value, 1e-9);
    EXPECT_GE(r.duality_gap, -1e-12);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const auto iv = pointwise_argmax(prep.conjugate, r.multiplier, m.density()[i]);
      EXPECT_TRUE(iv.contains(r.concavified_payoff[i], 1e-9));
    }
  }
}

TEST(ValueFunction, StepMarket)
{
  const auto m = two_state();
  Eigen::VectorXd xs(3);
  xs << 0.25, 0.5, 1.0;
  const auto c = value_function(m, prepare(step_utility(), kGrid), xs);
  EXPECT_NEAR(c.u_Uc[0], 0.5, 1e-12);
  EXPECT_NEAR(c.u_Uc[1], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.u_Uc[2], 1.0, 1e-12);
  EXPECT_NEAR(c.u_U[0], 0.5, 1e-12);
  EXPECT_NEAR(c.u_U[1], 0.5, 1e-12);
  EXPECT_NEAR(c.u_U[2], 1.0, 1e-12);
  for (double x : {0.25, 0.5, 1.0}) {
    const auto g = default_wealth_grid(m, step_utility(), x, 1000);
    const auto idx = x == 0.25 ? 0 : (x == 0.5 ? 1 : 2);
    EXPECT_NEAR(c.u_U[idx], brute_force(m, step_utility(), x, g).value, 1e-12);
  }
}

TEST(ValueFunction, ConcaveAndSingleState)
{
  const auto sq = prepare(power_utility(0.5, 2.0), kGrid);
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(9, 0.2, 1.8);
  const auto c = value_function(two_state(), sq, xs);
  EXPECT_LE((c.u_U - c.u_Uc).cwiseAbs().maxCoeff(), 1e-9);

  const auto step = prepare(step_utility(), kGrid);
  const auto s = value_function(single_state(), step, xs);
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    EXPECT_NEAR(s.u_U[i], eval_utility(step_utility(), xs[i]), 1e-12);
    EXPECT_NEAR(s.u_Uc[i], std::min(xs[i], 1.0), 1e-12);
  }
}

TEST(DualFunction, Examples)
{
  const auto step = prepare(step_utility(), kGrid);
  Eigen::VectorXd ys(3);
  ys << 0.5, 1.0 / 0.5, 10.0;
  const auto v = dual_function(two_state(), step.conjugate, ys);
  EXPECT_NEAR(v[0], 0.5, 1e-15);
  EXPECT_EQ(v[1], 0.0);
  EXPECT_EQ(v[2], 0.0);
  const auto single = dual_function(single_state(), step.conjugate, ys);
  EXPECT_NEAR(single[0], 0.5, 1e-15);

  const auto sq = prepare(power_utility(0.5, 2.0), kGrid);
  Eigen::VectorXd tiny(1);
  tiny << 1e-9;
  try {
    dual_function(two_state(), sq.conjugate, tiny);
    FAIL() << "expected a domain error";
  } catch (const DomainError & e) {
    EXPECT_NE(std::string(e.what()).find("state"), std::string::npos) << e.what();
  }
}

TEST(DualityCheck, ConcaveHullCoincides)
{
  const auto sq = prepare(power_utility(0.5, 2.0), kGrid);
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(50, 0.1, 2.0);
  const Eigen::VectorXd ys = Eigen::VectorXd::LinSpaced(20, 0.5, 3.0);
  const auto r = duality_check(two_state(), sq, xs, ys);
  EXPECT_LE(r.hull_coincidence_dev, 1e-9);
}

TEST(DualityCheck, SingleStateStep)
{
  const auto step = prepare(step_utility(), kGrid);
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(201, 0.01, 2.0);
  const Eigen::VectorXd ys = Eigen::VectorXd::LinSpaced(50, 0.05, 3.0);
  const auto r = duality_check(single_state(), step, xs, ys);
  EXPECT_LE(r.hull_coincidence_dev, 0.01 + 1e-12);
  EXPECT_LE(r.max_dev_fenchel, 0.01 * 3.0 + 1e-12);
}

TEST(BruteForce, Examples)
{
  const auto m = two_state();
  const auto r = brute_force(m, step_utility(), 1.0, default_wealth_grid(m, step_utility(), 1.0, 1000));
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_NEAR(r.payoff[0], 1.0, 1e-9);
  EXPECT_NEAR(r.payoff[1], 1.0, 1e-9);

  const auto small = brute_force(m, step_utility(), 1e-4, default_wealth_grid(m, step_utility(), 1e-4, 1000));
  EXPECT_EQ(small.value, 0.0);

  const auto sq = prepare(power_utility(0.5, 2.0), {0.0, 10.0, 10001, Spacing::Linear});
  const auto s = solve(m, sq, 1.0);
  const auto b = brute_force(m, power_utility(0.5, 2.0), 1.0, default_wealth_grid(m, power_utility(0.5, 2.0), 1.0, 1000));
  EXPECT_NEAR(b.value, s.concavified_value, 1e-4);

  std::mt19937_64 rng(1);
  const auto five = oracle::random_market(rng, 5);
  EXPECT_THROW(
    brute_force(FiniteMarket(five.p, five.z), step_utility(), 1.0, Eigen::VectorXd::LinSpaced(10, 0.0, 2.0)),
    std::invalid_argument);
}

TEST(VFinite, Examples)
{
  const auto m = two_state();
  const auto step = prepare(step_utility(), kGrid);
  EXPECT_TRUE(check_assumption_vfinite(m, step.conjugate, {1e-6, 1.0, 100.0}).finite_for_all_probes);

  const auto sq = prepare(power_utility(0.5, 2.0), {0.0, 1e4, 100001, Spacing::Linear});
  auto r = check_assumption_vfinite(m, sq.conjugate, {1.0});
  EXPECT_NEAR(r.values[0], 4.0 / 3.0, 1e-3);
  r = check_assumption_vfinite(m, sq.conjugate, {1e-9});
  EXPECT_FALSE(r.finite_for_all_probes);

  const auto lg = prepare(log_utility(), {1e-6, 1e6, 20001, Spacing::Log});
  r = check_assumption_vfinite(m, lg.conjugate, {1.0});
  const double expect = 0.5 * (-std::log(0.5) - 1.0) + 0.5 * (-std::log(1.5) - 1.0);
  EXPECT_NEAR(r.values[0], expect, 1e-5);
}

TEST(Foc, SqrtAndStep)
{
  const auto m = two_state();
  const auto sq = prepare(power_utility(0.5, 2.0), {0.0, 10.0, 100001, Spacing::Linear});
  const auto r = solve(m, sq, 1.0);
  const auto foc = foc_check(r, m, sq);
  EXPECT_LE(foc.max_foc_residual, 1e-9);
  EXPECT_FALSE(foc.subgradient_form);
  EXPECT_EQ(foc.checked_states.size(), 2u);
  // against the smooth derivative the error is of the order of the grid step
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_NEAR(1.0 / std::sqrt(r.concavified_payoff[i]), r.multiplier * m.density()[i], 1e-3);
  }

  const auto step = prepare(step_utility(), kGrid);
  const auto rs = solve(m, step, 0.5);
  const auto fs = foc_check(rs, m, step);
  EXPECT_TRUE(fs.subgradient_form);
  EXPECT_EQ(fs.max_foc_residual, 0.0);
  EXPECT_EQ(fs.checked_states.size(), 2u);

  const auto small = solve(m, step, 0.2);
  const auto f0 = foc_check(small, m, step);
  for (auto i : f0.checked_states) {EXPECT_GT(small.concavified_payoff[i], 0.0);}
}
