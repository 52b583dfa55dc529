#ifndef NCU_SOLVER_HPP_
#define NCU_SOLVER_HPP_

#include "ncu/envelope.hpp"
#include "ncu/market.hpp"
#include "ncu/numeric.hpp"
#include "ncu/tolerances.hpp"
#include "ncu/transform.hpp"
#include "ncu/utility.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace ncu
{

/// Utility together with its envelope and conjugate, built once per grid.
struct PreparedUtility
{
  PiecewiseUtility utility;
  ConcaveEnvelope envelope;
  ConvexConjugate conjugate;
  Tolerances tol;
};

PreparedUtility prepare(const PiecewiseUtility & u, const GridSpec & grid, const Tolerances & tol = {});

/// Bisection could not locate the multiplier.
class ConvergenceError : public std::runtime_error
{
public:
  ConvergenceError(const std::string & what, double lo, double hi, int iterations)
  : std::runtime_error(what), lo(lo), hi(hi), iterations(iterations) {}

  double lo;
  double hi;
  int iterations;
};

/// Maximiser set of x -> U_c(x) - y z x, i.e. -∂V(y z) = [x_lo, x_hi].
Interval pointwise_argmax(const ConvexConjugate & V, double y, double z);

/// [B_min(y), B_max(y)]: cheapest and dearest budgets of pointwise maximisers
/// at multiplier y for states with weights p and density z.
Interval budget_envelope(
  const ConvexConjugate & V, const Eigen::VectorXd & p,
  const Eigen::VectorXd & z, double y);

struct KinkSelection
{
  Eigen::Index state = 0;
  Interval interval;     // maximiser interval at y* z
  double selected = 0.0;
};

/// Solution of the concavified problem sup E[U_c(f)] s.t. E[z f] <= x.
struct ConcavifiedSolution
{
  Eigen::VectorXd payoff;
  double multiplier = 0.0;
  std::vector<Eigen::Index> kink_states;
  std::vector<KinkSelection> selection;
  bool budget_slack = false;  // satiated: y* = 0, the constraint does not bind
  int iterations = 0;
};

/// Multiplier search plus kink selection on arbitrary state weights
/// (p and z need not be normalised). Throws ConvergenceError.
ConcavifiedSolution solve_concavified(
  const ConvexConjugate & V, const Eigen::VectorXd & p,
  const Eigen::VectorXd & z, double x);

enum class PrimalMethod
{
  Concave,        // no non-concavity: primal payoff = concavified payoff
  Exhaustive,     // pinned/free enumeration; exact for piecewise-linear U
  PinnedSearch,   // same enumeration on a U with curved pieces; best found, not certified
  KinkEndpoints,  // endpoint combinations of the kink states only
  Greedy          // more than max_kink_enumeration kink states; heuristic
};

std::string to_string(PrimalMethod m);

struct SolverResult
{
  Eigen::VectorXd payoff;              // maximiser found for E[U(f)]
  Eigen::VectorXd concavified_payoff;  // selection from -∂V(y* z)
  double multiplier = 0.0;
  double primal_value = 0.0;           // sum p U(payoff); sum p U_c(payoff) when U is concave on the grid
  double concavified_value = 0.0;      // sum p U_c(concavified_payoff)
  double dual_value = 0.0;             // v(y*) + x y*
  double duality_gap = 0.0;            // concavified - primal
  std::vector<Eigen::Index> kink_states;
  std::vector<KinkSelection> selection_record;
  bool budget_slack = false;
  PrimalMethod primal_method = PrimalMethod::Concave;
  bool primal_warning = false;         // greedy fallback was used
  bool beyond_grid = false;            // a payoff lies past the envelope grid
  int iterations = 0;
};

/// Solves u(x, U) and u(x, U_c) on a finite market by concavification duality.
SolverResult solve(const FiniteMarket & market, const PreparedUtility & prep, double x);

struct ValueCurve
{
  Eigen::VectorXd x;
  Eigen::VectorXd u_U;
  Eigen::VectorXd u_Uc;
  Eigen::VectorXd hull_u_U;
  Eigen::VectorXd multiplier;
};

/// u(x, U), u(x, U_c) and the upper concave hull of u(x, U) on an increasing grid.
/// Points whose primal search is not certified exact are raised to the
/// brute-force value (1000-point wealth grid) when N <= 4.
/// The hull is taken over the grid points only.
ValueCurve value_function(
  const FiniteMarket & market, const PreparedUtility & prep,
  const Eigen::VectorXd & x_grid);

/// v(y) = sum p_i V(y z_i). Throws DomainError naming the state when y z_i is outside dom V.
Eigen::VectorXd dual_function(
  const FiniteMarket & market, const ConvexConjugate & V,
  const Eigen::VectorXd & y_grid);

struct DualityReport
{
  double max_dev_fenchel = 0.0;      // max_y |v(y) - max_x (u_U(x) - x y)|
  double hull_coincidence_dev = 0.0; // max_x |u_Uc(x) - hull(u_U)(x)|
  Eigen::Index x_points = 0;
  Eigen::Index y_points = 0;
  double x_spacing = 0.0;            // largest gap in the x grid
  ValueCurve curve;
  Eigen::VectorXd dual;              // v on the y grid
};

DualityReport duality_check(
  const FiniteMarket & market, const PreparedUtility & prep,
  const Eigen::VectorXd & x_grid, const Eigen::VectorXd & y_grid);

struct BruteForceResult
{
  double value = -kInf;
  Eigen::VectorXd payoff;
};

/// Exhaustive search over the product wealth grid restricted to the budget,
/// with one coordinate taking the exact budget residual (each coordinate is
/// tried as the free one). Refuses more than 4 states.
BruteForceResult brute_force(
  const FiniteMarket & market, const PiecewiseUtility & u, double x,
  const Eigen::VectorXd & wealth_grid);

/// Uniform grid on [0, max_i x/(p_i z_i)] plus every cap x/(p_i z_i) and every breakpoint of U.
Eigen::VectorXd default_wealth_grid(
  const FiniteMarket & market, const PiecewiseUtility & u, double x, int points);

struct VFiniteReport
{
  bool finite_for_all_probes = true;
  std::vector<double> values;  // v(y) per probe (+inf when outside dom V)
  std::vector<std::string> violations;
};

/// E[V(y Z)] < inf at each probe.
VFiniteReport check_assumption_vfinite(
  const FiniteMarket & market, const ConvexConjugate & V,
  const std::vector<double> & y_probes);

struct FocReport
{
  double max_foc_residual = 0.0;
  std::vector<Eigen::Index> checked_states;
  bool subgradient_form = false;  // U is not C^1: checked as y z in ∂U_c(f)
};

/// y* z_i in ∂U_c(f_i) for every state with f_i > 0 (concavified payoff);
/// residual is the distance to the interval.
FocReport foc_check(const SolverResult & result, const FiniteMarket & market, const PreparedUtility & prep);

}  // namespace ncu

#endif  // NCU_SOLVER_HPP_
