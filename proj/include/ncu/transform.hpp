#ifndef NCU_TRANSFORM_HPP_
#define NCU_TRANSFORM_HPP_

#include "ncu/envelope.hpp"
#include "ncu/numeric.hpp"
#include "ncu/tolerances.hpp"
#include "ncu/utility.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace ncu
{

/// Convex conjugate V(y) = sup_{x >= x_0} { U_c(x) - x y } of an envelope hull.
///
/// V is piecewise linear with breakpoints at the hull slopes. Between two
/// consecutive breakpoints the maximiser is a single hull vertex and V has
/// slope -x_k. V is finite on [domain_start, inf) where domain_start is the
/// envelope's tail slope; below it V = +inf.
class ConvexConjugate
{
public:
  explicit ConvexConjugate(const ConcaveEnvelope & env, Tolerances tol = {});

  /// Breakpoints y_j (ascending, = hull slopes) and V(y_j).
  const Eigen::VectorXd & y() const { return y_; }
  const Eigen::VectorXd & v() const { return v_; }

  /// Smallest y with V(y) < inf (the envelope's tail slope, >= 0).
  double domain_start() const { return domain_start_; }
  /// lim_{y -> domain_start} V(y); equals U(inf) when the tail is flat.
  double left_limit() const { return left_limit_; }
  /// Slope of V beyond its last breakpoint: -x_0.
  double right_tail_slope() const { return right_tail_slope_; }

  /// Primal hull the transform was taken from (maximiser lookups).
  const Hull & source() const { return hull_; }
  /// Hull slopes, descending (sigma_1 > sigma_2 > ... > sigma_m = domain_start).
  const Eigen::VectorXd & hull_slopes() const { return sigma_; }

  /// V(y). Throws DomainError below domain_start.
  double operator()(double y) const;

  /// Index j (1-based segment) if y sits on the hull slope sigma_j within the
  /// kink tolerance, otherwise 0.
  Eigen::Index kink_segment(double y) const;
  /// Hull vertex that uniquely maximises U_c(x) - x y when y is not a kink.
  Eigen::Index maximizer_vertex(double y) const;

  const Tolerances & tolerances() const { return tol_; }

private:
  void require_domain(double y) const;

  Hull hull_;
  Eigen::VectorXd sigma_;
  Eigen::VectorXd y_;
  Eigen::VectorXd v_;
  double domain_start_ = 0.0;
  double left_limit_ = 0.0;
  double right_tail_slope_ = 0.0;
  Tolerances tol_;
};

ConvexConjugate conjugate(const ConcaveEnvelope & env, const Tolerances & tol = {});

/// [V'_-(y), V'_+(y)]. The maximiser set of x -> U_c(x) - x y is [-hi, -lo].
/// Throws DomainError outside dom V.
Interval subdifferential_V(const ConvexConjugate & V, double y);

/// Superdifferential of U_c at x as [lo, hi] = [U_c'_+(x), U_c'_-(x)].
/// At the first hull vertex x_0 > 0 the upper end is +inf.
Interval subdifferential_Uc(const ConcaveEnvelope & env, double x, const Tolerances & tol = {});

struct FenchelYoungReport
{
  double gap = 0.0;            // V(y) - (U_c(x) - x y), >= 0
  bool equality = false;       // gap <= value tolerance
  bool x_in_minus_dV = false;  // x in -∂V(y)
  bool y_in_dUc = false;       // y in ∂U_c(x)

  bool consistent() const { return equality == x_in_minus_dV && equality == y_in_dUc; }
};

FenchelYoungReport fenchel_young_check(
  const ConcaveEnvelope & env, const ConvexConjugate & V,
  double x, double y);

/// inf_y { V(y) + x y } rebuilt from V's breakpoints alone.
Hull biconjugate(const ConvexConjugate & V);

struct EaeDecade
{
  double y_lo = 0.0;
  double max_ratio = 0.0;
};

struct EaeEstimate
{
  double value = 0.0;           // max ratio over the smallest decade
  std::vector<EaeDecade> trace; // smallest decade first
  bool converged = false;
};

/// Numerical limsup_{y -> 0} sup_{q in ∂V(y)} |q| y / V(y).
/// Needs >= 10 points spanning >= 4 decades inside dom V, with V > 0 on them
/// (otherwise throws; "shift utility: EAE undefined here" when V <= 0).
EaeEstimate estimate_eae(const ConvexConjugate & V, const std::vector<double> & y_grid);

struct EaeInequalityReport
{
  bool holds = true;
  double worst_ratio = 0.0;  // max of V(mu y) / (mu^-gamma V(y))
  std::size_t pairs_checked = 0;
  std::size_t pairs_skipped = 0;  // mu*y below dom V
};

/// V(mu y) <= mu^-gamma V(y) for mu in mu_grid, y in (0, y0] sampled at V's
/// breakpoints plus 64 log-spaced points on [1e-4 y0, y0].
EaeInequalityReport eae_inequality_report(
  const ConvexConjugate & V, double gamma, double y0,
  const std::vector<double> & mu_grid);

bool check_eae_inequality(
  const ConvexConjugate & V, double gamma, double y0,
  const std::vector<double> & mu_grid);

/// Smallest gamma in `candidates` (scanned in ascending order) for which the
/// inequality holds. Not a completeness claim.
std::optional<double> search_eae_gamma(
  const ConvexConjugate & V, double y0, const std::vector<double> & mu_grid,
  std::vector<double> candidates);

/// 0 <= U_c <= k U on every envelope sample point x > x0.
bool check_envelope_domination(
  const PiecewiseUtility & u, const ConcaveEnvelope & env,
  double x0, double k, const Tolerances & tol = {});

}  // namespace ncu

#endif  // NCU_TRANSFORM_HPP_
