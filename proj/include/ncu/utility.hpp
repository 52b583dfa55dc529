#ifndef NCU_UTILITY_HPP_
#define NCU_UTILITY_HPP_

#include "ncu/numeric.hpp"

#include <Eigen/Core>

#include <string>
#include <variant>
#include <vector>

namespace ncu
{

/// scale * x^exponent, exponent in (0,1).
struct Power
{
  double exponent;
  double scale;
};

/// scale * log(x).
struct Logarithmic
{
  double scale;
};

/// slope * x + intercept.
struct Linear
{
  double slope;
  double intercept;
};

struct Constant
{
  double level;
};

/// shift + scale * x^exponent, any exponent > 0 (exponent > 1 gives a convex piece).
struct ShiftedPower
{
  double exponent;
  double scale;
  double shift;
};

using PieceForm = std::variant<Power, Logarithmic, Linear, Constant, ShiftedPower>;

/// One analytic branch of U on [lo, hi]. hi may be +inf.
struct UtilityPiece
{
  double lo;
  double hi;
  PieceForm form;

  /// Formula value at x, for x in the closure of the piece.
  double value(double x) const;
  /// Formula derivative at x.
  double derivative(double x) const;
  /// Limit of the formula as x -> +inf (used for the last piece).
  double limit_at_infinity() const;
};

std::string form_name(const PieceForm & form);

/// Non-concave, nondecreasing, upper-semicontinuous utility on (0, inf) made of
/// finitely many analytic pieces.
///
/// The constructor enforces the structural invariants: pieces tile (0, inf)
/// without gaps or overlaps, each piece is nondecreasing, no downward jump at a
/// breakpoint, U is non-constant and U(inf) > 0. Throws std::invalid_argument
/// naming the offending piece or interval. The growth condition is a separate,
/// numerical check (check_growth).
class PiecewiseUtility
{
public:
  explicit PiecewiseUtility(std::vector<UtilityPiece> pieces);

  const std::vector<UtilityPiece> & pieces() const { return pieces_; }

  /// lim_{x -> 0} U(x); may be -inf.
  double value_at_zero() const { return value_at_zero_; }
  /// lim_{x -> inf} U(x); may be +inf.
  double value_at_infinity() const { return value_at_infinity_; }

  /// Interior breakpoints (the lo of every piece but the first).
  std::vector<double> breakpoints() const;

  /// Index of the piece whose half-open interval [lo, hi) contains x.
  std::size_t piece_index(double x) const;

  /// True when U is C^1 on (0, inf): no jump and no derivative mismatch at any breakpoint.
  bool continuously_differentiable(double tol = 1e-12) const;

private:
  std::vector<UtilityPiece> pieces_;
  double value_at_zero_;
  double value_at_infinity_;
};

/// U(x). At a breakpoint returns the larger one-sided limit (upper semicontinuity).
/// Throws DomainError for x <= 0 ("below domain").
double eval_utility(const PiecewiseUtility & u, double x);

/// Largest one-sided |U'| over the part of the pieces meeting [a, b].
/// Jumps are not counted; this is the Lipschitz constant between breakpoints.
double lipschitz_bound(const PiecewiseUtility & u, double a, double b);

struct GrowthReport
{
  std::vector<double> probes;
  std::vector<double> ratios;  // U(x)/x at each probe
  bool monotone_decay = false;
  bool pass = false;
};

/// Numerical check of lim U(x)/x = 0.
GrowthReport check_growth(
  const PiecewiseUtility & u, const std::vector<double> & probes,
  double threshold = 1e-2);

/// Probes used when no explicit list is supplied: 1e2, 1e4, 1e6, 1e8.
std::vector<double> default_growth_probes();

// Frequently used utilities.

/// 1 on [1, inf), 0 on (0, 1).
PiecewiseUtility step_utility();
/// min(x, 1) + max(0, min(x - 2, 1)).
PiecewiseUtility two_bump_utility();
/// scale * x^exponent on (0, inf).
PiecewiseUtility power_utility(double exponent, double scale);
/// log x on (0, inf).
PiecewiseUtility log_utility();

}  // namespace ncu

#endif  // NCU_UTILITY_HPP_
