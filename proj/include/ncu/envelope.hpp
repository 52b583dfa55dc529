#ifndef NCU_ENVELOPE_HPP_
#define NCU_ENVELOPE_HPP_

#include "ncu/numeric.hpp"
#include "ncu/tolerances.hpp"
#include "ncu/utility.hpp"

#include <Eigen/Core>

#include <vector>

namespace ncu
{

/// Concave piecewise-linear function on [x(0), inf): affine between vertices,
/// extended past the last vertex with `tail_slope`. Undefined left of x(0).
struct Hull
{
  Eigen::VectorXd x;      // strictly increasing
  Eigen::VectorXd value;
  double tail_slope = 0.0;

  Eigen::Index size() const { return x.size(); }
  /// Slope of segment k, i.e. between vertices k-1 and k (k = 1..size-1).
  double slope(Eigen::Index k) const { return (value[k] - value[k - 1]) / (x[k] - x[k - 1]); }
  /// All segment slopes, nonincreasing.
  Eigen::VectorXd slopes() const;
  /// Throws DomainError for t < x(0).
  double operator()(double t) const;
};

/// Grid samples of U: x sorted strictly increasing (0 included when U(0) is finite).
struct UtilitySamples
{
  Eigen::VectorXd x;
  Eigen::VectorXd value;
};

/// Concave envelope U_c of a piecewise utility, built on a finite grid.
struct ConcaveEnvelope
{
  Hull hull;
  std::vector<Interval> components;  // open intervals (lo, hi) making up {U < U_c}
  GridSpec grid;
  UtilitySamples samples;

  double operator()(double t) const { return hull(t); }
};

/// Grid used by compute_envelope: the generated grid, every breakpoint of U
/// inside it, and x = 0 when U(0) is finite.
UtilitySamples sample_utility(const PiecewiseUtility & u, const GridSpec & grid);

/// Upper concave hull of the sampled graph of U.
///
/// Refuses (std::invalid_argument) when the growth check fails, when
/// U(0) = -inf and the grid starts at 0, or when a non-concavity component
/// reaches x_max (the grid does not cover the last non-concavity).
ConcaveEnvelope compute_envelope(
  const PiecewiseUtility & u, const GridSpec & grid,
  const Tolerances & tol = {});

/// Envelope of already-sampled values (no utility-level checks).
ConcaveEnvelope envelope_from_samples(
  UtilitySamples samples, const GridSpec & grid,
  const Tolerances & tol = {});

/// Sorted disjoint bounded open intervals of {U < U_c}.
std::vector<Interval> envelope_components(const ConcaveEnvelope & env);

}  // namespace ncu

#endif  // NCU_ENVELOPE_HPP_
