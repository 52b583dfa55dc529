#ifndef NCU_NUMERIC_HPP_
#define NCU_NUMERIC_HPP_

#include <Eigen/Core>

#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace ncu
{

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Thrown when an argument falls outside the domain of a function (x <= 0 for U, y below dom V, ...).
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Closed interval [lo, hi]; endpoints may be infinite.
struct Interval
{
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
  double distance(double v) const
  {
    if (v < lo) {return lo - v;}
    if (v > hi) {return v - hi;}
    return 0.0;
  }
  double width() const { return hi - lo; }
};

/// Pairwise summation with a fixed split order, so results do not depend on scheduling.
double pairwise_sum(std::span<const double> values);

inline double pairwise_sum(const Eigen::VectorXd & v)
{
  return pairwise_sum(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

/// Fixed-order sum of a.cwiseProduct(b).
double pairwise_dot(const Eigen::VectorXd & a, const Eigen::VectorXd & b);

/// Spacing rule for generated grids.
enum class Spacing { Linear, Log };

struct GridSpec
{
  double min = 0.0;
  double max = 1.0;
  int points = 2;
  Spacing spacing = Spacing::Linear;
};

/// Materialise a grid; the endpoints are included exactly.
Eigen::VectorXd make_grid(const GridSpec & spec);

/// Upper concave hull of points sorted by strictly increasing x.
/// Returns indices of the hull vertices. A point whose height above the chord
/// of its neighbours is at most `collinear_rel * max(1, |y|)` is dropped.
std::vector<Eigen::Index> upper_hull_indices(
  const Eigen::VectorXd & x, const Eigen::VectorXd & y,
  double collinear_rel);

}  // namespace ncu

#endif  // NCU_NUMERIC_HPP_
