#include "ncu/numeric.hpp"
#include "ncu/tolerances.hpp"

#include <algorithm>
#include <cmath>

namespace ncu
{

double pairwise_sum(std::span<const double> values)
{
  constexpr std::size_t kLeaf = 8;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) {s += v;}
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double pairwise_dot(const Eigen::VectorXd & a, const Eigen::VectorXd & b)
{
  const Eigen::VectorXd prod = a.cwiseProduct(b);
  return pairwise_sum(prod);
}

Eigen::VectorXd make_grid(const GridSpec & spec)
{
  if (spec.points < 2) {
    throw std::invalid_argument("grid needs at least 2 points");
  }
  if (!(spec.max > spec.min)) {
    throw std::invalid_argument("grid max must exceed grid min");
  }
  Eigen::VectorXd g(spec.points);
  const double last = spec.points - 1;
  if (spec.spacing == Spacing::Linear) {
    for (int i = 0; i < spec.points; ++i) {
      g[i] = spec.min + (spec.max - spec.min) * (i / last);
    }
  } else {
    if (!(spec.min > 0.0)) {
      throw std::invalid_argument("log-spaced grid needs min > 0");
    }
    const double lmin = std::log(spec.min);
    const double lmax = std::log(spec.max);
    for (int i = 0; i < spec.points; ++i) {
      g[i] = std::exp(lmin + (lmax - lmin) * (i / last));
    }
  }
  g[0] = spec.min;
  g[spec.points - 1] = spec.max;
  return g;
}

std::vector<Eigen::Index> upper_hull_indices(
  const Eigen::VectorXd & x, const Eigen::VectorXd & y,
  double collinear_rel)
{
  std::vector<Eigen::Index> hull;
  hull.reserve(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    while (hull.size() >= 2) {
      const auto a = hull[hull.size() - 1];
      const auto o = hull[hull.size() - 2];
      const double t = (x[a] - x[o]) / (x[i] - x[o]);
      const double chord = y[o] + (y[i] - y[o]) * t;
      if (y[a] - chord <= collinear_rel * std::max(1.0, std::abs(y[a]))) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(i);
  }
  return hull;
}

Tolerances tolerance_profile(const std::string & name)
{
  Tolerances t;
  if (name == "default") {
    return t;
  }
  if (name == "loose") {
    t.probability_sum *= 1e3;
    t.density_mean *= 1e3;
    t.martingale *= 1e3;
    t.band_rel *= 1e3;
    t.self_financing *= 1e3;
    t.admissibility *= 1e3;
    t.budget_check *= 1e3;
    return t;
  }
  throw std::invalid_argument("unknown tolerance profile '" + name + "' (expected default|loose)");
}

}  // namespace ncu
