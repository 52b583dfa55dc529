#include "ncu/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ncu
{

Eigen::VectorXd Hull::slopes() const
{
  Eigen::VectorXd s(std::max<Eigen::Index>(size() - 1, 0));
  for (Eigen::Index k = 1; k < size(); ++k) {
    s[k - 1] = slope(k);
  }
  return s;
}

double Hull::operator()(double t) const
{
  if (t < x[0]) {
    std::ostringstream os;
    os << "envelope queried at " << t << ", left of its first vertex " << x[0];
    throw DomainError(os.str());
  }
  const Eigen::Index n = size();
  if (t >= x[n - 1]) {
    return value[n - 1] + tail_slope * (t - x[n - 1]);
  }
  const double * first = x.data();
  const auto k = static_cast<Eigen::Index>(std::upper_bound(first, first + n, t) - first);
  // x[k-1] <= t < x[k]
  const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
  return value[k - 1] + w * (value[k] - value[k - 1]);
}

UtilitySamples sample_utility(const PiecewiseUtility & u, const GridSpec & grid)
{
  const bool finite_at_zero = std::isfinite(u.value_at_zero());
  if (!finite_at_zero && grid.min <= 0.0) {
    throw std::invalid_argument("U(0) = -inf: envelope grid must start at x_min > 0");
  }
  const Eigen::VectorXd g = make_grid(grid);
  std::vector<double> xs(g.data(), g.data() + g.size());
  for (double b : u.breakpoints()) {
    if (b > grid.min && b < grid.max) {xs.push_back(b);}
  }
  if (finite_at_zero && grid.min > 0.0) {
    xs.push_back(0.0);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  UtilitySamples s;
  s.x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  s.value.resize(s.x.size());
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    s.value[i] = s.x[i] == 0.0 ? u.value_at_zero() : eval_utility(u, s.x[i]);
  }
  return s;
}

ConcaveEnvelope envelope_from_samples(
  UtilitySamples samples, const GridSpec & grid,
  const Tolerances & tol)
{
  if (samples.x.size() < 2) {
    throw std::invalid_argument("envelope needs at least 2 grid points");
  }
  const auto idx = upper_hull_indices(samples.x, samples.value, tol.hull_collinear_rel);

  ConcaveEnvelope env;
  env.grid = grid;
  env.hull.x.resize(static_cast<Eigen::Index>(idx.size()));
  env.hull.value.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    env.hull.x[static_cast<Eigen::Index>(k)] = samples.x[idx[k]];
    env.hull.value[static_cast<Eigen::Index>(k)] = samples.value[idx[k]];
  }
  env.hull.tail_slope = env.hull.size() >= 2 ? env.hull.slope(env.hull.size() - 1) : 0.0;

  // Maximal runs of strict points, snapped to the neighbouring contact points.
  const Eigen::Index n = samples.x.size();
  Eigen::Index run_start = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool strict = env.hull(samples.x[i]) - samples.value[i] > tol.component_threshold;
    if (strict && run_start < 0) {
      run_start = i;
    }
    if (!strict && run_start >= 0) {
      env.components.push_back({samples.x[run_start - 1], samples.x[i]});
      run_start = -1;
    }
  }
  if (run_start >= 0) {
    // Unreachable for a proper hull (the last sample is a vertex); kept as a guard.
    env.components.push_back({samples.x[run_start - 1], samples.x[n - 1]});
  }
  env.samples = std::move(samples);
  return env;
}

ConcaveEnvelope compute_envelope(
  const PiecewiseUtility & u, const GridSpec & grid,
  const Tolerances & tol)
{
  const auto growth = check_growth(u, default_growth_probes(), tol.growth_threshold);
  if (!growth.pass) {
    std::ostringstream os;
    os << "growth condition fails: U(x)/x = " << growth.ratios.back() << " at x = "
       << growth.probes.back();
    throw std::invalid_argument(os.str());
  }
  auto env = envelope_from_samples(sample_utility(u, grid), grid, tol);
  if (!env.components.empty()) {
    const Eigen::Index m = env.hull.size();
    // The last non-concavity must end strictly before the last flat/concave stretch.
    if (env.components.back().hi >= env.hull.x[m - 1]) {
      std::ostringstream os;
      os << "envelope grid x_max = " << grid.max << " does not cover the last non-concavity";
      throw std::invalid_argument(os.str());
    }
  }
  return env;
}

std::vector<Interval> envelope_components(const ConcaveEnvelope & env)
{
  auto c = env.components;
  std::sort(c.begin(), c.end(), [](const Interval & a, const Interval & b) {return a.lo < b.lo;});
  return c;
}

}  // namespace ncu
