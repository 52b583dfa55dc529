#include "ncu/transform.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace ncu
{

namespace
{

bool near_rel(double a, double b, double rel)
{
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace

ConvexConjugate::ConvexConjugate(const ConcaveEnvelope & env, Tolerances tol)
: hull_(env.hull), tol_(tol)
{
  const Eigen::Index n = hull_.size();
  if (n < 2) {
    throw std::invalid_argument("conjugate needs a hull with at least two vertices");
  }
  const Eigen::Index m = n - 1;
  sigma_ = hull_.slopes();
  y_ = sigma_.reverse();
  v_.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    // y_[j] is sigma_{m-j}; the left vertex of that segment is m-j-1.
    const Eigen::Index k = m - j - 1;
    v_[j] = hull_.value[k] - hull_.x[k] * y_[j];
  }
  domain_start_ = sigma_[m - 1];
  left_limit_ = v_[0];
  right_tail_slope_ = -hull_.x[0];
}

void ConvexConjugate::require_domain(double y) const
{
  const double floor = domain_start_ * (1.0 - tol_.kink_rel);
  if (!(y >= floor) || y < 0.0) {
    std::ostringstream os;
    os << "V queried at y = " << y << " below its domain start " << domain_start_;
    throw DomainError(os.str());
  }
}

Eigen::Index ConvexConjugate::maximizer_vertex(double y) const
{
  const double * first = sigma_.data();
  const double * last = first + sigma_.size();
  return static_cast<Eigen::Index>(
    std::partition_point(first, last, [y](double s) {return s > y;}) - first);
}

Eigen::Index ConvexConjugate::kink_segment(double y) const
{
  const Eigen::Index m = sigma_.size();
  const Eigen::Index p = maximizer_vertex(y);
  // sigma_{p} > y >= sigma_{p+1} (1-based); test both neighbours.
  if (p + 1 <= m && near_rel(y, sigma_[p], tol_.kink_rel)) {return p + 1;}
  if (p >= 1 && near_rel(y, sigma_[p - 1], tol_.kink_rel)) {return p;}
  return 0;
}

double ConvexConjugate::operator()(double y) const
{
  require_domain(y);
  const Eigen::Index k = maximizer_vertex(y);
  return hull_.value[k] - hull_.x[k] * y;
}

ConvexConjugate conjugate(const ConcaveEnvelope & env, const Tolerances & tol)
{
  return ConvexConjugate(env, tol);
}

Interval subdifferential_V(const ConvexConjugate & V, double y)
{
  V(y);  // domain check
  const Hull & h = V.source();
  const Eigen::Index m = h.size() - 1;
  const Eigen::Index j = V.kink_segment(y);
  if (j > 0) {
    const double lo = j == m ? -kInf : -h.x[j];
    return {lo, -h.x[j - 1]};
  }
  const double q = -h.x[V.maximizer_vertex(y)];
  return {q, q};
}

Interval subdifferential_Uc(const ConcaveEnvelope & env, double x, const Tolerances & tol)
{
  if (!(x > 0.0)) {
    throw DomainError("below domain: ∂U_c needs x > 0");
  }
  const Hull & h = env.hull;
  const Eigen::Index n = h.size();
  const Eigen::Index m = n - 1;
  if (x < h.x[0] * (1.0 - tol.kink_rel)) {
    throw DomainError("∂U_c queried left of the first envelope vertex");
  }
  const double * first = h.x.data();
  const auto p = static_cast<Eigen::Index>(std::upper_bound(first, first + n, x) - first);
  auto at_vertex = [&](Eigen::Index k) {
      return k >= 0 && k < n && std::abs(x - h.x[k]) <= tol.kink_rel * std::max(1.0, h.x[k]);
    };
  Eigen::Index k = -1;
  if (at_vertex(p - 1)) {
    k = p - 1;
  } else if (at_vertex(p)) {
    k = p;
  }
  if (k == 0) {
    return {h.slope(1), kInf};
  }
  if (k > 0 && k < m) {
    return {h.slope(k + 1), h.slope(k)};
  }
  if (k == m) {
    return {h.tail_slope, h.slope(m)};
  }
  if (p >= n) {
    return {h.tail_slope, h.tail_slope};
  }
  const double s = h.slope(p);
  return {s, s};
}

FenchelYoungReport fenchel_young_check(
  const ConcaveEnvelope & env, const ConvexConjugate & V,
  double x, double y)
{
  const Tolerances & tol = V.tolerances();
  FenchelYoungReport r;
  r.gap = V(y) - (env(x) - x * y);
  r.equality = r.gap <= tol.value_abs;
  const Interval dv = subdifferential_V(V, y);
  r.x_in_minus_dV = x >= -dv.hi - tol.membership && x <= -dv.lo + tol.membership;
  r.y_in_dUc = subdifferential_Uc(env, x, tol).contains(y, tol.membership);
  return r;
}

Hull biconjugate(const ConvexConjugate & V)
{
  const Eigen::VectorXd & ys = V.y();
  const Eigen::VectorXd & vs = V.v();
  const Eigen::Index m = ys.size();

  // One primal vertex per linear piece of V: x = -slope, value = V(y) + x y at a piece end.
  Hull h;
  h.x.resize(m);
  h.value.resize(m);
  const double x0 = -V.right_tail_slope();
  h.x[0] = x0;
  h.value[0] = vs[m - 1] + x0 * ys[m - 1];
  for (Eigen::Index j = m - 2, out = 1; j >= 0; --j, ++out) {
    const double x = -(vs[j + 1] - vs[j]) / (ys[j + 1] - ys[j]);
    h.x[out] = x;
    h.value[out] = std::min(vs[j] + x * ys[j], vs[j + 1] + x * ys[j + 1]);
  }
  h.tail_slope = V.domain_start();
  return h;
}

EaeEstimate estimate_eae(const ConvexConjugate & V, const std::vector<double> & y_grid)
{
  if (y_grid.size() < 10) {
    throw std::invalid_argument("EAE estimate needs at least 10 y points");
  }
  std::vector<double> ys = y_grid;
  std::sort(ys.begin(), ys.end());
  const double ymin = ys.front();
  const double ymax = ys.back();
  if (!(ymin > 0.0) || ymax / ymin < 1e4 * (1.0 - 1e-9)) {
    throw std::invalid_argument("EAE y grid must be positive and span at least 4 decades");
  }
  if (!(ymin > V.domain_start())) {
    throw DomainError("EAE y grid reaches the domain start of V");
  }

  std::map<long, double> per_decade;
  for (double y : ys) {
    const double val = V(y);
    if (!(val > 0.0)) {
      throw std::domain_error("shift utility: EAE undefined here (V <= 0)");
    }
    const Interval q = subdifferential_V(V, y);
    const double qmax = std::max(std::abs(q.lo), std::abs(q.hi));
    const double ratio = qmax * y / val;
    const long d = static_cast<long>(std::floor(std::log10(y / ymin) + 1e-12));
    auto [it, inserted] = per_decade.try_emplace(d, ratio);
    if (!inserted) {it->second = std::max(it->second, ratio);}
  }

  EaeEstimate e;
  for (const auto & [d, r] : per_decade) {
    e.trace.push_back({ymin * std::pow(10.0, static_cast<double>(d)), r});
  }
  e.value = e.trace.front().max_ratio;
  if (e.trace.size() >= 2) {
    const double a = e.trace[0].max_ratio;
    const double b = e.trace[1].max_ratio;
    const Tolerances & tol = V.tolerances();
    e.converged = std::abs(a - b) <= tol.eae_variation * std::max(std::abs(a), std::abs(b)) ||
      std::max(a, b) < tol.eae_floor;
  }
  return e;
}

EaeInequalityReport eae_inequality_report(
  const ConvexConjugate & V, double gamma, double y0,
  const std::vector<double> & mu_grid)
{
  if (!(gamma > 0.0) || !(y0 > 0.0)) {
    throw std::invalid_argument("gamma and y0 must be positive");
  }
  const double start = V.domain_start();
  std::vector<double> ys;
  for (Eigen::Index j = 0; j < V.y().size(); ++j) {
    if (V.y()[j] > start && V.y()[j] <= y0) {ys.push_back(V.y()[j]);}
  }
  const double lo = std::max(1e-4 * y0, start * (1.0 + 1e-9));
  if (lo < y0) {
    const auto g = make_grid({lo, y0, 64, Spacing::Log});
    ys.insert(ys.end(), g.data(), g.data() + g.size());
  } else if (y0 > start) {
    ys.push_back(y0);
  }

  const double rel = V.tolerances().eae_inequality_rel;
  EaeInequalityReport r;
  for (double mu : mu_grid) {
    if (!(mu > 0.0 && mu <= 1.0)) {
      throw std::invalid_argument("mu must lie in (0, 1]");
    }
    const double factor = std::pow(mu, -gamma);
    for (double y : ys) {
      const double vy = V(y);
      if (!(vy > 0.0)) {
        throw std::domain_error("V must be positive on (0, y0]");
      }
      if (mu * y < start) {
        ++r.pairs_skipped;
        continue;
      }
      const double lhs = V(mu * y);
      const double rhs = factor * vy;
      ++r.pairs_checked;
      r.worst_ratio = std::max(r.worst_ratio, lhs / rhs);
      if (lhs > rhs * (1.0 + rel)) {
        r.holds = false;
      }
    }
  }
  return r;
}

bool check_eae_inequality(
  const ConvexConjugate & V, double gamma, double y0,
  const std::vector<double> & mu_grid)
{
  return eae_inequality_report(V, gamma, y0, mu_grid).holds;
}

std::optional<double> search_eae_gamma(
  const ConvexConjugate & V, double y0, const std::vector<double> & mu_grid,
  std::vector<double> candidates)
{
  std::sort(candidates.begin(), candidates.end());
  for (double g : candidates) {
    if (check_eae_inequality(V, g, y0, mu_grid)) {
      return g;
    }
  }
  return std::nullopt;
}

bool check_envelope_domination(
  const PiecewiseUtility & u, const ConcaveEnvelope & env,
  double x0, double k, const Tolerances & tol)
{
  if (!(eval_utility(u, x0) > 0.0)) {
    throw std::invalid_argument("envelope domination needs U(x0) > 0");
  }
  const auto & s = env.samples;
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    if (s.x[i] <= x0) {continue;}
    const double uc = env(s.x[i]);
    if (uc < -tol.value_abs || uc > k * s.value[i] + tol.value_abs) {
      return false;
    }
  }
  return true;
}

}  // namespace ncu
