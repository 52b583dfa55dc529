#include "ncu/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ncu
{

PreparedUtility prepare(const PiecewiseUtility & u, const GridSpec & grid, const Tolerances & tol)
{
  ConcaveEnvelope env = compute_envelope(u, grid, tol);
  ConvexConjugate V(env, tol);
  return PreparedUtility{u, std::move(env), std::move(V), tol};
}

Interval pointwise_argmax(const ConvexConjugate & V, double y, double z)
{
  const Interval d = subdifferential_V(V, y * z);
  return {-d.hi, -d.lo};
}

Interval budget_envelope(
  const ConvexConjugate & V, const Eigen::VectorXd & p,
  const Eigen::VectorXd & z, double y)
{
  const Eigen::Index n = p.size();
  Eigen::VectorXd lo(n);
  Eigen::VectorXd hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Interval a = pointwise_argmax(V, y, z[i]);
    lo[i] = a.lo;
    hi[i] = a.hi;
  }
  const Eigen::VectorXd c = p.cwiseProduct(z);
  return {pairwise_dot(c, lo), pairwise_dot(c, hi)};
}

namespace
{

std::vector<Eigen::Index> by_ascending_density(const Eigen::VectorXd & z, std::vector<Eigen::Index> states)
{
  std::stable_sort(
    states.begin(), states.end(),
    [&z](Eigen::Index a, Eigen::Index b) {return z[a] < z[b];});
  return states;
}

}  // namespace

ConcavifiedSolution solve_concavified(
  const ConvexConjugate & V, const Eigen::VectorXd & p,
  const Eigen::VectorXd & z, double x)
{
  const Tolerances & tol = V.tolerances();
  const Hull & h = V.source();
  const Eigen::Index n = p.size();
  const Eigen::Index m = h.size() - 1;
  const Eigen::VectorXd c = p.cwiseProduct(z);
  const double total_weight = pairwise_sum(c);
  const double slack = tol.budget * std::max(1.0, std::abs(x));

  const double min_cost = h.x[0] * total_weight;
  if (x < min_cost - slack) {
    std::ostringstream os;
    os << "wealth " << x << " is below the cheapest admissible payoff " << min_cost;
    throw std::invalid_argument(os.str());
  }

  ConcavifiedSolution s;
  const Eigen::VectorXd & sigma = V.hull_slopes();
  const double tau = V.domain_start();

  if (tau <= 0.0) {
    const double satiation = h.x[m - 1];
    const double cost = satiation * total_weight;
    if (x >= cost - slack) {
      s.payoff = Eigen::VectorXd::Constant(n, satiation);
      s.multiplier = 0.0;
      s.budget_slack = x > cost + slack;
      return s;
    }
  }

  auto fits = [&](const Interval & b) {return b.lo <= x + slack && b.hi >= x - slack;};
  auto budget = [&](double y) {return budget_envelope(V, p, z, y);};

  const double z_min = z.minCoeff();
  double lo = tau / z_min;
  double hi = sigma[0] / z_min;
  double y = hi;
  bool found = fits(budget(hi));
  int it = 0;
  while (!found && it < tol.bisection_max_iter) {
    ++it;
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) {break;}
    const Interval b = budget(mid);
    if (fits(b)) {
      y = mid;
      found = true;
    } else if (b.lo > x + slack) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= tol.bisection_rel * hi) {break;}
  }
  s.iterations = it;

  if (!found) {
    // The jump in B sits at a kink y = sigma_k / z_i inside the bracket.
    std::vector<double> candidates;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = lo * z[i] * (1.0 - tol.kink_rel);
      const double b = hi * z[i] * (1.0 + tol.kink_rel);
      for (Eigen::Index k = 0; k < sigma.size(); ++k) {
        if (sigma[k] >= a && sigma[k] <= b) {
          candidates.push_back(sigma[k] / z[i]);
        }
      }
    }
    std::sort(candidates.begin(), candidates.end());
    for (double cand : candidates) {
      if (cand * z_min < tau * (1.0 - tol.kink_rel)) {continue;}
      if (fits(budget(cand))) {
        y = cand;
        found = true;
        break;
      }
    }
  }
  if (!found) {
    std::ostringstream os;
    os << "multiplier search did not converge: bracket [" << lo << ", " << hi << "] after "
       << it << " iterations";
    throw ConvergenceError(os.str(), lo, hi, it);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = V.kink_segment(y * z[i]);
    if (j > 0) {
      const double exact = sigma[j - 1] / z[i];
      if (exact != y && exact * z_min >= tau && fits(budget(exact))) {y = exact;}
      break;
    }
  }
  s.multiplier = y;

  s.payoff.resize(n);
  std::vector<Interval> intervals(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> kinks;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Interval a = pointwise_argmax(V, y, z[i]);
    intervals[static_cast<std::size_t>(i)] = a;
    s.payoff[i] = a.lo;
    if (a.hi > a.lo) {kinks.push_back(i);}
  }
  double residual = x - pairwise_dot(c, s.payoff);
  for (Eigen::Index i : by_ascending_density(z, kinks)) {
    const Interval & a = intervals[static_cast<std::size_t>(i)];
    const double room = c[i] * (a.hi - a.lo);
    const double take = std::clamp(residual, 0.0, room);
    s.payoff[i] = a.lo + take / c[i];
    residual -= take;
    s.selection.push_back({i, a, s.payoff[i]});
  }
  s.kink_states = kinks;
  return s;
}

std::string to_string(PrimalMethod m)
{
  switch (m) {
    case PrimalMethod::Concave: return "concave";
    case PrimalMethod::Exhaustive: return "exhaustive";
    case PrimalMethod::PinnedSearch: return "pinned_search";
    case PrimalMethod::KinkEndpoints: return "kink_endpoints";
    case PrimalMethod::Greedy: return "greedy";
  }
  return "unknown";
}

namespace
{

double utility_at(const PiecewiseUtility & u, double f)
{
  return f > 0.0 ? eval_utility(u, f) : u.value_at_zero();
}

double expected_utility(const PiecewiseUtility & u, const Eigen::VectorXd & p, const Eigen::VectorXd & f)
{
  Eigen::VectorXd vals(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    vals[i] = utility_at(u, f[i]);
  }
  return pairwise_dot(p, vals);
}

bool piecewise_linear(const PiecewiseUtility & u)
{
  return std::all_of(
    u.pieces().begin(), u.pieces().end(), [](const UtilityPiece & piece) {
      return std::holds_alternative<Linear>(piece.form) ||
             std::holds_alternative<Constant>(piece.form);
    });
}

// Best payoff found so far for E[U(f)]; the first candidate reaching a value wins ties.
struct PrimalSearch
{
  const PiecewiseUtility & u;
  const ConvexConjugate & V;
  const Eigen::VectorXd & p;
  const Eigen::VectorXd & z;
  const Eigen::VectorXd & c;
  double slack;
  double best = -kInf;
  Eigen::VectorXd payoff;

  void offer(const Eigen::VectorXd & f)
  {
    const double v = expected_utility(u, p, f);
    if (payoff.size() == 0 || v > best) {
      best = v;
      payoff = f;
    }
  }

  // Spends `budget` on the states in `free` through the concavified sub-problem.
  // Returns false when the budget cannot cover them.
  bool fill(Eigen::VectorXd & f, const std::vector<Eigen::Index> & free, double budget) const
  {
    if (free.size() == 1) {
      const Eigen::Index i = free[0];
      if (budget < -slack) {return false;}
      f[i] = std::max(budget, 0.0) / c[i];
      return true;
    }
    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd ps(k);
    Eigen::VectorXd zs(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      ps[j] = p[free[static_cast<std::size_t>(j)]];
      zs[j] = z[free[static_cast<std::size_t>(j)]];
    }
    if (budget < V.source().x[0] * pairwise_dot(ps, zs) - slack) {return false;}
    const ConcavifiedSolution sub = solve_concavified(V, ps, zs, std::max(budget, 0.0));
    for (Eigen::Index j = 0; j < k; ++j) {
      f[free[static_cast<std::size_t>(j)]] = sub.payoff[j];
    }
    return true;
  }
};

std::vector<double> pin_points(const PiecewiseUtility & u, const ConcaveEnvelope & env)
{
  const double first = env.hull.x[0];
  const double last = env.hull.x[env.hull.size() - 1];
  std::vector<double> e{first};
  for (const auto & comp : env.components) {
    e.push_back(comp.lo);
    e.push_back(comp.hi);
  }
  for (double b : u.breakpoints()) {
    if (b >= first && b <= last) {e.push_back(b);}
  }
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return e;
}

// Every state pinned to a point of E or left free; free states share the residual budget.
bool pinned_enumeration(PrimalSearch & search, double x, const std::vector<double> & e, long limit)
{
  const Eigen::Index n = search.p.size();
  const auto radix = static_cast<long>(e.size()) + 1;
  long total = 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    total *= radix;
    if (total > limit) {return false;}
  }
  std::vector<long> digit(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd f(n);
  for (long code = 0; code < total; ++code) {
    long rest = code;
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      digit[static_cast<std::size_t>(i)] = rest % radix;
      rest /= radix;
    }
    std::vector<Eigen::Index> free;
    double pinned_cost = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const long d = digit[static_cast<std::size_t>(i)];
      if (d == radix - 1) {
        free.push_back(i);
      } else {
        f[i] = e[static_cast<std::size_t>(d)];
        pinned_cost += search.c[i] * f[i];
      }
    }
    if (free.empty() || pinned_cost > x + search.slack) {continue;}
    if (search.fill(f, free, x - pinned_cost)) {search.offer(f);}
  }
  return true;
}

// Kink states at their interval endpoints; the other states re-solve on what is left.
void kink_endpoint_search(
  PrimalSearch & search, double x, const ConcavifiedSolution & cs,
  const Tolerances & tol, bool & greedy)
{
  const Eigen::Index n = search.p.size();
  const auto order = by_ascending_density(search.z, cs.kink_states);
  std::vector<Interval> iv;
  for (Eigen::Index i : order) {
    iv.push_back(pointwise_argmax(search.V, cs.multiplier, search.z[i]));
  }
  std::vector<Eigen::Index> others;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::find(order.begin(), order.end(), i) == order.end()) {others.push_back(i);}
  }

  auto attempt = [&](const std::vector<bool> & high, Eigen::VectorXd & f) {
      f = cs.payoff;
      double cost = 0.0;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const double v = high[k] ? iv[k].hi : iv[k].lo;
        if (!std::isfinite(v)) {return false;}
        f[order[k]] = v;
        cost += search.c[order[k]] * v;
      }
      const double left = x - cost;
      if (others.empty()) {
        if (left < -search.slack) {return false;}
        if (left > 0.0 && !order.empty()) {f[order[0]] += left / search.c[order[0]];}
        return true;
      }
      return search.fill(f, others, left);
    };

  Eigen::VectorXd f(n);
  const std::size_t k = order.size();
  if (static_cast<int>(k) <= tol.max_kink_enumeration) {
    for (unsigned long mask = 0; mask < (1UL << k); ++mask) {
      std::vector<bool> high(k);
      for (std::size_t b = 0; b < k; ++b) {high[b] = (mask >> b) & 1UL;}
      if (attempt(high, f)) {search.offer(f);}
    }
    return;
  }
  greedy = true;
  std::vector<bool> high(k, false);
  if (attempt(high, f)) {search.offer(f);}
  for (std::size_t b = 0; b < k; ++b) {
    high[b] = true;
    const double before = search.best;
    if (attempt(high, f)) {search.offer(f);}
    if (!(search.best > before)) {high[b] = false;}
  }
}

}  // namespace

SolverResult solve(const FiniteMarket & market, const PreparedUtility & prep, double x)
{
  const auto & V = prep.conjugate;
  const auto & env = prep.envelope;
  const auto & u = prep.utility;
  const Tolerances & tol = prep.tol;
  const Eigen::VectorXd & p = market.probabilities();
  const Eigen::VectorXd & z = market.density();
  const Eigen::VectorXd & c = market.weights();
  const Eigen::Index n = market.size();
  if (!(x > 0.0)) {
    throw std::invalid_argument("initial wealth must be positive");
  }

  const ConcavifiedSolution cs = solve_concavified(V, p, z, x);

  SolverResult r;
  r.concavified_payoff = cs.payoff;
  r.multiplier = cs.multiplier;
  r.kink_states = cs.kink_states;
  r.selection_record = cs.selection;
  r.budget_slack = cs.budget_slack;
  r.iterations = cs.iterations;

  Eigen::VectorXd uc(n);
  Eigen::VectorXd vy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    uc[i] = env(cs.payoff[i]);
    vy[i] = V(cs.multiplier * z[i]);
  }
  r.concavified_value = pairwise_dot(p, uc);
  r.dual_value = pairwise_dot(p, vy) + x * cs.multiplier;

  PrimalSearch search{u, V, p, z, c, tol.budget * std::max(1.0, std::abs(x)), -kInf, {}};
  search.offer(cs.payoff);
  if (env.components.empty()) {
    r.primal_method = PrimalMethod::Concave;
  } else {
    const bool pinned = pinned_enumeration(search, x, pin_points(u, env), tol.max_pin_combinations);
    bool greedy = false;
    kink_endpoint_search(search, x, cs, tol, greedy);
    if (pinned) {
      r.primal_method = piecewise_linear(u) ? PrimalMethod::Exhaustive : PrimalMethod::PinnedSearch;
    } else {
      r.primal_method = greedy ? PrimalMethod::Greedy : PrimalMethod::KinkEndpoints;
      r.primal_warning = greedy;
    }
  }
  r.payoff = search.payoff;
  r.primal_value = search.best;
  if (r.primal_method == PrimalMethod::Concave) {
    r.primal_value = r.concavified_value;
  }
  // A satiated candidate may leave wealth unspent; U is nondecreasing, so spend it.
  const double unspent = x - pairwise_dot(c, r.payoff);
  if (unspent > search.slack) {
    Eigen::Index cheapest = 0;
    z.minCoeff(&cheapest);
    r.payoff[cheapest] += unspent / c[cheapest];
    r.primal_value = std::max(r.primal_value, expected_utility(u, p, r.payoff));
  }
  r.duality_gap = r.concavified_value - r.primal_value;

  const double edge = env.grid.max * (1.0 + tol.kink_rel);
  r.beyond_grid = (r.payoff.array() > edge).any() || (r.concavified_payoff.array() > edge).any();
  return r;
}

namespace
{

constexpr int kRefinementPoints = 1000;

}  // namespace

ValueCurve value_function(
  const FiniteMarket & market, const PreparedUtility & prep,
  const Eigen::VectorXd & x_grid)
{
  const Eigen::Index n = x_grid.size();
  if (n < 2) {
    throw std::invalid_argument("value curve needs at least two wealth points");
  }
  for (Eigen::Index j = 1; j < n; ++j) {
    if (!(x_grid[j] > x_grid[j - 1])) {
      throw std::invalid_argument("wealth grid must be strictly increasing");
    }
  }
  ValueCurve vc;
  vc.x = x_grid;
  vc.u_U.resize(n);
  vc.u_Uc.resize(n);
  vc.multiplier.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const SolverResult r = solve(market, prep, x_grid[j]);
    vc.u_U[j] = r.primal_value;
    const bool certified =
      r.primal_method == PrimalMethod::Concave || r.primal_method == PrimalMethod::Exhaustive;
    if (!certified && market.size() <= 4) {
      const auto grid = default_wealth_grid(market, prep.utility, x_grid[j], kRefinementPoints);
      vc.u_U[j] = std::max(vc.u_U[j], brute_force(market, prep.utility, x_grid[j], grid).value);
    }
    vc.u_Uc[j] = r.concavified_value;
    vc.multiplier[j] = r.multiplier;
  }

  std::vector<double> px;
  std::vector<double> py;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(vc.u_U[j])) {
      px.push_back(x_grid[j]);
      py.push_back(vc.u_U[j]);
    }
  }
  const Eigen::Map<const Eigen::VectorXd> mx(px.data(), static_cast<Eigen::Index>(px.size()));
  const Eigen::Map<const Eigen::VectorXd> my(py.data(), mx.size());
  const auto idx = upper_hull_indices(mx, my, prep.tol.hull_collinear_rel);
  vc.hull_u_U.resize(n);
  std::size_t seg = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double t = x_grid[j];
    if (idx.empty() || t < px[static_cast<std::size_t>(idx.front())]) {
      vc.hull_u_U[j] = -kInf;
      continue;
    }
    while (seg + 1 < idx.size() && px[static_cast<std::size_t>(idx[seg + 1])] < t) {++seg;}
    if (seg + 1 >= idx.size()) {
      vc.hull_u_U[j] = py[static_cast<std::size_t>(idx.back())];
      continue;
    }
    const auto a = static_cast<std::size_t>(idx[seg]);
    const auto b = static_cast<std::size_t>(idx[seg + 1]);
    const double w = (t - px[a]) / (px[b] - px[a]);
    vc.hull_u_U[j] = py[a] + w * (py[b] - py[a]);
  }
  return vc;
}

Eigen::VectorXd dual_function(
  const FiniteMarket & market, const ConvexConjugate & V,
  const Eigen::VectorXd & y_grid)
{
  const Eigen::VectorXd & p = market.probabilities();
  const Eigen::VectorXd & z = market.density();
  const double floor = V.domain_start() * (1.0 - V.tolerances().kink_rel);
  Eigen::VectorXd out(y_grid.size());
  Eigen::VectorXd vals(market.size());
  for (Eigen::Index k = 0; k < y_grid.size(); ++k) {
    for (Eigen::Index i = 0; i < market.size(); ++i) {
      const double yz = y_grid[k] * z[i];
      if (yz < floor) {
        std::ostringstream os;
        os << "state " << i << ": y z = " << yz << " lies below dom V (starts at "
           << V.domain_start() << ")";
        throw DomainError(os.str());
      }
      vals[i] = V(yz);
    }
    out[k] = pairwise_dot(p, vals);
  }
  return out;
}

DualityReport duality_check(
  const FiniteMarket & market, const PreparedUtility & prep,
  const Eigen::VectorXd & x_grid, const Eigen::VectorXd & y_grid)
{
  DualityReport r;
  r.curve = value_function(market, prep, x_grid);
  r.dual = dual_function(market, prep.conjugate, y_grid);
  r.x_points = x_grid.size();
  r.y_points = y_grid.size();
  for (Eigen::Index j = 1; j < x_grid.size(); ++j) {
    r.x_spacing = std::max(r.x_spacing, x_grid[j] - x_grid[j - 1]);
  }
  for (Eigen::Index k = 0; k < y_grid.size(); ++k) {
    const double y = y_grid[k];
    double best = -kInf;
    for (Eigen::Index j = 0; j < x_grid.size(); ++j) {
      best = std::max(best, r.curve.u_U[j] - x_grid[j] * y);
    }
    r.max_dev_fenchel = std::max(r.max_dev_fenchel, std::abs(r.dual[k] - best));
  }
  for (Eigen::Index j = 0; j < x_grid.size(); ++j) {
    r.hull_coincidence_dev = std::max(
      r.hull_coincidence_dev, std::abs(r.curve.u_Uc[j] - r.curve.hull_u_U[j]));
  }
  return r;
}

BruteForceResult brute_force(
  const FiniteMarket & market, const PiecewiseUtility & u, double x,
  const Eigen::VectorXd & wealth_grid)
{
  const Eigen::Index n = market.size();
  if (n > 4) {
    throw std::invalid_argument("brute force is limited to at most 4 states");
  }
  std::vector<double> g(wealth_grid.data(), wealth_grid.data() + wealth_grid.size());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  if (g.empty() || g.front() < 0.0) {
    throw std::invalid_argument("wealth grid must be nonempty and nonnegative");
  }
  std::vector<double> ug(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    ug[j] = utility_at(u, g[j]);
  }
  const Eigen::VectorXd & p = market.probabilities();
  const Eigen::VectorXd & c = market.weights();
  const double slack = 1e-12 * std::max(1.0, std::abs(x));

  BruteForceResult best;
  Eigen::VectorXd f(n);
  std::vector<double> uf(static_cast<std::size_t>(n));
  for (Eigen::Index free = 0; free < n; ++free) {
    auto recurse = [&](auto && self, Eigen::Index i, double cost) -> void {
        if (i == n) {
          const double rest = std::max(x - cost, 0.0) / c[free];
          f[free] = rest;
          uf[static_cast<std::size_t>(free)] = utility_at(u, rest);
          double v = 0.0;
          for (Eigen::Index s = 0; s < n; ++s) {
            v += p[s] * uf[static_cast<std::size_t>(s)];
          }
          if (best.payoff.size() == 0 || v > best.value) {
            best.value = v;
            best.payoff = f;
          }
          return;
        }
        if (i == free) {
          self(self, i + 1, cost);
          return;
        }
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double next = cost + c[i] * g[j];
          if (next > x + slack) {break;}
          f[i] = g[j];
          uf[static_cast<std::size_t>(i)] = ug[j];
          self(self, i + 1, next);
        }
      };
    recurse(recurse, 0, 0.0);
  }
  return best;
}

Eigen::VectorXd default_wealth_grid(
  const FiniteMarket & market, const PiecewiseUtility & u, double x, int points)
{
  if (points < 2 || !(x > 0.0)) {
    throw std::invalid_argument("wealth grid needs x > 0 and at least two points");
  }
  const Eigen::VectorXd caps = Eigen::VectorXd::Constant(market.size(), x).cwiseQuotient(market.weights());
  const double top = caps.maxCoeff();
  const Eigen::VectorXd base = make_grid({0.0, top, points, Spacing::Linear});
  std::vector<double> g(base.data(), base.data() + base.size());
  g.insert(g.end(), caps.data(), caps.data() + caps.size());
  for (double b : u.breakpoints()) {
    if (b <= top) {g.push_back(b);}
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
}

VFiniteReport check_assumption_vfinite(
  const FiniteMarket & market, const ConvexConjugate & V,
  const std::vector<double> & y_probes)
{
  VFiniteReport r;
  const Eigen::VectorXd & p = market.probabilities();
  const Eigen::VectorXd & z = market.density();
  for (double y : y_probes) {
    Eigen::VectorXd vals(market.size());
    bool finite = true;
    for (Eigen::Index i = 0; i < market.size(); ++i) {
      if (y * z[i] < V.domain_start() * (1.0 - V.tolerances().kink_rel)) {
        std::ostringstream os;
        os << "y = " << y << ", state " << i << ": V(y z) = +inf";
        r.violations.push_back(os.str());
        finite = false;
        break;
      }
      vals[i] = V(y * z[i]);
    }
    r.values.push_back(finite ? pairwise_dot(p, vals) : kInf);
    r.finite_for_all_probes = r.finite_for_all_probes && finite;
  }
  return r;
}

FocReport foc_check(const SolverResult & result, const FiniteMarket & market, const PreparedUtility & prep)
{
  FocReport r;
  r.subgradient_form = !prep.utility.continuously_differentiable() || !prep.envelope.components.empty();
  const Eigen::VectorXd & z = market.density();
  for (Eigen::Index i = 0; i < market.size(); ++i) {
    const double f = result.concavified_payoff[i];
    if (!(f > 0.0)) {continue;}
    const Interval d = subdifferential_Uc(prep.envelope, f, prep.tol);
    r.max_foc_residual = std::max(r.max_foc_residual, d.distance(result.multiplier * z[i]));
    r.checked_states.push_back(i);
  }
  return r;
}

}  // namespace ncu
