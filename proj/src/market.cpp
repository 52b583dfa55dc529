#include "ncu/market.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ncu
{

void require_lambda(double lambda)
{
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("transaction cost lambda must lie in (0, 1)");
  }
}

FiniteMarket::FiniteMarket(Eigen::VectorXd probabilities, Eigen::VectorXd density, const Tolerances & tol)
: p_(std::move(probabilities)), z_(std::move(density))
{
  if (p_.size() == 0 || p_.size() != z_.size()) {
    throw std::invalid_argument("market needs matching, nonempty probability and density vectors");
  }
  for (Eigen::Index i = 0; i < p_.size(); ++i) {
    if (!(p_[i] > 0.0)) {
      throw std::invalid_argument("state " + std::to_string(i) + ": probability must be positive");
    }
    if (!(z_[i] > 0.0)) {
      throw std::invalid_argument("state " + std::to_string(i) + ": density must be positive");
    }
  }
  const double total = pairwise_sum(p_);
  if (std::abs(total - 1.0) > tol.probability_sum) {
    std::ostringstream os;
    os << "probabilities sum to " << total << ", not 1";
    throw std::invalid_argument(os.str());
  }
  c_ = p_.cwiseProduct(z_);
  const double mean = pairwise_sum(c_);
  if (std::abs(mean - 1.0) > tol.density_mean) {
    std::ostringstream os;
    os << "density has mean " << mean << " under P, not 1";
    throw std::invalid_argument(os.str());
  }
}

EventTree::EventTree(
  const std::vector<int> & parents, const std::vector<double> & probabilities,
  const std::vector<double> & prices, const Tolerances & tol)
{
  const std::size_t n = parents.size();
  if (n == 0 || probabilities.size() != n || prices.size() != n) {
    throw std::invalid_argument("tree needs matching, nonempty parent/probability/price lists");
  }
  if (parents[0] != -1) {
    throw std::invalid_argument("node 0 must be the root (parent -1)");
  }
  nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto & node = nodes_[i];
    node.parent = parents[i];
    node.price = prices[i];
    node.probability = i == 0 ? 1.0 : probabilities[i];
    if (!(node.price > 0.0)) {
      throw std::invalid_argument("node " + std::to_string(i) + ": price must be positive");
    }
    if (i > 0) {
      if (node.parent < 0 || static_cast<std::size_t>(node.parent) >= i) {
        throw std::invalid_argument(
                "node " + std::to_string(i) + ": parent must be an earlier node");
      }
      if (!(node.probability > 0.0)) {
        throw std::invalid_argument(
                "node " + std::to_string(i) + ": branch probability must be positive");
      }
      auto & parent = nodes_[static_cast<std::size_t>(node.parent)];
      node.time = parent.time + 1;
      parent.children.push_back(static_cast<int>(i));
    }
  }
  for (const auto & node : nodes_) {
    horizon_ = std::max(horizon_, node.time);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto & node = nodes_[i];
    if (node.children.empty()) {
      if (node.time != horizon_) {
        throw std::invalid_argument(
                "node " + std::to_string(i) + ": leaf before the terminal layer");
      }
      continue;
    }
    double total = 0.0;
    for (int c : node.children) {
      total += nodes_[static_cast<std::size_t>(c)].probability;
    }
    if (std::abs(total - 1.0) > tol.probability_sum) {
      std::ostringstream os;
      os << "node " << i << ": branch probabilities sum to " << total;
      throw std::invalid_argument(os.str());
    }
  }
}

std::vector<int> EventTree::terminal_nodes() const
{
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].children.empty()) {out.push_back(static_cast<int>(i));}
  }
  return out;
}

double EventTree::path_probability(int i) const
{
  double p = 1.0;
  while (i > 0) {
    const auto & node = nodes_[static_cast<std::size_t>(i)];
    p *= node.probability;
    i = node.parent;
  }
  return p;
}

EventTree binomial_tree(double s0, double up, double down, double p_up, int periods)
{
  if (periods < 1) {
    throw std::invalid_argument("binomial tree needs at least one period");
  }
  std::vector<int> parents{-1};
  std::vector<double> probs{1.0};
  std::vector<double> prices{s0};
  std::size_t layer_begin = 0;
  for (int t = 0; t < periods; ++t) {
    const std::size_t layer_end = parents.size();
    for (std::size_t i = layer_begin; i < layer_end; ++i) {
      parents.push_back(static_cast<int>(i));
      probs.push_back(p_up);
      prices.push_back(prices[i] * up);
      parents.push_back(static_cast<int>(i));
      probs.push_back(1.0 - p_up);
      prices.push_back(prices[i] * down);
    }
    layer_begin = layer_end;
  }
  return EventTree(parents, probs, prices);
}

CpsReport check_cps(const EventTree & tree, const CPSCandidate & cand, const Tolerances & tol)
{
  require_lambda(cand.lambda);
  const auto & nodes = tree.nodes();
  if (cand.z0.size() != nodes.size() || cand.z1.size() != nodes.size()) {
    throw std::invalid_argument("candidate must give (Z0, Z1) on every node");
  }
  CpsReport r;
  auto flag = [&](int node, const char * kind, double residual) {
      r.violations.push_back({node, kind, residual});
    };
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int id = static_cast<int>(i);
    if (!(cand.z0[i] > 0.0) || !(cand.z1[i] > 0.0)) {
      r.positive = false;
      flag(id, "nonpositive", std::min(cand.z0[i], cand.z1[i]));
      continue;
    }
    if (i == 0 && std::abs(cand.z0[0] - 1.0) > tol.martingale) {
      r.martingale_z0 = false;
      flag(id, "root_normalization", cand.z0[0] - 1.0);
    }
    const auto & node = nodes[i];
    if (!node.children.empty()) {
      double e0 = 0.0;
      double e1 = 0.0;
      for (int c : node.children) {
        const auto cu = static_cast<std::size_t>(c);
        e0 += nodes[cu].probability * cand.z0[cu];
        e1 += nodes[cu].probability * cand.z1[cu];
      }
      if (std::abs(e0 - cand.z0[i]) > tol.martingale) {
        r.martingale_z0 = false;
        flag(id, "martingale_z0", e0 - cand.z0[i]);
      }
      if (std::abs(e1 - cand.z1[i]) > tol.martingale) {
        r.martingale_z1 = false;
        flag(id, "martingale_z1", e1 - cand.z1[i]);
      }
    }
    const double shadow = cand.z1[i] / cand.z0[i];
    const double bid = (1.0 - cand.lambda) * node.price;
    const double ask = node.price;
    if (shadow < bid * (1.0 - tol.band_rel)) {
      r.band_ok = false;
      flag(id, "band", shadow - bid);
    } else if (shadow > ask * (1.0 + tol.band_rel)) {
      r.band_ok = false;
      flag(id, "band", shadow - ask);
    }
  }
  std::stable_sort(
    r.violations.begin(), r.violations.end(),
    [](const NodeViolation & a, const NodeViolation & b) {return a.node < b.node;});
  return r;
}

FiniteMarket terminal_density(const EventTree & tree, const CPSCandidate & cand, const Tolerances & tol)
{
  const auto report = check_cps(tree, cand, tol);
  if (!report.positive || !report.martingale_z0) {
    throw std::invalid_argument("Z0 is not a positive martingale starting at 1");
  }
  const auto leaves = tree.terminal_nodes();
  Eigen::VectorXd p(static_cast<Eigen::Index>(leaves.size()));
  Eigen::VectorXd z(p.size());
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    p[static_cast<Eigen::Index>(k)] = tree.path_probability(leaves[k]);
    z[static_cast<Eigen::Index>(k)] = cand.z0[static_cast<std::size_t>(leaves[k])];
  }
  return FiniteMarket(p, z, tol);
}

double liquidation_value(double phi0, double phi1, double price, double lambda)
{
  const double longs = std::max(phi1, 0.0);
  const double shorts = std::max(-phi1, 0.0);
  return phi0 + longs * (1.0 - lambda) * price - shorts * price;
}

namespace
{

void require_strategy_shape(const EventTree & tree, const TradingStrategy & s)
{
  const std::size_t n = tree.size();
  if (s.cash.size() != n || s.stock.size() != n || s.buys.size() != n || s.sells.size() != n) {
    throw std::invalid_argument("strategy must give holdings and trades on every node");
  }
}

}  // namespace

SelfFinancingReport check_self_financing(
  const EventTree & tree, const TradingStrategy & strategy, double lambda,
  const Tolerances & tol)
{
  require_lambda(lambda);
  require_strategy_shape(tree, strategy);
  SelfFinancingReport r;
  const auto & nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int parent = nodes[i].parent;
    const double prev0 = parent < 0 ? strategy.endowment : strategy.cash[static_cast<std::size_t>(parent)];
    const double prev1 = parent < 0 ? 0.0 : strategy.stock[static_cast<std::size_t>(parent)];
    const double d0 = strategy.cash[i] - prev0;
    const double d1 = strategy.stock[i] - prev1;
    const double buy = strategy.buys[i];
    const double sell = strategy.sells[i];
    if (buy < 0.0 || sell < 0.0 || std::abs(d1 - (buy - sell)) > tol.self_financing) {
      r.malformed_edges.push_back(static_cast<int>(i));
      continue;
    }
    const double s = nodes[i].price;
    if (d0 > -s * buy + (1.0 - lambda) * s * sell + tol.self_financing) {
      r.violating_edges.push_back(static_cast<int>(i));
    }
  }
  r.ok = r.violating_edges.empty() && r.malformed_edges.empty();
  return r;
}

AdmissibilityReport check_admissible(
  const EventTree & tree, const TradingStrategy & strategy, double lambda,
  const Tolerances & tol)
{
  require_lambda(lambda);
  require_strategy_shape(tree, strategy);
  AdmissibilityReport r;
  const auto & nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (liquidation_value(strategy.cash[i], strategy.stock[i], nodes[i].price, lambda) <
      -tol.admissibility)
    {
      r.negative_nodes.push_back(static_cast<int>(i));
    }
  }
  r.admissible = r.negative_nodes.empty();
  return r;
}

BudgetReport budget_check(
  const Eigen::VectorXd & payoff, const FiniteMarket & market, double x,
  const Tolerances & tol)
{
  if (payoff.size() != market.size()) {
    throw std::invalid_argument("payoff has the wrong number of states");
  }
  if ((payoff.array() < 0.0).any()) {
    throw std::invalid_argument("payoffs must be nonnegative");
  }
  BudgetReport r;
  r.cost = pairwise_dot(market.weights(), payoff);
  r.within_budget = r.cost <= x + tol.budget_check;
  return r;
}

}  // namespace ncu
