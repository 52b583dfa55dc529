#ifndef NCU_MARKET_HPP_
#define NCU_MARKET_HPP_

#include "ncu/numeric.hpp"
#include "ncu/tolerances.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace ncu
{

/// N-state market: P-probabilities p and pricing density z = dQ/dP.
///
/// Invariants (checked at construction): p > 0, sum p = 1; z > 0, E[z] = 1.
class FiniteMarket
{
public:
  FiniteMarket(Eigen::VectorXd probabilities, Eigen::VectorXd density, const Tolerances & tol = {});

  Eigen::Index size() const { return p_.size(); }
  const Eigen::VectorXd & probabilities() const { return p_; }
  const Eigen::VectorXd & density() const { return z_; }
  /// Per-state price weights p_i z_i.
  const Eigen::VectorXd & weights() const { return c_; }

private:
  Eigen::VectorXd p_;
  Eigen::VectorXd z_;
  Eigen::VectorXd c_;
};

/// Finite recombining-or-not event tree. Node 0 is the root; nodes are stored
/// so that every parent precedes its children.
struct TreeNode
{
  int parent = -1;           // -1 for the root
  double probability = 1.0;  // branch probability from the parent
  double price = 1.0;        // ask price S at the node
  int time = 0;
  std::vector<int> children;
};

class EventTree
{
public:
  /// `parents[i]`, `probabilities[i]`, `prices[i]` describe node i; the root has parent -1.
  EventTree(
    const std::vector<int> & parents, const std::vector<double> & probabilities,
    const std::vector<double> & prices, const Tolerances & tol = {});

  const std::vector<TreeNode> & nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  int horizon() const { return horizon_; }
  bool is_terminal(int i) const { return nodes_[static_cast<std::size_t>(i)].children.empty(); }
  /// Terminal nodes in id order.
  std::vector<int> terminal_nodes() const;
  /// Product of branch probabilities from the root.
  double path_probability(int i) const;

private:
  std::vector<TreeNode> nodes_;
  int horizon_ = 0;
};

/// Binomial tree with `periods` steps, S multiplied by `up` or `down` per step
/// with branch probability `p_up`. Nodes are not recombined (one node per path).
EventTree binomial_tree(double s0, double up, double down, double p_up, int periods);

/// Per-node (Z0, Z1) and the transaction cost level.
struct CPSCandidate
{
  std::vector<double> z0;
  std::vector<double> z1;
  double lambda = 0.0;
};

struct NodeViolation
{
  int node = 0;
  std::string kind;  // martingale_z0 | martingale_z1 | band | nonpositive | root_normalization
  double residual = 0.0;
};

struct CpsReport
{
  bool martingale_z0 = true;
  bool martingale_z1 = true;
  bool band_ok = true;
  bool positive = true;
  std::vector<NodeViolation> violations;  // sorted by node id

  bool ok() const { return martingale_z0 && martingale_z1 && band_ok && positive; }
};

/// Verifies the consistent-price-system conditions on every node:
/// Z0, Z1 strictly positive with Z0 at the root equal to 1, both martingales
/// (on a finite tree local martingale = martingale), Z1/Z0 in [(1-lambda)S, S].
CpsReport check_cps(const EventTree & tree, const CPSCandidate & cand, const Tolerances & tol = {});

/// Terminal density of a candidate whose Z0 part is a positive martingale.
/// States are the terminal nodes in id order. Throws std::invalid_argument otherwise.
FiniteMarket terminal_density(const EventTree & tree, const CPSCandidate & cand, const Tolerances & tol = {});

/// phi0 + (phi1)^+ (1 - lambda) S - (phi1)^- S.
double liquidation_value(double phi0, double phi1, double price, double lambda);

/// Discrete strategy on a tree. `holdings[i]` is the position held after
/// trading at node i; `buys[i]`/`sells[i]` are the stock traded at node i,
/// starting from the parent's holdings (or the endowment (x, 0) at the root).
struct TradingStrategy
{
  double endowment = 0.0;
  std::vector<double> cash;   // phi0 per node
  std::vector<double> stock;  // phi1 per node
  std::vector<double> buys;   // d phi^{1,up} >= 0
  std::vector<double> sells;  // d phi^{1,down} >= 0
};

struct SelfFinancingReport
{
  bool ok = true;
  std::vector<int> violating_edges;  // node ids whose incoming trade breaks the inequality
  std::vector<int> malformed_edges;  // negative increments or phi1 increment != buy - sell
};

/// d phi0 <= -S d phi^{1,up} + (1 - lambda) S d phi^{1,down} on every edge.
SelfFinancingReport check_self_financing(
  const EventTree & tree, const TradingStrategy & strategy, double lambda,
  const Tolerances & tol = {});

struct AdmissibilityReport
{
  bool admissible = true;
  std::vector<int> negative_nodes;
};

/// Liquidation value >= 0 at every node.
AdmissibilityReport check_admissible(
  const EventTree & tree, const TradingStrategy & strategy, double lambda,
  const Tolerances & tol = {});

struct BudgetReport
{
  double cost = 0.0;
  bool within_budget = false;
};

/// E^Q[f] <= x with E^Q[f] = sum p_i z_i f_i.
BudgetReport budget_check(
  const Eigen::VectorXd & payoff, const FiniteMarket & market, double x,
  const Tolerances & tol = {});

void require_lambda(double lambda);

}  // namespace ncu

#endif  // NCU_MARKET_HPP_
