// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.
#include "ncu/cli.hpp"
#include "ncu/config.hpp"
#include "ncu/solver.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ncu;
namespace fs = std::filesystem;

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char * f, double a)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

const GridSpec kRandomGrid{0.0, 50.0, 2001, Spacing::Linear};

struct Drawn
{
  std::vector<UtilityPiece> pieces;
  ConcaveEnvelope env;
};

// Random utilities whose last non-concavity lies inside the grid.
std::vector<Drawn> draw_utilities(std::uint64_t seed, int count)
{
  std::mt19937_64 rng(seed);
  std::vector<Drawn> out;
  while (static_cast<int>(out.size()) < count) {
    auto pieces = oracle::random_pieces(rng);
    try {
      auto env = compute_envelope(PiecewiseUtility(pieces), kRandomGrid);
      out.push_back({std::move(pieces), std::move(env)});
    } catch (const std::invalid_argument &) {
    }
  }
  return out;
}

FiniteMarket step_market()
{
  Eigen::VectorXd p(2), z(2);
  p << 0.5, 0.5;
  z << 0.5, 1.5;
  return FiniteMarket(p, z);
}

Outcome conjugate_identity()
{
  const auto t0 = Clock::now();
  const auto us = draw_utilities(101, 100);
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto & d : us) {
    const auto V = conjugate(d.env);
    const auto xs = oracle::sample_points(d.pieces, kRandomGrid.max, kRandomGrid.points);
    std::vector<double> vals;
    vals.reserve(xs.size());
    for (double x : xs) {vals.push_back(oracle::utility_value(d.pieces, x));}
    for (Eigen::Index j = 0; j < V.y().size(); ++j) {
      worst = std::max(worst, std::abs(V.v()[j] - oracle::grid_sup(xs, vals, V.y()[j])));
      ++checked;
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 10.0,
    "max |V_hull - V_gridsup| = " + fmt("%.3g", worst) + " over " + std::to_string(checked) +
    " breakpoints, " + fmt("%.2f", t) + " s"};
}

Outcome fenchel_young()
{
  const auto t0 = Clock::now();
  const auto us = draw_utilities(202, 20);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double min_gap = kInf;
  int mismatches = 0, equalities = 0, pairs = 0;
  for (const auto & d : us) {
    const auto V = conjugate(d.env);
    const Hull & h = d.env.hull;
    const Eigen::VectorXd s = h.slopes();
    const double tau = V.domain_start();
    const double top = s.size() > 0 ? s[0] : tau + 1.0;
    for (int k = 0; k < 500; ++k) {
      double x, y;
      if (k % 2 == 0) {
        x = kRandomGrid.max * (1.0 - unif(rng));
        y = tau + (1.2 * top - tau + 1e-3) * unif(rng);
      } else {
        // supporting pairs at hull vertices with x > 0
        const Eigen::Index first = h.x[0] > 0.0 ? 0 : 1;
        const Eigen::Index v = first +
          static_cast<Eigen::Index>(unif(rng) * static_cast<double>(h.size() - first)) % (h.size() - first);
        x = h.x[v];
        const double hi = v == 0 ? top + 1.0 : s[v - 1];
        const double lo = v + 1 < h.size() ? s[v] : tau;
        y = lo + (hi - lo) * unif(rng);
      }
      const auto r = fenchel_young_check(d.env, V, x, y);
      min_gap = std::min(min_gap, r.gap);
      const bool eq = r.gap <= 1e-9;
      equalities += eq;
      if (eq != (r.x_in_minus_dV && r.y_in_dUc)) {++mismatches;}
      ++pairs;
    }
  }
  const double t = seconds_since(t0);
  return {min_gap >= -1e-9 && mismatches == 0 && t < 5.0,
    std::to_string(pairs) + " pairs, min gap " + fmt("%.3g", min_gap) + ", " + std::to_string(equalities) +
    " equalities, " + std::to_string(mismatches) + " flag mismatches, " + fmt("%.2f", t) + " s"};
}

Outcome biconjugate_fixed_point()
{
  const auto us = draw_utilities(202, 20);
  double worst = 0.0;
  for (const auto & d : us) {
    const Hull b = biconjugate(conjugate(d.env));
    const Hull & h = d.env.hull;
    for (Eigen::Index k = 0; k < h.size(); ++k) {worst = std::max(worst, std::abs(b(h.x[k]) - h.value[k]));}
    for (Eigen::Index k = 0; k < b.size(); ++k) {worst = std::max(worst, std::abs(h(b.x[k]) - b.value[k]));}
  }
  return {worst <= 1e-9, "max vertex deviation " + fmt("%.3g", worst)};
}

// Smallest-decade max of a closed-form ratio on the same y grid.
double closed_form_eae(const std::vector<double> & ys, const std::function<double(double)> & ratio)
{
  double best = 0.0;
  for (double y : ys) {
    if (y < ys.front() * 10.0 * (1.0 - 1e-12)) {best = std::max(best, ratio(y));}
  }
  return best;
}

Outcome eae_closed_forms()
{
  auto log_grid = [](double lo, double hi) {
      const auto g = make_grid({lo, hi, 41, Spacing::Log});
      return std::vector<double>(g.data(), g.data() + g.size());
    };
  const auto y_sqrt = log_grid(1e-30, 1e-26);
  const auto y_step = log_grid(1e-6, 1e-2);
  const auto y_log = log_grid(1e-60, 1e-56);

  const auto V_sqrt = conjugate(compute_envelope(power_utility(0.5, 2.0), {1e-6, 1e64, 200001, Spacing::Log}));
  const auto V_step = conjugate(compute_envelope(step_utility(), {0.0, 10.0, 1001, Spacing::Linear}));
  const auto V_log = conjugate(compute_envelope(log_utility(), {1e-6, 1e64, 200001, Spacing::Log}));

  const double e_sqrt = estimate_eae(V_sqrt, y_sqrt).value;
  const double e_step = estimate_eae(V_step, y_step).value;
  const double e_log = estimate_eae(V_log, y_log).value;

  const double c_sqrt = closed_form_eae(y_sqrt, [](double y) {return (1.0 / (y * y)) * y / oracle::v_sqrt(y);});
  const double c_step = closed_form_eae(y_step, [](double y) {return y / oracle::v_step(y);});
  const double c_log = closed_form_eae(y_log, [](double y) {return (1.0 / y) * y / oracle::v_log(y);});

  const bool ok = std::abs(e_sqrt - 1.0) <= 0.01 && e_step >= 0.0 && e_step <= 0.01 &&
    e_log >= 0.0 && e_log <= 0.01;
  return {ok, "2sqrt(x) " + fmt("%.5f", e_sqrt) + " (closed form " + fmt("%.5f", c_sqrt) + "), step " +
    fmt("%.3g", e_step) + " (" + fmt("%.3g", c_step) + "), log " + fmt("%.5f", e_log) + " (" +
    fmt("%.5f", c_log) + ")"};
}

Outcome solver_vs_brute_force()
{
  const auto t0 = Clock::now();
  const GridSpec grid{0.0, 20.0, 2001, Spacing::Linear};
  const auto step = prepare(step_utility(), grid);
  const auto bump = prepare(two_bump_utility(), grid);
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  double worst_excess = -kInf, worst_budget = 0.0, worst_diff = 0.0;
  for (int k = 0; k < 50; ++k) {
    const bool use_step = k % 2 == 0;
    const auto & prep = use_step ? step : bump;
    const auto rm = oracle::random_market(rng, 2 + (k / 2) % 2);
    const FiniteMarket m(rm.p, rm.z);
    const double x = unif(rng) * (use_step ? 1.0 : 3.0);  // below the satiation cost
    const auto r = solve(m, prep, x);
    const auto wg = default_wealth_grid(m, prep.utility, x, 1000);
    const auto bf = brute_force(m, prep.utility, x, wg);
    double h = 0.0;
    for (Eigen::Index i = 1; i < wg.size(); ++i) {h = std::max(h, wg[i] - wg[i - 1]);}
    const double lip = lipschitz_bound(prep.utility, 0.0, wg[wg.size() - 1]);
    const double diff = std::abs(r.primal_value - bf.value);
    worst_diff = std::max(worst_diff, diff);
    worst_excess = std::max(worst_excess, diff - (lip * h + 1e-9));
    worst_budget = std::max(worst_budget, std::abs(m.weights().dot(r.payoff) - x));
    worst_budget = std::max(worst_budget, std::abs(m.weights().dot(r.concavified_payoff) - x));
  }
  const double t = seconds_since(t0);
  return {worst_excess <= 0.0 && worst_budget <= 1e-9 && t < 60.0,
    "max |solve - brute force| " + fmt("%.3g", worst_diff) + ", max budget residual " +
    fmt("%.3g", worst_budget) + ", " + fmt("%.2f", t) + " s"};
}

struct CurveDevs
{
  DualityReport coarse;
  DualityReport fine;
};

const CurveDevs & step_curves()
{
  static const CurveDevs devs = [] {
      const auto prep = prepare(step_utility(), {0.0, 20.0, 2001, Spacing::Linear});
      const Eigen::VectorXd ys = Eigen::VectorXd::LinSpaced(200, 0.02, 4.0);
      auto centred = [](int n) {
          Eigen::VectorXd x(n);
          for (int j = 1; j <= n; ++j) {x[j - 1] = (j - 0.5) * 2.0 / n;}
          return x;
        };
      return CurveDevs{duality_check(step_market(), prep, centred(1000), ys),
        duality_check(step_market(), prep, centred(2000), ys)};
    }();
  return devs;
}

Outcome duality_curve()
{
  const auto & d = step_curves();
  const double a = d.coarse.max_dev_fenchel, b = d.fine.max_dev_fenchel;
  return {a <= 5e-3 && b <= a / 2.0 + 1e-12,
    "dev(1000) " + fmt("%.6g", a) + ", dev(2000) " + fmt("%.6g", b) + ", ratio " + fmt("%.4f", b / a)};
}

Outcome hull_coincidence()
{
  const auto & d = step_curves();
  const double a = d.coarse.hull_coincidence_dev, b = d.fine.hull_coincidence_dev;
  return {a <= 5e-3 && b <= a / 2.0 + 1e-12,
    "dev(1000) " + fmt("%.6g", a) + ", dev(2000) " + fmt("%.6g", b) + ", ratio " + fmt("%.4f", b / a)};
}

Outcome gap_witness()
{
  const auto m = step_market();
  const double x = 0.5;
  const PiecewiseUtility uc({{0.0, 1.0, Linear{1.0, 0.0}}, {1.0, kInf, Constant{1.0}}});
  const auto wg = default_wealth_grid(m, step_utility(), x, 1000);
  const double oracle_gap = brute_force(m, uc, x, wg).value - brute_force(m, step_utility(), x, wg).value;
  const auto r = solve(m, prepare(step_utility(), {0.0, 20.0, 2001, Spacing::Linear}), x);
  const bool ok = std::abs(oracle_gap - 1.0 / 6.0) <= 1e-6 && std::abs(r.duality_gap - 1.0 / 6.0) <= 1e-6;
  return {ok, "solver gap " + fmt("%.12f", r.duality_gap) + ", brute-force gap " + fmt("%.12f", oracle_gap)};
}

Outcome cps_and_liquidation()
{
  std::vector<std::string> notes;
  bool ok = true;

  const auto flat = binomial_tree(1.0, 1.0, 1.0, 0.5, 3);
  const CPSCandidate cand{std::vector<double>(flat.size(), 1.0), std::vector<double>(flat.size(), 0.9), 0.2};
  const bool flat_ok = check_cps(flat, cand).ok();
  ok = ok && flat_ok;

  std::vector<int> parents;
  std::vector<double> probs, prices;
  for (const auto & n : flat.nodes()) {
    parents.push_back(n.parent);
    probs.push_back(n.probability);
    prices.push_back(n.price);
  }
  const int leaf = flat.terminal_nodes()[3];
  prices[static_cast<std::size_t>(leaf)] = 0.85;
  const EventTree bumped(parents, probs, prices);
  const auto r = check_cps(bumped, cand);
  const bool band_ok = !r.band_ok && r.martingale_z0 && r.martingale_z1 && r.violations.size() == 1 &&
    r.violations[0].node == leaf && r.violations[0].kind == "band";
  ok = ok && band_ok;

  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  bool liq_ok = true;
  for (int k = 0; k < 1000; ++k) {
    const double phi0 = 100.0 * (unif(rng) - 0.5);
    liq_ok = liq_ok && liquidation_value(phi0, 0.0, 0.01 + 10.0 * unif(rng), 0.01 + 0.98 * unif(rng)) == phi0;
  }
  ok = ok && liq_ok;

  const auto tree = binomial_tree(1.0, 1.2, 0.8, 0.5, 3);
  int mono_fail = 0;
  for (int s = 0; s < 20; ++s) {
    const double lambda1 = 0.05 + 0.5 * unif(rng);
    TradingStrategy st;
    st.endowment = 1.0 + unif(rng);
    const auto & nodes = tree.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const int p = nodes[i].parent;
      const double prev0 = p < 0 ? st.endowment : st.cash[static_cast<std::size_t>(p)];
      const double prev1 = p < 0 ? 0.0 : st.stock[static_cast<std::size_t>(p)];
      const double buy = unif(rng) < 0.5 ? unif(rng) : 0.0;
      const double sell = buy == 0.0 ? unif(rng) : 0.0;
      const double slack = unif(rng) < 0.5 ? 0.0 : 0.1 * unif(rng);
      const double S = nodes[i].price;
      st.buys.push_back(buy);
      st.sells.push_back(sell);
      st.stock.push_back(prev1 + buy - sell);
      st.cash.push_back(prev0 - S * buy + (1.0 - lambda1) * S * sell - slack);
    }
    if (!check_self_financing(tree, st, lambda1).ok) {++mono_fail; continue;}
    for (int j = 0; j < 5; ++j) {
      const double lambda2 = lambda1 * (0.01 + 0.98 * unif(rng));
      if (!check_self_financing(tree, st, lambda2).ok) {++mono_fail;}
    }
  }
  ok = ok && mono_fail == 0;
  return {ok, std::string("constant tree ") + (flat_ok ? "passes" : "FAILS") + ", perturbed leaf " +
    std::to_string(leaf) + (band_ok ? " flagged alone" : " NOT isolated") + ", liquidation " +
    (liq_ok ? "exact" : "INEXACT") + ", self-financing monotonicity failures " + std::to_string(mono_fail)};
}

Outcome foc_residuals()
{
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto sq = prepare(power_utility(0.5, 2.0), {0.0, 1000.0, 100001, Spacing::Linear});
  double worst_sqrt = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto rm = oracle::random_market(rng, 2 + k % 5);
    const FiniteMarket m(rm.p, rm.z);
    const auto r = solve(m, sq, 0.5 + 1.5 * unif(rng));
    worst_sqrt = std::max(worst_sqrt, foc_check(r, m, sq).max_foc_residual);
  }
  const GridSpec g{0.0, 20.0, 2001, Spacing::Linear};
  const auto step = prepare(step_utility(), g);
  const auto bump = prepare(two_bump_utility(), g);
  double worst_kink = 0.0;
  int missed = 0;
  for (int k = 0; k < 20; ++k) {
    const auto & prep = k % 2 == 0 ? step : bump;
    const auto rm = oracle::random_market(rng, 2 + k % 4);
    const FiniteMarket m(rm.p, rm.z);
    const auto r = solve(m, prep, (0.05 + 0.9 * unif(rng)) * (k % 2 == 0 ? 1.0 : 3.0));
    const auto f = foc_check(r, m, prep);
    worst_kink = std::max(worst_kink, f.max_foc_residual);
    std::size_t positive = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {positive += r.concavified_payoff[i] > 0.0;}
    if (f.checked_states.size() != positive) {++missed;}
  }
  return {worst_sqrt <= 1e-9 && worst_kink <= 1e-9 && missed == 0,
    "2sqrt(x) max residual " + fmt("%.3g", worst_sqrt) + ", kink utilities max residual " +
    fmt("%.3g", worst_kink) + ", unchecked positive states in " + std::to_string(missed) + " runs"};
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism()
{
  const auto cfg = parse_config(R"({
    "utility": {"preset": "two_bump"},
    "market": {"probabilities": [0.2, 0.3, 0.5], "density": [0.5, 0.8, 1.32]},
    "grids": {"envelope": {"min": 0, "max": 20, "points": 2001}},
    "x": 1.7})");
  const fs::path base = fs::temp_directory_path() / "ncu_acceptance_determinism";
  fs::remove_all(base);
  RunContext a{base / "a", "default", 0};
  RunContext b{base / "b", "default", 0};
  fs::create_directories(a.out_dir);
  fs::create_directories(b.out_dir);
  const int ca = cmd_solve(cfg, a);
  const int cb = cmd_solve(cfg, b);
  int files = 0, differ = 0;
  for (const auto & e : fs::directory_iterator(a.out_dir)) {
    ++files;
    if (slurp(e.path()) != slurp(b.out_dir / e.path().filename())) {++differ;}
  }
  fs::remove_all(base);
  return {ca == 0 && cb == 0 && files >= 3 && differ == 0,
    std::to_string(files) + " files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main()
{
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
    {"conjugate of U equals conjugate of U_c", conjugate_identity},
    {"Fenchel-Young equality iff subgradient pair", fenchel_young},
    {"biconjugate returns U_c", biconjugate_fixed_point},
    {"asymptotic elasticity closed forms", eae_closed_forms},
    {"solver matches brute force", solver_vs_brute_force},
    {"dual curve equals conjugate of u(., U)", duality_curve},
    {"u(., U_c) equals hull of u(., U)", hull_coincidence},
    {"duality gap 1/6 on the step market", gap_witness},
    {"price systems and liquidation", cps_and_liquidation},
    {"first-order conditions", foc_residuals},
    {"solve output is byte-identical across runs", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
