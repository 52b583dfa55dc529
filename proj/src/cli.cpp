#include "ncu/cli.hpp"

#include "ncu/envelope.hpp"
#include "ncu/market.hpp"
#include "ncu/solver.hpp"
#include "ncu/transform.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace ncu
{

using json = nlohmann::json;

namespace
{

// Non-finite values have no JSON literal; they are written as strings.
json num(double v)
{
  if (std::isfinite(v)) {return v;}
  if (std::isnan(v)) {return "nan";}
  return v > 0 ? "inf" : "-inf";
}

json nums(const Eigen::VectorXd & v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {a.push_back(num(v[i]));}
  return a;
}

json nums(const std::vector<double> & v)
{
  json a = json::array();
  for (double x : v) {a.push_back(num(x));}
  return a;
}

json interval(const Interval & iv) {return json::array({num(iv.lo), num(iv.hi)});}

// Shortest representation that reads back to the same double.
std::string fmt(double v)
{
  if (std::isnan(v)) {return "nan";}
  if (std::isinf(v)) {return v > 0 ? "inf" : "-inf";}
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json grid_json(const GridSpec & g)
{
  return {{"min", num(g.min)}, {"max", num(g.max)}, {"points", g.points},
    {"spacing", g.spacing == Spacing::Log ? "log" : "linear"}};
}

class Output
{
public:
  Output(const ProblemConfig & cfg, const RunContext & ctx, std::string command)
  : cfg_(cfg), ctx_(ctx), command_(std::move(command))
  {
    std::filesystem::create_directories(ctx.out_dir);
  }

  json report() const
  {
    return {{"schema", kReportSchema}, {"command", command_}, {"config_sha256", cfg_.digest},
      {"tolerance_profile", ctx_.profile}};
  }

  void text(const std::string & name, const std::string & content) const
  {
    if (!cfg_.outputs.empty() &&
      std::find(cfg_.outputs.begin(), cfg_.outputs.end(), name) == cfg_.outputs.end())
    {
      return;
    }
    std::ofstream out(ctx_.out_dir / name, std::ios::binary);
    if (!out) {throw std::runtime_error("cannot write " + (ctx_.out_dir / name).string());}
    out << content;
  }

  void write_json(const std::string & name, const json & j) const {text(name, j.dump(2) + "\n");}

private:
  const ProblemConfig & cfg_;
  const RunContext & ctx_;
  std::string command_;
};

const PiecewiseUtility & need_utility(const ProblemConfig & cfg)
{
  if (!cfg.utility) {throw ConfigError("/utility", "missing required field");}
  return *cfg.utility;
}

double need_wealth(const ProblemConfig & cfg)
{
  if (!cfg.wealth) {throw ConfigError("/x", "missing required field");}
  return *cfg.wealth;
}

ConcaveEnvelope build_envelope(const ProblemConfig & cfg)
{
  try {
    return compute_envelope(need_utility(cfg), effective_envelope_grid(cfg), cfg.tol);
  } catch (const std::invalid_argument & e) {
    throw ConfigError("/grids/envelope", e.what());
  }
}

PreparedUtility build_prepared(const ProblemConfig & cfg)
{
  try {
    return prepare(need_utility(cfg), effective_envelope_grid(cfg), cfg.tol);
  } catch (const std::invalid_argument & e) {
    throw ConfigError("/grids/envelope", e.what());
  }
}

json cps_json(const CpsReport & r)
{
  json v = json::array();
  for (const auto & nv : r.violations) {
    v.push_back({{"node", nv.node}, {"kind", nv.kind}, {"residual", num(nv.residual)}});
  }
  return {{"ok", r.ok()}, {"martingale_z0", r.martingale_z0}, {"martingale_z1", r.martingale_z1},
    {"band_ok", r.band_ok}, {"positive", r.positive}, {"violations", v}};
}

json market_json(const FiniteMarket & m)
{
  return {{"probabilities", nums(m.probabilities())}, {"density", nums(m.density())}};
}

// Tree-form markets must pass the CPS checks before they are used for pricing.
bool tree_market_ok(const ProblemConfig & cfg, const Output & out)
{
  if (cfg.market || !cfg.tree || !cfg.cps) {return true;}
  const CpsReport r = check_cps(*cfg.tree, *cfg.cps, cfg.tol);
  if (r.ok()) {return true;}
  json j = out.report();
  j["cps"] = cps_json(r);
  out.write_json("cps_report.json", j);
  std::cerr << "error: consistent price system check failed (see cps_report.json)\n";
  return false;
}

}  // namespace

int cmd_envelope(const ProblemConfig & cfg, const RunContext & ctx)
{
  Output out(cfg, ctx, "envelope");
  const auto & u = need_utility(cfg);
  const ConcaveEnvelope env = build_envelope(cfg);

  std::string vertices = "x,U_c\n";
  for (Eigen::Index k = 0; k < env.hull.size(); ++k) {
    vertices += fmt(env.hull.x[k]) + "," + fmt(env.hull.value[k]) + "\n";
  }
  out.text("envelope_vertices.csv", vertices);

  std::string comps = "lo,hi\n";
  json cj = json::array();
  for (const auto & c : envelope_components(env)) {
    comps += fmt(c.lo) + "," + fmt(c.hi) + "\n";
    cj.push_back(interval(c));
  }
  out.text("envelope_components.csv", comps);

  const GrowthReport g = check_growth(u, default_growth_probes(), cfg.tol.growth_threshold);
  json j = out.report();
  j["grid"] = grid_json(env.grid);
  j["vertex_count"] = env.hull.size();
  j["tail_slope"] = num(env.hull.tail_slope);
  j["components"] = cj;
  j["U_at_zero"] = num(u.value_at_zero());
  j["U_at_infinity"] = num(u.value_at_infinity());
  j["breakpoints"] = nums(u.breakpoints());
  j["growth"] = {{"probes", nums(g.probes)}, {"ratios", nums(g.ratios)},
    {"monotone_decay", g.monotone_decay}, {"pass", g.pass}};
  out.write_json("envelope.json", j);
  return kExitOk;
}

int cmd_conjugate(const ProblemConfig & cfg, const RunContext & ctx)
{
  Output out(cfg, ctx, "conjugate");
  const ConcaveEnvelope env = build_envelope(cfg);
  const ConvexConjugate V(env, cfg.tol);

  std::string table = "y,V\n";
  for (Eigen::Index j = 0; j < V.y().size(); ++j) {
    table += fmt(V.y()[j]) + "," + fmt(V.v()[j]) + "\n";
  }
  out.text("conjugate_breakpoints.csv", table);

  json j = out.report();
  j["breakpoint_count"] = V.y().size();
  j["domain_start"] = num(V.domain_start());
  j["left_limit"] = num(V.left_limit());
  j["right_tail_slope"] = num(V.right_tail_slope());
  json evals = json::array();
  if (cfg.y_grid) {
    const Eigen::VectorXd ys = make_grid(*cfg.y_grid);
    for (Eigen::Index k = 0; k < ys.size(); ++k) {
      if (ys[k] < V.domain_start()) {
        evals.push_back({{"y", num(ys[k])}, {"V", "inf"}});
        continue;
      }
      evals.push_back(
        {{"y", num(ys[k])}, {"V", num(V(ys[k]))}, {"subdifferential", interval(subdifferential_V(V, ys[k]))}});
    }
  }
  j["evaluations"] = evals;
  out.write_json("conjugate.json", j);
  return kExitOk;
}

int cmd_eae(const ProblemConfig & cfg, const RunContext & ctx)
{
  Output out(cfg, ctx, "eae");
  const ConcaveEnvelope env = build_envelope(cfg);
  const ConvexConjugate V(env, cfg.tol);
  const Eigen::VectorXd yg = make_grid(cfg.eae.y_grid);
  const std::vector<double> ys(yg.data(), yg.data() + yg.size());

  EaeEstimate e;
  try {
    e = estimate_eae(V, ys);
  } catch (const std::domain_error & ex) {
    throw ConfigError("/eae/y_grid", ex.what());
  } catch (const std::invalid_argument & ex) {
    throw ConfigError("/eae/y_grid", ex.what());
  }
  json trace = json::array();
  for (const auto & d : e.trace) {
    trace.push_back({{"y_lo", num(d.y_lo)}, {"max_ratio", num(d.max_ratio)}});
  }
  json j = out.report();
  j["y_grid"] = grid_json(cfg.eae.y_grid);
  j["estimate"] = num(e.value);
  j["converged"] = e.converged;
  j["trace"] = trace;
  if (!cfg.eae.gamma_candidates.empty()) {
    const auto gamma = search_eae_gamma(V, cfg.eae.y0, cfg.eae.mu, cfg.eae.gamma_candidates);
    json ineq = {{"y0", num(cfg.eae.y0)}, {"mu", nums(cfg.eae.mu)},
      {"candidates", nums(cfg.eae.gamma_candidates)}};
    if (gamma) {
      const auto r = eae_inequality_report(V, *gamma, cfg.eae.y0, cfg.eae.mu);
      ineq["gamma"] = num(*gamma);
      ineq["worst_ratio"] = num(r.worst_ratio);
      ineq["pairs_checked"] = r.pairs_checked;
      ineq["pairs_skipped"] = r.pairs_skipped;
    } else {
      ineq["gamma"] = nullptr;
    }
    j["inequality"] = ineq;
  }
  out.write_json("eae.json", j);
  return kExitOk;
}

int cmd_envelope_check(const ProblemConfig & cfg, const RunContext & ctx)
{
  Output out(cfg, ctx, "envelope-check");
  const ConcaveEnvelope env = build_envelope(cfg);
  const ConvexConjugate V(env, cfg.tol);
  const Hull & h = env.hull;

  std::mt19937_64 rng(ctx.seed);
  const double x_lo = std::max(h.x[0], 0.0);
  const double x_hi = h.x[h.size() - 1];
  const double y_lo = V.domain_start();
  const double y_hi = 1.5 * V.hull_slopes()[0];
  std::uniform_real_distribution<double> ux(x_lo, x_hi);
  std::uniform_real_distribution<double> uy(y_lo, y_hi);
  std::uniform_int_distribution<Eigen::Index> vertex(1, h.size() - 1);

  long equalities = 0;
  long inconsistent = 0;
  double min_gap = kInf;
  for (int k = 0; k < cfg.envelope_check.pairs; ++k) {
    double x = 0.0;
    double y = 0.0;
    if (k % 2 == 0) {
      x = ux(rng);
      y = uy(rng);
    } else {
      // A supporting pair: a vertex and a slope of an adjacent segment.
      const Eigen::Index v = vertex(rng);
      x = h.x[v];
      y = h.slope(v);
    }
    if (!(x > 0.0)) {continue;}
    const auto r = fenchel_young_check(env, V, x, y);
    min_gap = std::min(min_gap, r.gap);
    equalities += r.equality ? 1 : 0;
    inconsistent += r.consistent() ? 0 : 1;
  }

  const Hull bi = biconjugate(V);
  double bi_dev = 0.0;
  for (Eigen::Index k = 0; k < bi.size(); ++k) {
    bi_dev = std::max(bi_dev, std::abs(bi.value[k] - env(bi.x[k])));
  }

  json j = out.report();
  j["seed"] = ctx.seed;
  j["pairs"] = cfg.envelope_check.pairs;
  j["fenchel_young"] = {{"min_gap", num(min_gap)}, {"equalities", equalities},
    {"inconsistent_flags", inconsistent}};
  j["biconjugate_max_dev"] = num(bi_dev);
  j["pass"] = inconsistent == 0 && min_gap >= -cfg.tol.value_abs && bi_dev <= cfg.tol.value_abs;
  out.write_json("envelope_check.json", j);
  return kExitOk;
}

int cmd_solve(const ProblemConfig & cfg, const RunContext & ctx)
{
  Output out(cfg, ctx, "solve");
  const double x = need_wealth(cfg);
  if (!tree_market_ok(cfg, out)) {return kExitCps;}
  const FiniteMarket market = resolve_market(cfg);
  const PreparedUtility prep = build_prepared(cfg);
  const SolverResult r = solve(market, prep, x);
  const FocReport foc = foc_check(r, market, prep);
  const auto & u = prep.utility;

  json sel = json::array();
  for (const auto & s : r.selection_record) {
    sel.push_back({{"state", s.state}, {"interval", interval(s.interval)}, {"selected", num(s.selected)}});
  }
  json kinks = json::array();
  for (auto k : r.kink_states) {kinks.push_back(k);}
  json checked = json::array();
  for (auto k : foc.checked_states) {checked.push_back(k);}

  const Eigen::VectorXd & c = market.weights();
  const double cost = pairwise_dot(c, r.payoff);
  const double cost_c = pairwise_dot(c, r.concavified_payoff);
  const double slack = cfg.tol.budget * std::max(1.0, x);

  json j = out.report();
  j["x"] = num(x);
  j["market"] = market_json(market);
  j["multiplier"] = num(r.multiplier);
  j["payoff"] = nums(r.payoff);
  j["concavified_payoff"] = nums(r.concavified_payoff);
  j["primal_value_U"] = num(r.primal_value);
  j["concavified_value"] = num(r.concavified_value);
  j["dual_value"] = num(r.dual_value);
  j["duality_gap"] = num(r.duality_gap);
  j["kink_states"] = kinks;
  j["selection_record"] = sel;
  j["iterations"] = r.iterations;
  j["flags"] = {{"budget_slack", r.budget_slack}, {"unconstrained", r.multiplier == 0.0},
    {"primal_method", to_string(r.primal_method)}, {"warning", r.primal_warning},
    {"beyond_grid", r.beyond_grid}};
  j["budget"] = {{"cost_payoff", num(cost)}, {"cost_concavified_payoff", num(cost_c)},
    {"binds", std::abs(cost - x) <= slack && std::abs(cost_c - x) <= slack}};
  j["foc"] = {{"max_residual", num(foc.max_foc_residual)}, {"checked_states", checked},
    {"subgradient_form", foc.subgradient_form}};
  j["envelope_grid"] = grid_json(prep.envelope.grid);
  out.write_json("solve.json", j);

  std::string table = "state,probability,density,payoff,concavified_payoff,U,U_c,kink\n";
  for (Eigen::Index i = 0; i < market.size(); ++i) {
    const double f = r.payoff[i];
    const double uf = f > 0.0 ? eval_utility(u, f) : u.value_at_zero();
    const bool kink = std::find(r.kink_states.begin(), r.kink_states.end(), i) != r.kink_states.end();
    table += std::to_string(i) + "," + fmt(market.probabilities()[i]) + "," + fmt(market.density()[i]) +
      "," + fmt(f) + "," + fmt(r.concavified_payoff[i]) + "," + fmt(uf) + "," +
      fmt(prep.envelope(r.concavified_payoff[i])) + "," + (kink ? "1" : "0") + "\n";
  }
  out.text("payoff.csv", table);

  json g = out.report();
  g["concavified_value"] = num(r.concavified_value);
  g["primal_value_U"] = num(r.primal_value);
  g["duality_gap"] = num(r.duality_gap);
  g["dual_value"] = num(r.dual_value);
  g["weak_duality_slack"] = num(r.dual_value - r.concavified_value);
  out.write_json("gap.json", g);
  return kExitOk;
}

int cmd_curves(const ProblemConfig & cfg, const RunContext & ctx)
{
  Output out(cfg, ctx, "curves");
  if (!cfg.x_grid) {throw ConfigError("/grids/x", "missing required field");}
  if (!cfg.y_grid) {throw ConfigError("/grids/y", "missing required field");}
  if (!tree_market_ok(cfg, out)) {return kExitCps;}
  const FiniteMarket market = resolve_market(cfg);
  const PreparedUtility prep = build_prepared(cfg);
  const Eigen::VectorXd xs = make_grid(*cfg.x_grid);
  const Eigen::VectorXd ys = make_grid(*cfg.y_grid);

  DualityReport d;
  try {
    d = duality_check(market, prep, xs, ys);
  } catch (const DomainError & e) {
    throw ConfigError("/grids/y", e.what());
  }

  std::string vc = "x,u_U,u_Uc,hull_u_U,multiplier\n";
  for (Eigen::Index k = 0; k < xs.size(); ++k) {
    vc += fmt(xs[k]) + "," + fmt(d.curve.u_U[k]) + "," + fmt(d.curve.u_Uc[k]) + "," +
      fmt(d.curve.hull_u_U[k]) + "," + fmt(d.curve.multiplier[k]) + "\n";
  }
  out.text("value_curve.csv", vc);
  std::string dc = "y,v\n";
  for (Eigen::Index k = 0; k < ys.size(); ++k) {
    dc += fmt(ys[k]) + "," + fmt(d.dual[k]) + "\n";
  }
  out.text("dual_curve.csv", dc);

  json refinements = json::array();
  for (int n : cfg.curve_resolutions) {
    GridSpec g = *cfg.x_grid;
    g.points = n;
    const DualityReport rd = duality_check(market, prep, make_grid(g), ys);
    refinements.push_back({{"x_points", n}, {"x_spacing", num(rd.x_spacing)},
      {"max_dev_fenchel", num(rd.max_dev_fenchel)}, {"hull_coincidence_dev", num(rd.hull_coincidence_dev)}});
  }

  json j = out.report();
  j["x_grid"] = grid_json(*cfg.x_grid);
  j["y_grid"] = grid_json(*cfg.y_grid);
  j["x_spacing"] = num(d.x_spacing);
  j["max_dev_fenchel"] = num(d.max_dev_fenchel);
  j["hull_coincidence_dev"] = num(d.hull_coincidence_dev);
  j["refinements"] = refinements;
  out.write_json("curves.json", j);
  return kExitOk;
}

int cmd_cps_check(const ProblemConfig & cfg, const RunContext & ctx)
{
  Output out(cfg, ctx, "cps-check");
  if (!cfg.tree) {throw ConfigError("/tree", "missing required field");}
  if (!cfg.cps) {throw ConfigError("/cps", "missing required field");}
  const CpsReport r = check_cps(*cfg.tree, *cfg.cps, cfg.tol);
  json j = out.report();
  j["lambda"] = num(cfg.cps->lambda);
  j["cps"] = cps_json(r);
  out.write_json("cps_report.json", j);
  if (!r.ok()) {
    for (const auto & v : r.violations) {
      std::cerr << "node " << v.node << ": " << v.kind << " (residual " << fmt(v.residual) << ")\n";
    }
    return kExitCps;
  }
  const FiniteMarket m = terminal_density(*cfg.tree, *cfg.cps, cfg.tol);
  out.write_json("market.json", {{"market", market_json(m)}});
  return kExitOk;
}

int cmd_liquidate(const ProblemConfig & cfg, const RunContext & ctx)
{
  Output out(cfg, ctx, "liquidate");
  if (!cfg.lambda) {throw ConfigError("/lambda", "missing required field");}
  if (cfg.positions.empty() && !cfg.strategy) {
    throw ConfigError("/liquidation", "give \"liquidation.positions\" or a \"strategy\"");
  }
  const double lambda = *cfg.lambda;
  json j = out.report();
  j["lambda"] = num(lambda);
  json ps = json::array();
  for (const auto & p : cfg.positions) {
    ps.push_back({{"phi0", num(p.phi0)}, {"phi1", num(p.phi1)}, {"price", num(p.price)},
      {"value", num(liquidation_value(p.phi0, p.phi1, p.price, lambda))}});
  }
  j["positions"] = ps;
  if (cfg.strategy) {
    SelfFinancingReport sf;
    AdmissibilityReport ad;
    try {
      sf = check_self_financing(*cfg.tree, *cfg.strategy, lambda, cfg.tol);
      ad = check_admissible(*cfg.tree, *cfg.strategy, lambda, cfg.tol);
    } catch (const std::invalid_argument & e) {
      throw ConfigError("/strategy", e.what());
    }
    json values = json::array();
    const auto & nodes = cfg.tree->nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      values.push_back(
        num(liquidation_value(cfg.strategy->cash[i], cfg.strategy->stock[i], nodes[i].price, lambda)));
    }
    j["strategy"] = {{"self_financing", sf.ok}, {"violating_edges", sf.violating_edges},
      {"malformed_edges", sf.malformed_edges}, {"admissible", ad.admissible},
      {"negative_nodes", ad.negative_nodes}, {"liquidation_values", values}};
  }
  out.write_json("liquidation.json", j);
  return kExitOk;
}

int run_cli(int argc, char ** argv)
{
  CLI::App app{"Non-concave utility maximization under a consistent price system"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::string profile = "default";
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "problem configuration (JSON)")->required();
  app.add_option("--out", out_dir, std::string("output directory (default: $") + kOutDirEnv + " or .)");
  app.add_option("--tolerance-profile", profile, "default | loose");
  app.add_option("--seed", seed, "seed for randomized demos (envelope-check)");

  using Command = int (*)(const ProblemConfig &, const RunContext &);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
    {"envelope", "concave envelope vertices and components", cmd_envelope},
    {"conjugate", "convex conjugate breakpoints", cmd_conjugate},
    {"eae", "asymptotic elasticity of the conjugate", cmd_eae},
    {"envelope-check", "Fenchel-Young and biconjugate checks on random pairs", cmd_envelope_check},
    {"solve", "optimal payoff, multiplier and duality gap", cmd_solve},
    {"curves", "value and dual curves with deviation summary", cmd_curves},
    {"cps-check", "consistent price system verification", cmd_cps_check},
    {"liquidate", "liquidation values and strategy checks", cmd_liquidate},
  };
  for (const auto & [name, help, fn] : commands) {
    app.add_subcommand(name, help)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunContext ctx;
  ctx.profile = profile;
  ctx.seed = seed;
  if (!out_dir.empty()) {
    ctx.out_dir = out_dir;
  } else if (const char * env = std::getenv(kOutDirEnv); env && *env) {
    ctx.out_dir = env;
  }

  const auto started = std::chrono::steady_clock::now();
  int code = kExitOk;
  std::string name;
  try {
    const ProblemConfig cfg = load_config(config_path, profile);
    for (const auto & [cmd, help, fn] : commands) {
      if (app.got_subcommand(cmd)) {
        name = cmd;
        code = fn(cfg, ctx);
      }
    }
  } catch (const ConfigError & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConvergenceError & e) {
    std::cerr << "solver did not converge: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::invalid_argument & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started);
  std::cerr << name << ": " << fmt(std::round(ms.count() * 10.0) / 10.0) << " ms\n";
  return code;
}

}  // namespace ncu
