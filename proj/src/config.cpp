#include "ncu/config.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ncu
{

using json = nlohmann::json;

namespace
{

constexpr int kMaxGridPoints = 10'000'000;

const std::set<std::string> & known_outputs()
{
  static const std::set<std::string> names{
    "envelope_vertices.csv", "envelope_components.csv", "envelope.json",
    "conjugate_breakpoints.csv", "conjugate.json", "eae.json", "envelope_check.json",
    "solve.json", "payoff.csv", "gap.json",
    "value_curve.csv", "dual_curve.csv", "curves.json",
    "cps_report.json", "market.json", "liquidation.json"};
  return names;
}

std::string escape_token(const std::string & key)
{
  std::string out;
  for (char ch : key) {
    if (ch == '~') {
      out += "~0";
    } else if (ch == '/') {
      out += "~1";
    } else {
      out += ch;
    }
  }
  return out;
}

std::string at(const std::string & path, const std::string & key) {return path + "/" + escape_token(key);}
std::string at(const std::string & path, std::size_t i) {return path + "/" + std::to_string(i);}

void require_object(const json & j, const std::string & path)
{
  if (!j.is_object()) {throw ConfigError(path.empty() ? "/" : path, "expected an object");}
}

void only_keys(const json & j, const std::string & path, std::initializer_list<const char *> allowed)
{
  require_object(j, path);
  for (const auto & item : j.items()) {
    const bool ok = std::any_of(
      allowed.begin(), allowed.end(), [&](const char * a) {return item.key() == a;});
    if (!ok) {throw ConfigError(at(path, item.key()), "unknown field");}
  }
}

const json & field(const json & j, const char * key, const std::string & path)
{
  auto it = j.find(key);
  if (it == j.end()) {throw ConfigError(at(path, key), "missing required field");}
  return *it;
}

double number(const json & j, const std::string & path)
{
  if (!j.is_number()) {throw ConfigError(path, "expected a number");}
  const double v = j.get<double>();
  if (!std::isfinite(v)) {throw ConfigError(path, "expected a finite number");}
  return v;
}

// Upper interval ends may be written as "inf" or null.
double number_or_inf(const json & j, const std::string & path)
{
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "inf")) {return kInf;}
  return number(j, path);
}

int integer(const json & j, const std::string & path)
{
  if (!j.is_number_integer()) {throw ConfigError(path, "expected an integer");}
  return j.get<int>();
}

double number_field(const json & j, const char * key, const std::string & path)
{
  return number(field(j, key, path), at(path, key));
}

double number_field(const json & j, const char * key, const std::string & path, double fallback)
{
  return j.contains(key) ? number(j.at(key), at(path, key)) : fallback;
}

std::vector<double> numbers(const json & j, const std::string & path)
{
  if (!j.is_array()) {throw ConfigError(path, "expected an array of numbers");}
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], at(path, i)));
  }
  return out;
}

Eigen::VectorXd vector_field(const json & j, const char * key, const std::string & path)
{
  const auto v = numbers(field(j, key, path), at(path, key));
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

PieceForm parse_form(const json & j, const std::string & path)
{
  const json & f = field(j, "form", path);
  if (!f.is_string()) {throw ConfigError(at(path, "form"), "expected a string");}
  const auto name = f.get<std::string>();
  if (name == "power") {
    only_keys(j, path, {"lo", "hi", "form", "exponent", "scale"});
    return Power{number_field(j, "exponent", path), number_field(j, "scale", path, 1.0)};
  }
  if (name == "log") {
    only_keys(j, path, {"lo", "hi", "form", "scale"});
    return Logarithmic{number_field(j, "scale", path, 1.0)};
  }
  if (name == "linear") {
    only_keys(j, path, {"lo", "hi", "form", "slope", "intercept"});
    return Linear{number_field(j, "slope", path), number_field(j, "intercept", path, 0.0)};
  }
  if (name == "constant") {
    only_keys(j, path, {"lo", "hi", "form", "level"});
    return Constant{number_field(j, "level", path)};
  }
  if (name == "shifted_power") {
    only_keys(j, path, {"lo", "hi", "form", "exponent", "scale", "shift"});
    return ShiftedPower{
      number_field(j, "exponent", path), number_field(j, "scale", path, 1.0),
      number_field(j, "shift", path, 0.0)};
  }
  throw ConfigError(
          at(path, "form"),
          "unknown piece form '" + name + "' (power, log, linear, constant, shifted_power)");
}

PiecewiseUtility parse_utility(const json & j, const std::string & path)
{
  require_object(j, path);
  if (j.contains("preset")) {
    only_keys(j, path, {"preset", "exponent", "scale"});
    const json & p = j.at("preset");
    if (!p.is_string()) {throw ConfigError(at(path, "preset"), "expected a string");}
    const auto name = p.get<std::string>();
    try {
      if (name == "step") {return step_utility();}
      if (name == "two_bump") {return two_bump_utility();}
      if (name == "log") {return log_utility();}
      if (name == "power") {
        return power_utility(number_field(j, "exponent", path), number_field(j, "scale", path, 1.0));
      }
    } catch (const std::invalid_argument & e) {
      throw ConfigError(path, e.what());
    }
    throw ConfigError(at(path, "preset"), "unknown preset '" + name + "' (step, two_bump, log, power)");
  }
  only_keys(j, path, {"pieces"});
  const std::string ppath = at(path, "pieces");
  const json & arr = field(j, "pieces", path);
  if (!arr.is_array() || arr.empty()) {throw ConfigError(ppath, "expected a nonempty array of pieces");}
  std::vector<UtilityPiece> pieces;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string ip = at(ppath, i);
    require_object(arr[i], ip);
    pieces.push_back(
      {number_field(arr[i], "lo", ip), number_or_inf(field(arr[i], "hi", ip), at(ip, "hi")),
        parse_form(arr[i], ip)});
  }
  try {
    return PiecewiseUtility(std::move(pieces));
  } catch (const std::invalid_argument & e) {
    throw ConfigError(ppath, e.what());
  }
}

GridSpec parse_grid(const json & j, const std::string & path)
{
  only_keys(j, path, {"min", "max", "points", "spacing"});
  GridSpec g;
  g.min = number_field(j, "min", path);
  g.max = number_field(j, "max", path);
  g.points = integer(field(j, "points", path), at(path, "points"));
  if (g.points > kMaxGridPoints) {
    throw ConfigError(at(path, "points"), "at most " + std::to_string(kMaxGridPoints) + " points");
  }
  if (j.contains("spacing")) {
    const json & s = j.at("spacing");
    if (s == "linear") {
      g.spacing = Spacing::Linear;
    } else if (s == "log") {
      g.spacing = Spacing::Log;
    } else {
      throw ConfigError(at(path, "spacing"), "expected \"linear\" or \"log\"");
    }
  }
  try {
    make_grid(g);
  } catch (const std::invalid_argument & e) {
    throw ConfigError(path, e.what());
  }
  return g;
}

GridSpec parse_positive_grid(const json & j, const std::string & path)
{
  GridSpec g = parse_grid(j, path);
  if (!(g.min > 0.0)) {throw ConfigError(at(path, "min"), "grid must be positive");}
  return g;
}

void parse_tolerances(const json & j, const std::string & path, Tolerances & t)
{
  require_object(j, path);
  static const std::array<std::pair<const char *, double Tolerances::*>, 18> reals{{
    {"value_abs", &Tolerances::value_abs},
    {"component_threshold", &Tolerances::component_threshold},
    {"hull_collinear_rel", &Tolerances::hull_collinear_rel},
    {"kink_rel", &Tolerances::kink_rel},
    {"budget", &Tolerances::budget},
    {"bisection_rel", &Tolerances::bisection_rel},
    {"membership", &Tolerances::membership},
    {"probability_sum", &Tolerances::probability_sum},
    {"density_mean", &Tolerances::density_mean},
    {"martingale", &Tolerances::martingale},
    {"band_rel", &Tolerances::band_rel},
    {"self_financing", &Tolerances::self_financing},
    {"admissibility", &Tolerances::admissibility},
    {"budget_check", &Tolerances::budget_check},
    {"growth_threshold", &Tolerances::growth_threshold},
    {"eae_variation", &Tolerances::eae_variation},
    {"eae_floor", &Tolerances::eae_floor},
    {"eae_inequality_rel", &Tolerances::eae_inequality_rel},
  }};
  for (const auto & item : j.items()) {
    const std::string p = at(path, item.key());
    if (item.key() == "bisection_max_iter") {
      t.bisection_max_iter = integer(item.value(), p);
      continue;
    }
    if (item.key() == "max_kink_enumeration") {
      t.max_kink_enumeration = integer(item.value(), p);
      continue;
    }
    if (item.key() == "max_pin_combinations") {
      t.max_pin_combinations = integer(item.value(), p);
      continue;
    }
    auto it = std::find_if(
      reals.begin(), reals.end(), [&](const auto & r) {return item.key() == r.first;});
    if (it == reals.end()) {throw ConfigError(p, "unknown tolerance");}
    const double v = number(item.value(), p);
    if (!(v >= 0.0)) {throw ConfigError(p, "tolerance must be nonnegative");}
    t.*(it->second) = v;
  }
}

EventTree parse_tree(const json & j, const std::string & path, const Tolerances & tol)
{
  require_object(j, path);
  try {
    if (j.contains("binomial")) {
      only_keys(j, path, {"binomial"});
      const std::string bp = at(path, "binomial");
      const json & b = j.at("binomial");
      only_keys(b, bp, {"s0", "up", "down", "p_up", "periods"});
      return binomial_tree(
        number_field(b, "s0", bp), number_field(b, "up", bp), number_field(b, "down", bp),
        number_field(b, "p_up", bp), integer(field(b, "periods", bp), at(bp, "periods")));
    }
    only_keys(j, path, {"parents", "probabilities", "prices"});
    const json & pj = field(j, "parents", path);
    if (!pj.is_array()) {throw ConfigError(at(path, "parents"), "expected an array of integers");}
    std::vector<int> parents;
    for (std::size_t i = 0; i < pj.size(); ++i) {
      parents.push_back(integer(pj[i], at(at(path, "parents"), i)));
    }
    return EventTree(
      parents, numbers(field(j, "probabilities", path), at(path, "probabilities")),
      numbers(field(j, "prices", path), at(path, "prices")), tol);
  } catch (const std::invalid_argument & e) {
    throw ConfigError(path, e.what());
  }
}

TradingStrategy parse_strategy(const json & j, const std::string & path)
{
  only_keys(j, path, {"endowment", "cash", "stock", "buys", "sells"});
  TradingStrategy s;
  s.endowment = number_field(j, "endowment", path);
  s.cash = numbers(field(j, "cash", path), at(path, "cash"));
  s.stock = numbers(field(j, "stock", path), at(path, "stock"));
  s.buys = numbers(field(j, "buys", path), at(path, "buys"));
  s.sells = numbers(field(j, "sells", path), at(path, "sells"));
  return s;
}

std::size_t line_of(const std::string & text, std::size_t byte)
{
  const auto end = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(end), '\n'));
}

}  // namespace

std::string sha256_hex(const std::string & bytes)
{
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char * hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

ProblemConfig parse_config(const std::string & text, const std::string & profile)
{
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error & e) {
    throw ConfigError("line " + std::to_string(line_of(text, e.byte)), "malformed JSON");
  }
  only_keys(
    doc, "",
    {"description", "utility", "market", "tree", "cps", "lambda", "x", "grids", "curves",
      "tolerances", "outputs", "eae", "liquidation", "strategy", "envelope_check"});

  ProblemConfig cfg;
  cfg.digest = sha256_hex(text);
  try {
    cfg.tol = tolerance_profile(profile);
  } catch (const std::invalid_argument & e) {
    throw ConfigError("--tolerance-profile", e.what());
  }
  if (doc.contains("tolerances")) {parse_tolerances(doc["tolerances"], "/tolerances", cfg.tol);}

  if (doc.contains("utility")) {cfg.utility = parse_utility(doc["utility"], "/utility");}

  if (doc.contains("lambda")) {
    const double l = number(doc["lambda"], "/lambda");
    if (!(l > 0.0 && l < 1.0)) {throw ConfigError("/lambda", "transaction cost must lie in (0, 1)");}
    cfg.lambda = l;
  }

  if (doc.contains("market") && doc.contains("tree")) {
    throw ConfigError("/tree", "give either \"market\" or \"tree\", not both");
  }
  if (doc.contains("market")) {
    const json & m = doc["market"];
    only_keys(m, "/market", {"probabilities", "density"});
    try {
      cfg.market = FiniteMarket(
        vector_field(m, "probabilities", "/market"), vector_field(m, "density", "/market"), cfg.tol);
    } catch (const std::invalid_argument & e) {
      throw ConfigError("/market", e.what());
    }
  }
  if (doc.contains("tree")) {cfg.tree = parse_tree(doc["tree"], "/tree", cfg.tol);}
  if (doc.contains("cps")) {
    if (!cfg.tree) {throw ConfigError("/cps", "a consistent price system needs a \"tree\"");}
    if (!cfg.lambda) {throw ConfigError("/lambda", "a consistent price system needs \"lambda\"");}
    const json & c = doc["cps"];
    only_keys(c, "/cps", {"z0", "z1"});
    CPSCandidate cand;
    cand.z0 = numbers(field(c, "z0", "/cps"), "/cps/z0");
    cand.z1 = numbers(field(c, "z1", "/cps"), "/cps/z1");
    cand.lambda = *cfg.lambda;
    if (cand.z0.size() != cfg.tree->size()) {throw ConfigError("/cps/z0", "needs one value per tree node");}
    if (cand.z1.size() != cfg.tree->size()) {throw ConfigError("/cps/z1", "needs one value per tree node");}
    cfg.cps = cand;
  }

  if (doc.contains("x")) {
    const double x = number(doc["x"], "/x");
    if (!(x > 0.0)) {throw ConfigError("/x", "initial wealth must be positive");}
    cfg.wealth = x;
  }

  if (doc.contains("grids")) {
    const json & g = doc["grids"];
    only_keys(g, "/grids", {"envelope", "x", "y", "wealth"});
    if (g.contains("envelope")) {
      cfg.envelope_grid = parse_grid(g["envelope"], "/grids/envelope");
      cfg.envelope_grid_given = true;
    }
    if (g.contains("x")) {cfg.x_grid = parse_positive_grid(g["x"], "/grids/x");}
    if (g.contains("y")) {cfg.y_grid = parse_positive_grid(g["y"], "/grids/y");}
    if (g.contains("wealth")) {
      only_keys(g["wealth"], "/grids/wealth", {"points"});
      cfg.wealth_points = integer(field(g["wealth"], "points", "/grids/wealth"), "/grids/wealth/points");
      if (cfg.wealth_points < 2) {throw ConfigError("/grids/wealth/points", "needs at least 2 points");}
    }
  }

  if (doc.contains("curves")) {
    only_keys(doc["curves"], "/curves", {"resolutions"});
    const json & r = field(doc["curves"], "resolutions", "/curves");
    if (!r.is_array()) {throw ConfigError("/curves/resolutions", "expected an array of integers");}
    for (std::size_t i = 0; i < r.size(); ++i) {
      const int n = integer(r[i], at("/curves/resolutions", i));
      if (n < 2) {throw ConfigError(at("/curves/resolutions", i), "needs at least 2 points");}
      cfg.curve_resolutions.push_back(n);
    }
  }

  if (doc.contains("outputs")) {
    const json & o = doc["outputs"];
    if (!o.is_array()) {throw ConfigError("/outputs", "expected an array of file names");}
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (!o[i].is_string() || !known_outputs().count(o[i].get<std::string>())) {
        throw ConfigError(at("/outputs", i), "unknown output file");
      }
      cfg.outputs.push_back(o[i].get<std::string>());
    }
  }

  if (doc.contains("eae")) {
    const json & e = doc["eae"];
    only_keys(e, "/eae", {"y_grid", "y0", "mu", "gamma_candidates"});
    if (e.contains("y_grid")) {cfg.eae.y_grid = parse_positive_grid(e["y_grid"], "/eae/y_grid");}
    cfg.eae.y0 = number_field(e, "y0", "/eae", cfg.eae.y0);
    if (!(cfg.eae.y0 > 0.0)) {throw ConfigError("/eae/y0", "must be positive");}
    if (e.contains("mu")) {
      cfg.eae.mu = numbers(e["mu"], "/eae/mu");
      for (std::size_t i = 0; i < cfg.eae.mu.size(); ++i) {
        if (!(cfg.eae.mu[i] > 0.0 && cfg.eae.mu[i] <= 1.0)) {
          throw ConfigError(at("/eae/mu", i), "must lie in (0, 1]");
        }
      }
    }
    if (e.contains("gamma_candidates")) {
      cfg.eae.gamma_candidates = numbers(e["gamma_candidates"], "/eae/gamma_candidates");
    }
  }

  if (doc.contains("liquidation")) {
    only_keys(doc["liquidation"], "/liquidation", {"positions"});
    const json & ps = field(doc["liquidation"], "positions", "/liquidation");
    if (!ps.is_array()) {throw ConfigError("/liquidation/positions", "expected an array");}
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string p = at("/liquidation/positions", i);
      only_keys(ps[i], p, {"phi0", "phi1", "price"});
      Position pos{number_field(ps[i], "phi0", p), number_field(ps[i], "phi1", p), number_field(ps[i], "price", p)};
      if (!(pos.price > 0.0)) {throw ConfigError(at(p, "price"), "price must be positive");}
      cfg.positions.push_back(pos);
    }
  }

  if (doc.contains("strategy")) {
    if (!cfg.tree) {throw ConfigError("/strategy", "a strategy needs a \"tree\"");}
    cfg.strategy = parse_strategy(doc["strategy"], "/strategy");
  }

  if (doc.contains("envelope_check")) {
    only_keys(doc["envelope_check"], "/envelope_check", {"pairs"});
    cfg.envelope_check.pairs = integer(field(doc["envelope_check"], "pairs", "/envelope_check"), "/envelope_check/pairs");
    if (cfg.envelope_check.pairs < 1) {throw ConfigError("/envelope_check/pairs", "must be positive");}
  }
  return cfg;
}

ProblemConfig load_config(const std::string & path, const std::string & profile)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {throw ConfigError(path, "cannot read config file");}
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), profile);
}

GridSpec effective_envelope_grid(const ProblemConfig & cfg)
{
  if (cfg.envelope_grid_given) {return cfg.envelope_grid;}
  if (cfg.utility && !std::isfinite(cfg.utility->value_at_zero())) {
    return {1e-6, 1e6, 10001, Spacing::Log};
  }
  return {0.0, 100.0, 10001, Spacing::Linear};
}

FiniteMarket resolve_market(const ProblemConfig & cfg)
{
  if (cfg.market) {return *cfg.market;}
  if (cfg.tree && cfg.cps) {
    try {
      return terminal_density(*cfg.tree, *cfg.cps, cfg.tol);
    } catch (const std::invalid_argument & e) {
      throw ConfigError("/cps", e.what());
    }
  }
  throw ConfigError("/market", "missing: give \"market\" or \"tree\" with \"cps\"");
}

}  // namespace ncu
