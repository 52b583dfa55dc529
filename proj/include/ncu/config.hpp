#ifndef NCU_CONFIG_HPP_
#define NCU_CONFIG_HPP_

#include "ncu/market.hpp"
#include "ncu/numeric.hpp"
#include "ncu/tolerances.hpp"
#include "ncu/utility.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncu
{

/// Invalid configuration. `where` is a JSON pointer ("/market/density/2") or,
/// for syntax errors, "line N".
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string where, const std::string & message)
  : std::runtime_error(where + ": " + message), where(std::move(where)) {}

  std::string where;
};

struct EaeSpec
{
  GridSpec y_grid{1e-6, 1e-2, 41, Spacing::Log};
  double y0 = 1.0;
  std::vector<double> mu{0.5, 0.25, 0.1};
  std::vector<double> gamma_candidates;  // empty: no inequality search
};

struct Position
{
  double phi0 = 0.0;
  double phi1 = 0.0;
  double price = 1.0;
};

struct EnvelopeCheckSpec
{
  int pairs = 1000;
};

struct ProblemConfig
{
  std::optional<PiecewiseUtility> utility;
  std::optional<FiniteMarket> market;   // inline form
  std::optional<EventTree> tree;        // tree form, with `cps`
  std::optional<CPSCandidate> cps;
  std::optional<double> lambda;
  std::optional<double> wealth;         // x
  GridSpec envelope_grid;
  bool envelope_grid_given = false;
  std::optional<GridSpec> x_grid;
  std::optional<GridSpec> y_grid;
  int wealth_points = 1000;
  std::vector<int> curve_resolutions;   // extra x-grid point counts for the refinement table
  Tolerances tol;
  std::vector<std::string> outputs;     // empty: write everything
  EaeSpec eae;
  std::vector<Position> positions;
  std::optional<TradingStrategy> strategy;
  EnvelopeCheckSpec envelope_check;
  std::string digest;                   // SHA-256 of the raw document
};

/// Parses a config document. `profile` picks the base tolerances before the
/// document's own "tolerances" overrides apply. Throws ConfigError.
ProblemConfig parse_config(const std::string & text, const std::string & profile = "default");

/// Reads and parses a file. Throws ConfigError (unreadable file included).
ProblemConfig load_config(const std::string & path, const std::string & profile = "default");

/// Envelope grid to use for a utility: the configured one, or a default that
/// avoids x = 0 when U(0) = -inf.
GridSpec effective_envelope_grid(const ProblemConfig & cfg);

/// The market the budget is priced in: the inline market, or the terminal
/// density of the tree candidate. Throws ConfigError when neither is present.
FiniteMarket resolve_market(const ProblemConfig & cfg);

std::string sha256_hex(const std::string & bytes);

}  // namespace ncu

#endif  // NCU_CONFIG_HPP_
