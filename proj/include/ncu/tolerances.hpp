#ifndef NCU_TOLERANCES_HPP_
#define NCU_TOLERANCES_HPP_

#include <string>

namespace ncu
{

/// Every numerical threshold used by the library, in one record.
struct Tolerances
{
  double value_abs = 1e-9;            // geometric tolerance on utility/conjugate values
  double component_threshold = 1e-8;  // U_c - U above this marks a point of {U < U_c}
  double hull_collinear_rel = 1e-12;  // vertical slack when dropping near-collinear hull points
  double kink_rel = 1e-12;            // y*z within this relative distance of a hull slope is a kink
  double budget = 1e-9;               // budget binding / bracket membership
  int bisection_max_iter = 200;
  double bisection_rel = 1e-14;
  double membership = 1e-9;           // subgradient interval membership slack

  // market
  double probability_sum = 1e-12;
  double density_mean = 1e-9;
  double martingale = 1e-9;
  double band_rel = 1e-12;
  double self_financing = 1e-12;
  double admissibility = 1e-12;
  double budget_check = 1e-12;

  // diagnostics
  double growth_threshold = 1e-2;
  double eae_variation = 0.05;
  double eae_floor = 1e-3;
  double eae_inequality_rel = 1e-9;

  // primal search
  int max_kink_enumeration = 12;
  long max_pin_combinations = 20000;
};

/// "default" or "loose"; throws std::invalid_argument on anything else.
Tolerances tolerance_profile(const std::string & name);

}  // namespace ncu

#endif  // NCU_TOLERANCES_HPP_
