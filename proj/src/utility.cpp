#include "ncu/utility.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ncu
{

namespace
{

template<class... Ts>
struct overloaded : Ts ... { using Ts::operator()...; };
template<class... Ts>
overloaded(Ts...)->overloaded<Ts...>;

std::string fmt_interval(double a, double b)
{
  std::ostringstream os;
  os << "(" << a << ", ";
  if (std::isinf(b)) {os << "inf";} else {os << b;}
  os << ")";
  return os.str();
}

void validate_form(const UtilityPiece & p, std::size_t index)
{
  auto fail = [&](const std::string & what) {
      std::ostringstream os;
      os << "piece " << index << " on " << fmt_interval(p.lo, p.hi) << ": " << what;
      throw std::invalid_argument(os.str());
    };
  std::visit(
    overloaded{
      [&](const Power & f) {
        if (!(f.exponent > 0.0 && f.exponent < 1.0)) {fail("power exponent must lie in (0,1)");}
        if (!(f.scale > 0.0)) {fail("power scale must be positive");}
      },
      [&](const Logarithmic & f) {
        if (!(f.scale > 0.0)) {fail("logarithmic scale must be positive");}
      },
      [&](const Linear & f) {
        if (!(f.slope >= 0.0)) {fail("linear slope must be nonnegative");}
        if (!std::isfinite(f.intercept)) {fail("linear intercept must be finite");}
      },
      [&](const Constant & f) {
        if (!std::isfinite(f.level)) {fail("constant level must be finite");}
      },
      [&](const ShiftedPower & f) {
        if (!(f.exponent > 0.0)) {fail("shifted_power exponent must be positive");}
        if (!(f.scale > 0.0)) {fail("shifted_power scale must be positive");}
        if (!std::isfinite(f.shift)) {fail("shifted_power shift must be finite");}
      }},
    p.form);
}

bool is_constant_form(const PieceForm & f)
{
  if (std::holds_alternative<Constant>(f)) {
    return true;
  }
  if (const auto * l = std::get_if<Linear>(&f)) {
    return l->slope == 0.0;
  }
  return false;
}

}  // namespace

double UtilityPiece::value(double x) const
{
  return std::visit(
    overloaded{
      [x](const Power & f) {return f.scale * std::pow(x, f.exponent);},
      [x](const Logarithmic & f) {return f.scale * std::log(x);},
      [x](const Linear & f) {return f.slope * x + f.intercept;},
      [](const Constant & f) {return f.level;},
      [x](const ShiftedPower & f) {return f.shift + f.scale * std::pow(x, f.exponent);}},
    form);
}

double UtilityPiece::derivative(double x) const
{
  return std::visit(
    overloaded{
      [x](const Power & f) {return f.scale * f.exponent * std::pow(x, f.exponent - 1.0);},
      [x](const Logarithmic & f) {return f.scale / x;},
      [](const Linear & f) {return f.slope;},
      [](const Constant &) {return 0.0;},
      [x](const ShiftedPower & f) {
        return f.scale * f.exponent * std::pow(x, f.exponent - 1.0);
      }},
    form);
}

double UtilityPiece::limit_at_infinity() const
{
  return std::visit(
    overloaded{
      [](const Power &) {return kInf;},
      [](const Logarithmic &) {return kInf;},
      [](const Linear & f) {return f.slope > 0.0 ? kInf : f.intercept;},
      [](const Constant & f) {return f.level;},
      [](const ShiftedPower &) {return kInf;}},
    form);
}

std::string form_name(const PieceForm & form)
{
  return std::visit(
    overloaded{
      [](const Power &) {return std::string("power");},
      [](const Logarithmic &) {return std::string("logarithmic");},
      [](const Linear &) {return std::string("linear");},
      [](const Constant &) {return std::string("constant");},
      [](const ShiftedPower &) {return std::string("shifted_power");}},
    form);
}

PiecewiseUtility::PiecewiseUtility(std::vector<UtilityPiece> pieces)
: pieces_(std::move(pieces))
{
  if (pieces_.empty()) {
    throw std::invalid_argument("utility needs at least one piece");
  }
  if (pieces_.front().lo != 0.0) {
    throw std::invalid_argument(
            "pieces leave a gap on " + fmt_interval(0.0, pieces_.front().lo) +
            ": the first piece must start at 0");
  }
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const auto & p = pieces_[k];
    if (!(p.lo < p.hi)) {
      throw std::invalid_argument(
              "piece " + std::to_string(k) + " has empty interval " + fmt_interval(p.lo, p.hi));
    }
    if (std::isinf(p.hi) && k + 1 != pieces_.size()) {
      throw std::invalid_argument(
              "pieces overlap on " + fmt_interval(pieces_[k + 1].lo, p.hi) +
              ": only the last piece may be unbounded");
    }
    validate_form(p, k);
    if (k + 1 < pieces_.size()) {
      const auto & next = pieces_[k + 1];
      if (next.lo < p.hi) {
        throw std::invalid_argument("pieces overlap on " + fmt_interval(next.lo, p.hi));
      }
      if (next.lo > p.hi) {
        throw std::invalid_argument("pieces leave a gap on " + fmt_interval(p.hi, next.lo));
      }
      const double b = p.hi;
      const double left = p.value(b);
      const double right = next.value(b);
      if (left > right + 1e-12 * std::max(1.0, std::abs(right))) {
        std::ostringstream os;
        os << "utility decreases at breakpoint " << b << " (left limit " << left
           << " > right value " << right << ")";
        throw std::invalid_argument(os.str());
      }
    }
  }
  if (!std::isinf(pieces_.back().hi)) {
    throw std::invalid_argument(
            "pieces leave a gap on " + fmt_interval(pieces_.back().hi, kInf));
  }

  bool constant = true;
  for (std::size_t k = 0; k < pieces_.size() && constant; ++k) {
    if (!is_constant_form(pieces_[k].form)) {
      constant = false;
    } else if (k > 0 && pieces_[k].value(pieces_[k].lo) != pieces_[0].value(pieces_[0].lo)) {
      constant = false;
    }
  }
  if (constant) {
    throw std::invalid_argument("utility must be non-constant");
  }

  value_at_zero_ = pieces_.front().value(0.0);
  value_at_infinity_ = pieces_.back().limit_at_infinity();
  if (!(value_at_infinity_ > 0.0)) {
    throw std::invalid_argument("U(inf) must be positive (shift the utility by a constant)");
  }
}

std::vector<double> PiecewiseUtility::breakpoints() const
{
  std::vector<double> b;
  for (std::size_t k = 1; k < pieces_.size(); ++k) {
    b.push_back(pieces_[k].lo);
  }
  return b;
}

std::size_t PiecewiseUtility::piece_index(double x) const
{
  auto it = std::upper_bound(
    pieces_.begin(), pieces_.end(), x,
    [](double v, const UtilityPiece & p) {return v < p.lo;});
  if (it == pieces_.begin()) {
    return 0;
  }
  return static_cast<std::size_t>(std::distance(pieces_.begin(), it) - 1);
}

bool PiecewiseUtility::continuously_differentiable(double tol) const
{
  for (std::size_t k = 1; k < pieces_.size(); ++k) {
    const double b = pieces_[k].lo;
    if (std::abs(pieces_[k - 1].value(b) - pieces_[k].value(b)) > tol) {return false;}
    if (std::abs(pieces_[k - 1].derivative(b) - pieces_[k].derivative(b)) > tol) {return false;}
  }
  return true;
}

double eval_utility(const PiecewiseUtility & u, double x)
{
  if (!(x > 0.0)) {
    throw DomainError("below domain: U is -inf for x <= 0");
  }
  const auto & pieces = u.pieces();
  const std::size_t k = u.piece_index(x);
  double v = pieces[k].value(x);
  if (k > 0 && x == pieces[k].lo) {
    v = std::max(v, pieces[k - 1].value(x));
  }
  return v;
}

double lipschitz_bound(const PiecewiseUtility & u, double a, double b)
{
  double best = 0.0;
  for (const auto & p : u.pieces()) {
    const double l = std::max(a, p.lo);
    const double r = std::min(b, p.hi);
    if (l > r) {continue;}
    // Piece derivatives are monotone, so the extremes sit at the ends.
    best = std::max({best, std::abs(p.derivative(l)), std::abs(p.derivative(r))});
  }
  return best;
}

GrowthReport check_growth(
  const PiecewiseUtility & u, const std::vector<double> & probes,
  double threshold)
{
  if (probes.empty()) {
    throw std::invalid_argument("growth check needs at least one probe");
  }
  if (!std::is_sorted(probes.begin(), probes.end()) ||
    std::adjacent_find(probes.begin(), probes.end()) != probes.end())
  {
    throw std::invalid_argument("growth probes must be strictly increasing");
  }
  if (probes.front() <= 0.0) {
    throw std::invalid_argument("growth probes must be positive");
  }
  if (probes.back() < 1e6) {
    throw std::invalid_argument("largest growth probe must be at least 1e6");
  }
  GrowthReport r;
  r.probes = probes;
  for (double x : probes) {
    r.ratios.push_back(eval_utility(u, x) / x);
  }
  const std::size_t n = r.ratios.size();
  r.monotone_decay = n == 1 || std::abs(r.ratios[n - 1]) < std::abs(r.ratios[n - 2]);
  r.pass = r.ratios.back() < threshold && r.monotone_decay;
  return r;
}

std::vector<double> default_growth_probes()
{
  return {1e2, 1e4, 1e6, 1e8};
}

PiecewiseUtility step_utility()
{
  return PiecewiseUtility({
      {0.0, 1.0, Constant{0.0}},
      {1.0, kInf, Constant{1.0}}});
}

PiecewiseUtility two_bump_utility()
{
  return PiecewiseUtility({
      {0.0, 1.0, Linear{1.0, 0.0}},
      {1.0, 2.0, Constant{1.0}},
      {2.0, 3.0, Linear{1.0, -1.0}},
      {3.0, kInf, Constant{2.0}}});
}

PiecewiseUtility power_utility(double exponent, double scale)
{
  return PiecewiseUtility({{0.0, kInf, Power{exponent, scale}}});
}

PiecewiseUtility log_utility()
{
  return PiecewiseUtility({{0.0, kInf, Logarithmic{1.0}}});
}

}  // namespace ncu
