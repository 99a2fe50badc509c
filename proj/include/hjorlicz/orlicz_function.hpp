#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"

namespace hjorlicz {

enum class PsiFamily {
  power_law,            // x^p
  exp_power,            // exp(x^alpha) - 1, alpha in (0, 1], convexified near 0 when alpha < 1
  heavy_tail_log,       // exp(ln^beta(1 + x)) - 1, beta >= 1
  exp_square,           // exp(x^2) - 1; violates the Hoffmann-Jorgensen growth condition
  piecewise_affine_log, // affine between breakpoints, stored through logarithms
  square_of,            // x -> inner(x^2)
};

inline const char* family_name(PsiFamily f) {
  switch (f) {
    case PsiFamily::power_law: return "power_law";
    case PsiFamily::exp_power: return "exp_power";
    case PsiFamily::heavy_tail_log: return "heavy_tail_log";
    case PsiFamily::exp_square: return "exp_square";
    case PsiFamily::piecewise_affine_log: return "piecewise_affine_log";
    case PsiFamily::square_of: return "square_of";
  }
  return "unknown";
}

// Breakpoints x_0 = 0 < x_1 < ... < x_m with ln Psi(x_i) and ln of the linear
// slope on [x_i, x_{i+1}); the last slope continues as a ray past x_m.
struct PiecewiseData {
  std::vector<double> breakpoints;
  std::vector<double> log_values;
  std::vector<double> log_slopes;
};

// Result of evaluating Psi at a point on all three scales.
struct Evaluation {
  double value;      // Psi(x), +inf when not representable
  double psi;        // ln(1 + Psi(x))
  double log_value;  // ln Psi(x), -inf at 0
};

enum class InverseScale { linear, psi, log };

// An Orlicz function Psi = e^psi - 1. Immutable after construction; every
// member is const and safe to share between threads.
class OrliczFunction {
 public:
  static OrliczFunction power_law(double p) {
    if (!(p > 0) || !std::isfinite(p)) throw InvalidParameter("power_law: p must be a finite positive real");
    OrliczFunction f(PsiFamily::power_law);
    f.param_ = p;
    return f;
  }

  static OrliczFunction exp_power(double alpha) {
    if (!(alpha > 0 && alpha <= 1)) throw InvalidParameter("exp_power: alpha must lie in (0, 1]");
    OrliczFunction f(PsiFamily::exp_power);
    f.param_ = alpha;
    if (alpha < 1) {
      // Greatest convex minorant: the ray from the origin tangent to the
      // convex branch at x_t, where y = x_t^alpha solves 1 - e^{-y} = alpha y.
      auto past_root = [alpha](double y) { return -std::expm1(-y) - alpha * y < 0; };
      const Bracket b = threshold_search_tight(past_root, 1.0);
      const double y = 0.5 * (b.lo + b.hi);
      f.threshold_ = std::pow(y, 1.0 / alpha);
      f.log_ray_slope_ = log_expm1(y) - std::log(f.threshold_);
    }
    return f;
  }

  static OrliczFunction heavy_tail_log(double beta) {
    if (!(beta >= 1) || !std::isfinite(beta)) throw InvalidParameter("heavy_tail_log: beta must be >= 1");
    OrliczFunction f(PsiFamily::heavy_tail_log);
    f.param_ = beta;
    return f;
  }

  static OrliczFunction exp_square() { return OrliczFunction(PsiFamily::exp_square); }

  static OrliczFunction piecewise_affine_log(PiecewiseData data) {
    const auto n = data.breakpoints.size();
    if (n == 0 || data.log_values.size() != n || data.log_slopes.size() != n) {
      throw InvalidParameter("piecewise_affine_log: breakpoints, log_values and log_slopes must have equal nonzero length");
    }
    if (data.breakpoints.front() != 0.0) throw InvalidParameter("piecewise_affine_log: first breakpoint must be 0");
    if (data.log_values.front() != kNegInf) throw InvalidParameter("piecewise_affine_log: ln Psi(0) must be -inf");
    for (std::size_t i = 1; i < n; ++i) {
      if (!(data.breakpoints[i] > data.breakpoints[i - 1])) {
        throw InvalidParameter("piecewise_affine_log: breakpoints must be strictly ascending");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(data.log_slopes[i]) || data.log_slopes[i] == kInf || std::isnan(data.log_values[i])) {
        throw InvalidParameter("piecewise_affine_log: non-finite slope or value");
      }
    }
    OrliczFunction f(PsiFamily::piecewise_affine_log);
    f.pw_ = std::make_shared<const PiecewiseData>(std::move(data));
    return f;
  }

  // Phi(x) = Psi(x^2)
  OrliczFunction square_composed() const {
    OrliczFunction f(PsiFamily::square_of);
    f.inner_ = std::make_shared<const OrliczFunction>(*this);
    return f;
  }

  PsiFamily family() const { return family_; }
  double parameter() const { return param_; }
  // Point where the convexified ExpPower switches from the linear ray to
  // exp(x^alpha) - 1; zero when no modification is applied.
  double convexification_threshold() const { return threshold_; }
  const PiecewiseData* piecewise() const { return pw_.get(); }
  const OrliczFunction* inner() const { return inner_.get(); }

  // ln Psi(x)
  double log_value(double x) const {
    check_arg(x);
    if (x == 0) return kNegInf;
    switch (family_) {
      case PsiFamily::power_law:
        return param_ * std::log(x);
      case PsiFamily::exp_power:
        if (x < threshold_) return log_ray_slope_ + std::log(x);
        return log_expm1(param_ == 1.0 ? x : std::pow(x, param_));
      case PsiFamily::heavy_tail_log:
        if (param_ == 1.0) return std::log(x);
        return log_expm1(std::pow(std::log1p(x), param_));
      case PsiFamily::exp_square:
        return log_expm1(x * x);
      case PsiFamily::piecewise_affine_log: {
        const auto& bp = pw_->breakpoints;
        const std::size_t i = segment(x);
        if (x == bp[i]) return pw_->log_values[i];
        return log_add_exp(pw_->log_values[i], pw_->log_slopes[i] + std::log(x - bp[i]));
      }
      case PsiFamily::square_of:
        return inner_->log_value(x * x);
    }
    return kNegInf;
  }

  // psi(x) = ln(1 + Psi(x)); closed form where one exists.
  double psi(double x) const {
    check_arg(x);
    if (x == 0) return 0.0;
    switch (family_) {
      case PsiFamily::exp_power:
        if (x < threshold_) return softplus(log_value(x));
        return param_ == 1.0 ? x : std::pow(x, param_);
      case PsiFamily::heavy_tail_log:
        return param_ == 1.0 ? std::log1p(x) : std::pow(std::log1p(x), param_);
      case PsiFamily::exp_square:
        return x * x;
      case PsiFamily::square_of:
        return inner_->psi(x * x);
      default:
        return softplus(log_value(x));
    }
  }

  double value(double x) const {
    check_arg(x);
    switch (family_) {
      case PsiFamily::power_law:
        return std::pow(x, param_);
      case PsiFamily::exp_power:
        if (x < threshold_) return std::exp(log_ray_slope_) * x;
        return std::expm1(psi(x));
      case PsiFamily::heavy_tail_log:
      case PsiFamily::exp_square:
        return std::expm1(psi(x));
      default:
        return std::exp(log_value(x));
    }
  }

  Evaluation eval(double x) const { return {value(x), psi(x), log_value(x)}; }

  // ln of the right derivative Psi'(x+)
  double log_derivative(double x) const {
    check_arg(x);
    switch (family_) {
      case PsiFamily::power_law: {
        if (x == 0) return param_ > 1 ? kNegInf : (param_ == 1 ? 0.0 : kInf);
        return std::log(param_) + (param_ - 1.0) * std::log(x);
      }
      case PsiFamily::exp_power:
        if (x < threshold_) return log_ray_slope_;
        if (param_ == 1.0) return x;
        return std::log(param_) + (param_ - 1.0) * std::log(x) + std::pow(x, param_);
      case PsiFamily::heavy_tail_log: {
        if (param_ == 1.0) return 0.0;
        if (x == 0) return kNegInf;
        const double l = std::log1p(x);
        return std::log(param_) + (param_ - 1.0) * std::log(l) - l + std::pow(l, param_);
      }
      case PsiFamily::exp_square:
        if (x == 0) return kNegInf;
        return std::numbers::ln2 + std::log(x) + x * x;
      case PsiFamily::piecewise_affine_log:
        return pw_->log_slopes[segment(x)];
      case PsiFamily::square_of:
        if (x == 0) return kNegInf;
        return std::numbers::ln2 + std::log(x) + inner_->log_derivative(x * x);
    }
    return kNegInf;
  }

  // Solves Psi(x) = y on the chosen scale by bracketed bisection (doubling
  // from 1, then halving the bracket to floating-point resolution).
  double invert(double y, InverseScale scale = InverseScale::linear) const {
    if (std::isnan(y)) throw DomainError("invert: NaN target");
    switch (scale) {
      case InverseScale::linear:
        if (y < 0) throw DomainError("invert: negative target");
        if (y == kInf) throw RangeError("invert: target not representable on the linear scale; use the log scale");
        if (y == 0) return 0.0;
        return invert(std::log(y), InverseScale::log);
      case InverseScale::psi:
        if (y < 0) throw DomainError("invert: negative target");
        if (y == kInf) throw RangeError("invert: infinite psi target");
        if (y == 0) return 0.0;
        return solve([this](double x) { return psi(x); }, y);
      case InverseScale::log:
        if (y == kNegInf) return 0.0;
        if (y == kInf) throw RangeError("invert: infinite log target");
        return solve([this](double x) { return log_value(x); }, y);
    }
    return 0.0;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << family_name(family_);
    switch (family_) {
      case PsiFamily::power_law: os << "(p=" << param_ << ")"; break;
      case PsiFamily::exp_power: os << "(alpha=" << param_ << ")"; break;
      case PsiFamily::heavy_tail_log: os << "(beta=" << param_ << ")"; break;
      case PsiFamily::piecewise_affine_log: os << "(" << pw_->breakpoints.size() << " breakpoints)"; break;
      case PsiFamily::square_of: os << "(" << inner_->describe() << ")"; break;
      default: break;
    }
    return os.str();
  }

 private:
  explicit OrliczFunction(PsiFamily f) : family_(f) {}

  static void check_arg(double x) {
    if (!(x >= 0)) throw DomainError("Orlicz function evaluated at a negative or NaN argument");
  }

  std::size_t segment(double x) const {
    const auto& bp = pw_->breakpoints;
    auto it = std::upper_bound(bp.begin(), bp.end(), x);
    return static_cast<std::size_t>(std::distance(bp.begin(), it)) - 1;
  }

  template <class F>
  static double solve(F&& f, double target) {
    const Bracket b = threshold_search_tight([&](double x) { return f(x) >= target; }, 1.0);
    if (b.lo == 0.0) return b.hi;
    // Pick whichever end of the final bracket matches the target better.
    return std::abs(f(b.lo) - target) < std::abs(f(b.hi) - target) ? b.lo : b.hi;
  }

  PsiFamily family_;
  double param_ = 0.0;
  double threshold_ = 0.0;
  double log_ray_slope_ = 0.0;
  std::shared_ptr<const PiecewiseData> pw_;
  std::shared_ptr<const OrliczFunction> inner_;
};

// ---------------------------------------------------------------------------
// Axiom validation on a grid

struct ValidationReport {
  bool zero_at_origin = true;
  bool increasing = true;
  bool convex = true;
  bool piecewise_consistent = true;
  std::optional<std::array<double, 2>> first_monotonicity_violation;  // x < y with Psi(x) >= Psi(y)
  std::optional<std::array<double, 3>> first_convexity_violation;     // x, (x+y)/2, y
  std::string message;

  bool ok() const { return zero_at_origin && increasing && convex && piecewise_consistent; }
};

inline std::vector<double> default_validation_grid(const OrliczFunction& f) {
  std::vector<double> g = log_grid(1e-3, 1e3, 64);
  if (f.convexification_threshold() > 0) g.push_back(f.convexification_threshold());
  if (const auto* pw = f.piecewise()) {
    const auto& bp = pw->breakpoints;
    for (std::size_t i = 1; i < bp.size(); ++i) {
      g.push_back(bp[i]);
      g.push_back(0.5 * (bp[i - 1] + bp[i]));
    }
    g.push_back(2.0 * bp.back() + 1.0);
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

inline ValidationReport validate(const OrliczFunction& f, std::span<const double> grid) {
  ValidationReport r;
  std::ostringstream msg;
  if (grid.empty()) throw DomainError("validate: empty grid");
  if (f.log_value(0.0) != kNegInf) {
    r.zero_at_origin = false;
    msg << "Psi(0) != 0; ";
  }
  std::vector<double> xs(grid.begin(), grid.end());
  std::sort(xs.begin(), xs.end());
  std::vector<double> lv(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) lv[i] = f.log_value(xs[i]);

  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    if (xs[i + 1] > xs[i] && !(lv[i + 1] > lv[i])) {
      r.increasing = false;
      r.first_monotonicity_violation = std::array<double, 2>{xs[i], xs[i + 1]};
      msg << "not strictly increasing between " << xs[i] << " and " << xs[i + 1] << "; ";
      break;
    }
  }

  for (std::size_t i = 0; i < xs.size() && r.convex; ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double mid = 0.5 * (xs[i] + xs[j]);
      const double lhs = f.log_value(mid);
      const double rhs = log_add_exp(lv[i], lv[j]) - std::numbers::ln2;
      const double tol = 1e-12 + 1e-14 * std::abs(rhs);
      if (lhs > rhs + tol) {
        r.convex = false;
        r.first_convexity_violation = std::array<double, 3>{xs[i], mid, xs[j]};
        msg << "midpoint convexity fails at (" << xs[i] << ", " << mid << ", " << xs[j] << "); ";
        break;
      }
    }
  }

  if (const auto* pw = f.piecewise()) {
    const auto& bp = pw->breakpoints;
    double prev_slope = kNegInf;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
      // Linear slope reconstructed from the stored log-values.
      const double rise = log_sub_exp(std::max(pw->log_values[i + 1], pw->log_values[i]), pw->log_values[i]);
      const double slope = rise - std::log(bp[i + 1] - bp[i]);
      const double tol = 1e-9 + 1e-12 * std::abs(pw->log_values[i + 1]);
      const double predicted = log_add_exp(pw->log_values[i], pw->log_slopes[i] + std::log(bp[i + 1] - bp[i]));
      if (std::abs(predicted - pw->log_values[i + 1]) > tol) {
        r.piecewise_consistent = false;
        msg << "segment " << i << " slope disagrees with stored values; ";
        break;
      }
      if (slope + 1e-9 + 1e-12 * std::abs(slope) < prev_slope) {
        r.convex = false;
        r.first_convexity_violation = std::array<double, 3>{bp[i], bp[i + 1], i + 2 < bp.size() ? bp[i + 2] : bp[i + 1]};
        msg << "linear-domain slopes decrease at breakpoint " << bp[i] << "; ";
        break;
      }
      prev_slope = slope;
    }
    if (r.piecewise_consistent && bp.size() >= 2) {
      const std::size_t last = bp.size() - 1;
      if (pw->log_slopes[last] + 1e-9 < pw->log_slopes[last - 1]) {
        r.convex = false;
        msg << "final ray slope below previous segment; ";
      }
    }
  }
  r.message = msg.str();
  return r;
}

inline ValidationReport validate(const OrliczFunction& f) {
  const auto g = default_validation_grid(f);
  return validate(f, g);
}

// Throws InvalidParameter naming the failing axiom.
inline void require_valid(const OrliczFunction& f) {
  const auto r = validate(f);
  if (!r.ok()) throw InvalidParameter("invalid Orlicz function " + f.describe() + ": " + r.message);
}

}  // namespace hjorlicz
