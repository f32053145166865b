#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace dhlab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

template <int D>
using Mat = Eigen::Matrix<double, D, D>;

/// Largest spatial dimension supported by the fixed-size kernels.
inline constexpr int kMaxDim = 2;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SolverFailure {
  MaxIterations,
  Divergence,
  SingularJacobian,
  FamilyCollapse,
  ContinuationStall,
  NonConvergence,
};

inline const char* to_string(SolverFailure f) {
  switch (f) {
    case SolverFailure::MaxIterations: return "MaxIterations";
    case SolverFailure::Divergence: return "Divergence";
    case SolverFailure::SingularJacobian: return "SingularJacobian";
    case SolverFailure::FamilyCollapse: return "FamilyCollapse";
    case SolverFailure::ContinuationStall: return "ContinuationStall";
    case SolverFailure::NonConvergence: return "NonConvergence";
  }
  return "Unknown";
}

/// Numerical failure of one of the solvers. `value` carries the
/// failure-specific payload: found orbit count for FamilyCollapse, last
/// good tau for ContinuationStall, final defect for NonConvergence, last
/// residual otherwise.
class SolverError : public std::runtime_error {
 public:
  SolverError(SolverFailure kind, const std::string& what, double value = 0.0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), value_(value) {}

  SolverFailure kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }

 private:
  SolverFailure kind_;
  double value_;
};

class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

/// Calls `f.template operator()<D>()` for runtime dimension d in [1, kMaxDim].
template <typename F>
decltype(auto) dispatch_dim(int d, F&& f) {
  switch (d) {
    case 1: return f.template operator()<1>();
    case 2: return f.template operator()<2>();
    default:
      throw InvalidArgument("dimension d=" + std::to_string(d) + " outside supported range [1, " +
                            std::to_string(kMaxDim) + "]");
  }
}

/// C-infinity monotone step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x).
/// Returns value and first two derivatives. The derivative peaks at x = 1/2
/// with value 2.
struct SmoothStep {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  static constexpr double kMaxSlope = 2.0;

  static SmoothStep at(double x) {
    if (x <= 0.0) return {0.0, 0.0, 0.0};
    if (x >= 1.0) return {1.0, 0.0, 0.0};
    const double y = 1.0 - x;
    const double g = std::exp(-1.0 / x);
    const double h = std::exp(-1.0 / y);
    const double g1 = g / (x * x);
    const double h1 = -h / (y * y);  // d/dx f(1-x)
    const double g2 = g * (1.0 / (x * x * x * x) - 2.0 / (x * x * x));
    const double h2 = h * (1.0 / (y * y * y * y) - 2.0 / (y * y * y));
    const double s = g + h;
    const double num = g1 * h - g * h1;
    const double num1 = g2 * h - g * h2;
    const double den = s * s;
    const double den1 = 2.0 * s * (g1 + h1);
    return {g / s, num / den, (num1 * den - num * den1) / (den * den)};
  }
};

/// Radial profile r -> value with two derivatives.
struct Radial {
  double value = 1.0;
  double d1 = 0.0;
  double d2 = 0.0;

  friend Radial operator*(const Radial& a, const Radial& b) {
    return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
            a.d2 * b.value + 2.0 * a.d1 * b.d1 + a.value * b.d2};
  }
};

/// Equal to 1 on [0, plateau], 0 beyond plateau + width, smooth monotone taper.
inline Radial plateau_profile(double r, double plateau, double width) {
  if (!std::isfinite(plateau)) return {};
  const SmoothStep s = SmoothStep::at((r - plateau) / width);
  return {1.0 - s.value, -s.d1 / width, -s.d2 / (width * width)};
}

/// Floor-division aware reduction to [0,1).
inline double wrap_unit(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r = 0.0;
  return r;
}

}  // namespace dhlab
