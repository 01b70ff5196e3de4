#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace corona {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double inf = std::numeric_limits<double>::infinity();
inline constexpr cplx I{0.0, 1.0};

// Error taxonomy. Each operation documents which of these it throws.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ConsistencyError : std::logic_error {
  using std::logic_error::logic_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Forces a nonnegative imaginary part to +0.0 so principal branches pick arg = +pi on the negative axis.
inline cplx upper_closed(cplx z) {
  if (!(z.imag() > 0.0)) z = {z.real(), 0.0};
  return z;
}

inline double sqr(double v) { return v * v; }

enum class Side { upper, lower };

}  // namespace corona
