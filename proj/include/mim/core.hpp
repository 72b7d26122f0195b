#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace mim {

using cplx = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;      // m/s
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m

// Bad input: maps to exit code 2 in the CLI.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver or integrator failure: exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File or stream failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mim
