#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcd {

using cplx = std::complex<double>;

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Numerical failures. Anything recoverable (a masked map node, a degradation
// of accuracy) is reported as a Warning instead.
struct SingularKPoint : std::runtime_error {
  explicit SingularKPoint(const std::string& what) : std::runtime_error(what) {}
};
struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};
struct DivergedOutsideWindow : std::runtime_error {
  explicit DivergedOutsideWindow(const std::string& what) : std::runtime_error(what) {}
};
struct BranchPoint : std::runtime_error {
  explicit BranchPoint(const std::string& what) : std::runtime_error(what) {}
};
struct PatternMismatch : std::runtime_error {
  explicit PatternMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct DegenerateResonance : std::runtime_error {
  explicit DegenerateResonance(const std::string& what) : std::runtime_error(what) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class Warning {
  DegenerateBands,
  VanHoveProximity,
  DeformationTooStrong,
  PositiveImaginaryPart,
};

inline const char* warning_name(Warning w) {
  switch (w) {
    case Warning::DegenerateBands: return "DegenerateBands";
    case Warning::VanHoveProximity: return "VanHoveProximity";
    case Warning::DeformationTooStrong: return "DeformationTooStrong";
    case Warning::PositiveImaginaryPart: return "PositiveImaginaryPart";
  }
  return "?";
}

inline bool has_warning(const std::vector<Warning>& ws, Warning w) {
  for (auto x : ws)
    if (x == w) return true;
  return false;
}

}  // namespace bcd
