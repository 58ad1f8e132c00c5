#include "auxfun.hpp"

#include <cmath>

namespace scerm {

namespace {
constexpr double kSeriesCut = 1e-4;
}

double psi(double t) {
  if (std::abs(t) < kSeriesCut) return 0.5 + t / 6.0 + t * t / 24.0;
  return (std::expm1(t) - t) / (t * t);
}

double phi_lower(double t) {
  if (std::abs(t) < kSeriesCut) return 1.0 - t / 2.0 + t * t / 6.0;
  return -std::expm1(-t) / t;
}

double phi_upper(double t) {
  if (std::abs(t) < kSeriesCut) return 1.0 + t / 2.0 + t * t / 6.0;
  return std::expm1(t) / t;
}

}  // namespace scerm
