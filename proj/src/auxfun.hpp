#pragma once

namespace scerm {

// psi(t) = (e^t - t - 1) / t^2
double psi(double t);
// (1 - e^{-t}) / t
double phi_lower(double t);
// (e^t - 1) / t
double phi_upper(double t);

}  // namespace scerm
