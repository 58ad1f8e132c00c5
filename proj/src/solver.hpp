#pragma once

#include <vector>

#include "measure.hpp"

namespace scerm {

struct LineSearchOptions {
  double shrink = 0.5;
  double c1 = 1e-4;
  int max_halvings = 60;
};

struct SolverConfig {
  double tol = 1e-10;
  int max_iter = 200;
  LineSearchOptions line_search;
};

struct SolveResult {
  Vec theta_hat;
  std::vector<double> decrement_trace;  // one entry per visited iterate
  std::vector<double> objective_trace;  // L_lambda at the same iterates
  int iterations = 0;                   // accepted Newton steps
  bool converged = false;
};

// Damped Newton on L_lambda of the given measure, started at `start` (zero if null).
// Throws DivergenceError when the tolerance is not reached.
SolveResult newton_minimize(const FinitePopulation& measure, double lambda,
                            const SolverConfig& config, const Vec* start = nullptr);

// Weighted regularized ERM; weights are normalized internally.
SolveResult solve_erm(const std::vector<Sample>& samples, const Vec& weights,
                      const LossModel& loss, double lambda, const SolverConfig& config = {});

double decrement(const std::vector<Sample>& samples, const Vec& weights, const LossModel& loss,
                 double lambda, const Vec& theta);
double decrement(const FinitePopulation& measure, double lambda, const Vec& theta);

}  // namespace scerm
