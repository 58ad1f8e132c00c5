#include "solver.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace scerm {

namespace {

constexpr double kQuadraticRegion = 1e-4;

void check_config(const SolverConfig& c) {
  if (!(c.tol > 0)) throw ContractError("solver tol must be positive");
  if (c.max_iter < 1) throw ContractError("solver max_iter must be >= 1");
  if (!(c.line_search.shrink > 0 && c.line_search.shrink < 1))
    throw ContractError("line search shrink must lie in (0, 1)");
}

FinitePopulation normalized(const std::vector<Sample>& samples, const Vec& weights,
                            const LossModel& loss) {
  if (samples.empty()) throw ContractError("no samples");
  if (weights.size() != static_cast<Eigen::Index>(samples.size()))
    throw ContractError("weights and samples differ in length");
  double s = weights.sum();
  if (!(s > 0) || !std::isfinite(s)) throw DomainError("weights must have a positive finite sum");
  return FinitePopulation(samples, weights / s, loss);
}

}  // namespace

SolveResult newton_minimize(const FinitePopulation& measure, double lambda,
                            const SolverConfig& config, const Vec* start) {
  check_config(config);
  const double eps = std::numeric_limits<double>::epsilon();
  SolveResult r;
  Vec theta = start ? *start : Vec::Zero(measure.dim());
  double f;
  Vec g;
  Mat h;
  for (int it = 0;; ++it) {
    exact_all(measure, theta, lambda, &f, &g, &h);
    Eigen::LLT<Mat> fh(h);
    if (fh.info() != Eigen::Success || !std::isfinite(f)) {
      r.theta_hat = theta;
      throw DivergenceError("Hessian lost positive definiteness at iteration " +
                                std::to_string(it),
                            r.decrement_trace);
    }
    Vec p = -fh.solve(g);
    double slope = g.dot(p);
    double dec = std::sqrt(std::max(0.0, -slope));
    r.decrement_trace.push_back(dec);
    r.objective_trace.push_back(f);
    if (dec <= config.tol) {
      r.converged = true;
      r.theta_hat = theta;
      return r;
    }
    if (it == config.max_iter) break;
    if (dec <= kQuadraticRegion) {
      // quadratic region: full step, no function-value test
      theta += p;
      r.iterations = it + 1;
      continue;
    }
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k <= config.line_search.max_halvings; ++k) {
      Vec cand = theta + step * p;
      double fc = exact_risk(measure, cand, lambda);
      // Armijo with a 4 eps |f| rounding slack
      if (fc <= f + config.line_search.c1 * step * slope + 4 * eps * std::abs(f)) {
        theta = std::move(cand);
        accepted = true;
        break;
      }
      step *= config.line_search.shrink;
    }
    if (!accepted) break;
    r.iterations = it + 1;
  }
  r.theta_hat = theta;
  throw DivergenceError("Newton did not reach tolerance after " + std::to_string(r.iterations) +
                            " steps",
                        r.decrement_trace);
}

SolveResult solve_erm(const std::vector<Sample>& samples, const Vec& weights,
                      const LossModel& loss, double lambda, const SolverConfig& config) {
  if (!(lambda > 0)) throw ContractError("lambda must be positive for ERM");
  return newton_minimize(normalized(samples, weights, loss), lambda, config);
}

double decrement(const FinitePopulation& measure, double lambda, const Vec& theta) {
  if (!(lambda > 0)) throw ContractError("lambda must be positive");
  Vec g;
  Mat h;
  exact_all(measure, theta, lambda, nullptr, &g, &h);
  Eigen::LLT<Mat> fh(h);
  Vec w = fh.matrixL().solve(g);
  return w.norm();
}

double decrement(const std::vector<Sample>& samples, const Vec& weights, const LossModel& loss,
                 double lambda, const Vec& theta) {
  return decrement(normalized(samples, weights, loss), lambda, theta);
}

}  // namespace scerm
