#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "population.hpp"

namespace scerm {

enum class Regime { None, Source, SourceCapacity };

const char* regime_name(Regime r);
Regime regime_from_name(const std::string& name);

struct RegimeParams {
  double B1bar = 0, B2bar = 0;  // sups over the ball ||theta|| <= ||theta*||
  double B1star = 0, B2star = 0;
  double R = 0;
  double theta_norm = 0;
  double L = 1;
  double Q = 0;
  double r = 0;
  double alpha = std::numeric_limits<double>::infinity();
  double delta = 0.1;
  std::optional<double> c0;  // replaces the schedule constant C0 when set
  double q_star_sq() const { return B2star > 0 ? B1star * B1star / B2star : 0.0; }
};

RegimeParams regime_params(const FinitePopulation& pop, const Vec& theta_star, double delta);

struct LambdaChoice {
  double lambda = 0;
  bool clamped = false;
};

double schedule_c0(Regime regime, const RegimeParams& p);
LambdaChoice lambda_schedule(Regime regime, long n, const RegimeParams& p);
double theoretical_rate(Regime regime, double r, double alpha);

struct RateConstants {
  double C0 = 0, C1 = 0, N = 0;
  double gamma = 0;
  bool N_available = true;
  double lambda0 = 0, lambda1 = 0;
};
RateConstants rate_constants(Regime regime, const RegimeParams& p);

struct LambdaDiagnostics {
  double bias = 0, df = 0, dikin = 0, t = 0;
  Constants constants;
};
LambdaDiagnostics lambda_diagnostics(const FinitePopulation& pop, PopulationSolution& sol,
                                     double lambda);

struct BoundEval {
  double rhs = 0;
  bool guard_ok = false;
  double guard_n = 0;  // smallest n meeting every sample-size condition at this lambda
  bool small_branch = true;
};
BoundEval theorem_bound(Regime regime, long n, double lambda, const LambdaDiagnostics& diag,
                        const RegimeParams& p);

struct ExperimentPlan {
  const FinitePopulation* population = nullptr;
  Regime regime = Regime::None;
  std::vector<long> n_grid;
  long replicates = 1;
  double delta = 0.1;
  std::uint64_t seed = 0;
  std::vector<double> lambda_override;  // empty, or one lambda per n
  std::optional<double> c0;
  double r = 0;
  double alpha = std::numeric_limits<double>::infinity();
  double L = 1;
  double Q = 0;
  int burn_in = 1;
  int jobs = 1;
  SolverConfig solver;
};

void validate_plan(const ExperimentPlan& plan);

struct RateCell {
  long n = 0;
  long replicate = 0;
  double lambda = 0;
  double excess_risk = 0;
  double bound_rhs = 0;
  bool guard_ok = false;
  std::uint64_t seed = 0;
  bool converged = true;
};

struct RateRow {
  long n = 0;
  double lambda = 0;
  bool clamped = false;
  bool guard_ok = false;
  double guard_n = 0;
  bool small_branch = true;
  double bound_rhs = 0;
  double mean_excess = 0;
  long valid = 0;
  long failures = 0;
  long violations = 0;
  double violation_freq = 0;
};

struct RateReport {
  std::vector<RateCell> cells;
  std::vector<RateRow> rows;
  double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
  double fit_residual = 0;
  double theoretical_exponent = 0;
  long failures = 0;
  RegimeParams params;
  RateConstants constants;
};

RateReport run_rate_experiment(const ExperimentPlan& plan);

// largest violation frequency allowed at the given replicate count: p + 3 sigma
double binomial_upper(double p, long trials);

struct ConcentrationRecord {
  double premise_n = 0;
  bool premise_ok = false;
  bool skipped = false;
  long trials = 0;
  long successes = 0;
  double frequency = 0;
  double threshold = 0;  // 1 - delta - 3 sigma
  double worst = 0;      // largest observed left-hand side
  bool pass() const { return skipped || frequency >= threshold; }
};

ConcentrationRecord hessian_concentration_experiment(const FinitePopulation& pop, const Vec& theta,
                                                     double lambda, long n, long replicates,
                                                     double delta, std::uint64_t seed, int jobs = 1);

ConcentrationRecord gradient_concentration_experiment(const FinitePopulation& pop, double lambda,
                                                      long n, long replicates, double delta,
                                                      std::uint64_t seed, double k = 4.0,
                                                      int jobs = 1);

}  // namespace scerm
