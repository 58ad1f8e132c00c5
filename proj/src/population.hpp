#pragma once

#include <limits>
#include <map>
#include <vector>

#include "measure.hpp"
#include "solver.hpp"

namespace scerm {

struct PopulationSolution {
  Vec theta_star;
  std::map<double, Vec> theta_star_lambda;
  Mat hessian_at_star;  // H(theta*), no ridge
};

// Minimizer of L_lambda; lambda = 0 uses tol 1e-12 unless the config is tighter.
Vec minimize_population(const FinitePopulation& pop, double lambda, const SolverConfig& config = {});

PopulationSolution solve_population(const FinitePopulation& pop, const std::vector<double>& lambdas,
                                    const SolverConfig& config = {});

// theta*_lambda from the solution, solving and caching it when missing
const Vec& theta_lambda(const FinitePopulation& pop, PopulationSolution& sol, double lambda,
                        const SolverConfig& config = {});

double bias_lambda(const PopulationSolution& sol, double lambda);
double df_lambda(const FinitePopulation& pop, const PopulationSolution& sol, double lambda);
// +infinity when every certificate set is {0}
double dikin_radius(const FinitePopulation& pop, const Vec& theta, double lambda);
double t_lambda(const FinitePopulation& pop, const Vec& theta_star, const Vec& theta_star_lambda);

struct StarConstants {
  double B1 = 0;  // sup ||grad l_z(theta*)||
  double B2 = 0;  // sup Tr hess l_z(theta*)
  double R = 0;   // sup over certificates of ||g||
  double theta_norm = 0;
  double q_star_sq() const { return B2 > 0 ? B1 * B1 / B2 : 0.0; }
};
StarConstants star_constants(const FinitePopulation& pop, const Vec& theta_star);

struct Constants {
  double t = 0, t_tilde = 0;
  double K_bias = 0, K_var = 0;
  double box1 = 0, box2 = 0;
  double tri1 = 0, tri2 = 0;
  double C_bias = 0, C_var = 0;
  bool small_branch = true;  // t_tilde <= 1/2
};
Constants constants_from(double t, double t_tilde);
Constants constants_at(const FinitePopulation& pop, PopulationSolution& sol, double lambda);

// constants of the analysis without source/capacity assumptions
struct SimplifiedConstants {
  double K_var, tri, C_bias, C_var;
};
SimplifiedConstants simplified_constants();

struct ExponentFit {
  double value = std::numeric_limits<double>::quiet_NaN();
  double slope = 0;
  double residual = 0;  // rms of the log-log fit
  int points = 0;
  bool flagged = false;
};

ExponentFit estimate_source_exponent(const std::vector<double>& lambdas,
                                     const std::vector<double>& bias);
// Points with df > d/2 sit on the finite-dimension plateau and are left out.
ExponentFit estimate_capacity_exponent(const std::vector<double>& lambdas,
                                       const std::vector<double>& df, double dim);

struct DiagnosticsRow {
  double lambda, bias, df, dikin, t, theta_lambda_norm;
  Constants constants;
};

struct DiagnosticsReport {
  std::vector<DiagnosticsRow> rows;
  StarConstants star;
  ExponentFit fitted_r, fitted_alpha;
};

std::vector<double> default_lambda_grid(double b2_star);
DiagnosticsReport diagnose(const FinitePopulation& pop, std::vector<double> lambda_grid,
                           const SolverConfig& config = {});

struct SourcePopulation {
  FinitePopulation pop;
  double r, alpha;
  double L;  // ||v||
  double Q;  // sup_lambda lambda^{1/alpha} df_lambda
  Vec theta_star;
  Vec spectrum;
};

// Square loss, covariance diag(j^{-alpha}), theta* = C^r v, labels theta*.phi +- 1.
SourcePopulation make_source_population(int d, double r, double alpha, unsigned long long seed);

// Well-specified logistic model on coordinate atoms: weight of coordinate j ~ j^{-weight_decay},
// theta*_j = scale * j^{-coef_decay/2}.
FinitePopulation make_diagonal_logistic_population(int d, double weight_decay, double coef_decay,
                                                   double scale);

}  // namespace scerm
