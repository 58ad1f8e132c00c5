#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "population.hpp"

namespace scerm {

// margin is (rhs - lhs) / max(1, |lhs|, |rhs|); it passes when margin >= -slack
struct Margin {
  double lhs = 0;
  double rhs = 0;
  double margin = 0;
  double m = 0;  // sup sc_factor(theta1 - theta0) over the measure's support
  bool pass = true;
};

constexpr double kCheckSlack = 1e-9;

Margin check_hess_control(const FinitePopulation& measure, const Vec& theta0, const Vec& theta1,
                          double lambda);
Margin check_grad_lower(const FinitePopulation& measure, const Vec& theta0, const Vec& theta1,
                        double lambda);
Margin check_grad_upper(const FinitePopulation& measure, const Vec& theta0, const Vec& theta1,
                        double lambda);
Margin check_value_bound(const FinitePopulation& measure, const Vec& theta0, const Vec& theta1,
                         double lambda);

struct Implication {
  double lhs = 0;       // gradient quantity tested against r/2
  double threshold = 0; // r_lambda(theta) / 2
  double nm = 0;        // sup sc_factor(theta - minimizer)
  bool antecedent = false;
  bool consequent = false;
  bool holds() const { return !antecedent || consequent; }
};

struct LocalizationRecord {
  Implication population;
  std::optional<Implication> empirical;
};

// The empirical variant runs when `sample` is given; the norm is taken over pop's support.
LocalizationRecord check_localization(const FinitePopulation& pop, const Vec& theta, double lambda,
                                      const FinitePopulation* sample = nullptr,
                                      const SolverConfig& config = {});

struct BiasLemmaRecord {
  double bias = 0, dikin = 0, t = 0, bound = 0;
  bool small_branch = false;
  bool holds = false;
};
BiasLemmaRecord check_bias_lemma(const FinitePopulation& pop, PopulationSolution& sol, double lambda);

struct DecompositionRecord {
  bool applicable = false;
  double var_hat = 0, dikin_half = 0;
  double lhs = 0, rhs = 0;
  Margin margin;
};

// theta_hat must be the minimizer of L_lambda over `sample`
DecompositionRecord check_decomposition_bound(const FinitePopulation& pop, PopulationSolution& sol,
                                              double lambda, const FinitePopulation& sample,
                                              const Vec& theta_hat);

struct CheckReport {
  long trials = 0;
  long violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<double> per_trial;  // margins, kept only when requested
  void add(double margin, bool keep);
};

struct SuiteOptions {
  long trials_per_kind = 10000;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool keep_trials = false;
};

struct KindReport {
  LossKind kind;
  CheckReport hess, grad_lower, grad_upper, value;
  CheckReport hess_swapped;
  double square_abs_margin = 0;  // max |margin| seen (square loss only)
};

struct SuiteReport {
  std::vector<KindReport> kinds;
  long localization_trials = 0, localization_failures = 0;
  long empirical_localization_trials = 0, empirical_localization_failures = 0;
  long bias_lemma_trials = 0, bias_lemma_failures = 0;
  long violations() const;
};

// Random populations with at most 16 atoms, theta in the radius-3 ball, lambda in {0, 1e-3..1}.
SuiteReport run_verify_suite(const SuiteOptions& options);

// Random finite population of the given kind with an attained minimizer.
FinitePopulation random_population(LossKind kind, std::uint64_t seed);

}  // namespace scerm
