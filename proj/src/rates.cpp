#include "rates.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace scerm {

namespace {

double log2d(double delta) { return std::log(2.0 / delta); }

void check_delta(double delta) {
  if (!(delta > 0 && delta <= 0.5)) throw ConfigError("delta must lie in (0, 0.5]");
}

// exponent of lambda in n^{-exponent}
double schedule_exponent(Regime regime, const RegimeParams& p) {
  switch (regime) {
    case Regime::None: return 0.5;
    case Regime::Source: return 1.0 / (2.0 + 2.0 * p.r);
    case Regime::SourceCapacity:
      if (std::isinf(p.alpha)) return 1.0 / (1.0 + 2.0 * p.r);
      return p.alpha / (1.0 + p.alpha * (1.0 + 2.0 * p.r));
  }
  return 0.5;
}

void check_regime_params(Regime regime, const RegimeParams& p) {
  check_delta(p.delta);
  if (regime == Regime::None) return;
  if (!(p.r >= 0 && p.r <= 0.5)) throw ConfigError("source exponent r must lie in [0, 0.5]");
  if (!(p.L > 0)) throw ConfigError("source norm L must be positive");
  if (regime == Regime::SourceCapacity) {
    if (!(p.alpha >= 1)) throw ConfigError("capacity exponent alpha must be >= 1");
    if (!(p.Q > 0)) throw ConfigError("capacity constant Q must be positive");
  }
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::None: return "none";
    case Regime::Source: return "source";
    case Regime::SourceCapacity: return "source_capacity";
  }
  return "none";
}

Regime regime_from_name(const std::string& name) {
  for (auto r : {Regime::None, Regime::Source, Regime::SourceCapacity})
    if (name == regime_name(r)) return r;
  throw ConfigError("unknown regime '" + name + "'");
}

RegimeParams regime_params(const FinitePopulation& pop, const Vec& theta_star, double delta) {
  RegimeParams p;
  auto star = star_constants(pop, theta_star);
  p.B1star = star.B1;
  p.B2star = star.B2;
  p.R = star.R;
  p.theta_norm = star.theta_norm;
  auto bar = sup_constants(pop.loss(), pop.atoms(), star.theta_norm);
  p.B1bar = bar.B1;
  p.B2bar = bar.B2;
  p.delta = delta;
  return p;
}

double schedule_c0(Regime regime, const RegimeParams& p) {
  if (p.c0) return *p.c0;
  switch (regime) {
    case Regime::None: return 16.0 * p.B1bar * std::max(1.0, p.R);
    case Regime::Source: return 256.0 * std::pow(p.B1star / p.L, 2);
    case Regime::SourceCapacity: return 256.0 * std::pow(p.Q / p.L, 2);
  }
  return 0;
}

LambdaChoice lambda_schedule(Regime regime, long n, const RegimeParams& p) {
  if (n < 1) throw ContractError("n must be >= 1");
  check_regime_params(regime, p);
  double c0 = schedule_c0(regime, p);
  if (!(c0 > 0)) throw ConfigError("schedule constant C0 must be positive");
  LambdaChoice out;
  if (regime == Regime::None)
    out.lambda = c0 * std::sqrt(log2d(p.delta) / static_cast<double>(n));
  else
    out.lambda = std::pow(c0 / static_cast<double>(n), schedule_exponent(regime, p));
  if (p.B2star > 0 && out.lambda > p.B2star) {
    out.lambda = p.B2star;
    out.clamped = true;
  }
  return out;
}

double theoretical_rate(Regime regime, double r, double alpha) {
  switch (regime) {
    case Regime::None: return 0.5;
    case Regime::Source: return (2.0 * r + 1.0) / (2.0 * r + 2.0);
    case Regime::SourceCapacity: {
      if (std::isinf(alpha)) return 1.0;
      double a = alpha * (1.0 + 2.0 * r);
      return a / (a + 1.0);
    }
  }
  return 0.5;
}

RateConstants rate_constants(Regime regime, const RegimeParams& p) {
  check_regime_params(regime, p);
  RateConstants c;
  const double ld = log2d(p.delta);
  if (regime == Regime::None) {
    const double m = std::max(1.0, p.R);
    c.C0 = 16.0 * p.B1bar * m;
    c.C1 = 48.0 * p.B1bar * m * std::max(1.0, p.theta_norm * p.theta_norm);
    c.gamma = 0.5;
    const double a = p.B2bar / p.B1bar;
    const double l = std::log(6.0 * a * a / p.delta);
    c.N = std::max({36.0 * a * a * l * l, 256.0 / (a * a) * ld,
                    512.0 * std::max(p.theta_norm * p.theta_norm * p.R * p.R, 1.0) * ld});
    return c;
  }
  const double q = regime == Regime::Source ? p.B1star : p.Q;
  const double beta = schedule_exponent(regime, p);
  c.gamma = theoretical_rate(regime, p.r, p.alpha);
  c.C0 = 256.0 * std::pow(q / p.L, 2);
  c.C1 = 8.0 * std::pow(256.0, c.gamma) * std::pow(std::pow(q, c.gamma) * std::pow(p.L, 1.0 - c.gamma), 2);

  if (p.R == 0) {
    c.lambda0 = 1.0;
  } else if (p.r > 0) {
    c.lambda0 = std::min(std::pow(2.0 * p.L * p.R * ld, -1.0 / p.r), 1.0);
  } else {
    c.N_available = false;
    c.N = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  c.lambda1 = std::numeric_limits<double>::infinity();
  if (regime == Regime::SourceCapacity && p.q_star_sq() > 0)
    c.lambda1 = std::pow(p.Q * p.Q / p.q_star_sq(), p.alpha);
  const double cap = std::min({p.B2star, c.lambda0, c.lambda1});
  const double a = p.B2star * std::pow(p.L, 2 * beta) / std::pow(q, 2 * beta);
  const double first = 256.0 * q * q / (p.L * p.L) * std::pow(cap, -1.0 / beta);
  const double inner = 1296.0 / (1.0 - beta) * a * std::log(5184.0 / (1.0 - beta) * a * a / p.delta);
  const double second = std::pow(std::max(inner, 0.0), 1.0 / (1.0 - beta));
  c.N = std::max(first, second);
  return c;
}

LambdaDiagnostics lambda_diagnostics(const FinitePopulation& pop, PopulationSolution& sol,
                                     double lambda) {
  LambdaDiagnostics d;
  const Vec& tl = theta_lambda(pop, sol, lambda);
  d.bias = bias_lambda(sol, lambda);
  d.df = df_lambda(pop, sol, lambda);
  d.dikin = dikin_radius(pop, sol.theta_star, lambda);
  d.t = t_lambda(pop, sol.theta_star, tl);
  d.constants = constants_from(d.t, std::isinf(d.dikin) ? 0.0 : d.bias / d.dikin);
  return d;
}

BoundEval theorem_bound(Regime regime, long n, double lambda, const LambdaDiagnostics& diag,
                        const RegimeParams& p) {
  BoundEval b;
  const double ld = log2d(p.delta);
  const double nn = static_cast<double>(n);
  const auto& c = diag.constants;
  b.small_branch = c.small_branch;
  bool lambda_ok;
  if (regime == Regime::None) {
    b.rhs = 84.0 * p.B1bar * p.B1bar / (lambda * nn) * ld + 2.0 * lambda * p.theta_norm * p.theta_norm;
    lambda_ok = lambda <= p.B2bar;
    b.guard_n = std::max({512.0 * std::max(p.theta_norm * p.theta_norm * p.R * p.R, 1.0) * ld,
                          24.0 * p.B2bar / lambda * std::log(8.0 * p.B2bar / (lambda * p.delta)),
                          256.0 * p.R * p.R * p.B1bar * p.B1bar / (lambda * lambda) * ld});
  } else {
    lambda_ok = lambda <= p.B2star;
    const double n1 = c.tri1 * p.B2star / lambda *
                      std::log(8.0 * c.box1 * c.box1 * p.B2star / (lambda * p.delta));
    double n2;
    if (regime == Regime::Source) {
      b.rhs = c.C_bias * diag.bias * diag.bias + c.C_var * p.B1star * p.B1star / (lambda * nn) * ld;
      n2 = c.tri2 * std::pow(p.B1star * p.R, 2) / (lambda * lambda) * ld;
    } else {
      const double eff = std::max(diag.df, p.q_star_sq());
      b.rhs = c.C_bias * diag.bias * diag.bias + c.C_var * eff / nn * ld;
      n2 = std::isinf(diag.dikin) ? 0.0 : c.tri2 * eff / (diag.dikin * diag.dikin) * ld;
    }
    b.guard_n = std::max(n1, n2);
  }
  b.guard_ok = lambda_ok && nn >= b.guard_n;
  return b;
}

void validate_plan(const ExperimentPlan& plan) {
  if (!plan.population) throw ContractError("plan has no population");
  check_delta(plan.delta);
  if (plan.n_grid.empty()) throw ConfigError("n_grid must not be empty");
  for (size_t i = 0; i < plan.n_grid.size(); ++i) {
    if (plan.n_grid[i] < 1) throw ConfigError("n_grid entries must be >= 1");
    if (i > 0 && plan.n_grid[i] <= plan.n_grid[i - 1]) throw ConfigError("n_grid must be strictly increasing");
  }
  if (plan.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (!plan.lambda_override.empty()) {
    if (plan.lambda_override.size() != plan.n_grid.size())
      throw ConfigError("lambda_override needs one value per n");
    for (double l : plan.lambda_override)
      if (!(l > 0) || !std::isfinite(l)) throw ConfigError("lambda_override values must be positive");
  }
  if (plan.burn_in < 0) throw ConfigError("burn_in must be >= 0");
  if (plan.regime != Regime::None) {
    if (!(plan.r >= 0 && plan.r <= 0.5)) throw ConfigError("source exponent r must lie in [0, 0.5]");
    if (!(plan.L > 0)) throw ConfigError("source norm L must be positive");
  }
  if (plan.regime == Regime::SourceCapacity) {
    if (!(plan.alpha >= 1)) throw ConfigError("capacity exponent alpha must be >= 1");
    if (!(plan.Q > 0)) throw ConfigError("capacity constant Q must be positive");
  }
}

RateReport run_rate_experiment(const ExperimentPlan& plan) {
  validate_plan(plan);
  const FinitePopulation& pop = *plan.population;
  PopulationSolution sol = solve_population(pop, {}, plan.solver);
  RateReport rep;
  rep.params = regime_params(pop, sol.theta_star, plan.delta);
  rep.params.r = plan.r;
  rep.params.alpha = plan.alpha;
  rep.params.L = plan.L;
  rep.params.Q = plan.Q;
  rep.params.c0 = plan.c0;
  rep.constants = rate_constants(plan.regime, rep.params);
  rep.theoretical_exponent = theoretical_rate(plan.regime, plan.r, plan.alpha);
  const double risk_star = exact_risk(pop, sol.theta_star, 0.0);

  const size_t ng = plan.n_grid.size();
  rep.rows.resize(ng);
  for (size_t i = 0; i < ng; ++i) {
    RateRow& row = rep.rows[i];
    row.n = plan.n_grid[i];
    if (plan.lambda_override.empty()) {
      auto lc = lambda_schedule(plan.regime, row.n, rep.params);
      row.lambda = lc.lambda;
      row.clamped = lc.clamped;
    } else {
      row.lambda = plan.lambda_override[i];
    }
    auto diag = lambda_diagnostics(pop, sol, row.lambda);
    auto b = theorem_bound(plan.regime, row.n, row.lambda, diag, rep.params);
    row.bound_rhs = b.rhs;
    row.guard_ok = b.guard_ok;
    row.guard_n = b.guard_n;
    row.small_branch = b.small_branch;
  }

  const auto cdf = cumulative(pop.weights().data(), pop.size());
  const long reps = plan.replicates;
  rep.cells.resize(ng * static_cast<size_t>(reps));
  parallel_for(static_cast<long>(rep.cells.size()), plan.jobs, [&](long idx) {
    const size_t i = static_cast<size_t>(idx / reps);
    const long k = idx % reps;
    const RateRow& row = rep.rows[i];
    RateCell& cell = rep.cells[static_cast<size_t>(idx)];
    cell.n = row.n;
    cell.replicate = k;
    cell.lambda = row.lambda;
    cell.bound_rhs = row.bound_rhs;
    cell.guard_ok = row.guard_ok;
    cell.seed = cell_seed(plan.seed, i, static_cast<std::uint64_t>(k));
    std::mt19937_64 gen(cell.seed);
    auto counts = multinomial_counts(gen, cdf, row.n);
    auto sample = FinitePopulation::from_counts(pop, counts);
    try {
      Vec th = newton_minimize(sample, row.lambda, plan.solver).theta_hat;
      cell.excess_risk = exact_risk(pop, th, 0.0) - risk_star;
      cell.converged = true;
    } catch (const DivergenceError&) {
      cell.converged = false;
      cell.excess_risk = std::numeric_limits<double>::quiet_NaN();
    }
  });

  std::vector<double> xs, ys;
  for (size_t i = 0; i < ng; ++i) {
    RateRow& row = rep.rows[i];
    double sum = 0;
    for (long k = 0; k < reps; ++k) {
      const RateCell& cell = rep.cells[i * static_cast<size_t>(reps) + static_cast<size_t>(k)];
      if (!cell.converged) {
        ++row.failures;
        continue;
      }
      ++row.valid;
      sum += cell.excess_risk;
      if (cell.excess_risk > cell.bound_rhs) ++row.violations;
    }
    rep.failures += row.failures;
    if (row.valid > 0) {
      row.mean_excess = sum / static_cast<double>(row.valid);
      row.violation_freq = static_cast<double>(row.violations) / static_cast<double>(row.valid);
    }
    if (static_cast<int>(i) >= plan.burn_in && row.valid > 0 && row.mean_excess > 0) {
      xs.push_back(std::log(static_cast<double>(row.n)));
      ys.push_back(std::log(row.mean_excess));
    }
  }
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    double ss = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      double e = ys[i] - (my + slope * (xs[i] - mx));
      ss += e * e;
    }
    rep.fitted_exponent = -slope;
    rep.fit_residual = std::sqrt(ss / n);
  }
  return rep;
}

double binomial_upper(double p, long trials) {
  return p + 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

ConcentrationRecord hessian_concentration_experiment(const FinitePopulation& pop, const Vec& theta,
                                                     double lambda, long n, long replicates,
                                                     double delta, std::uint64_t seed, int jobs) {
  if (!(lambda > 0)) throw ContractError("lambda must be positive");
  if (!(delta > 0 && delta <= 1)) throw ContractError("delta must lie in (0, 1]");
  if (n < 1 || replicates < 1) throw ContractError("n and replicates must be >= 1");
  ConcentrationRecord rec;
  const double b2 = sup_hess_trace(pop, theta);
  rec.premise_n = 24.0 * b2 / lambda * std::log(8.0 * b2 / (lambda * delta));
  rec.premise_ok = static_cast<double>(n) >= rec.premise_n;
  rec.threshold = 1.0 - binomial_upper(delta, replicates);
  if (!rec.premise_ok) {
    rec.skipped = true;
    return rec;
  }
  const Mat h = exact_hessian(pop, theta, lambda);
  const auto cdf = cumulative(pop.weights().data(), pop.size());
  std::vector<double> ratio(static_cast<size_t>(replicates));
  parallel_for(replicates, jobs, [&](long k) {
    std::mt19937_64 gen(cell_seed(seed, 0, static_cast<std::uint64_t>(k)));
    auto sample = FinitePopulation::from_counts(pop, multinomial_counts(gen, cdf, n));
    ratio[static_cast<size_t>(k)] = max_gen_eig(h, exact_hessian(sample, theta, lambda));
  });
  rec.trials = replicates;
  for (double v : ratio) {
    if (v <= 2.0) ++rec.successes;
    rec.worst = std::max(rec.worst, v);
  }
  rec.frequency = static_cast<double>(rec.successes) / static_cast<double>(replicates);
  return rec;
}

ConcentrationRecord gradient_concentration_experiment(const FinitePopulation& pop, double lambda,
                                                      long n, long replicates, double delta,
                                                      std::uint64_t seed, double k, int jobs) {
  if (!(lambda > 0)) throw ContractError("lambda must be positive");
  if (!(delta > 0 && delta <= 1)) throw ContractError("delta must lie in (0, 1]");
  if (!(k >= 4)) throw ContractError("k must be >= 4");
  if (n < 1 || replicates < 1) throw ContractError("n and replicates must be >= 1");
  ConcentrationRecord rec;
  PopulationSolution sol = solve_population(pop, {lambda});
  auto star = star_constants(pop, sol.theta_star);
  auto diag = lambda_diagnostics(pop, sol, lambda);
  const auto& c = diag.constants;
  const double ld = log2d(delta);
  rec.premise_n = k * k * c.box2 * c.box2 * star.B2 / lambda * ld;
  rec.premise_ok = lambda <= star.B2 && static_cast<double>(n) >= rec.premise_n;
  rec.threshold = 1.0 - binomial_upper(delta, replicates);
  if (!rec.premise_ok) {
    rec.skipped = true;
    return rec;
  }
  const double rhs = 2.0 * std::sqrt(3.0) / k * diag.bias +
                     2.0 * c.box1 * std::sqrt(std::max(diag.df, star.q_star_sq()) * ld / static_cast<double>(n));
  const Vec& tl = sol.theta_star_lambda.at(lambda);
  const auto fh = factor_spd(exact_hessian(pop, tl, lambda), "H_lambda(theta*_lambda)");
  const auto cdf = cumulative(pop.weights().data(), pop.size());
  std::vector<double> lhs(static_cast<size_t>(replicates));
  parallel_for(replicates, jobs, [&](long i) {
    std::mt19937_64 gen(cell_seed(seed, 1, static_cast<std::uint64_t>(i)));
    auto sample = FinitePopulation::from_counts(pop, multinomial_counts(gen, cdf, n));
    lhs[static_cast<size_t>(i)] = std::sqrt(inv_quad(fh, exact_grad(sample, tl, lambda)));
  });
  rec.trials = replicates;
  for (double v : lhs) {
    if (v <= rhs) ++rec.successes;
    rec.worst = std::max(rec.worst, v / rhs);
  }
  rec.frequency = static_cast<double>(rec.successes) / static_cast<double>(replicates);
  return rec;
}

}  // namespace scerm
