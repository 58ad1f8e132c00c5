#include "scerm.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "errors.hpp"
#include "popio.hpp"
#include "rates.hpp"
#include "rng.hpp"
#include "scverify.hpp"

using namespace scerm;

struct scerm_loss {
  LossModel model;
};

struct scerm_population {
  FinitePopulation pop;
  std::optional<SourceMeta> source;
};

struct scerm_solve_result {
  SolveResult res;
};

struct scerm_diagnostics {
  DiagnosticsReport rep;
  Vec theta_star;
};

struct scerm_verify_report {
  SuiteReport rep;
};

struct scerm_rate_report {
  RateReport rep;
};

namespace {

thread_local std::string g_last_error;

template <class F>
scerm_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SCERM_OK;
  } catch (const DivergenceError& e) {
    g_last_error = e.what();
    return SCERM_E_DIVERGENCE;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return SCERM_E_CONFIG;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return SCERM_E_CONFIG;
  } catch (const ContractError& e) {
    g_last_error = e.what();
    return SCERM_E_CONTRACT;
  } catch (const DomainError& e) {
    g_last_error = e.what();
    return SCERM_E_DOMAIN;
  } catch (const std::ios_base::failure& e) {
    g_last_error = e.what();
    return SCERM_E_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SCERM_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SCERM_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw ContractError(std::string(what) + " must not be null");
}

Sample make_sample(const double* features, size_t d, size_t cols, double label) {
  need(features, "features");
  if (d == 0 || cols == 0) throw ContractError("features must be nonempty");
  Sample z;
  z.features = Eigen::Map<const Mat>(features, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(cols));
  z.label = label;
  return z;
}

Vec vec_of(const double* p, size_t n, const char* what) {
  need(p, what);
  return Eigen::Map<const Vec>(p, static_cast<Eigen::Index>(n));
}

void copy_out(const Vec& v, double* out) { std::memcpy(out, v.data(), sizeof(double) * static_cast<size_t>(v.size())); }
void copy_out(const Mat& m, double* out) { std::memcpy(out, m.data(), sizeof(double) * static_cast<size_t>(m.size())); }

SolverConfig solver_of(const scerm_solver_config* c) {
  SolverConfig s;
  if (!c) return s;
  s.tol = c->tol;
  s.max_iter = c->max_iter;
  s.line_search.shrink = c->shrink;
  s.line_search.c1 = c->c1;
  s.line_search.max_halvings = c->max_halvings;
  if (!(s.tol > 0)) throw ContractError("solver tol must be positive");
  if (s.max_iter < 1) throw ContractError("solver max_iter must be >= 1");
  if (!(s.line_search.shrink > 0 && s.line_search.shrink < 1)) throw ContractError("line-search shrink must lie in (0, 1)");
  return s;
}

scerm_constants constants_out(const Constants& c) {
  return {c.t, c.t_tilde, c.K_bias, c.K_var, c.box1, c.box2, c.tri1, c.tri2, c.C_bias, c.C_var, c.small_branch ? 1 : 0};
}

scerm_regime_params params_out(const RegimeParams& p) {
  scerm_regime_params o{};
  o.B1bar = p.B1bar;
  o.B2bar = p.B2bar;
  o.B1star = p.B1star;
  o.B2star = p.B2star;
  o.R = p.R;
  o.theta_norm = p.theta_norm;
  o.L = p.L;
  o.Q = p.Q;
  o.r = p.r;
  o.alpha = p.alpha;
  o.delta = p.delta;
  o.has_c0 = p.c0 ? 1 : 0;
  o.c0 = p.c0.value_or(0.0);
  return o;
}

RegimeParams params_in(const scerm_regime_params& o) {
  RegimeParams p;
  p.B1bar = o.B1bar;
  p.B2bar = o.B2bar;
  p.B1star = o.B1star;
  p.B2star = o.B2star;
  p.R = o.R;
  p.theta_norm = o.theta_norm;
  p.L = o.L;
  p.Q = o.Q;
  p.r = o.r;
  p.alpha = o.alpha;
  p.delta = o.delta;
  if (o.has_c0) p.c0 = o.c0;
  return p;
}

Regime regime_in(scerm_regime r) {
  switch (r) {
    case SCERM_REGIME_NONE: return Regime::None;
    case SCERM_REGIME_SOURCE: return Regime::Source;
    case SCERM_REGIME_SOURCE_CAPACITY: return Regime::SourceCapacity;
  }
  throw ContractError("unknown regime");
}

scerm_check_summary summary_of(const CheckReport& c) { return {c.trials, c.violations, c.worst_margin}; }

scerm_concentration conc_out(const ConcentrationRecord& r) {
  return {r.premise_n, r.premise_ok, r.skipped, r.trials, r.successes, r.frequency, r.threshold, r.worst, r.pass()};
}

}  // namespace

extern "C" {

const char* scerm_last_error(void) { return g_last_error.c_str(); }

const char* scerm_status_name(scerm_status s) {
  switch (s) {
    case SCERM_OK: return "ok";
    case SCERM_E_CONTRACT: return "contract violation";
    case SCERM_E_DOMAIN: return "domain error";
    case SCERM_E_DIVERGENCE: return "divergence";
    case SCERM_E_CONFIG: return "configuration error";
    case SCERM_E_IO: return "i/o error";
    case SCERM_E_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* scerm_version(void) { return "0.1.0"; }

void scerm_string_free(char* s) { delete[] s; }

scerm_status scerm_loss_create(scerm_loss_kind kind, const double* base_measure, size_t labels, scerm_loss** out) {
  return guarded([&] {
    need(out, "out");
    if (kind < SCERM_SQUARE || kind > SCERM_SOFTMAX_GLM) throw ContractError("unknown loss kind");
    Vec mu;
    if (labels > 0) mu = vec_of(base_measure, labels, "base_measure");
    *out = new scerm_loss{LossModel::make(static_cast<LossKind>(kind), mu)};
  });
}

void scerm_loss_free(scerm_loss* loss) { delete loss; }

scerm_status scerm_loss_eval(const scerm_loss* loss, const double* features, size_t d, size_t cols,
                             double label, const double* theta, double* value) {
  return guarded([&] {
    need(loss, "loss");
    need(value, "value");
    *value = eval_loss(loss->model, make_sample(features, d, cols, label), vec_of(theta, d, "theta"));
  });
}

scerm_status scerm_loss_grad(const scerm_loss* loss, const double* features, size_t d, size_t cols,
                             double label, const double* theta, double* grad) {
  return guarded([&] {
    need(loss, "loss");
    need(grad, "grad");
    copy_out(grad_loss(loss->model, make_sample(features, d, cols, label), vec_of(theta, d, "theta")), grad);
  });
}

scerm_status scerm_loss_hess(const scerm_loss* loss, const double* features, size_t d, size_t cols,
                             double label, const double* theta, double* hess) {
  return guarded([&] {
    need(loss, "loss");
    need(hess, "hess");
    copy_out(hess_loss(loss->model, make_sample(features, d, cols, label), vec_of(theta, d, "theta")), hess);
  });
}

scerm_status scerm_loss_sc_factor(const scerm_loss* loss, const double* features, size_t d, size_t cols,
                                  double label, const double* k, double* value) {
  return guarded([&] {
    need(loss, "loss");
    need(value, "value");
    *value = sc_factor(loss->model, make_sample(features, d, cols, label), vec_of(k, d, "k"));
  });
}

scerm_status scerm_population_create(const scerm_loss* loss, const double* features, size_t atoms, size_t d,
                                     size_t cols, const double* labels, const double* weights,
                                     scerm_population** out) {
  return guarded([&] {
    need(loss, "loss");
    need(out, "out");
    need(labels, "labels");
    if (atoms == 0) throw ContractError("population needs at least one atom");
    std::vector<Sample> s;
    for (size_t i = 0; i < atoms; ++i) s.push_back(make_sample(features + i * d * cols, d, cols, labels[i]));
    *out = new scerm_population{FinitePopulation(std::move(s), vec_of(weights, atoms, "weights"), loss->model), std::nullopt};
  });
}

scerm_status scerm_population_from_json(const char* json, scerm_population** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    auto loaded = population_from_json(nlohmann::json::parse(json));
    *out = new scerm_population{std::move(loaded.pop), loaded.source};
  });
}

scerm_status scerm_population_to_json(const scerm_population* pop, char** out) {
  return guarded([&] {
    need(pop, "population");
    need(out, "out");
    std::string s = population_to_json(pop->pop).dump();
    char* buf = new char[s.size() + 1];
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *out = buf;
  });
}

scerm_status scerm_population_make_source(int d, double r, double alpha, uint64_t seed, scerm_population** out) {
  return guarded([&] {
    need(out, "out");
    auto sp = make_source_population(d, r, alpha, seed);
    *out = new scerm_population{std::move(sp.pop), SourceMeta{sp.r, sp.alpha, sp.L, sp.Q}};
  });
}

scerm_status scerm_population_make_diagonal_logistic(int d, double weight_decay, double coef_decay, double scale,
                                                     scerm_population** out) {
  return guarded([&] {
    need(out, "out");
    *out = new scerm_population{make_diagonal_logistic_population(d, weight_decay, coef_decay, scale), std::nullopt};
  });
}

scerm_status scerm_population_draw(const scerm_population* pop, long n, uint64_t seed, scerm_population** out) {
  return guarded([&] {
    need(pop, "population");
    need(out, "out");
    if (n < 1) throw ContractError("n must be >= 1");
    std::mt19937_64 gen(seed);
    auto counts = multinomial_counts(gen, cumulative(pop->pop.weights().data(), pop->pop.size()), n);
    *out = new scerm_population{FinitePopulation::from_counts(pop->pop, counts), std::nullopt};
  });
}

void scerm_population_free(scerm_population* pop) { delete pop; }

size_t scerm_population_dim(const scerm_population* pop) { return pop ? static_cast<size_t>(pop->pop.dim()) : 0; }

size_t scerm_population_size(const scerm_population* pop) { return pop ? static_cast<size_t>(pop->pop.size()) : 0; }

scerm_status scerm_population_source_info(const scerm_population* pop, scerm_source_info* out) {
  return guarded([&] {
    need(pop, "population");
    need(out, "out");
    *out = {};
    if (pop->source) *out = {1, pop->source->r, pop->source->alpha, pop->source->L, pop->source->Q};
  });
}

scerm_status scerm_population_risk(const scerm_population* pop, const double* theta, double lambda, double* value) {
  return guarded([&] {
    need(pop, "population");
    need(value, "value");
    *value = exact_risk(pop->pop, vec_of(theta, static_cast<size_t>(pop->pop.dim()), "theta"), lambda);
  });
}

scerm_status scerm_population_grad(const scerm_population* pop, const double* theta, double lambda, double* grad) {
  return guarded([&] {
    need(pop, "population");
    need(grad, "grad");
    copy_out(exact_grad(pop->pop, vec_of(theta, static_cast<size_t>(pop->pop.dim()), "theta"), lambda), grad);
  });
}

scerm_status scerm_population_hess(const scerm_population* pop, const double* theta, double lambda, double* hess) {
  return guarded([&] {
    need(pop, "population");
    need(hess, "hess");
    copy_out(exact_hessian(pop->pop, vec_of(theta, static_cast<size_t>(pop->pop.dim()), "theta"), lambda), hess);
  });
}

void scerm_solver_config_default(scerm_solver_config* cfg) {
  if (!cfg) return;
  SolverConfig s;
  *cfg = {s.tol, s.max_iter, s.line_search.shrink, s.line_search.c1, s.line_search.max_halvings};
}

scerm_status scerm_minimize(const scerm_population* measure, double lambda, const scerm_solver_config* cfg,
                            scerm_solve_result** out) {
  return guarded([&] {
    need(measure, "measure");
    need(out, "out");
    if (!(lambda >= 0)) throw ContractError("lambda must be >= 0");
    SolverConfig sc = solver_of(cfg);
    if (lambda == 0) sc.tol = std::min(sc.tol, 1e-12);
    *out = new scerm_solve_result{newton_minimize(measure->pop, lambda, sc)};
  });
}

scerm_status scerm_solve_erm(const scerm_population* samples, double lambda, const scerm_solver_config* cfg,
                             scerm_solve_result** out) {
  return guarded([&] {
    need(samples, "samples");
    need(out, "out");
    *out = new scerm_solve_result{
        solve_erm(samples->pop.atoms(), samples->pop.weights(), samples->pop.loss(), lambda, solver_of(cfg))};
  });
}

scerm_status scerm_decrement(const scerm_population* samples, double lambda, const double* theta, double* value) {
  return guarded([&] {
    need(samples, "samples");
    need(value, "value");
    *value = decrement(samples->pop, lambda, vec_of(theta, static_cast<size_t>(samples->pop.dim()), "theta"));
  });
}

void scerm_solve_result_free(scerm_solve_result* res) { delete res; }
size_t scerm_solve_result_dim(const scerm_solve_result* res) { return static_cast<size_t>(res->res.theta_hat.size()); }
void scerm_solve_result_theta(const scerm_solve_result* res, double* theta) { copy_out(res->res.theta_hat, theta); }
int scerm_solve_result_iterations(const scerm_solve_result* res) { return res->res.iterations; }
int scerm_solve_result_converged(const scerm_solve_result* res) { return res->res.converged ? 1 : 0; }
size_t scerm_solve_result_trace_length(const scerm_solve_result* res) { return res->res.decrement_trace.size(); }
void scerm_solve_result_trace(const scerm_solve_result* res, double* trace) {
  std::copy(res->res.decrement_trace.begin(), res->res.decrement_trace.end(), trace);
}

scerm_status scerm_diagnose(const scerm_population* pop, const double* grid, size_t len, scerm_diagnostics** out) {
  return guarded([&] {
    need(pop, "population");
    need(out, "out");
    std::vector<double> g;
    if (len > 0) {
      need(grid, "grid");
      g.assign(grid, grid + len);
    }
    auto rep = diagnose(pop->pop, g);
    Vec ts = solve_population(pop->pop, {}).theta_star;
    *out = new scerm_diagnostics{std::move(rep), std::move(ts)};
  });
}

void scerm_diagnostics_free(scerm_diagnostics* d) { delete d; }
size_t scerm_diagnostics_rows(const scerm_diagnostics* d) { return d->rep.rows.size(); }

scerm_status scerm_diagnostics_row(const scerm_diagnostics* d, size_t i, scerm_diag_row* row) {
  return guarded([&] {
    need(d, "diagnostics");
    need(row, "row");
    if (i >= d->rep.rows.size()) throw ContractError("row index out of range");
    const auto& r = d->rep.rows[i];
    *row = {r.lambda, r.bias, r.df, r.dikin, r.t, r.theta_lambda_norm, constants_out(r.constants)};
  });
}

void scerm_diagnostics_summary(const scerm_diagnostics* d, scerm_diag_summary* s) {
  const auto& r = d->rep;
  *s = {r.star.B1, r.star.B2, r.star.R, r.star.theta_norm,
        r.fitted_r.value, r.fitted_r.residual, r.fitted_r.points, r.fitted_r.flagged ? 1 : 0,
        r.fitted_alpha.value, r.fitted_alpha.residual, r.fitted_alpha.points, r.fitted_alpha.flagged ? 1 : 0};
}

size_t scerm_diagnostics_dim(const scerm_diagnostics* d) { return static_cast<size_t>(d->theta_star.size()); }
void scerm_diagnostics_theta_star(const scerm_diagnostics* d, double* theta) { copy_out(d->theta_star, theta); }

scerm_status scerm_constants_from(double t, double t_tilde, scerm_constants* out) {
  return guarded([&] {
    need(out, "out");
    *out = constants_out(constants_from(t, t_tilde));
  });
}

scerm_status scerm_check_pair(scerm_check which, const scerm_population* measure, const double* theta0,
                              const double* theta1, double lambda, scerm_margin* out) {
  return guarded([&] {
    need(measure, "measure");
    need(out, "out");
    const size_t d = static_cast<size_t>(measure->pop.dim());
    Vec t0 = vec_of(theta0, d, "theta0"), t1 = vec_of(theta1, d, "theta1");
    Margin m;
    switch (which) {
      case SCERM_CHECK_HESS: m = check_hess_control(measure->pop, t0, t1, lambda); break;
      case SCERM_CHECK_GRAD_LOWER: m = check_grad_lower(measure->pop, t0, t1, lambda); break;
      case SCERM_CHECK_GRAD_UPPER: m = check_grad_upper(measure->pop, t0, t1, lambda); break;
      case SCERM_CHECK_VALUE: m = check_value_bound(measure->pop, t0, t1, lambda); break;
      default: throw ContractError("unknown check");
    }
    *out = {m.lhs, m.rhs, m.margin, m.m, m.pass ? 1 : 0};
  });
}

scerm_status scerm_verify(const scerm_verify_options* opt, scerm_verify_report** out) {
  return guarded([&] {
    need(opt, "options");
    need(out, "out");
    SuiteOptions so;
    so.trials_per_kind = opt->trials_per_kind;
    so.seed = opt->seed;
    so.jobs = opt->jobs;
    *out = new scerm_verify_report{run_verify_suite(so)};
  });
}

void scerm_verify_report_free(scerm_verify_report* rep) { delete rep; }
size_t scerm_verify_report_kinds(const scerm_verify_report* rep) { return rep->rep.kinds.size(); }

scerm_status scerm_verify_report_kind(const scerm_verify_report* rep, size_t i, scerm_kind_summary* out) {
  return guarded([&] {
    need(rep, "report");
    need(out, "out");
    if (i >= rep->rep.kinds.size()) throw ContractError("kind index out of range");
    const auto& k = rep->rep.kinds[i];
    *out = {static_cast<scerm_loss_kind>(k.kind), summary_of(k.hess), summary_of(k.grad_lower),
            summary_of(k.grad_upper), summary_of(k.value), summary_of(k.hess_swapped), k.square_abs_margin};
  });
}

void scerm_verify_report_summary(const scerm_verify_report* rep, scerm_verify_summary* out) {
  const auto& r = rep->rep;
  *out = {r.localization_trials, r.localization_failures, r.empirical_localization_trials,
          r.empirical_localization_failures, r.bias_lemma_trials, r.bias_lemma_failures, r.violations()};
}

void scerm_rate_plan_default(scerm_rate_plan* plan, const scerm_population* pop) {
  if (!plan) return;
  ExperimentPlan d;
  *plan = {};
  plan->population = pop;
  plan->regime = SCERM_REGIME_NONE;
  plan->replicates = d.replicates;
  plan->delta = d.delta;
  plan->seed = d.seed;
  plan->r = d.r;
  plan->alpha = d.alpha;
  plan->L = d.L;
  plan->Q = d.Q;
  plan->burn_in = d.burn_in;
  plan->jobs = d.jobs;
  scerm_solver_config_default(&plan->solver);
  if (pop && pop->source) {
    plan->r = pop->source->r;
    plan->alpha = pop->source->alpha;
    plan->L = pop->source->L;
    plan->Q = pop->source->Q;
  }
}

scerm_status scerm_rates_run(const scerm_rate_plan* plan, scerm_rate_report** out) {
  return guarded([&] {
    need(plan, "plan");
    need(out, "out");
    need(plan->population, "plan.population");
    ExperimentPlan p;
    p.population = &plan->population->pop;
    p.regime = regime_in(plan->regime);
    if (plan->n_len > 0) need(plan->n_grid, "plan.n_grid");
    p.n_grid.assign(plan->n_grid, plan->n_grid + plan->n_len);
    p.replicates = plan->replicates;
    p.delta = plan->delta;
    p.seed = plan->seed;
    if (plan->lambda_override) p.lambda_override.assign(plan->lambda_override, plan->lambda_override + plan->n_len);
    if (plan->has_c0) p.c0 = plan->c0;
    p.r = plan->r;
    p.alpha = plan->alpha;
    p.L = plan->L;
    p.Q = plan->Q;
    p.burn_in = plan->burn_in;
    p.jobs = plan->jobs;
    p.solver = solver_of(&plan->solver);
    *out = new scerm_rate_report{run_rate_experiment(p)};
  });
}

void scerm_rate_report_free(scerm_rate_report* rep) { delete rep; }
size_t scerm_rate_report_cells(const scerm_rate_report* rep) { return rep->rep.cells.size(); }

scerm_status scerm_rate_report_cell(const scerm_rate_report* rep, size_t i, scerm_rate_cell* out) {
  return guarded([&] {
    need(rep, "report");
    need(out, "out");
    if (i >= rep->rep.cells.size()) throw ContractError("cell index out of range");
    const auto& c = rep->rep.cells[i];
    *out = {c.n, c.replicate, c.lambda, c.excess_risk, c.bound_rhs, c.guard_ok, c.seed, c.converged};
  });
}

size_t scerm_rate_report_rows(const scerm_rate_report* rep) { return rep->rep.rows.size(); }

scerm_status scerm_rate_report_row(const scerm_rate_report* rep, size_t i, scerm_rate_row* out) {
  return guarded([&] {
    need(rep, "report");
    need(out, "out");
    if (i >= rep->rep.rows.size()) throw ContractError("row index out of range");
    const auto& r = rep->rep.rows[i];
    *out = {r.n, r.lambda, r.clamped, r.guard_ok, r.guard_n, r.small_branch, r.bound_rhs,
            r.mean_excess, r.valid, r.failures, r.violations, r.violation_freq};
  });
}

void scerm_rate_report_summary(const scerm_rate_report* rep, scerm_rate_summary* out) {
  const auto& r = rep->rep;
  *out = {r.fitted_exponent, r.fit_residual, r.theoretical_exponent, r.failures, params_out(r.params),
          r.constants.C0, r.constants.C1, r.constants.N, r.constants.gamma, r.constants.N_available,
          r.constants.lambda0, r.constants.lambda1};
}

double scerm_theoretical_rate(scerm_regime regime, double r, double alpha) {
  try {
    return theoretical_rate(regime_in(regime), r, alpha);
  } catch (...) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

scerm_status scerm_lambda_schedule(scerm_regime regime, long n, const scerm_regime_params* p, double* lambda,
                                   int* clamped) {
  return guarded([&] {
    need(p, "params");
    need(lambda, "lambda");
    auto lc = lambda_schedule(regime_in(regime), n, params_in(*p));
    *lambda = lc.lambda;
    if (clamped) *clamped = lc.clamped;
  });
}

scerm_status scerm_regime_params_of(const scerm_population* pop, double delta, scerm_regime_params* out) {
  return guarded([&] {
    need(pop, "population");
    need(out, "out");
    auto sol = solve_population(pop->pop, {});
    RegimeParams p = regime_params(pop->pop, sol.theta_star, delta);
    if (pop->source) {
      p.r = pop->source->r;
      p.alpha = pop->source->alpha;
      p.L = pop->source->L;
      p.Q = pop->source->Q;
    }
    *out = params_out(p);
  });
}

scerm_status scerm_hessian_concentration(const scerm_population* pop, const double* theta, double lambda, long n,
                                         long replicates, double delta, uint64_t seed, int jobs,
                                         scerm_concentration* out) {
  return guarded([&] {
    need(pop, "population");
    need(out, "out");
    Vec th = theta ? vec_of(theta, static_cast<size_t>(pop->pop.dim()), "theta")
                   : solve_population(pop->pop, {}).theta_star;
    *out = conc_out(hessian_concentration_experiment(pop->pop, th, lambda, n, replicates, delta, seed, jobs));
  });
}

scerm_status scerm_gradient_concentration(const scerm_population* pop, double lambda, long n, long replicates,
                                          double delta, uint64_t seed, double k, int jobs,
                                          scerm_concentration* out) {
  return guarded([&] {
    need(pop, "population");
    need(out, "out");
    *out = conc_out(gradient_concentration_experiment(pop->pop, lambda, n, replicates, delta, seed, k, jobs));
  });
}

}  // extern "C"
