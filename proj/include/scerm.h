#pragma once

/* C interface to the scerm library. All handles are opaque; every function
 * returns a scerm_status and the message of the last failure on the calling
 * thread is available from scerm_last_error(). Matrices are column-major. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SCERM_API __declspec(dllexport)
#else
#define SCERM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  SCERM_OK = 0,
  SCERM_E_CONTRACT = 1,
  SCERM_E_DOMAIN = 2,
  SCERM_E_DIVERGENCE = 3,
  SCERM_E_CONFIG = 4,
  SCERM_E_IO = 5,
  SCERM_E_INTERNAL = 6
} scerm_status;

typedef enum {
  SCERM_SQUARE = 0,
  SCERM_HUBER_SQRT = 1,
  SCERM_HUBER_LOGCOSH = 2,
  SCERM_LOGISTIC = 3,
  SCERM_SOFTMAX_GLM = 4
} scerm_loss_kind;

typedef enum { SCERM_REGIME_NONE = 0, SCERM_REGIME_SOURCE = 1, SCERM_REGIME_SOURCE_CAPACITY = 2 } scerm_regime;

typedef struct scerm_loss scerm_loss;
typedef struct scerm_population scerm_population;
typedef struct scerm_solve_result scerm_solve_result;
typedef struct scerm_diagnostics scerm_diagnostics;
typedef struct scerm_verify_report scerm_verify_report;
typedef struct scerm_rate_report scerm_rate_report;

SCERM_API const char* scerm_last_error(void);
SCERM_API const char* scerm_status_name(scerm_status status);
SCERM_API const char* scerm_version(void);
/* frees strings returned through char** out-parameters */
SCERM_API void scerm_string_free(char* s);

/* ---- losses ---- */

SCERM_API scerm_status scerm_loss_create(scerm_loss_kind kind, const double* base_measure,
                                         size_t labels, scerm_loss** out);
SCERM_API void scerm_loss_free(scerm_loss* loss);
/* features is d x cols (cols = 1 for scalar losses, |Y| for softmax_glm) */
SCERM_API scerm_status scerm_loss_eval(const scerm_loss* loss, const double* features, size_t d,
                                       size_t cols, double label, const double* theta, double* value);
SCERM_API scerm_status scerm_loss_grad(const scerm_loss* loss, const double* features, size_t d,
                                       size_t cols, double label, const double* theta, double* grad);
SCERM_API scerm_status scerm_loss_hess(const scerm_loss* loss, const double* features, size_t d,
                                       size_t cols, double label, const double* theta, double* hess);
SCERM_API scerm_status scerm_loss_sc_factor(const scerm_loss* loss, const double* features, size_t d,
                                            size_t cols, double label, const double* k, double* value);

/* ---- populations ---- */

typedef struct {
  int has_source;
  double r, alpha, L, Q;
} scerm_source_info;

/* atoms: features of atom i start at features + i*d*cols */
SCERM_API scerm_status scerm_population_create(const scerm_loss* loss, const double* features,
                                               size_t atoms, size_t d, size_t cols,
                                               const double* labels, const double* weights,
                                               scerm_population** out);
SCERM_API scerm_status scerm_population_from_json(const char* json, scerm_population** out);
SCERM_API scerm_status scerm_population_to_json(const scerm_population* pop, char** out);
SCERM_API scerm_status scerm_population_make_source(int d, double r, double alpha, uint64_t seed,
                                                    scerm_population** out);
SCERM_API scerm_status scerm_population_make_diagonal_logistic(int d, double weight_decay,
                                                               double coef_decay, double scale,
                                                               scerm_population** out);
/* empirical measure of n i.i.d. draws */
SCERM_API scerm_status scerm_population_draw(const scerm_population* pop, long n, uint64_t seed,
                                             scerm_population** out);
SCERM_API void scerm_population_free(scerm_population* pop);
SCERM_API size_t scerm_population_dim(const scerm_population* pop);
SCERM_API size_t scerm_population_size(const scerm_population* pop);
SCERM_API scerm_status scerm_population_source_info(const scerm_population* pop, scerm_source_info* out);
SCERM_API scerm_status scerm_population_risk(const scerm_population* pop, const double* theta,
                                             double lambda, double* value);
SCERM_API scerm_status scerm_population_grad(const scerm_population* pop, const double* theta,
                                             double lambda, double* grad);
SCERM_API scerm_status scerm_population_hess(const scerm_population* pop, const double* theta,
                                             double lambda, double* hess);

/* ---- solver ---- */

typedef struct {
  double tol;
  int max_iter;
  double shrink;
  double c1;
  int max_halvings;
} scerm_solver_config;

SCERM_API void scerm_solver_config_default(scerm_solver_config* cfg);

/* minimizer of the regularized risk over the measure; lambda = 0 allowed */
SCERM_API scerm_status scerm_minimize(const scerm_population* measure, double lambda,
                                      const scerm_solver_config* cfg, scerm_solve_result** out);
/* weighted ERM; lambda > 0 */
SCERM_API scerm_status scerm_solve_erm(const scerm_population* samples, double lambda,
                                       const scerm_solver_config* cfg, scerm_solve_result** out);
SCERM_API scerm_status scerm_decrement(const scerm_population* samples, double lambda,
                                       const double* theta, double* value);
SCERM_API void scerm_solve_result_free(scerm_solve_result* res);
SCERM_API size_t scerm_solve_result_dim(const scerm_solve_result* res);
SCERM_API void scerm_solve_result_theta(const scerm_solve_result* res, double* theta);
SCERM_API int scerm_solve_result_iterations(const scerm_solve_result* res);
SCERM_API int scerm_solve_result_converged(const scerm_solve_result* res);
SCERM_API size_t scerm_solve_result_trace_length(const scerm_solve_result* res);
SCERM_API void scerm_solve_result_trace(const scerm_solve_result* res, double* trace);

/* ---- diagnostics ---- */

typedef struct {
  double t, t_tilde;
  double K_bias, K_var;
  double box1, box2;
  double tri1, tri2;
  double C_bias, C_var;
  int small_branch;
} scerm_constants;

typedef struct {
  double lambda, bias, df, dikin, t, theta_lambda_norm;
  scerm_constants constants;
} scerm_diag_row;

typedef struct {
  double B1, B2, R, theta_norm;
  double fitted_r, fitted_r_residual;
  int fitted_r_points, fitted_r_flagged;
  double fitted_alpha, fitted_alpha_residual;
  int fitted_alpha_points, fitted_alpha_flagged;
} scerm_diag_summary;

/* grid may be NULL (len 0) for the default dyadic grid */
SCERM_API scerm_status scerm_diagnose(const scerm_population* pop, const double* grid, size_t len,
                                      scerm_diagnostics** out);
SCERM_API void scerm_diagnostics_free(scerm_diagnostics* d);
SCERM_API size_t scerm_diagnostics_rows(const scerm_diagnostics* d);
SCERM_API scerm_status scerm_diagnostics_row(const scerm_diagnostics* d, size_t i, scerm_diag_row* row);
SCERM_API void scerm_diagnostics_summary(const scerm_diagnostics* d, scerm_diag_summary* s);
SCERM_API size_t scerm_diagnostics_dim(const scerm_diagnostics* d);
SCERM_API void scerm_diagnostics_theta_star(const scerm_diagnostics* d, double* theta);

SCERM_API scerm_status scerm_constants_from(double t, double t_tilde, scerm_constants* out);

/* ---- self-concordance checks ---- */

typedef struct {
  double lhs, rhs, margin, m;
  int pass;
} scerm_margin;

typedef enum { SCERM_CHECK_HESS = 0, SCERM_CHECK_GRAD_LOWER = 1, SCERM_CHECK_GRAD_UPPER = 2, SCERM_CHECK_VALUE = 3 } scerm_check;

SCERM_API scerm_status scerm_check_pair(scerm_check which, const scerm_population* measure,
                                        const double* theta0, const double* theta1, double lambda,
                                        scerm_margin* out);

typedef struct {
  long trials_per_kind;
  uint64_t seed;
  int jobs;
} scerm_verify_options;

typedef struct {
  long trials, violations;
  double worst_margin;
} scerm_check_summary;

typedef struct {
  scerm_loss_kind kind;
  scerm_check_summary hess, grad_lower, grad_upper, value, hess_swapped;
  double square_abs_margin;
} scerm_kind_summary;

typedef struct {
  long localization_trials, localization_failures;
  long empirical_localization_trials, empirical_localization_failures;
  long bias_lemma_trials, bias_lemma_failures;
  long violations;
} scerm_verify_summary;

SCERM_API scerm_status scerm_verify(const scerm_verify_options* opt, scerm_verify_report** out);
SCERM_API void scerm_verify_report_free(scerm_verify_report* rep);
SCERM_API size_t scerm_verify_report_kinds(const scerm_verify_report* rep);
SCERM_API scerm_status scerm_verify_report_kind(const scerm_verify_report* rep, size_t i,
                                                scerm_kind_summary* out);
SCERM_API void scerm_verify_report_summary(const scerm_verify_report* rep, scerm_verify_summary* out);

/* ---- rates ---- */

typedef struct {
  double B1bar, B2bar, B1star, B2star, R, theta_norm;
  double L, Q, r, alpha, delta;
  int has_c0;
  double c0;
} scerm_regime_params;

typedef struct {
  const scerm_population* population;
  scerm_regime regime;
  const long* n_grid;
  size_t n_len;
  long replicates;
  double delta;
  uint64_t seed;
  const double* lambda_override; /* NULL or n_len values */
  int has_c0;
  double c0;
  double r, alpha, L, Q;
  int burn_in;
  int jobs;
  scerm_solver_config solver;
} scerm_rate_plan;

typedef struct {
  long n, replicate;
  double lambda, excess_risk, bound_rhs;
  int guard_ok;
  uint64_t seed;
  int converged;
} scerm_rate_cell;

typedef struct {
  long n;
  double lambda;
  int clamped, guard_ok;
  double guard_n;
  int small_branch;
  double bound_rhs, mean_excess;
  long valid, failures, violations;
  double violation_freq;
} scerm_rate_row;

typedef struct {
  double fitted_exponent, fit_residual, theoretical_exponent;
  long failures;
  scerm_regime_params params;
  double C0, C1, N, gamma;
  int N_available;
  double lambda0, lambda1;
} scerm_rate_summary;

/* fills defaults; source metadata of the population is copied when present */
SCERM_API void scerm_rate_plan_default(scerm_rate_plan* plan, const scerm_population* pop);
SCERM_API scerm_status scerm_rates_run(const scerm_rate_plan* plan, scerm_rate_report** out);
SCERM_API void scerm_rate_report_free(scerm_rate_report* rep);
SCERM_API size_t scerm_rate_report_cells(const scerm_rate_report* rep);
SCERM_API scerm_status scerm_rate_report_cell(const scerm_rate_report* rep, size_t i, scerm_rate_cell* out);
SCERM_API size_t scerm_rate_report_rows(const scerm_rate_report* rep);
SCERM_API scerm_status scerm_rate_report_row(const scerm_rate_report* rep, size_t i, scerm_rate_row* out);
SCERM_API void scerm_rate_report_summary(const scerm_rate_report* rep, scerm_rate_summary* out);

SCERM_API double scerm_theoretical_rate(scerm_regime regime, double r, double alpha);
SCERM_API scerm_status scerm_lambda_schedule(scerm_regime regime, long n, const scerm_regime_params* p,
                                             double* lambda, int* clamped);
SCERM_API scerm_status scerm_regime_params_of(const scerm_population* pop, double delta,
                                              scerm_regime_params* out);

typedef struct {
  double premise_n;
  int premise_ok, skipped;
  long trials, successes;
  double frequency, threshold, worst;
  int pass;
} scerm_concentration;

/* theta NULL means theta* */
SCERM_API scerm_status scerm_hessian_concentration(const scerm_population* pop, const double* theta,
                                                   double lambda, long n, long replicates,
                                                   double delta, uint64_t seed, int jobs,
                                                   scerm_concentration* out);
SCERM_API scerm_status scerm_gradient_concentration(const scerm_population* pop, double lambda,
                                                    long n, long replicates, double delta,
                                                    uint64_t seed, double k, int jobs,
                                                    scerm_concentration* out);

#ifdef __cplusplus
}
#endif
