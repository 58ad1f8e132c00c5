// scerm command-line entry point. Exit codes: 0 success, 1 assertion failure, 2 usage error.
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scerm_cli;

namespace {

struct LibraryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ok(scerm_status s, const std::string& what) {
  if (s != SCERM_OK)
    throw LibraryError(what + ": " + scerm_status_name(s) + ": " + scerm_last_error());
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  ~Handle() { if (p) Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using SolveHandle = Handle<scerm_solve_result, scerm_solve_result_free>;
using DiagHandle = Handle<scerm_diagnostics, scerm_diagnostics_free>;
using VerifyHandle = Handle<scerm_verify_report, scerm_verify_report_free>;
using RatesHandle = Handle<scerm_rate_report, scerm_rate_report_free>;
using PopHandle = Handle<scerm_population, scerm_population_free>;

json num(double x) {
  if (std::isfinite(x)) return x;
  return fmt(x);  // nan / inf as strings
}

struct Run {
  const RunConfig& cfg;
  std::string digest;
  std::uint64_t seed;
  int jobs;
  fs::path out;
  json summary;
  std::string line;  // one-line digest
  int status = 0;

  void write(const std::string& name, const std::string& body) { atomic_write(out / name, body); }
  Csv csv(std::vector<std::string> cols) const { return Csv(digest, seed, std::move(cols)); }

  void solve() {
    const auto* pop = cfg.population.get();
    const size_t d = scerm_population_dim(pop);
    PopHandle sample;
    const scerm_population* measure = pop;
    if (cfg.solve.n > 0) {
      ok(scerm_population_draw(pop, cfg.solve.n, seed, sample.out()), "draw");
      measure = sample.get();
    }
    Csv main = csv({"lambda", "iterations", "converged", "decrement", "objective", "risk", "theta_norm"});
    Csv thetas = csv({"lambda", "index", "theta"});
    long failed = 0;
    for (double lam : cfg.solve.lambdas) {
      SolveHandle res;
      scerm_status s = cfg.solve.n > 0 ? scerm_solve_erm(measure, lam, &cfg.solver, res.out())
                                       : scerm_minimize(measure, lam, &cfg.solver, res.out());
      if (s == SCERM_E_DIVERGENCE) {
        ++failed;
        main.add({fmt(lam), "0", "0", "nan", "nan", "nan", "nan"});
        continue;
      }
      ok(s, "solve at lambda " + fmt(lam));
      std::vector<double> th(d), tr(scerm_solve_result_trace_length(res.get()));
      scerm_solve_result_theta(res.get(), th.data());
      scerm_solve_result_trace(res.get(), tr.data());
      double obj = 0, risk = 0, nrm = 0;
      ok(scerm_population_risk(measure, th.data(), lam, &obj), "objective");
      ok(scerm_population_risk(pop, th.data(), 0.0, &risk), "risk");
      for (double v : th) nrm += v * v;
      main.add({fmt(lam), std::to_string(scerm_solve_result_iterations(res.get())),
                std::to_string(scerm_solve_result_converged(res.get())), fmt(tr.empty() ? 0.0 : tr.back()),
                fmt(obj), fmt(risk), fmt(std::sqrt(nrm))});
      for (size_t i = 0; i < d; ++i) thetas.add({fmt(lam), std::to_string(i), fmt(th[i])});
    }
    write("solve.csv", main.str());
    write("solve_theta.csv", thetas.str());
    summary["solves"] = cfg.solve.lambdas.size();
    summary["failed"] = failed;
    summary["sample_size"] = cfg.solve.n;
    if (failed) status = 1;
    line = std::to_string(cfg.solve.lambdas.size()) + " solves, " + std::to_string(failed) + " failed";
  }

  void diagnose() {
    DiagHandle rep;
    const auto& g = cfg.diagnose.lambda_grid;
    ok(scerm_diagnose(cfg.population.get(), g.empty() ? nullptr : g.data(), g.size(), rep.out()), "diagnose");
    Csv c = csv({"lambda", "bias", "df", "dikin_radius", "t_lambda", "theta_lambda_norm", "K_bias", "K_var",
                 "box1", "box2", "tri1", "tri2", "C_bias", "C_var", "small_branch"});
    for (size_t i = 0; i < scerm_diagnostics_rows(rep.get()); ++i) {
      scerm_diag_row r;
      ok(scerm_diagnostics_row(rep.get(), i, &r), "row");
      const auto& k = r.constants;
      c.add({fmt(r.lambda), fmt(r.bias), fmt(r.df), fmt(r.dikin), fmt(r.t), fmt(r.theta_lambda_norm),
             fmt(k.K_bias), fmt(k.K_var), fmt(k.box1), fmt(k.box2), fmt(k.tri1), fmt(k.tri2), fmt(k.C_bias),
             fmt(k.C_var), std::to_string(k.small_branch)});
    }
    write("diagnostics.csv", c.str());
    scerm_diag_summary s;
    scerm_diagnostics_summary(rep.get(), &s);
    std::vector<double> ts(scerm_diagnostics_dim(rep.get()));
    scerm_diagnostics_theta_star(rep.get(), ts.data());
    json tsj = json::array();
    for (double v : ts) tsj.push_back(num(v));
    summary["B1_star"] = num(s.B1);
    summary["B2_star"] = num(s.B2);
    summary["R"] = num(s.R);
    summary["theta_star_norm"] = num(s.theta_norm);
    summary["theta_star"] = tsj;
    summary["fitted_r"] = {{"value", num(s.fitted_r)}, {"residual", num(s.fitted_r_residual)},
                           {"points", s.fitted_r_points}, {"flagged", s.fitted_r_flagged != 0}};
    summary["fitted_alpha"] = {{"value", num(s.fitted_alpha)}, {"residual", num(s.fitted_alpha_residual)},
                               {"points", s.fitted_alpha_points}, {"flagged", s.fitted_alpha_flagged != 0}};
    line = std::to_string(scerm_diagnostics_rows(rep.get())) + " lambdas, r_hat=" + fmt(s.fitted_r) +
           " alpha_hat=" + fmt(s.fitted_alpha);
  }

  void verify() {
    scerm_verify_options o{cfg.verify.trials_per_kind, seed, jobs};
    VerifyHandle rep;
    ok(scerm_verify(&o, rep.out()), "verify");
    static const char* kinds[] = {"square", "huber_sqrt", "huber_logcosh", "logistic", "softmax_glm"};
    Csv c = csv({"kind", "check", "trials", "violations", "worst_margin"});
    json per = json::object();
    for (size_t i = 0; i < scerm_verify_report_kinds(rep.get()); ++i) {
      scerm_kind_summary k;
      ok(scerm_verify_report_kind(rep.get(), i, &k), "kind");
      const std::pair<const char*, const scerm_check_summary*> checks[] = {
          {"hess_control", &k.hess}, {"hess_control_swapped", &k.hess_swapped}, {"grad_lower", &k.grad_lower},
          {"grad_upper", &k.grad_upper}, {"value_bound", &k.value}};
      json kj = json::object();
      for (const auto& [name, s] : checks) {
        c.add({kinds[k.kind], name, std::to_string(s->trials), std::to_string(s->violations), fmt(s->worst_margin)});
        kj[name] = {{"trials", s->trials}, {"violations", s->violations}, {"worst_margin", num(s->worst_margin)}};
      }
      if (k.kind == SCERM_SQUARE) kj["max_abs_margin"] = num(k.square_abs_margin);
      per[kinds[k.kind]] = kj;
    }
    scerm_verify_summary s;
    scerm_verify_report_summary(rep.get(), &s);
    c.add({"all", "localization", std::to_string(s.localization_trials), std::to_string(s.localization_failures), ""});
    c.add({"all", "localization_empirical", std::to_string(s.empirical_localization_trials),
           std::to_string(s.empirical_localization_failures), ""});
    c.add({"all", "bias_lemma", std::to_string(s.bias_lemma_trials), std::to_string(s.bias_lemma_failures), ""});
    write("verify.csv", c.str());
    summary["kinds"] = per;
    summary["localization"] = {{"trials", s.localization_trials}, {"failures", s.localization_failures}};
    summary["localization_empirical"] = {{"trials", s.empirical_localization_trials},
                                         {"failures", s.empirical_localization_failures}};
    summary["bias_lemma"] = {{"trials", s.bias_lemma_trials}, {"failures", s.bias_lemma_failures}};
    summary["violations"] = s.violations;
    if (s.violations > 0) status = 1;
    line = std::to_string(s.violations) + " violations over " + std::to_string(cfg.verify.trials_per_kind) +
           " trials per loss";
  }

  void rates() {
    const auto& rc = cfg.rates;
    scerm_rate_plan plan;
    scerm_rate_plan_default(&plan, cfg.population.get());
    plan.regime = rc.regime;
    plan.n_grid = rc.n_grid.data();
    plan.n_len = rc.n_grid.size();
    plan.replicates = rc.replicates;
    plan.delta = rc.delta;
    plan.seed = seed;
    plan.lambda_override = rc.lambda_override.empty() ? nullptr : rc.lambda_override.data();
    plan.has_c0 = rc.c0.has_value();
    plan.c0 = rc.c0.value_or(0.0);
    if (rc.r) plan.r = *rc.r;
    if (rc.alpha) plan.alpha = *rc.alpha;
    if (rc.L) plan.L = *rc.L;
    if (rc.Q) plan.Q = *rc.Q;
    plan.burn_in = rc.burn_in;
    plan.jobs = jobs;
    plan.solver = cfg.solver;
    RatesHandle rep;
    ok(scerm_rates_run(&plan, rep.out()), "rates");

    Csv cells = csv({"n", "replicate", "lambda", "excess_risk", "bound_rhs", "guard_ok", "seed"});
    for (size_t i = 0; i < scerm_rate_report_cells(rep.get()); ++i) {
      scerm_rate_cell c;
      ok(scerm_rate_report_cell(rep.get(), i, &c), "cell");
      cells.add({std::to_string(c.n), std::to_string(c.replicate), fmt(c.lambda), fmt(c.excess_risk),
                 fmt(c.bound_rhs), std::to_string(c.guard_ok), std::to_string(c.seed)});
    }
    Csv rows = csv({"n", "lambda", "clamped", "guard_ok", "guard_n", "small_branch", "bound_rhs", "mean_excess",
                    "valid", "failures", "violations", "violation_freq", "violation_limit"});
    json rj = json::array();
    long bad_rows = 0;
    for (size_t i = 0; i < scerm_rate_report_rows(rep.get()); ++i) {
      scerm_rate_row r;
      ok(scerm_rate_report_row(rep.get(), i, &r), "row");
      const double p = 2.0 * rc.delta;
      const double limit = r.valid > 0 ? p + 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(r.valid)) : 1.0;
      if (r.guard_ok && r.violation_freq > limit) ++bad_rows;
      rows.add({std::to_string(r.n), fmt(r.lambda), std::to_string(r.clamped), std::to_string(r.guard_ok),
                fmt(r.guard_n), std::to_string(r.small_branch), fmt(r.bound_rhs), fmt(r.mean_excess),
                std::to_string(r.valid), std::to_string(r.failures), std::to_string(r.violations),
                fmt(r.violation_freq), fmt(limit)});
      rj.push_back({{"n", r.n}, {"lambda", num(r.lambda)}, {"guard_ok", r.guard_ok != 0},
                    {"violation_freq", num(r.violation_freq)}, {"violation_limit", num(limit)},
                    {"mean_excess", num(r.mean_excess)}});
    }
    write("rates.csv", cells.str());
    write("rates_by_n.csv", rows.str());

    scerm_rate_summary s;
    scerm_rate_report_summary(rep.get(), &s);
    static const char* regimes[] = {"none", "source", "source_capacity"};
    summary["regime"] = regimes[rc.regime];
    summary["fitted_exponent"] = num(s.fitted_exponent);
    summary["theoretical_exponent"] = num(s.theoretical_exponent);
    summary["fit_residual"] = num(s.fit_residual);
    summary["failures"] = s.failures;
    summary["rows"] = rj;
    const auto& p = s.params;
    summary["params"] = {{"B1bar", num(p.B1bar)}, {"B2bar", num(p.B2bar)}, {"B1star", num(p.B1star)},
                         {"B2star", num(p.B2star)}, {"R", num(p.R)}, {"theta_norm", num(p.theta_norm)},
                         {"L", num(p.L)}, {"Q", num(p.Q)}, {"r", num(p.r)}, {"alpha", num(p.alpha)},
                         {"delta", num(p.delta)}};
    if (p.has_c0) summary["params"]["c0"] = num(p.c0);
    summary["constants"] = {{"C0", num(s.C0)}, {"C1", num(s.C1)}, {"N", num(s.N)}, {"gamma", num(s.gamma)},
                            {"N_available", s.N_available != 0}, {"lambda0", num(s.lambda0)},
                            {"lambda1", num(s.lambda1)}};
    bool slope_ok = true;
    if (rc.tolerance) {
      slope_ok = std::isfinite(s.fitted_exponent) &&
                 std::abs(s.fitted_exponent - s.theoretical_exponent) <= *rc.tolerance;
      summary["tolerance"] = *rc.tolerance;
      summary["slope_ok"] = slope_ok;
    }
    summary["bound_rows_over_limit"] = bad_rows;
    if (!slope_ok || (rc.assert_bound && bad_rows > 0)) status = 1;
    line = "fitted exponent " + fmt(s.fitted_exponent) + " (theory " + fmt(s.theoretical_exponent) + ")";
  }

  void concentration() {
    const auto& cc = cfg.concentration;
    scerm_concentration r;
    if (cc.kind == "hessian")
      ok(scerm_hessian_concentration(cfg.population.get(), cc.theta.empty() ? nullptr : cc.theta.data(), cc.lambda,
                                     cc.n, cc.replicates, cc.delta, seed, jobs, &r),
         "hessian concentration");
    else
      ok(scerm_gradient_concentration(cfg.population.get(), cc.lambda, cc.n, cc.replicates, cc.delta, seed, cc.k,
                                      jobs, &r),
         "gradient concentration");
    Csv c = csv({"kind", "lambda", "n", "replicates", "delta", "premise_n", "premise_ok", "skipped", "successes",
                 "frequency", "threshold", "worst", "pass"});
    c.add({cc.kind, fmt(cc.lambda), std::to_string(cc.n), std::to_string(cc.replicates), fmt(cc.delta),
           fmt(r.premise_n), std::to_string(r.premise_ok), std::to_string(r.skipped), std::to_string(r.successes),
           fmt(r.frequency), fmt(r.threshold), fmt(r.worst), std::to_string(r.pass)});
    write("concentration.csv", c.str());
    summary["kind"] = cc.kind;
    summary["premise_n"] = num(r.premise_n);
    summary["skipped"] = r.skipped != 0;
    summary["frequency"] = num(r.frequency);
    summary["threshold"] = num(r.threshold);
    summary["pass"] = r.pass != 0;
    if (!r.pass) status = 1;
    line = r.skipped ? "skipped: premise needs n >= " + fmt(r.premise_n)
                     : "frequency " + fmt(r.frequency) + " (threshold " + fmt(r.threshold) + ")";
  }
};

int resolve_jobs(std::optional<int> flag) {
  if (flag) return *flag;
  int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SCERM_JOBS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) throw CLI::ValidationError("SCERM_JOBS", "must be a positive integer");
    hw = std::min<long>(hw, cap);
  }
  return hw;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scerm: self-concordant regularized ERM experiments"};
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> jobs_flag;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed_flag, "overrides the config seed");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--jobs", jobs_flag, "worker threads (default: hardware threads capped by SCERM_JOBS)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "suppress the digest line");
  int jobs = 1;
  try {
    app.parse(argc, argv);
    jobs = resolve_jobs(jobs_flag);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << "\n";
    return 2;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  ConfigErrors errors;
  auto cfg = parse_config(text, errors);
  if (!cfg) {
    for (const auto& m : errors.messages) std::cerr << "config error: " << m << "\n";
    return 2;
  }

  Run run{*cfg, sha256_hex(text), seed_flag.value_or(cfg->seed), jobs,
          out_dir.empty() ? fs::path(cfg->output) : fs::path(out_dir), json::object(), "", 0};
  try {
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec) throw std::ios_base::failure("cannot create output directory " + run.out.string());
    switch (cfg->command) {
      case Command::Solve: run.solve(); break;
      case Command::Diagnose: run.diagnose(); break;
      case Command::Verify: run.verify(); break;
      case Command::Rates: run.rates(); break;
      case Command::Concentration: run.concentration(); break;
    }
    json head = {{"command", command_name(cfg->command)}, {"config_sha256", run.digest}, {"seed", run.seed},
                 {"status", run.status == 0 ? "ok" : "assertion_failed"}};
    head.update(run.summary);
    run.write("summary.json", head.dump(2) + "\n");
  } catch (const LibraryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (!quiet)
    std::cout << command_name(cfg->command) << " " << (run.status == 0 ? "ok" : "FAILED") << ": " << run.line
              << " [sha256 " << run.digest.substr(0, 12) << " seed " << run.seed << "] -> " << run.out.string()
              << "\n";
  return run.status;
}
