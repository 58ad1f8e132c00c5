// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "population.hpp"
#include "rates.hpp"
#include "scverify.hpp"
#include "solver.hpp"

using namespace scerm;
namespace fs = std::filesystem;

namespace {

int g_jobs = 1;
std::string g_cli;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double x, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, x);
  return buf;
}

Vec gaussian(std::mt19937_64& g, Eigen::Index d, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(g);
  return v;
}

LossModel loss_of(LossKind k) {
  if (k != LossKind::SoftmaxGLM) return LossModel::make(k);
  Vec mu(3);
  mu << 1.0, 0.5, 2.0;
  return LossModel::make(k, mu);
}

const LossKind kKinds[] = {LossKind::Square, LossKind::HuberSqrt, LossKind::HuberLogCosh, LossKind::Logistic,
                           LossKind::SoftmaxGLM};

// ---- AC1 ----

Outcome ac1() {
  auto t0 = std::chrono::steady_clock::now();
  double worst_g = 0, worst_h = 0;
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 8);
  for (auto kind : kKinds) {
    auto loss = loss_of(kind);
    for (int trial = 0; trial < 1000; ++trial) {
      const int d = dim(gen);
      Sample z;
      z.features = Mat(d, loss.is_glm() ? 3 : 1);
      for (Eigen::Index i = 0; i < z.features.size(); ++i) z.features(i) = u(gen);
      if (loss.is_glm())
        z.label = static_cast<double>(gen() % 3);
      else if (kind == LossKind::Logistic)
        z.label = gen() % 2 ? 1.0 : -1.0;
      else
        z.label = 2.0 * u(gen);
      Vec theta = gaussian(gen, d);

      const double h = 1e-5;
      Vec g = grad_loss(loss, z, theta), gfd(d);
      Mat H = hess_loss(loss, z, theta), Hfd(d, d);
      for (int j = 0; j < d; ++j) {
        Vec e = Vec::Zero(d);
        e[j] = h;
        gfd[j] = (eval_loss(loss, z, theta + e) - eval_loss(loss, z, theta - e)) / (2 * h);
        Hfd.col(j) = (grad_loss(loss, z, theta + e) - grad_loss(loss, z, theta - e)) / (2 * h);
      }
      worst_g = std::max(worst_g, (g - gfd).norm() / std::max(g.norm(), 1e-300));
      worst_h = std::max(worst_h, (H - Hfd).norm() / std::max(H.norm(), 1e-300));
    }
  }
  const double secs = seconds_since(t0);
  return {worst_g < 1e-6 && worst_h < 1e-5 && secs < 10,
          "worst grad rel err " + fixed(worst_g) + ", worst Hessian rel err " + fixed(worst_h) + ", " +
              fixed(secs, 3) + " s"};
}

// ---- AC2 / AC9 share the suite ----

SuiteReport g_suite;
double g_suite_secs = 0;

Outcome ac2() {
  auto t0 = std::chrono::steady_clock::now();
  SuiteOptions opt;
  opt.trials_per_kind = 10000;
  opt.seed = 2024;
  opt.jobs = g_jobs;
  g_suite = run_verify_suite(opt);
  g_suite_secs = seconds_since(t0);
  long checks = 0, viol = 0;
  double square = 0;
  for (const auto& k : g_suite.kinds) {
    for (const CheckReport* c : {&k.hess, &k.grad_lower, &k.grad_upper, &k.value, &k.hess_swapped}) {
      checks += c->trials;
      viol += c->violations;
    }
    if (k.kind == LossKind::Square) square = k.square_abs_margin;
  }
  bool per_kind = true;
  for (const auto& k : g_suite.kinds) per_kind = per_kind && k.hess.trials >= 10000;
  return {viol == 0 && per_kind && square <= 1e-12 && g_suite_secs < 120,
          std::to_string(checks) + " checks over " + std::to_string(g_suite.kinds.size()) + " kinds, " +
              std::to_string(viol) + " violations, max |square margin| " + fixed(square) + ", " +
              fixed(g_suite_secs, 3) + " s"};
}

// ---- AC3 ----

Outcome ac3() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(303);
  std::uniform_int_distribution<int> dd(1, 32), nn(1, 256);
  std::uniform_real_distribution<double> ll(-3.0, 0.0);
  double worst = 0;
  int max_iter = 0;
  auto loss = LossModel::make(LossKind::Square);
  for (int inst = 0; inst < 100; ++inst) {
    const int d = dd(gen), n = nn(gen);
    const double lambda = std::pow(10.0, ll(gen));
    Mat X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = gaussian(gen, 1)[0];
    Vec y = gaussian(gen, n);
    std::vector<Sample> samples;
    for (int i = 0; i < n; ++i) samples.push_back(Sample{Mat(X.row(i).transpose()), y[i]});
    auto res = solve_erm(samples, Vec::Ones(n), loss, lambda);
    Mat A = X.transpose() * X / n + lambda * Mat::Identity(d, d);
    Vec closed = A.ldlt().solve(X.transpose() * y / n);
    worst = std::max(worst, (res.theta_hat - closed).norm() / std::max(closed.norm(), 1e-300));
    max_iter = std::max(max_iter, res.iterations);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && max_iter == 1 && secs < 10,
          "worst rel err " + fixed(worst) + ", max Newton steps " + std::to_string(max_iter) + ", " +
              fixed(secs, 3) + " s"};
}

// ---- AC4 ----

// Logistic model, well specified at theta0: each point x carries y = +-1 with P(y | x) = sigmoid(y theta0.x).
FinitePopulation well_specified_logistic(int d, int points, std::uint64_t seed, Vec& theta0) {
  std::mt19937_64 gen(seed);
  theta0 = gaussian(gen, d, 0.7);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<Sample> atoms;
  std::vector<double> w;
  for (int i = 0; i < points; ++i) {
    Vec x = gaussian(gen, d, 1.0 / std::sqrt(d));
    const double px = u(gen);
    const double p = 1.0 / (1.0 + std::exp(-theta0.dot(x)));
    atoms.push_back(Sample{Mat(x), 1.0});
    w.push_back(px * p);
    atoms.push_back(Sample{Mat(x), -1.0});
    w.push_back(px * (1 - p));
  }
  Vec wv = Eigen::Map<Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
  return FinitePopulation(std::move(atoms), wv / wv.sum(), LossModel::make(LossKind::Logistic));
}

Outcome ac4() {
  const std::vector<double> grid = {1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 1e-4};
  double sq_bias = 0, sq_df = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto sp = make_source_population(32, 0.5, 2.0, seed);
    auto sol = solve_population(sp.pop, grid);
    Mat X = sp.pop.design();
    Mat C = X.transpose() * sp.pop.weights().asDiagonal() * X;
    Vec ts = sol.theta_star;
    for (double l : grid) {
      Mat Cl = C + l * Mat::Identity(C.rows(), C.cols());
      Eigen::SelfAdjointEigenSolver<Mat> es(Cl);
      Mat inv_sqrt = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                     es.eigenvectors().transpose();
      const double bias = l * (inv_sqrt * ts).norm();
      const double df = (C * Cl.inverse()).trace();
      sq_bias = std::max(sq_bias, std::abs(bias_lambda(sol, l) - bias) / std::max(bias, 1e-300));
      sq_df = std::max(sq_df, std::abs(df_lambda(sp.pop, sol, l) - df) / std::max(df, 1e-300));
    }
  }
  double bart = 0, lg_df = 0, recover = 0;
  for (std::uint64_t seed : {11, 12, 13}) {
    Vec theta0;
    auto pop = well_specified_logistic(6, 24, seed, theta0);
    auto sol = solve_population(pop, grid);
    recover = std::max(recover, (sol.theta_star - theta0).norm());
    const Vec& ts = sol.theta_star;
    Mat G = Mat::Zero(ts.size(), ts.size()), H = Mat::Zero(ts.size(), ts.size());
    for (Eigen::Index i = 0; i < pop.size(); ++i) {
      const auto& z = pop.atoms()[i];
      Vec x = z.phi();
      const double m = z.label * ts.dot(x);
      const double s = 1.0 / (1.0 + std::exp(m));  // sigmoid(-m)
      Vec g = -z.label * s * x;
      G += pop.weights()[i] * g * g.transpose();
      H += pop.weights()[i] * s * (1 - s) * x * x.transpose();
    }
    bart = std::max(bart, (G - H).cwiseAbs().maxCoeff() / H.cwiseAbs().maxCoeff());
    for (double l : grid) {
      Mat Hl = H + l * Mat::Identity(H.rows(), H.cols());
      const double df = Hl.ldlt().solve(H).trace();
      lg_df = std::max(lg_df, std::abs(df_lambda(pop, sol, l) - df) / df);
    }
  }
  return {sq_bias <= 1e-10 && sq_df <= 1e-10 && bart <= 1e-10 && lg_df <= 1e-10,
          "square bias " + fixed(sq_bias) + ", square df " + fixed(sq_df) + ", Bartlett " + fixed(bart) +
              ", logistic df " + fixed(lg_df) + " (theta* recovery " + fixed(recover) + ")"};
}

// ---- AC5 ----

Outcome ac5() {
  auto t0 = std::chrono::steady_clock::now();
  auto sp = make_source_population(64, 0.5, 2.0, 1);
  auto rep = diagnose(sp.pop, {});
  const double r = rep.fitted_r.value, a = rep.fitted_alpha.value;
  const double secs = seconds_since(t0);
  return {r >= 0.4 && r <= 0.6 && a >= 1.7 && a <= 2.3 && secs < 30,
          "r_hat " + fixed(r) + ", alpha_hat " + fixed(a) + ", " + fixed(secs, 3) + " s"};
}

// ---- AC6 ----

std::vector<long> dyadic(int lo, int hi) {
  std::vector<long> v;
  for (int k = lo; k <= hi; ++k) v.push_back(1L << k);
  return v;
}

struct RateRun {
  double fitted = 0, theory = 0;
  long failures = 0;
};

RateRun rate_run(const FinitePopulation& pop, Regime regime, double c0, double r, double alpha, double L,
                 double Q, std::uint64_t seed) {
  ExperimentPlan plan;
  plan.population = &pop;
  plan.regime = regime;
  plan.n_grid = dyadic(7, 13);
  plan.replicates = 200;
  plan.delta = 0.1;
  plan.seed = seed;
  plan.c0 = c0;
  plan.r = r;
  plan.alpha = alpha;
  plan.L = L;
  plan.Q = Q;
  plan.jobs = g_jobs;
  auto rep = run_rate_experiment(plan);
  return {rep.fitted_exponent, rep.theoretical_exponent, rep.failures};
}

Outcome ac6() {
  auto t0 = std::chrono::steady_clock::now();
  // prefactor p in lambda = p * n^-beta; the schedules take c0 with lambda = (c0/n)^beta
  auto logistic = make_diagonal_logistic_population(64, 1.0, 1.0, 1.0);
  auto a = rate_run(logistic, Regime::None, 0.3 / std::sqrt(std::log(20.0)), 0, 0, 1, 0, 61);
  auto sb = make_source_population(256, 0.5, 1.0, 1);
  auto b = rate_run(sb.pop, Regime::Source, std::pow(0.1, 3.0), sb.r, sb.alpha, sb.L, sb.Q, 62);
  auto sc = make_source_population(64, 0.5, 2.0, 1);
  auto c = rate_run(sc.pop, Regime::SourceCapacity, std::pow(0.2, 2.5), sc.r, sc.alpha, sc.L, sc.Q, 63);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(a.fitted - 0.5) <= 0.12 && std::abs(b.fitted - 2.0 / 3.0) <= 0.1 &&
                  std::abs(c.fitted - 0.8) <= 0.1 && a.failures + b.failures + c.failures == 0 && secs < 1200;
  return {ok, "(a) " + fixed(a.fitted) + " vs " + fixed(a.theory) + ", (b) " + fixed(b.fitted) + " vs " +
                  fixed(b.theory) + ", (c) " + fixed(c.fitted) + " vs " + fixed(c.theory) + ", solver failures " +
                  std::to_string(a.failures + b.failures + c.failures) + ", " + fixed(secs, 3) + " s"};
}

// ---- AC7 ----

Outcome ac7() {
  auto t0 = std::chrono::steady_clock::now();
  auto sp = make_source_population(64, 0.5, 2.0, 1);
  ExperimentPlan plan;
  plan.population = &sp.pop;
  plan.regime = Regime::SourceCapacity;
  plan.n_grid = dyadic(7, 20);  // the guard first holds near 2^16
  plan.replicates = 500;
  plan.delta = 0.1;
  plan.seed = 77;
  plan.r = sp.r;
  plan.alpha = sp.alpha;
  plan.L = sp.L;
  plan.Q = sp.Q;
  plan.jobs = g_jobs;
  auto rep = run_rate_experiment(plan);
  const double limit = binomial_upper(2 * plan.delta, plan.replicates);
  int guarded = 0;
  double worst = 0;
  bool ok = true;
  for (const auto& row : rep.rows) {
    if (!row.guard_ok) continue;
    ++guarded;
    worst = std::max(worst, row.violation_freq);
    ok = ok && row.violation_freq <= limit;
  }
  ok = ok && guarded > 0;
  return {ok, std::to_string(guarded) + " of " + std::to_string(rep.rows.size()) +
                  " n values guarded, worst violation frequency " + fixed(worst) + " (limit " + fixed(limit) +
                  "), " + fixed(seconds_since(t0), 3) + " s"};
}

// ---- AC8 ----

Outcome ac8() {
  std::string detail;
  bool ok = true;
  auto run = [&](const std::string& name, const FinitePopulation& pop, double lambda, std::uint64_t seed) {
    auto sol = solve_population(pop, {});
    auto probe = hessian_concentration_experiment(pop, sol.theta_star, lambda, 1, 1, 0.1, seed);
    const long n = static_cast<long>(std::ceil(probe.premise_n));
    auto rec = hessian_concentration_experiment(pop, sol.theta_star, lambda, n, 500, 0.1, seed, g_jobs);
    ok = ok && rec.premise_ok && !rec.skipped && rec.pass();
    if (!detail.empty()) detail += "; ";
    detail += name + " n=" + std::to_string(n) + " frequency " + fixed(rec.frequency) + " (threshold " +
              fixed(rec.threshold) + ")";
  };
  auto sp = make_source_population(64, 0.5, 2.0, 1);
  run("source", sp.pop, 1e-2, 81);
  run("logistic", make_diagonal_logistic_population(32, 1.0, 1.0, 1.0), 1e-2, 82);
  Vec theta0;
  run("well-specified logistic", well_specified_logistic(6, 24, 83, theta0), 1e-2, 84);
  return {ok, detail};
}

// ---- AC9 ----

Outcome ac9() {
  long tested = g_suite.localization_trials + g_suite.empirical_localization_trials + g_suite.bias_lemma_trials;
  long bad = g_suite.localization_failures + g_suite.empirical_localization_failures + g_suite.bias_lemma_failures;
  std::mt19937_64 gen(909);
  const std::vector<double> grid = {1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4};
  auto sweep = [&](const FinitePopulation& pop) {
    auto sol = solve_population(pop, grid);
    for (double l : grid) {
      auto lem = check_bias_lemma(pop, sol, l);
      ++tested;
      bad += !lem.holds;
      for (int k = 0; k < 20; ++k) {
        Vec theta = sol.theta_star + gaussian(gen, pop.dim(), std::pow(10.0, -2.0 + 3.0 * (k % 4) / 3.0));
        auto loc = check_localization(pop, theta, l);
        ++tested;
        bad += !loc.population.holds();
      }
    }
  };
  sweep(make_source_population(16, 0.5, 2.0, 1).pop);
  sweep(make_diagonal_logistic_population(16, 1.0, 1.0, 1.0));
  Vec theta0;
  sweep(well_specified_logistic(4, 12, 91, theta0));
  return {bad == 0 && tested > 0, std::to_string(tested) + " implications tested, " + std::to_string(bad) +
                                      " counterexamples"};
}

// ---- AC10 ----

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome ac10() {
  if (g_cli.empty()) return {false, "no --cli path given"};
  auto root = fs::temp_directory_path() / "scerm_acceptance_ac10";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> configs = {
      {"rates", R"({"command": "rates", "seed": 5, "population": {"generator": {"kind": "source", "d": 32, "r": 0.5, "alpha": 2, "seed": 1}},
                   "rates": {"regime": "source_capacity", "n_grid": [64, 128, 256, 512], "replicates": 20}})"},
      {"diagnose", R"({"command": "diagnose", "population": {"generator": {"kind": "diagonal_logistic", "d": 16}}})"},
      {"verify", R"({"command": "verify", "seed": 3, "verify": {"trials_per_kind": 200}})"},
      {"concentration", R"({"command": "concentration", "seed": 8, "population": {"generator": {"kind": "source", "d": 16, "r": 0.5, "alpha": 2, "seed": 2}},
                           "concentration": {"kind": "hessian", "lambda": 0.05, "n": 4000, "replicates": 50}})"},
      {"solve", R"({"command": "solve", "seed": 4, "population": {"generator": {"kind": "diagonal_logistic", "d": 8}},
                   "solve": {"lambdas": [0.1, 0.01], "n": 300}})"}};
  long files = 0;
  std::string mismatch;
  for (const auto& [name, text] : configs) {
    auto cfg = root / (name + ".json");
    std::ofstream(cfg) << text;
    for (const char* run : {"a", "b"}) {
      // different worker counts must not change a byte
      std::string cmd = "\"" + g_cli + "\" --quiet --jobs " + (run[0] == 'a' ? "1" : "4") + " --config \"" +
                        cfg.string() + "\" --out \"" + (root / name / run).string() + "\"";
      int rc = std::system(cmd.c_str());
      if (!WIFEXITED(rc) || WEXITSTATUS(rc) != 0) return {false, name + " run exited abnormally"};
    }
    for (const auto& e : fs::directory_iterator(root / name / "a")) {
      ++files;
      if (slurp(e.path()) != slurp(root / name / "b" / e.path().filename())) mismatch += " " + name + "/" +
                                                                                         e.path().filename().string();
    }
  }
  return {mismatch.empty() && files > 0,
          std::to_string(files) + " files compared across 5 commands" +
              (mismatch.empty() ? std::string(", all identical") : ", differing:" + mismatch)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  app.add_option("--cli", g_cli, "path of the scerm executable");
  app.add_option("--jobs", g_jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "run only these criteria (AC9 needs AC2)");
  g_jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> checks = {ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, ac10};
  int failed = 0;
  for (size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = checks[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " AC" << id << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
