#include "scverify.hpp"

#include <algorithm>
#include <cmath>

#include "auxfun.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace scerm {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

Margin finish(double lhs, double rhs, double m) {
  Margin r;
  r.lhs = lhs;
  r.rhs = rhs;
  r.m = m;
  if (std::isinf(rhs) && rhs > 0 && std::isfinite(lhs)) {
    r.margin = 1.0;
  } else {
    double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    r.margin = (rhs - lhs) / scale;
  }
  r.pass = r.margin >= -kCheckSlack;
  return r;
}

void check_pair(const FinitePopulation& mu, const Vec& t0, const Vec& t1) {
  if (t0.size() != mu.dim() || t1.size() != mu.dim())
    throw ContractError("theta dimension does not match the measure");
}

struct PairState {
  double m;
  Mat h0;
  Eigen::LLT<Mat> f0;
  Vec g0, g1;
  double dnorm;  // ||theta1 - theta0|| in H_lambda(theta0)
};

PairState pair_state(const FinitePopulation& mu, const Vec& t0, const Vec& t1, double lambda) {
  check_pair(mu, t0, t1);
  if (!(lambda > 0)) throw ContractError("gradient checks need lambda > 0");
  PairState s;
  Vec delta = t1 - t0;
  s.m = sc_sup(mu, delta);
  exact_all(mu, t0, lambda, nullptr, &s.g0, &s.h0);
  s.g1 = exact_grad(mu, t1, lambda);
  s.f0 = factor_spd(s.h0, "H_lambda(theta0)");
  s.dnorm = std::sqrt(std::max(0.0, delta.dot(s.h0 * delta)));
  return s;
}

Vec random_in_ball(std::mt19937_64& gen, Eigen::Index d, double radius) {
  Vec u(d);
  for (Eigen::Index i = 0; i < d; ++i)
    u[i] = std::sqrt(-2.0 * std::log(1.0 - uniform01(gen))) * std::cos(2.0 * M_PI * uniform01(gen));
  double n = u.norm();
  if (n == 0) return Vec::Zero(d);
  double rad = radius * std::pow(uniform01(gen), 1.0 / static_cast<double>(d));
  return u * (rad / n);
}

const double kLambdas[] = {0.0, 1e-3, 1e-2, 1e-1, 1.0};

bool pd_enough(const FinitePopulation& mu, const Vec& theta) {
  Mat h = exact_hessian(mu, theta, 0.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > 1e-8;
}

}  // namespace

Margin check_hess_control(const FinitePopulation& mu, const Vec& t0, const Vec& t1, double lambda) {
  check_pair(mu, t0, t1);
  if (!(lambda >= 0)) throw ContractError("lambda must be >= 0");
  Mat h0 = exact_hessian(mu, t0, lambda);
  Mat h1 = exact_hessian(mu, t1, lambda);
  // 1 + max eig of (H1 - H0, H0)
  double mu_max = 1.0 + max_gen_eig(h1 - h0, h0);
  double m = sc_sup(mu, t1 - t0);
  return finish(mu_max, std::exp(m), m);
}

Margin check_grad_lower(const FinitePopulation& mu, const Vec& t0, const Vec& t1, double lambda) {
  auto s = pair_state(mu, t0, t1, lambda);
  double lhs_g = std::sqrt(inv_quad(s.f0, s.g1 - s.g0));
  return finish(phi_lower(s.m) * s.dnorm, lhs_g, s.m);
}

Margin check_grad_upper(const FinitePopulation& mu, const Vec& t0, const Vec& t1, double lambda) {
  auto s = pair_state(mu, t0, t1, lambda);
  double lhs_g = std::sqrt(inv_quad(s.f0, s.g1 - s.g0));
  return finish(lhs_g, phi_upper(s.m) * s.dnorm, s.m);
}

Margin check_value_bound(const FinitePopulation& mu, const Vec& t0, const Vec& t1, double lambda) {
  check_pair(mu, t0, t1);
  if (!(lambda >= 0)) throw ContractError("lambda must be >= 0");
  Vec delta = t1 - t0;
  double l0, l1;
  Vec g0;
  Mat h0;
  exact_all(mu, t0, lambda, &l0, &g0, &h0);
  l1 = exact_risk(mu, t1, lambda);
  double m = sc_sup(mu, delta);
  double gap = l1 - l0 - g0.dot(delta);
  double dn2 = std::max(0.0, delta.dot(h0 * delta));
  return finish(gap, psi(m) * dn2, m);
}

LocalizationRecord check_localization(const FinitePopulation& pop, const Vec& theta, double lambda,
                                      const FinitePopulation* sample, const SolverConfig& config) {
  if (!(lambda > 0)) throw ContractError("localization needs lambda > 0");
  LocalizationRecord rec;
  Vec g;
  Mat h;
  exact_all(pop, theta, lambda, nullptr, &g, &h);
  auto fh = factor_spd(h, "H_lambda(theta)");
  double r = dikin_radius(pop, theta, lambda);
  Vec opt = minimize_population(pop, lambda, config);
  auto& p = rec.population;
  p.lhs = std::sqrt(inv_quad(fh, g));
  p.threshold = r / 2.0;
  p.nm = sc_sup(pop, theta - opt);
  p.antecedent = p.lhs <= p.threshold;
  p.consequent = p.nm <= kLog2 * (1.0 + 1e-9);
  if (sample) {
    Implication e;
    Vec gs;
    Mat hs;
    exact_all(*sample, theta, lambda, nullptr, &gs, &hs);
    double ratio = max_gen_eig(h, hs);
    Vec opt_s = newton_minimize(*sample, lambda, config).theta_hat;
    e.lhs = std::sqrt(inv_quad(fh, gs)) * ratio;
    e.threshold = r / 2.0;
    e.nm = sc_sup(pop, theta - opt_s);
    e.antecedent = e.lhs <= e.threshold;
    e.consequent = e.nm <= kLog2 * (1.0 + 1e-9);
    rec.empirical = e;
  }
  return rec;
}

BiasLemmaRecord check_bias_lemma(const FinitePopulation& pop, PopulationSolution& sol, double lambda) {
  BiasLemmaRecord rec;
  const Vec& tl = theta_lambda(pop, sol, lambda);
  rec.bias = bias_lambda(sol, lambda);
  rec.dikin = dikin_radius(pop, sol.theta_star, lambda);
  rec.t = t_lambda(pop, sol.theta_star, tl);
  rec.small_branch = rec.bias <= rec.dikin / 2.0;
  if (rec.small_branch) {
    rec.bound = kLog2;
  } else {
    auto sc = star_constants(pop, sol.theta_star);
    rec.bound = 2.0 * sc.R * sc.theta_norm;
  }
  rec.holds = rec.t <= rec.bound * (1.0 + 1e-9) + 1e-12;
  return rec;
}

DecompositionRecord check_decomposition_bound(const FinitePopulation& pop, PopulationSolution& sol,
                                              double lambda, const FinitePopulation& sample,
                                              const Vec& theta_hat) {
  if (!(lambda > 0)) throw ContractError("decomposition check needs lambda > 0");
  DecompositionRecord rec;
  const Vec tl = theta_lambda(pop, sol, lambda);
  Mat h = exact_hessian(pop, tl, lambda);
  Vec gs;
  Mat hs;
  exact_all(sample, tl, lambda, nullptr, &gs, &hs);
  auto fh = factor_spd(h, "H_lambda(theta*_lambda)");
  rec.var_hat = max_gen_eig(h, hs) * std::sqrt(inv_quad(fh, gs));
  rec.dikin_half = dikin_radius(pop, tl, lambda) / 2.0;
  rec.applicable = rec.var_hat <= rec.dikin_half;
  if (!rec.applicable) return rec;
  double t = t_lambda(pop, sol.theta_star, tl);
  auto c = constants_from(t, 0.0);
  double bias = bias_lambda(sol, lambda);
  rec.lhs = exact_risk(pop, theta_hat, 0.0) - exact_risk(pop, sol.theta_star, 0.0);
  rec.rhs = c.K_bias * bias * bias + c.K_var * rec.var_hat * rec.var_hat;
  rec.margin = finish(rec.lhs, rec.rhs, t);
  return rec;
}

void CheckReport::add(double margin, bool keep) {
  ++trials;
  if (!(margin >= -kCheckSlack)) ++violations;
  if (std::isnan(margin)) worst_margin = margin;
  else if (!std::isnan(worst_margin)) worst_margin = std::min(worst_margin, margin);
  if (keep) per_trial.push_back(margin);
}

long SuiteReport::violations() const {
  long v = localization_failures + empirical_localization_failures + bias_lemma_failures;
  for (const auto& k : kinds)
    v += k.hess.violations + k.grad_lower.violations + k.grad_upper.violations + k.value.violations +
         k.hess_swapped.violations;
  return v;
}

FinitePopulation random_population(LossKind kind, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const int d = 1 + static_cast<int>(gen() % 4);
  const int labels = kind == LossKind::SoftmaxGLM ? 2 + static_cast<int>(gen() % 2) : 1;
  const int per_x = kind == LossKind::Logistic ? 2 : labels;
  const int max_x = 16 / per_x;
  const int nx = d + 1 + static_cast<int>(gen() % static_cast<unsigned>(max_x - d));

  Vec mu;
  if (kind == LossKind::SoftmaxGLM) {
    mu.resize(labels);
    for (int j = 0; j < labels; ++j) mu[j] = uniform(gen, 0.5, 1.5);
  }
  LossModel loss = LossModel::make(kind, mu);
  std::vector<Sample> atoms;
  std::vector<double> w;
  for (int i = 0; i < nx; ++i) {
    double wx = uniform(gen, 0.2, 1.0);
    Mat f(d, kind == LossKind::SoftmaxGLM ? labels : 1);
    for (Eigen::Index a = 0; a < f.rows(); ++a)
      for (Eigen::Index b = 0; b < f.cols(); ++b) f(a, b) = uniform(gen, -1.0, 1.0);
    if (kind == LossKind::Logistic) {
      double p = uniform(gen, 0.1, 0.9);
      atoms.push_back(Sample{f, 1.0});
      w.push_back(wx * p);
      atoms.push_back(Sample{f, -1.0});
      w.push_back(wx * (1.0 - p));
    } else if (kind == LossKind::SoftmaxGLM) {
      std::vector<double> q(labels);
      double qs = 0;
      for (auto& x : q) qs += (x = uniform(gen, 0.1, 1.0));
      for (int j = 0; j < labels; ++j) {
        atoms.push_back(Sample{f, static_cast<double>(j)});
        w.push_back(wx * q[j] / qs);
      }
    } else {
      atoms.push_back(Sample{f, uniform(gen, -2.0, 2.0)});
      w.push_back(wx);
    }
  }
  Vec wv = Eigen::Map<Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
  wv /= wv.sum();
  return FinitePopulation(std::move(atoms), wv, loss);
}

SuiteReport run_verify_suite(const SuiteOptions& opt) {
  if (opt.trials_per_kind < 1) throw ContractError("trials_per_kind must be >= 1");
  const LossKind kinds[] = {LossKind::Square, LossKind::HuberSqrt, LossKind::HuberLogCosh,
                            LossKind::Logistic, LossKind::SoftmaxGLM};
  struct TrialOut {
    Margin hess, hess_sw, lower, upper, value;
    bool loc_ok = true, emp_ran = false, emp_ok = true, lemma_ok = true;
  };
  SuiteReport rep;
  for (int ki = 0; ki < 5; ++ki) {
    const LossKind kind = kinds[ki];
    std::vector<TrialOut> out(static_cast<size_t>(opt.trials_per_kind));
    parallel_for(opt.trials_per_kind, opt.jobs, [&](long t) {
      std::mt19937_64 gen(cell_seed(opt.seed, static_cast<std::uint64_t>(ki), static_cast<std::uint64_t>(t)));
      FinitePopulation pop = random_population(kind, gen());
      Vec t0 = random_in_ball(gen, pop.dim(), 3.0);
      Vec t1 = random_in_ball(gen, pop.dim(), 3.0);
      double lam = kLambdas[gen() % 5];
      if (lam == 0.0 && (!pd_enough(pop, t0) || !pd_enough(pop, t1))) lam = 1e-3;
      double lam_pos = kLambdas[1 + gen() % 4];
      TrialOut& o = out[static_cast<size_t>(t)];
      o.hess = check_hess_control(pop, t0, t1, lam);
      o.hess_sw = check_hess_control(pop, t1, t0, lam);
      o.value = check_value_bound(pop, t0, t1, lam);
      o.lower = check_grad_lower(pop, t0, t1, lam_pos);
      o.upper = check_grad_upper(pop, t0, t1, lam_pos);

      // localization and the bias lemma on a tenth of the trials
      if (t % 10 != 0) return;
      PopulationSolution sol = solve_population(pop, {});
      o.lemma_ok = check_bias_lemma(pop, sol, lam_pos).holds;
      const Vec& tl = theta_lambda(pop, sol, lam_pos);
      double scale = std::pow(10.0, uniform(gen, -3.0, 0.5));
      Vec theta = tl + random_in_ball(gen, pop.dim(), scale);
      std::vector<long> counts = multinomial_counts(
          gen, cumulative(pop.weights().data(), pop.size()), 8 + static_cast<long>(gen() % 57));
      FinitePopulation sample = FinitePopulation::from_counts(pop, counts);
      auto loc = check_localization(pop, theta, lam_pos, &sample);
      o.loc_ok = loc.population.holds();
      o.emp_ran = true;
      o.emp_ok = loc.empirical->holds();
    });
    KindReport kr;
    kr.kind = kind;
    for (const auto& o : out) {
      kr.hess.add(o.hess.margin, opt.keep_trials);
      kr.hess_swapped.add(o.hess_sw.margin, opt.keep_trials);
      kr.grad_lower.add(o.lower.margin, opt.keep_trials);
      kr.grad_upper.add(o.upper.margin, opt.keep_trials);
      kr.value.add(o.value.margin, opt.keep_trials);
      if (kind == LossKind::Square) {
        for (double m : {o.hess.margin, o.hess_sw.margin, o.lower.margin, o.upper.margin, o.value.margin})
          kr.square_abs_margin = std::max(kr.square_abs_margin, std::abs(m));
      }
      if (o.emp_ran) {
        ++rep.localization_trials;
        ++rep.empirical_localization_trials;
        ++rep.bias_lemma_trials;
        if (!o.loc_ok) ++rep.localization_failures;
        if (!o.emp_ok) ++rep.empirical_localization_failures;
        if (!o.lemma_ok) ++rep.bias_lemma_failures;
      }
    }
    rep.kinds.push_back(std::move(kr));
  }
  return rep;
}

}  // namespace scerm
