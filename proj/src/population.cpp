#include "population.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "auxfun.hpp"
#include "errors.hpp"
#include "linalg.hpp"

namespace scerm {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

void require_positive(double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda))
    throw ContractError("lambda must be positive and finite");
}

struct LineFit {
  double slope, intercept, rms;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f{sxy / sxx, 0, 0};
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - f.intercept - f.slope * x[i];
    ss += e * e;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

size_t distinct(const std::vector<double>& v) { return std::set<double>(v.begin(), v.end()).size(); }

double gaussian(std::mt19937_64& gen) {
  auto u = [&gen] { return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; };
  return std::sqrt(-2.0 * std::log(u())) * std::cos(2.0 * M_PI * u());
}

Mat orthogonal_rows(int d, unsigned long long seed) {
  std::mt19937_64 gen(seed);
  if ((d & (d - 1)) == 0) {
    Mat h = Mat::Ones(1, 1);
    while (h.rows() < d) {
      Mat nh(2 * h.rows(), 2 * h.cols());
      nh << h, h, h, -h;
      h = std::move(nh);
    }
    for (int j = 0; j < d; ++j)
      if (gen() & 1ULL) h.col(j) *= -1.0;
    return h / std::sqrt(static_cast<double>(d));
  }
  Mat g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = gaussian(gen);
  Eigen::HouseholderQR<Mat> qr(g);
  return qr.householderQ() * Mat::Identity(d, d);
}

}  // namespace

Vec minimize_population(const FinitePopulation& pop, double lambda, const SolverConfig& config) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw ContractError("lambda must be finite and >= 0");
  SolverConfig c = config;
  if (lambda > 0) return newton_minimize(pop, lambda, c).theta_hat;
  c.tol = std::min(c.tol, 1e-12);
  auto res = newton_minimize(pop, 0.0, c);
  // a vanishing Hessian at the end point means the iterates ran off to infinity
  Eigen::SelfAdjointEigenSolver<Mat> es(exact_hessian(pop, res.theta_hat, 0.0), Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-14 * std::max(1.0, ev.maxCoeff())))
    throw DivergenceError("the unregularized risk has no attained minimizer", res.decrement_trace);
  return res.theta_hat;
}

PopulationSolution solve_population(const FinitePopulation& pop, const std::vector<double>& lambdas,
                                    const SolverConfig& config) {
  PopulationSolution sol;
  sol.theta_star = minimize_population(pop, 0.0, config);
  sol.hessian_at_star = exact_hessian(pop, sol.theta_star, 0.0);
  for (double l : lambdas) {
    require_positive(l);
    sol.theta_star_lambda[l] = minimize_population(pop, l, config);
  }
  return sol;
}

const Vec& theta_lambda(const FinitePopulation& pop, PopulationSolution& sol, double lambda,
                        const SolverConfig& config) {
  require_positive(lambda);
  auto it = sol.theta_star_lambda.find(lambda);
  if (it != sol.theta_star_lambda.end()) return it->second;
  return sol.theta_star_lambda.emplace(lambda, minimize_population(pop, lambda, config)).first->second;
}

double bias_lambda(const PopulationSolution& sol, double lambda) {
  require_positive(lambda);
  Mat h = sol.hessian_at_star;
  h.diagonal().array() += lambda;
  auto fh = factor_spd(h, "H_lambda(theta*)");
  return lambda * std::sqrt(inv_quad(fh, sol.theta_star));
}

double df_lambda(const FinitePopulation& pop, const PopulationSolution& sol, double lambda) {
  require_positive(lambda);
  Mat h = sol.hessian_at_star;
  h.diagonal().array() += lambda;
  auto fh = factor_spd(h, "H_lambda(theta*)");
  Mat g = atom_gradients(pop, sol.theta_star);
  Mat w = fh.matrixL().solve(g);
  return w.colwise().squaredNorm().dot(pop.weights());
}

double dikin_radius(const FinitePopulation& pop, const Vec& theta, double lambda) {
  require_positive(lambda);
  auto fh = factor_spd(exact_hessian(pop, theta, lambda), "H_lambda(theta)");
  double sup = 0.0;
  for (const auto& z : pop.atoms()) {
    Mat g = certificate_generators(pop.loss(), z);
    if (g.cols() == 0) continue;
    Mat w = fh.matrixL().solve(g);
    sup = std::max(sup, w.colwise().norm().maxCoeff());
  }
  if (sup == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / sup;
}

double t_lambda(const FinitePopulation& pop, const Vec& theta_star, const Vec& theta_star_lambda) {
  return sc_sup(pop, theta_star_lambda - theta_star);
}

StarConstants star_constants(const FinitePopulation& pop, const Vec& theta_star) {
  StarConstants s;
  s.B1 = sup_grad_norm(pop, theta_star);
  s.B2 = sup_hess_trace(pop, theta_star);
  s.theta_norm = theta_star.norm();
  for (const auto& z : pop.atoms()) {
    Mat g = certificate_generators(pop.loss(), z);
    if (g.cols() > 0) s.R = std::max(s.R, g.colwise().norm().maxCoeff());
  }
  return s;
}

Constants constants_from(double t, double t_tilde) {
  if (!(t >= 0) || !(t_tilde >= 0)) throw DomainError("t and t_tilde must be nonnegative");
  Constants c;
  c.t = t;
  c.t_tilde = t_tilde;
  c.small_branch = t_tilde <= 0.5;
  const double p2 = psi(t + kLog2);
  const double pl = phi_lower(t);
  const double pl2 = phi_lower(kLog2);
  const double et = std::exp(t);
  c.K_bias = 2.0 * p2 / (pl * pl);
  c.K_var = 2.0 * p2 * et / (pl2 * pl2);
  c.box1 = std::exp(t / 2.0);
  c.box2 = c.box1 * (1.0 + et);
  c.C_bias = p2 * (2.0 / pl + et / (pl2 * pl2));
  c.C_var = 64.0 * p2 * et * et / (pl2 * pl2);
  const double m = std::max(0.5, t_tilde);
  c.tri1 = 576.0 * c.box1 * c.box1 * c.box2 * c.box2 * m * m;
  c.tri2 = 256.0 * std::pow(c.box1, 4);
  return c;
}

Constants constants_at(const FinitePopulation& pop, PopulationSolution& sol, double lambda) {
  const Vec& tl = theta_lambda(pop, sol, lambda);
  double t = t_lambda(pop, sol.theta_star, tl);
  double r = dikin_radius(pop, sol.theta_star, lambda);
  double tt = std::isinf(r) ? 0.0 : bias_lambda(sol, lambda) / r;
  return constants_from(t, tt);
}

SimplifiedConstants simplified_constants() {
  SimplifiedConstants s;
  const double pl2 = phi_lower(kLog2);
  s.K_var = (1.0 + psi(kLog2)) / (pl2 * pl2);
  s.tri = 2.0 * std::sqrt(2.0) * (1.0 + 1.0 / (2.0 * std::sqrt(3.0)));
  s.C_bias = 1.0 + s.K_var / 8.0;
  s.C_var = 2.0 * s.K_var * s.tri * s.tri;
  return s;
}

ExponentFit estimate_source_exponent(const std::vector<double>& lambdas,
                                     const std::vector<double>& bias) {
  if (lambdas.size() != bias.size()) throw ContractError("grid and values differ in length");
  if (distinct(lambdas) < 3) throw ContractError("need at least 3 distinct lambda values");
  std::vector<double> x, y;
  for (size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0) || !(bias[i] > 0)) continue;
    x.push_back(std::log(lambdas[i]));
    y.push_back(std::log(bias[i]));
  }
  ExponentFit out;
  out.points = static_cast<int>(x.size());
  if (distinct(x) < 3) {
    out.flagged = true;
    return out;
  }
  auto f = fit_line(x, y);
  out.slope = f.slope;
  out.residual = f.rms;
  out.value = f.slope - 0.5;
  return out;
}

ExponentFit estimate_capacity_exponent(const std::vector<double>& lambdas,
                                       const std::vector<double>& df, double dim) {
  if (lambdas.size() != df.size()) throw ContractError("grid and values differ in length");
  if (distinct(lambdas) < 3) throw ContractError("need at least 3 distinct lambda values");
  std::vector<double> x, y;
  for (size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0) || !(df[i] > 0) || df[i] > dim / 2.0) continue;
    x.push_back(std::log(lambdas[i]));
    y.push_back(std::log(df[i]));
  }
  ExponentFit out;
  out.points = static_cast<int>(x.size());
  if (distinct(x) < 3) {
    out.flagged = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  auto f = fit_line(x, y);
  out.slope = f.slope;
  out.residual = f.rms;
  if (f.slope >= 0) {
    out.flagged = true;
    out.value = std::numeric_limits<double>::infinity();
  } else {
    out.value = -1.0 / f.slope;
  }
  return out;
}

std::vector<double> default_lambda_grid(double b2_star) {
  std::vector<double> g;
  for (int k = 0; k <= 16; ++k) {
    double l = std::ldexp(1.0, -k);
    if (l <= b2_star) g.push_back(l);
  }
  return g;
}

DiagnosticsReport diagnose(const FinitePopulation& pop, std::vector<double> lambda_grid,
                           const SolverConfig& config) {
  PopulationSolution sol = solve_population(pop, {}, config);
  DiagnosticsReport rep;
  rep.star = star_constants(pop, sol.theta_star);
  if (lambda_grid.empty()) lambda_grid = default_lambda_grid(rep.star.B2);
  std::sort(lambda_grid.begin(), lambda_grid.end());
  std::vector<double> ls, bs, dfs;
  for (double l : lambda_grid) {
    require_positive(l);
    DiagnosticsRow row;
    row.lambda = l;
    const Vec& tl = theta_lambda(pop, sol, l, config);
    row.theta_lambda_norm = tl.norm();
    row.bias = bias_lambda(sol, l);
    row.df = df_lambda(pop, sol, l);
    row.dikin = dikin_radius(pop, sol.theta_star, l);
    row.t = t_lambda(pop, sol.theta_star, tl);
    row.constants = constants_from(row.t, std::isinf(row.dikin) ? 0.0 : row.bias / row.dikin);
    rep.rows.push_back(row);
    ls.push_back(l);
    bs.push_back(row.bias);
    dfs.push_back(row.df);
  }
  if (distinct(ls) >= 3) {
    rep.fitted_r = estimate_source_exponent(ls, bs);
    rep.fitted_alpha = estimate_capacity_exponent(ls, dfs, static_cast<double>(pop.dim()));
  } else {
    rep.fitted_r.flagged = rep.fitted_alpha.flagged = true;
  }
  return rep;
}

SourcePopulation make_source_population(int d, double r, double alpha, unsigned long long seed) {
  if (d < 2) throw ContractError("source population needs d >= 2");
  if (!(r >= 0 && r <= 0.5)) throw DomainError("source exponent r must lie in [0, 0.5]");
  if (!(alpha >= 1) || !std::isfinite(alpha)) throw DomainError("capacity exponent alpha must be >= 1");
  Vec eig(d), v(d);
  for (int j = 0; j < d; ++j) {
    eig[j] = std::pow(j + 1.0, -alpha);
    v[j] = 1.0 / (j + 1.0);
  }
  v /= v.norm();
  Vec theta = eig.array().pow(r).matrix().cwiseProduct(v);
  Mat u = orthogonal_rows(d, seed);
  Vec root = eig.cwiseSqrt() * std::sqrt(static_cast<double>(d));

  std::vector<Sample> atoms;
  std::vector<double> w;
  for (int i = 0; i < d; ++i) {
    Vec phi = root.cwiseProduct(u.row(i).transpose());
    double m = phi.dot(theta);
    for (double eps : {1.0, -1.0}) {
      atoms.push_back(Sample{phi, m + eps});
      w.push_back(0.5 / d);
    }
  }
  Vec wv = Eigen::Map<Vec>(w.data(), static_cast<Eigen::Index>(w.size()));

  // Q = sup_lambda lambda^{1/alpha} Tr(C (C + lambda)^{-1})
  auto f = [&](double lg) {
    double l = std::exp(lg);
    return std::exp(lg / alpha) * (eig.array() / (eig.array() + l)).sum();
  };
  double lo = std::log(eig.minCoeff()) - 30.0, hi = std::log(eig.maxCoeff()) + 30.0;
  const int steps = 6000;
  double best = -1, arg = lo;
  for (int i = 0; i <= steps; ++i) {
    double lg = lo + (hi - lo) * i / steps;
    double val = f(lg);
    if (val > best) {
      best = val;
      arg = lg;
    }
  }
  double a = arg - (hi - lo) / steps, b = arg + (hi - lo) / steps;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    if (f(c1) > f(c2)) b = c2; else a = c1;
  }
  best = std::max(best, f(0.5 * (a + b)));
  if (alpha == 1.0) best = std::max(best, eig.sum());

  return SourcePopulation{FinitePopulation(std::move(atoms), wv, LossModel::make(LossKind::Square)),
                          r, alpha, 1.0, best, theta, eig};
}

FinitePopulation make_diagonal_logistic_population(int d, double weight_decay, double coef_decay,
                                                   double scale) {
  if (d < 1) throw ContractError("dimension must be >= 1");
  if (!std::isfinite(weight_decay) || !std::isfinite(coef_decay) || !std::isfinite(scale))
    throw DomainError("logistic population parameters must be finite");
  Vec w(d);
  for (int j = 0; j < d; ++j) w[j] = std::pow(j + 1.0, -weight_decay);
  w /= w.sum();
  std::vector<Sample> atoms;
  std::vector<double> ws;
  for (int j = 0; j < d; ++j) {
    double th = scale * std::pow(j + 1.0, -coef_decay / 2.0);
    double p = 1.0 / (1.0 + std::exp(-th));
    Vec e = Vec::Zero(d);
    e[j] = 1.0;
    atoms.push_back(Sample{e, 1.0});
    ws.push_back(w[j] * p);
    atoms.push_back(Sample{e, -1.0});
    ws.push_back(w[j] * (1.0 - p));
  }
  Vec wv = Eigen::Map<Vec>(ws.data(), static_cast<Eigen::Index>(ws.size()));
  return FinitePopulation(std::move(atoms), wv, LossModel::make(LossKind::Logistic));
}

}  // namespace scerm
