#include "measure.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace scerm {

FinitePopulation::FinitePopulation(std::vector<Sample> atoms, Vec weights, LossModel loss)
    : atoms_(std::move(atoms)), weights_(std::move(weights)), loss_(std::move(loss)) {
  if (atoms_.empty()) throw ContractError("population has no atoms");
  if (weights_.size() != static_cast<Eigen::Index>(atoms_.size()))
    throw ContractError("population has " + std::to_string(atoms_.size()) + " atoms but " +
                        std::to_string(weights_.size()) + " weights");
  if (!weights_.allFinite() || (weights_.array() <= 0).any())
    throw DomainError("population weights must be finite and strictly positive");
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw DomainError("population weights must sum to 1");
  dim_ = atoms_.front().dim();
  for (const auto& z : atoms_) check_sample(loss_, z, dim_);
  build_cache();
}

FinitePopulation FinitePopulation::from_counts(const FinitePopulation& base,
                                               const std::vector<long>& counts) {
  if (counts.size() != base.atoms_.size()) throw ContractError("count vector has wrong length");
  long n = 0;
  for (long c : counts) {
    if (c < 0) throw ContractError("negative atom count");
    n += c;
  }
  if (n == 0) throw ContractError("empty draw");
  FinitePopulation out;
  out.loss_ = base.loss_;
  out.dim_ = base.dim_;
  std::vector<double> w;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    out.atoms_.push_back(base.atoms_[i]);
    w.push_back(static_cast<double>(counts[i]) / static_cast<double>(n));
  }
  out.weights_ = Eigen::Map<Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
  out.build_cache();
  return out;
}

void FinitePopulation::build_cache() {
  if (loss_.is_glm()) return;
  design_.resize(size(), dim_);
  labels_.resize(size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    design_.row(i) = atoms_[i].phi().transpose();
    labels_[i] = atoms_[i].label;
  }
}

namespace {

void check_theta(const FinitePopulation& pop, const Vec& theta, double lambda) {
  if (theta.size() != pop.dim())
    throw ContractError("theta has dimension " + std::to_string(theta.size()) + ", expected " +
                        std::to_string(pop.dim()));
  if (!theta.allFinite()) throw DomainError("theta has non-finite entries");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw ContractError("lambda must be finite and >= 0");
}

}  // namespace

void exact_all(const FinitePopulation& pop, const Vec& theta, double lambda, double* value,
               Vec* grad, Mat* hess) {
  check_theta(pop, theta, lambda);
  const auto d = pop.dim();
  const Vec& w = pop.weights();
  if (!pop.loss().is_glm()) {
    Vec m = pop.design() * theta;
    Vec v(pop.size()), d1(pop.size()), d2(pop.size());
    for (Eigen::Index i = 0; i < pop.size(); ++i) {
      auto s = scalar_derivs(pop.loss().kind, m[i], pop.labels()[i]);
      v[i] = s.value;
      d1[i] = s.d1 * w[i];
      d2[i] = s.d2 * w[i];
    }
    if (value) *value = w.dot(v) + 0.5 * lambda * theta.squaredNorm();
    if (grad) *grad = pop.design().transpose() * d1 + lambda * theta;
    if (hess) {
      Mat h = pop.design().transpose() * d2.asDiagonal() * pop.design();
      h = 0.5 * (h + h.transpose());
      h.diagonal().array() += lambda;
      *hess = std::move(h);
    }
    return;
  }
  double val = 0.0;
  Vec g = Vec::Zero(d);
  Mat h = Mat::Zero(d, d);
  for (Eigen::Index i = 0; i < pop.size(); ++i) {
    const auto& z = pop.atoms()[i];
    if (value) val += w[i] * eval_loss(pop.loss(), z, theta);
    if (grad) g += w[i] * grad_loss(pop.loss(), z, theta);
    if (hess) h += w[i] * hess_loss(pop.loss(), z, theta);
  }
  if (value) *value = val + 0.5 * lambda * theta.squaredNorm();
  if (grad) *grad = g + lambda * theta;
  if (hess) {
    h.diagonal().array() += lambda;
    *hess = std::move(h);
  }
}

double exact_risk(const FinitePopulation& pop, const Vec& theta, double lambda) {
  double v;
  exact_all(pop, theta, lambda, &v, nullptr, nullptr);
  return v;
}

Vec exact_grad(const FinitePopulation& pop, const Vec& theta, double lambda) {
  Vec g;
  exact_all(pop, theta, lambda, nullptr, &g, nullptr);
  return g;
}

Mat exact_hessian(const FinitePopulation& pop, const Vec& theta, double lambda) {
  Mat h;
  exact_all(pop, theta, lambda, nullptr, nullptr, &h);
  return h;
}

Mat atom_gradients(const FinitePopulation& pop, const Vec& theta) {
  check_theta(pop, theta, 0.0);
  Mat g(pop.dim(), pop.size());
  if (!pop.loss().is_glm()) {
    Vec m = pop.design() * theta;
    for (Eigen::Index i = 0; i < pop.size(); ++i)
      g.col(i) = scalar_derivs(pop.loss().kind, m[i], pop.labels()[i]).d1 *
                 pop.design().row(i).transpose();
    return g;
  }
  for (Eigen::Index i = 0; i < pop.size(); ++i) g.col(i) = grad_loss(pop.loss(), pop.atoms()[i], theta);
  return g;
}

double sup_hess_trace(const FinitePopulation& pop, const Vec& theta) {
  check_theta(pop, theta, 0.0);
  double b = 0.0;
  for (const auto& z : pop.atoms()) b = std::max(b, hess_trace(pop.loss(), z, theta));
  return b;
}

double sup_grad_norm(const FinitePopulation& pop, const Vec& theta) {
  return atom_gradients(pop, theta).colwise().norm().maxCoeff();
}

double sc_sup(const FinitePopulation& pop, const Vec& k) {
  check_theta(pop, k, 0.0);
  double m = 0.0;
  for (const auto& z : pop.atoms()) m = std::max(m, sc_factor(pop.loss(), z, k));
  return m;
}

}  // namespace scerm
