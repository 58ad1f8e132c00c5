#pragma once

#include <vector>

#include "scloss.hpp"

namespace scerm {

// Finitely supported distribution over samples. Also used for empirical measures.
class FinitePopulation {
 public:
  FinitePopulation(std::vector<Sample> atoms, Vec weights, LossModel loss);

  // Empirical measure of a draw: counts[i] copies of atom i.
  static FinitePopulation from_counts(const FinitePopulation& base,
                                      const std::vector<long>& counts);

  const std::vector<Sample>& atoms() const { return atoms_; }
  const Vec& weights() const { return weights_; }
  const LossModel& loss() const { return loss_; }
  Eigen::Index dim() const { return dim_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(atoms_.size()); }

  // rows are the atoms' feature vectors (scalar losses only)
  const Mat& design() const { return design_; }
  const Vec& labels() const { return labels_; }

 private:
  FinitePopulation() = default;
  void build_cache();

  std::vector<Sample> atoms_;
  Vec weights_;
  LossModel loss_;
  Eigen::Index dim_ = 0;
  Mat design_;
  Vec labels_;
};

double exact_risk(const FinitePopulation& pop, const Vec& theta, double lambda);
Vec exact_grad(const FinitePopulation& pop, const Vec& theta, double lambda);
Mat exact_hessian(const FinitePopulation& pop, const Vec& theta, double lambda);

// value, gradient and Hessian in one pass; any output may be null
void exact_all(const FinitePopulation& pop, const Vec& theta, double lambda, double* value,
               Vec* grad, Mat* hess);

// per-atom gradients as columns
Mat atom_gradients(const FinitePopulation& pop, const Vec& theta);

// sup over atoms of Tr hess l_z(theta), i.e. B2(theta)
double sup_hess_trace(const FinitePopulation& pop, const Vec& theta);
// sup over atoms of ||grad l_z(theta)||, i.e. B1(theta)
double sup_grad_norm(const FinitePopulation& pop, const Vec& theta);
// sup over atoms of sc_factor(k)
double sc_sup(const FinitePopulation& pop, const Vec& k);

}  // namespace scerm
