#include "linalg.hpp"

#include <string>

#include "errors.hpp"

namespace scerm {

Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> f(a);
  if (f.info() != Eigen::Success) throw DomainError(std::string(what) + " is not positive definite");
  return f;
}

double inv_quad(const Eigen::LLT<Eigen::MatrixXd>& fa, const Eigen::VectorXd& v) {
  Eigen::VectorXd w = fa.matrixL().solve(v);
  return w.squaredNorm();
}

double max_gen_eig(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  auto fb = factor_spd(b, "reference matrix");
  Eigen::MatrixXd w = fb.matrixL().solve(a);
  Eigen::MatrixXd m = fb.matrixL().solve(w.transpose());
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace scerm
