#pragma once

#include <Eigen/Dense>

namespace scerm {

// Cholesky factor of an SPD matrix; DomainError if it is not numerically PD.
Eigen::LLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& a, const char* what);

// v' A^{-1} v using a precomputed factor of A
double inv_quad(const Eigen::LLT<Eigen::MatrixXd>& fa, const Eigen::VectorXd& v);

// largest lambda with A v = lambda B v, B SPD
double max_gen_eig(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace scerm
