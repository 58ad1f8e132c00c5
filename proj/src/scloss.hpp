#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scerm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class LossKind { Square, HuberSqrt, HuberLogCosh, Logistic, SoftmaxGLM };

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

// features is d x 1 for scalar losses, d x |Y| for SoftmaxGLM (one column per label).
// For SoftmaxGLM the label holds the label index.
struct Sample {
  Mat features;
  double label = 0.0;

  Eigen::Index dim() const { return features.rows(); }
  auto phi() const { return features.col(0); }
};

struct LossModel {
  LossKind kind = LossKind::Square;
  Vec base_measure;  // SoftmaxGLM only: positive weight per label

  static LossModel make(LossKind kind, Vec base_measure = Vec());
  bool is_glm() const { return kind == LossKind::SoftmaxGLM; }
};

// value and first two derivatives of a scalar loss in the margin m = theta . phi
struct ScalarDerivs {
  double value;
  double d1;
  double d2;
};
ScalarDerivs scalar_derivs(LossKind kind, double margin, double label);

void check_sample(const LossModel& loss, const Sample& z);
void check_sample(const LossModel& loss, const Sample& z, Eigen::Index d);

double eval_loss(const LossModel& loss, const Sample& z, const Vec& theta);
Vec grad_loss(const LossModel& loss, const Sample& z, const Vec& theta);
Mat hess_loss(const LossModel& loss, const Sample& z, const Vec& theta);
double hess_trace(const LossModel& loss, const Sample& z, const Vec& theta);

// sup over the certificate set phi(z) of |k . g|
double sc_factor(const LossModel& loss, const Sample& z, const Vec& k);

// Columns g_1..g_m such that sup_{g in phi(z)} |k . g| = max_i |k . g_i|.
// Empty for the square loss.
Mat certificate_generators(const LossModel& loss, const Sample& z);

struct SupConstants {
  double B1 = 0.0;
  double B2 = 0.0;
  double R = 0.0;
  bool exact = true;  // false when B1/B2 come from the search grid
};

SupConstants sup_constants(const LossModel& loss, const std::vector<Sample>& support,
                           double radius);

}  // namespace scerm
