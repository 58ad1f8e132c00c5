#include "scloss.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "errors.hpp"

namespace scerm {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^{-u})
double softplus_neg(double u) {
  return std::max(-u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

void check_theta(const Sample& z, const Vec& v, const char* what) {
  if (v.size() != z.dim())
    throw ContractError(std::string(what) + " has dimension " + std::to_string(v.size()) +
                        ", expected " + std::to_string(z.dim()));
  if (!v.allFinite()) throw DomainError(std::string(what) + " has non-finite entries");
}

struct SoftmaxState {
  Vec scores;
  Vec probs;
  double lse;
};

SoftmaxState softmax_state(const LossModel& loss, const Sample& z, const Vec& theta) {
  SoftmaxState s;
  s.scores = z.features.transpose() * theta;
  s.scores.array() += loss.base_measure.array().log();
  double mx = s.scores.maxCoeff();
  s.probs = (s.scores.array() - mx).exp();
  double total = s.probs.sum();
  s.lse = mx + std::log(total);
  s.probs /= total;
  return s;
}

int label_index(const Sample& z) { return static_cast<int>(z.label); }

}  // namespace

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Square: return "square";
    case LossKind::HuberSqrt: return "huber_sqrt";
    case LossKind::HuberLogCosh: return "huber_logcosh";
    case LossKind::Logistic: return "logistic";
    case LossKind::SoftmaxGLM: return "softmax_glm";
  }
  return "unknown";
}

LossKind loss_kind_from_name(const std::string& name) {
  for (auto k : {LossKind::Square, LossKind::HuberSqrt, LossKind::HuberLogCosh, LossKind::Logistic,
                 LossKind::SoftmaxGLM})
    if (name == loss_kind_name(k)) return k;
  throw ContractError("unknown loss kind '" + name + "'");
}

LossModel LossModel::make(LossKind kind, Vec base_measure) {
  LossModel m;
  m.kind = kind;
  if (kind == LossKind::SoftmaxGLM) {
    if (base_measure.size() < 1) throw ContractError("softmax loss needs a nonempty base measure");
    if (!base_measure.allFinite() || (base_measure.array() <= 0).any())
      throw DomainError("base measure weights must be finite and positive");
    m.base_measure = std::move(base_measure);
  } else if (base_measure.size() != 0) {
    throw ContractError("base measure only applies to the softmax loss");
  }
  return m;
}

ScalarDerivs scalar_derivs(LossKind kind, double m, double y) {
  switch (kind) {
    case LossKind::Square: {
      double r = y - m;
      return {0.5 * r * r, -r, 1.0};
    }
    case LossKind::HuberSqrt: {
      double t = y - m;
      double s = std::sqrt(1.0 + t * t);
      return {t * t / (s + 1.0), -t / s, 1.0 / (s * s * s)};
    }
    case LossKind::HuberLogCosh: {
      double t = y - m;
      double a = std::abs(t);
      double e = std::exp(-2.0 * a);
      double sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
      return {a + std::log1p(e) - kLog2, -std::tanh(t), sech2};
    }
    case LossKind::Logistic: {
      double u = y * m;
      return {softplus_neg(u), -y * sigmoid(-u), y * y * sigmoid(u) * sigmoid(-u)};
    }
    case LossKind::SoftmaxGLM: break;
  }
  throw ContractError("scalar derivatives requested for a multi-label loss");
}

void check_sample(const LossModel& loss, const Sample& z) {
  if (z.features.rows() < 1) throw ContractError("sample has empty feature vector");
  if (!z.features.allFinite()) throw DomainError("sample features are not finite");
  if (!std::isfinite(z.label)) throw DomainError("sample label is not finite");
  if (loss.is_glm()) {
    if (z.features.cols() != loss.base_measure.size())
      throw ContractError("sample has " + std::to_string(z.features.cols()) +
                          " label columns, base measure has " +
                          std::to_string(loss.base_measure.size()));
    if (z.label != std::floor(z.label) || z.label < 0 || z.label >= z.features.cols())
      throw ContractError("label index out of range");
  } else if (z.features.cols() != 1) {
    throw ContractError("scalar losses take a single feature column");
  }
}

void check_sample(const LossModel& loss, const Sample& z, Eigen::Index d) {
  check_sample(loss, z);
  if (z.dim() != d)
    throw ContractError("sample dimension " + std::to_string(z.dim()) + " differs from " +
                        std::to_string(d));
}

double eval_loss(const LossModel& loss, const Sample& z, const Vec& theta) {
  check_sample(loss, z);
  check_theta(z, theta, "theta");
  if (loss.is_glm()) {
    auto s = softmax_state(loss, z, theta);
    return -z.features.col(label_index(z)).dot(theta) + s.lse;
  }
  return scalar_derivs(loss.kind, z.phi().dot(theta), z.label).value;
}

Vec grad_loss(const LossModel& loss, const Sample& z, const Vec& theta) {
  check_sample(loss, z);
  check_theta(z, theta, "theta");
  if (loss.is_glm()) {
    auto s = softmax_state(loss, z, theta);
    return z.features * s.probs - z.features.col(label_index(z));
  }
  return scalar_derivs(loss.kind, z.phi().dot(theta), z.label).d1 * z.phi();
}

Mat hess_loss(const LossModel& loss, const Sample& z, const Vec& theta) {
  check_sample(loss, z);
  check_theta(z, theta, "theta");
  if (loss.is_glm()) {
    auto s = softmax_state(loss, z, theta);
    Vec mean = z.features * s.probs;
    Mat h = z.features * s.probs.asDiagonal() * z.features.transpose();
    h.noalias() -= mean * mean.transpose();
    return 0.5 * (h + h.transpose());
  }
  double c = scalar_derivs(loss.kind, z.phi().dot(theta), z.label).d2;
  Vec v = std::sqrt(c) * z.phi();  // v v^T is exactly symmetric
  return v * v.transpose();
}

double hess_trace(const LossModel& loss, const Sample& z, const Vec& theta) {
  check_sample(loss, z);
  check_theta(z, theta, "theta");
  if (loss.is_glm()) {
    auto s = softmax_state(loss, z, theta);
    Vec mean = z.features * s.probs;
    double t = (z.features.colwise().squaredNorm().transpose().array() * s.probs.array()).sum();
    return std::max(0.0, t - mean.squaredNorm());
  }
  return scalar_derivs(loss.kind, z.phi().dot(theta), z.label).d2 * z.phi().squaredNorm();
}

double sc_factor(const LossModel& loss, const Sample& z, const Vec& k) {
  check_sample(loss, z);
  check_theta(z, k, "direction");
  switch (loss.kind) {
    case LossKind::Square: return 0.0;
    case LossKind::HuberSqrt: return 3.0 * std::abs(k.dot(z.phi()));
    case LossKind::HuberLogCosh: return 2.0 * std::abs(k.dot(z.phi()));
    case LossKind::Logistic: return std::abs(z.label) * std::abs(k.dot(z.phi()));
    case LossKind::SoftmaxGLM: return 2.0 * (z.features.transpose() * k).cwiseAbs().maxCoeff();
  }
  return 0.0;
}

Mat certificate_generators(const LossModel& loss, const Sample& z) {
  check_sample(loss, z);
  switch (loss.kind) {
    case LossKind::Square: return Mat(z.dim(), 0);
    case LossKind::HuberSqrt: return 3.0 * z.features;
    case LossKind::HuberLogCosh: return 2.0 * z.features;
    case LossKind::Logistic: return std::abs(z.label) * z.features;
    case LossKind::SoftmaxGLM: return 2.0 * z.features;
  }
  return Mat(z.dim(), 0);
}

SupConstants sup_constants(const LossModel& loss, const std::vector<Sample>& support,
                           double radius) {
  if (support.empty()) throw ContractError("sup_constants needs a nonempty support");
  if (!(radius >= 0) || !std::isfinite(radius)) throw DomainError("radius must be finite and >= 0");
  const auto d = support.front().dim();
  SupConstants out;
  for (const auto& z : support) {
    check_sample(loss, z, d);
    Mat g = certificate_generators(loss, z);
    if (g.cols() > 0) out.R = std::max(out.R, g.colwise().norm().maxCoeff());
  }

  if (loss.kind != LossKind::SoftmaxGLM) {
    for (const auto& z : support) {
      double nphi = z.phi().norm();
      double ay = std::abs(z.label);
      switch (loss.kind) {
        case LossKind::Square:
          out.B1 = std::max(out.B1, nphi * (ay + radius * nphi));
          out.B2 = std::max(out.B2, nphi * nphi);
          break;
        case LossKind::HuberSqrt:
        case LossKind::HuberLogCosh:
          out.B1 = std::max(out.B1, nphi);
          out.B2 = std::max(out.B2, nphi * nphi);
          break;
        case LossKind::Logistic:
          out.B1 = std::max(out.B1, ay * nphi);
          out.B2 = std::max(out.B2, ay * ay * nphi * nphi / 4.0);
          break;
        case LossKind::SoftmaxGLM: break;
      }
    }
    return out;
  }

  // 64 directions x 32 radii, fixed seed
  out.exact = false;
  std::mt19937_64 gen(0x5eed5eedULL);
  auto unif = [&gen] { return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; };
  for (int dir = 0; dir < 64; ++dir) {
    Vec u(d);
    for (Eigen::Index i = 0; i < d; ++i)
      u[i] = std::sqrt(-2.0 * std::log(unif())) * std::cos(2.0 * M_PI * unif());
    double un = u.norm();
    if (un == 0.0) continue;
    u /= un;
    for (int k = 0; k < 32; ++k) {
      Vec theta = (radius * k / 31.0) * u;
      for (const auto& z : support) {
        out.B1 = std::max(out.B1, grad_loss(loss, z, theta).norm());
        out.B2 = std::max(out.B2, hess_trace(loss, z, theta));
      }
    }
  }
  return out;
}

}  // namespace scerm
