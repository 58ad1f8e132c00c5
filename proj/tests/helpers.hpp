#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "measure.hpp"

namespace th {

using scerm::LossKind;
using scerm::LossModel;
using scerm::Mat;
using scerm::Sample;
using scerm::Vec;

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Sample scalar_sample(std::initializer_list<double> phi, double y) { return Sample{Mat(vec(phi)), y}; }

// P1: square loss, phi = 1, y in {0, 2} with probability 1/2 each
inline scerm::FinitePopulation p1() {
  return scerm::FinitePopulation({scalar_sample({1.0}, 0.0), scalar_sample({1.0}, 2.0)}, vec({0.5, 0.5}),
                                 LossModel::make(LossKind::Square));
}

// P2: logistic, phi = 1, y = +1 w.p. 3/4 and -1 w.p. 1/4
inline scerm::FinitePopulation p2() {
  return scerm::FinitePopulation({scalar_sample({1.0}, 1.0), scalar_sample({1.0}, -1.0)}, vec({0.75, 0.25}),
                                 LossModel::make(LossKind::Logistic));
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline double rel_err(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
}

inline Vec gaussian(std::mt19937_64& g, Eigen::Index d, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(g);
  return v;
}

// random well-scaled sample for the given loss
inline Sample random_sample(std::mt19937_64& g, const LossModel& loss, Eigen::Index d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Sample z;
  if (loss.is_glm()) {
    z.features = Mat(d, loss.base_measure.size());
    for (Eigen::Index i = 0; i < z.features.size(); ++i) z.features(i) = u(g);
    z.label = static_cast<double>(g() % static_cast<unsigned>(loss.base_measure.size()));
  } else {
    z.features = Mat(d, 1);
    for (Eigen::Index i = 0; i < d; ++i) z.features(i) = u(g);
    z.label = loss.kind == LossKind::Logistic ? (g() % 2 ? 1.0 : -1.0) : 2.0 * u(g);
  }
  return z;
}

inline LossModel loss_of(LossKind k) {
  return k == LossKind::SoftmaxGLM ? LossModel::make(k, vec({1.0, 0.5, 2.0})) : LossModel::make(k);
}

inline const LossKind kAllKinds[] = {LossKind::Square, LossKind::HuberSqrt, LossKind::HuberLogCosh,
                                     LossKind::Logistic, LossKind::SoftmaxGLM};

}  // namespace th
