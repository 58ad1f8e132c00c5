#include "rng.hpp"

#include <algorithm>

namespace scerm {

std::vector<double> cumulative(const double* w, long size) {
  std::vector<double> cdf(static_cast<size_t>(size));
  double s = 0;
  for (long i = 0; i < size; ++i) cdf[i] = (s += w[i]);
  for (auto& c : cdf) c /= s;
  cdf.back() = 1.0;
  return cdf;
}

std::vector<long> multinomial_counts(std::mt19937_64& gen, const std::vector<double>& cdf, long n) {
  std::vector<long> counts(cdf.size(), 0);
  for (long i = 0; i < n; ++i) {
    double u = uniform01(gen);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    ++counts[static_cast<size_t>(it - cdf.begin())];
  }
  return counts;
}

}  // namespace scerm
