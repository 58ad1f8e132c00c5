#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace scerm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// counter-mode seed for cell (a, b) under a base seed
inline std::uint64_t cell_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b + 0x632be59bd9b4e019ULL));
}

inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}

// n i.i.d. draws from the categorical distribution with the given cumulative weights
std::vector<long> multinomial_counts(std::mt19937_64& gen, const std::vector<double>& cdf, long n);

std::vector<double> cumulative(const double* w, long size);

}  // namespace scerm
