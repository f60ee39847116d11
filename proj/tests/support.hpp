#pragma once

#include <escn/sphere_math.hpp>
#include <escn/types.hpp>

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace escn::testing {

inline void fill_normal(double* p, Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < n; ++i) p[i] = normal(rng);
}

inline IrrepsCoeffs random_coeffs(int lmax, int channels, std::mt19937_64& rng) {
  IrrepsCoeffs x(lmax, channels);
  fill_normal(x.data.data(), x.data.size(), rng);
  return x;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  for (;;) {
    Vec3 v(normal(rng), normal(rng), normal(rng));
    if (v.norm() > 1e-3) return v.normalized();
  }
}

inline sphere::Direction random_direction(std::mt19937_64& rng) {
  return sphere::Direction::normalized(random_unit(rng));
}

inline double max_abs(const CoeffMatrix& a) { return a.cwiseAbs().maxCoeff(); }

/// Runs `prop(rng)` for `cases` generated inputs; each case gets its own
/// generator seeded from (seed, case) so a failure can be replayed alone.
template <class Prop>
void for_all(int cases, std::uint64_t seed, Prop&& prop) {
  for (int c = 0; c < cases; ++c) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<std::uint64_t>(c));
    INFO("property case ", c, " seed ", seed);
    prop(rng);
  }
}

// Closed-form factorial in long double, fine for the small degrees used here.
inline long double factorial(int n) {
  long double f = 1.0L;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace escn::testing
