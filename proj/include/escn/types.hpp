#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace escn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Row-major so that the channels of one (l, m) coefficient are contiguous.
using CoeffMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when a caller-supplied value violates an operation's precondition.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed user input (files, atomic numbers, coincident atoms).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weight file / model configuration mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int num_coeffs(int lmax) { return (lmax + 1) * (lmax + 1); }

/// Degree-major, m-ascending flat index of (l, m).
constexpr int lm_index(int l, int m) { return l * l + l + m; }

/// Spherical-harmonic coefficients of a per-node or per-edge signal.
///
/// Rows are (l, m) pairs in degree-major order with m running from -l to l;
/// columns are channels.
struct IrrepsCoeffs {
  int lmax = 0;
  CoeffMatrix data;

  IrrepsCoeffs() = default;
  IrrepsCoeffs(int lmax_, int channels)
      : lmax(lmax_), data(CoeffMatrix::Zero(num_coeffs(lmax_), channels)) {
    if (lmax_ < 0 || channels < 1)
      throw DomainError("IrrepsCoeffs: lmax must be >= 0 and channels >= 1");
  }

  int channels() const { return static_cast<int>(data.cols()); }

  auto degree(int l) { return data.middleRows(l * l, 2 * l + 1); }
  auto degree(int l) const { return data.middleRows(l * l, 2 * l + 1); }

  double& at(int l, int m, int c) { return data(lm_index(l, m), c); }
  double at(int l, int m, int c) const { return data(lm_index(l, m), c); }

  bool all_finite() const { return data.allFinite(); }
};

}  // namespace escn
