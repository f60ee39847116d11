#pragma once

// Real spherical harmonics with +y as the primary (polar) axis.
//
// Colatitude theta is measured from +y, longitude phi rotates about y with
//   x = sin(theta) sin(phi),  y = cos(theta),  z = sin(theta) cos(phi).
// Harmonics are orthonormal over the sphere, without Condon-Shortley phase:
//   Y_m^l = P_|m|^l(theta) sin(|m| phi)   for m > 0
//   Y_m^l = P_|m|^l(theta) cos(|m| phi)   for m <= 0
// where P carries the full normalisation (including sqrt(2) for m != 0).

#include <escn/types.hpp>

#include <Eigen/Core>

#include <span>
#include <vector>

namespace escn::sphere {

/// Unit vector on S^2.
class Direction {
 public:
  /// Throws DomainError unless |v| = 1 within 1e-9.
  explicit Direction(const Vec3& v);

  static Direction normalized(const Vec3& v);
  static Direction from_angles(double theta, double phi);

  const Vec3& vec() const { return v_; }
  double theta() const;
  /// In [0, 2 pi).
  double phi() const;

 private:
  Vec3 v_;
};

double assoc_legendre(int l, int m, double theta);

/// All Y_m^l(dir) for l <= lmax, degree-major.
Eigen::VectorXd eval_real_sh(int lmax, const Direction& dir);

/// Unchecked kernel; `unit` must be normalised and `out` hold (lmax+1)^2.
void eval_real_sh(int lmax, const Vec3& unit, std::span<double> out);

/// sin(k phi) for j = 1, cos(k phi) for j = -1.
double eval_circular_harmonic(int k, int j, double phi);

/// F_x(dir) for each channel.
Eigen::VectorXd sphere_function_eval(const IrrepsCoeffs& x, const Direction& dir);

enum class GridKind { equiangular, gauss_legendre, fibonacci };

const char* to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& name);

struct SphereGrid {
  GridKind kind = GridKind::equiangular;
  int n_theta = 0;  // 0 for fibonacci
  int n_phi = 0;    // 0 for fibonacci
  std::vector<Vec3> points;
  std::vector<double> weights;  // steradians, sum to 4 pi

  std::size_t size() const { return points.size(); }
};

/// Equiangular: n_theta x n_phi with exact Fejer (first rule) weights in
/// cos(theta), so band-limited products of degree < n_theta integrate exactly.
/// Gauss-Legendre: Gauss nodes in cos(theta) x uniform phi.
/// Fibonacci: n_theta points (n_phi ignored).
SphereGrid make_grid(GridKind kind, int n_theta, int n_phi);

/// Single-resolution form: equiangular r x r, gauss-legendre r x (2r-1),
/// fibonacci r points.
SphereGrid make_grid(GridKind kind, int resolution);

/// Weighted spherical Fibonacci set. Weights start at the equal-area value
/// and receive the minimum-norm correction that integrates every harmonic
/// of degree <= exact_degree exactly; exact_degree < 0 picks the largest
/// degree with (d+1)^2 <= n/2.
SphereGrid make_fibonacci_grid(int n = 128, int exact_degree = -1);

/// Rows: grid points, columns: (l, m) for l <= lmax.
Eigen::MatrixXd grid_basis(const SphereGrid& grid, int lmax);

/// Function values F_x at every grid point: points x channels.
Eigen::MatrixXd sample_on_grid(const IrrepsCoeffs& x, const SphereGrid& grid);

/// c_m^l = sum_p w_p Y_m^l(p) f(p) for each channel column of `samples`.
IrrepsCoeffs project_to_coeffs(const Eigen::MatrixXd& samples,
                               const SphereGrid& grid, int lmax);

/// Precomputed sampling/projection matrices for one grid and degree bound.
struct GridTransform {
  int lmax = 0;
  Eigen::MatrixXd to_grid;    // points x coeffs
  Eigen::MatrixXd from_grid;  // coeffs x points (weights folded in)

  GridTransform() = default;
  GridTransform(const SphereGrid& grid, int lmax);
};

}  // namespace escn::sphere
