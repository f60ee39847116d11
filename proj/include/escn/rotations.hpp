#pragma once

#include <escn/sphere_math.hpp>
#include <escn/types.hpp>

#include <Eigen/Core>

#include <random>
#include <vector>

namespace escn::rot {

/// Largest degree for which Wigner-D blocks can be built.
inline constexpr int kMaxWignerDegree = 24;

Mat3 rotation_about_x(double angle);
Mat3 rotation_about_y(double angle);
Mat3 rotation_about_z(double angle);

/// R^T R = I and det R = +1 within tol.
bool is_rotation(const Mat3& r, double tol = 1e-12);

/// Uniformly distributed rotation (normalised Gaussian quaternion).
Mat3 random_rotation(std::mt19937_64& rng);

/// Rotation taking `dir` onto +y along the great circle (axis dir x y).
/// The antipodal direction maps through a half turn about x.
Mat3 align_to_y(const sphere::Direction& dir);

/// R = Ry(alpha) Rx(beta) Ry(gamma).
struct EulerYXY {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

EulerYXY euler_yxy(const Mat3& r);
Mat3 compose(const EulerYXY& e);

/// Fixed per-degree change of basis J_l = D^l(Rz(pi/2)), which carries the
/// x axis onto the primary y axis. Computed once by quadrature projection.
const Eigen::MatrixXd& swap_matrix(int l);

/// Block-diagonal Wigner-D operator with Y(R r) = D(R) Y(r).
struct WignerDBlocks {
  int lmax = 0;
  std::vector<Eigen::MatrixXd> blocks;

  const Eigen::MatrixXd& block(int l) const { return blocks.at(static_cast<std::size_t>(l)); }
  WignerDBlocks transposed() const;
};

WignerDBlocks wigner_d(int lmax, const Mat3& r);

IrrepsCoeffs rotate_irreps(const IrrepsCoeffs& x, const WignerDBlocks& d);

/// D(R) applied as Dy(alpha) J^T Dy(beta) J Dy(gamma) without forming D.
/// Costs O(C L^3) per application.
class FactoredRotation {
 public:
  FactoredRotation(const Mat3& r, int lmax);

  int lmax() const { return lmax_; }
  const Mat3& matrix() const { return r_; }

  /// x <- D(R) x
  void apply(IrrepsCoeffs& x) const;
  /// x <- D(R)^T x = D(R^-1) x
  void apply_inverse(IrrepsCoeffs& x) const;

 private:
  // cos/sin(m * angle) for m = 0..lmax, one table per Euler angle.
  struct Trig {
    std::vector<double> c, s;
  };
  static Trig make_trig(double angle, int lmax);
  static void apply_y(CoeffMatrix& x, int lmax, const Trig& t, bool inverse);

  Mat3 r_;
  int lmax_;
  Trig alpha_, beta_, gamma_;
};

}  // namespace escn::rot
