#include <escn/rotations.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <mutex>
#include <numbers>
#include <span>

namespace escn::rot {

namespace {

constexpr double kAntipodalTol = 1e-9;

std::vector<Eigen::MatrixXd> build_swap_matrices() {
  const int lmax = kMaxWignerDegree;
  // Degree-2*lmax products integrate exactly on this grid.
  const sphere::SphereGrid grid =
      sphere::make_grid(sphere::GridKind::gauss_legendre, lmax + 2, 2 * lmax + 3);
  const Mat3 swap = rotation_about_z(std::numbers::pi / 2.0);
  const int k = num_coeffs(lmax);
  Eigen::MatrixXd base(static_cast<Eigen::Index>(grid.size()), k);
  Eigen::MatrixXd moved(static_cast<Eigen::Index>(grid.size()), k);
  Eigen::VectorXd row(k);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(p);
    sphere::eval_real_sh(lmax, grid.points[p], std::span<double>(row.data(), k));
    base.row(i) = row.transpose() * grid.weights[p];
    const Vec3 q = (swap * grid.points[p]).normalized();
    sphere::eval_real_sh(lmax, q, std::span<double>(row.data(), k));
    moved.row(i) = row.transpose();
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(lmax + 1);
  for (int l = 0; l <= lmax; ++l) {
    const int off = l * l, n = 2 * l + 1;
    out.push_back(moved.middleCols(off, n).transpose() * base.middleCols(off, n));
  }
  return out;
}

}  // namespace

Mat3 rotation_about_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rotation_about_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 rotation_about_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

bool is_rotation(const Mat3& r, double tol) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Mat3 align_to_y(const sphere::Direction& dir) {
  const Vec3& r = dir.vec();
  const Vec3 y = Vec3::UnitY();
  const double cos_angle = r.dot(y);
  if (std::abs(cos_angle + 1.0) < kAntipodalTol) return rotation_about_x(std::numbers::pi);
  const Vec3 axis = r.cross(y);
  const double sin_angle = axis.norm();
  if (sin_angle == 0.0) return Mat3::Identity();
  const double angle = std::atan2(sin_angle, cos_angle);
  return Eigen::AngleAxisd(angle, axis / sin_angle).toRotationMatrix();
}

EulerYXY euler_yxy(const Mat3& r) {
  EulerYXY e;
  const double sb = std::hypot(r(0, 1), r(2, 1));
  e.beta = std::atan2(sb, r(1, 1));
  e.alpha = sb > 0.0 ? std::atan2(r(0, 1), r(2, 1)) : 0.0;
  // Whatever is left must be a rotation about y; absorbing it into gamma keeps
  // the factorisation accurate near the poles where alpha is ill-conditioned.
  const Mat3 rest =
      rotation_about_x(e.beta).transpose() * rotation_about_y(e.alpha).transpose() * r;
  e.gamma = std::atan2(rest(0, 2), rest(0, 0));
  return e;
}

Mat3 compose(const EulerYXY& e) {
  return rotation_about_y(e.alpha) * rotation_about_x(e.beta) * rotation_about_y(e.gamma);
}

const Eigen::MatrixXd& swap_matrix(int l) {
  static const std::vector<Eigen::MatrixXd> cache = build_swap_matrices();
  if (l < 0 || l > kMaxWignerDegree)
    throw DomainError("swap_matrix: degree outside supported range");
  return cache[static_cast<std::size_t>(l)];
}

WignerDBlocks WignerDBlocks::transposed() const {
  WignerDBlocks t;
  t.lmax = lmax;
  for (const auto& b : blocks) t.blocks.push_back(b.transpose());
  return t;
}

WignerDBlocks wigner_d(int lmax, const Mat3& r) {
  if (lmax < 0 || lmax > kMaxWignerDegree)
    throw DomainError("wigner_d: lmax outside supported range");
  const FactoredRotation rot(r, lmax);
  IrrepsCoeffs eye(lmax, num_coeffs(lmax));
  eye.data.setIdentity();
  rot.apply(eye);
  WignerDBlocks d;
  d.lmax = lmax;
  for (int l = 0; l <= lmax; ++l)
    d.blocks.push_back(eye.data.block(l * l, l * l, 2 * l + 1, 2 * l + 1));
  return d;
}

IrrepsCoeffs rotate_irreps(const IrrepsCoeffs& x, const WignerDBlocks& d) {
  if (x.lmax != d.lmax) throw DomainError("rotate_irreps: lmax mismatch");
  IrrepsCoeffs out(x.lmax, x.channels());
  for (int l = 0; l <= x.lmax; ++l) out.degree(l).noalias() = d.block(l) * x.degree(l);
  return out;
}

FactoredRotation::FactoredRotation(const Mat3& r, int lmax) : r_(r), lmax_(lmax) {
  if (lmax < 0 || lmax > kMaxWignerDegree)
    throw DomainError("FactoredRotation: lmax outside supported range");
  const EulerYXY e = euler_yxy(r);
  alpha_ = make_trig(e.alpha, lmax);
  beta_ = make_trig(e.beta, lmax);
  gamma_ = make_trig(e.gamma, lmax);
}

FactoredRotation::Trig FactoredRotation::make_trig(double angle, int lmax) {
  Trig t;
  for (int m = 0; m <= lmax; ++m) {
    t.c.push_back(std::cos(m * angle));
    t.s.push_back(std::sin(m * angle));
  }
  return t;
}

void FactoredRotation::apply_y(CoeffMatrix& x, int lmax, const Trig& t, bool inverse) {
  const Eigen::Index channels = x.cols();
  for (int l = 1; l <= lmax; ++l) {
    for (int k = 1; k <= l; ++k) {
      const double c = t.c[k];
      const double s = inverse ? -t.s[k] : t.s[k];
      double* sin_row = x.row(lm_index(l, k)).data();
      double* cos_row = x.row(lm_index(l, -k)).data();
      for (Eigen::Index ch = 0; ch < channels; ++ch) {
        const double a = sin_row[ch], b = cos_row[ch];
        sin_row[ch] = c * a + s * b;
        cos_row[ch] = c * b - s * a;
      }
    }
  }
}

void FactoredRotation::apply(IrrepsCoeffs& x) const {
  if (x.lmax > lmax_) throw DomainError("FactoredRotation: coefficient lmax too large");
  CoeffMatrix tmp;
  apply_y(x.data, x.lmax, gamma_, false);
  for (int l = 1; l <= x.lmax; ++l) {
    tmp.noalias() = swap_matrix(l) * x.degree(l);
    x.degree(l) = tmp;
  }
  apply_y(x.data, x.lmax, beta_, false);
  for (int l = 1; l <= x.lmax; ++l) {
    tmp.noalias() = swap_matrix(l).transpose() * x.degree(l);
    x.degree(l) = tmp;
  }
  apply_y(x.data, x.lmax, alpha_, false);
}

void FactoredRotation::apply_inverse(IrrepsCoeffs& x) const {
  if (x.lmax > lmax_) throw DomainError("FactoredRotation: coefficient lmax too large");
  CoeffMatrix tmp;
  apply_y(x.data, x.lmax, alpha_, true);
  for (int l = 1; l <= x.lmax; ++l) {
    tmp.noalias() = swap_matrix(l) * x.degree(l);
    x.degree(l) = tmp;
  }
  apply_y(x.data, x.lmax, beta_, true);
  for (int l = 1; l <= x.lmax; ++l) {
    tmp.noalias() = swap_matrix(l).transpose() * x.degree(l);
    x.degree(l) = tmp;
  }
  apply_y(x.data, x.lmax, gamma_, true);
}

}  // namespace escn::rot
