#include "support.hpp"

#include <escn/rotations.hpp>

#include <numbers>

using namespace escn;
using namespace escn::rot;
using escn::testing::for_all;

namespace {

Eigen::MatrixXd dense(const WignerDBlocks& d) {
  const int n = num_coeffs(d.lmax);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l <= d.lmax; ++l) m.block(l * l, l * l, 2 * l + 1, 2 * l + 1) = d.block(l);
  return m;
}

}  // namespace

TEST_CASE("elementary rotations") {
  const double a = 0.3;
  CHECK(is_rotation(rotation_about_x(a)));
  CHECK(is_rotation(rotation_about_y(a)));
  CHECK(is_rotation(rotation_about_z(a)));
  CHECK((rotation_about_z(std::numbers::pi / 2) * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
  CHECK((rotation_about_y(std::numbers::pi / 2) * Vec3::UnitZ() - Vec3::UnitX()).norm() < 1e-15);
  CHECK_FALSE(is_rotation(-Mat3::Identity()));
}

TEST_CASE("random rotations are proper and roughly uniform") {
  std::mt19937_64 rng(1);
  Vec3 mean = Vec3::Zero();
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const Mat3 r = random_rotation(rng);
    CHECK(is_rotation(r, 1e-12));
    mean += r * Vec3::UnitY();
  }
  // Uniform rotations send a fixed vector to a uniform point: mean ~ 0.
  CHECK((mean / n).norm() < 0.05);
}

TEST_CASE("align_to_y carries the direction onto +y") {
  for_all(100, 2, [](std::mt19937_64& rng) {
    const auto d = testing::random_direction(rng);
    const Mat3 r = align_to_y(d);
    CHECK(is_rotation(r, 1e-12));
    CHECK((r * d.vec() - Vec3::UnitY()).norm() < 1e-12);
  });
  const sphere::Direction up(Vec3::UnitY()), down(-Vec3::UnitY());
  CHECK((align_to_y(up) - Mat3::Identity()).norm() < 1e-15);
  CHECK((align_to_y(down) * down.vec() - Vec3::UnitY()).norm() < 1e-15);
  CHECK(is_rotation(align_to_y(down)));
}

TEST_CASE("Euler angles round trip") {
  for_all(100, 3, [](std::mt19937_64& rng) {
    const Mat3 r = random_rotation(rng);
    CHECK((compose(euler_yxy(r)) - r).cwiseAbs().maxCoeff() < 1e-12);
  });
  CHECK((compose(euler_yxy(Mat3::Identity())) - Mat3::Identity()).norm() < 1e-15);
}

TEST_CASE("steerability: Y(R r) = D(R) Y(r) at degree 8") {
  for_all(100, 4, [](std::mt19937_64& rng) {
    const Mat3 r = random_rotation(rng);
    const auto dir = testing::random_direction(rng);
    const Eigen::VectorXd lhs = sphere::eval_real_sh(8, sphere::Direction::normalized(r * dir.vec()));
    const Eigen::VectorXd rhs = dense(wigner_d(8, r)) * sphere::eval_real_sh(8, dir);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  });
}

TEST_CASE("Wigner-D is orthogonal and a homomorphism") {
  for_all(50, 5, [](std::mt19937_64& rng) {
    const Mat3 a = random_rotation(rng), b = random_rotation(rng);
    const Eigen::MatrixXd da = dense(wigner_d(6, a)), db = dense(wigner_d(6, b));
    const Eigen::MatrixXd dab = dense(wigner_d(6, a * b));
    CHECK((da * db - dab).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((da.transpose() * da - Eigen::MatrixXd::Identity(49, 49)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((dense(wigner_d(6, a.transpose())) - da.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  });
  CHECK((dense(wigner_d(4, Mat3::Identity())) - Eigen::MatrixXd::Identity(25, 25)).norm() < 1e-13);
}

TEST_CASE("degree-1 block is the rotation matrix in (z, y, x) order") {
  std::mt19937_64 rng(6);
  const Mat3 r = random_rotation(rng);
  const Eigen::MatrixXd d1 = wigner_d(1, r).block(1);
  const int perm[3] = {2, 1, 0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(d1(i, j) == doctest::Approx(r(perm[i], perm[j])).epsilon(1e-12));
}

TEST_CASE("swap matrix carries x onto y") {
  for (int l = 0; l <= 6; ++l) {
    const Eigen::MatrixXd& j = swap_matrix(l);
    CHECK((j.transpose() * j - Eigen::MatrixXd::Identity(2 * l + 1, 2 * l + 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(swap_matrix(kMaxWignerDegree + 1), DomainError);
}

TEST_CASE("factored rotation matches the dense D") {
  for_all(30, 7, [](std::mt19937_64& rng) {
    const Mat3 r = random_rotation(rng);
    const IrrepsCoeffs x = testing::random_coeffs(8, 3, rng);
    const IrrepsCoeffs ref = rotate_irreps(x, wigner_d(8, r));
    IrrepsCoeffs y = x;
    const FactoredRotation f(r, 8);
    f.apply(y);
    CHECK(testing::max_abs(y.data - ref.data) < 1e-11);
    f.apply_inverse(y);
    CHECK(testing::max_abs(y.data - x.data) < 1e-12);
  });
}

TEST_CASE("rotation of a degree-0 signal is the identity") {
  std::mt19937_64 rng(8);
  const IrrepsCoeffs x = testing::random_coeffs(0, 4, rng);
  IrrepsCoeffs y = x;
  FactoredRotation(random_rotation(rng), 0).apply(y);
  CHECK(testing::max_abs(y.data - x.data) < 1e-15);
  CHECK_THROWS_AS(rotate_irreps(testing::random_coeffs(2, 1, rng), wigner_d(3, Mat3::Identity())),
                  DomainError);
}
