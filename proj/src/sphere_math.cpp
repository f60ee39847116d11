#include <escn/sphere_math.hpp>

#include <Eigen/Dense>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace escn::sphere {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kUnitTol = 1e-9;

inline int tri_index(int l, int m) { return l * (l + 1) / 2 + m; }

// Orthonormal associated Legendre values divided by sin(theta)^m, for
// 0 <= m <= l <= lmax, stored at tri_index(l, m). Upward recursion in l with
// pre-normalised coefficients; no factorials are formed.
void legendre_reduced(int lmax, double cos_theta, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(tri_index(lmax, lmax) + 1), 0.0);
  const double x = cos_theta;
  double diag = 1.0 / std::sqrt(4.0 * kPi);
  for (int m = 0; m <= lmax; ++m) {
    if (m > 0) diag *= std::sqrt((2.0 * m + 1.0) / (2.0 * m));
    out[tri_index(m, m)] = diag;
    if (m + 1 > lmax) continue;
    out[tri_index(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * diag;
    for (int l = m + 2; l <= lmax; ++l) {
      const double ll = static_cast<double>(l) * l;
      const double mm = static_cast<double>(m) * m;
      const double a = std::sqrt((4.0 * ll - 1.0) / (ll - mm));
      const double lp = static_cast<double>(l - 1) * (l - 1);
      const double b = std::sqrt((lp - mm) / (4.0 * lp - 1.0));
      out[tri_index(l, m)] =
          a * (x * out[tri_index(l - 1, m)] - b * out[tri_index(l - 2, m)]);
    }
  }
}

void check_unit(const Vec3& v, const char* what) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > kUnitTol)
    throw DomainError(std::string(what) + ": direction is not a unit vector");
}

}  // namespace

Direction::Direction(const Vec3& v) : v_(v) { check_unit(v, "Direction"); }

Direction Direction::normalized(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw DomainError("Direction: cannot normalise a zero or non-finite vector");
  return Direction(v / n);
}

Direction Direction::from_angles(double theta, double phi) {
  const double s = std::sin(theta);
  return Direction(Vec3(s * std::sin(phi), std::cos(theta), s * std::cos(phi)));
}

double Direction::theta() const {
  const double rho = std::hypot(v_.x(), v_.z());
  return std::atan2(rho, v_.y());
}

double Direction::phi() const {
  double p = std::atan2(v_.x(), v_.z());
  if (p < 0.0) p += 2.0 * kPi;
  if (p >= 2.0 * kPi) p = 0.0;
  return p;
}

double assoc_legendre(int l, int m, double theta) {
  if (m < 0 || m > l)
    throw DomainError("assoc_legendre: require 0 <= m <= l");
  if (!(theta >= 0.0 && theta <= kPi))
    throw DomainError("assoc_legendre: theta must lie in [0, pi]");
  std::vector<double> table;
  legendre_reduced(l, std::cos(theta), table);
  double value = table[tri_index(l, m)] * std::pow(std::sin(theta), m);
  if (m > 0) value *= std::numbers::sqrt2;
  return value;
}

void eval_real_sh(int lmax, const Vec3& unit, std::span<double> out) {
  thread_local std::vector<double> leg;
  legendre_reduced(lmax, unit.y(), leg);
  // (z + i x)^m = sin(theta)^m exp(i m phi)
  double cm = 1.0, sm = 0.0;
  for (int m = 0; m <= lmax; ++m) {
    if (m > 0) {
      const double c = cm * unit.z() - sm * unit.x();
      const double s = sm * unit.z() + cm * unit.x();
      cm = c;
      sm = s;
    }
    for (int l = m; l <= lmax; ++l) {
      const double p = leg[tri_index(l, m)];
      if (m == 0) {
        out[lm_index(l, 0)] = p;
      } else {
        out[lm_index(l, m)] = std::numbers::sqrt2 * p * sm;
        out[lm_index(l, -m)] = std::numbers::sqrt2 * p * cm;
      }
    }
  }
}

Eigen::VectorXd eval_real_sh(int lmax, const Direction& dir) {
  if (lmax < 0) throw DomainError("eval_real_sh: lmax must be >= 0");
  Eigen::VectorXd out(num_coeffs(lmax));
  eval_real_sh(lmax, dir.vec(), std::span<double>(out.data(), out.size()));
  return out;
}

double eval_circular_harmonic(int k, int j, double phi) {
  if (k < 0) throw DomainError("eval_circular_harmonic: k must be >= 0");
  if (j == 1) return std::sin(k * phi);
  if (j == -1) return std::cos(k * phi);
  throw DomainError("eval_circular_harmonic: j must be +1 or -1");
}

Eigen::VectorXd sphere_function_eval(const IrrepsCoeffs& x, const Direction& dir) {
  const Eigen::VectorXd y = eval_real_sh(x.lmax, dir);
  return x.data.transpose() * y;
}

const char* to_string(GridKind kind) {
  switch (kind) {
    case GridKind::equiangular: return "equiangular";
    case GridKind::gauss_legendre: return "gauss-legendre";
    case GridKind::fibonacci: return "fibonacci";
  }
  return "?";
}

GridKind grid_kind_from_string(const std::string& name) {
  if (name == "equiangular") return GridKind::equiangular;
  if (name == "gauss-legendre" || name == "gauss_legendre") return GridKind::gauss_legendre;
  if (name == "fibonacci") return GridKind::fibonacci;
  throw DomainError("unknown grid kind: " + name);
}

namespace {

SphereGrid tensor_grid(GridKind kind, const std::vector<double>& cos_nodes,
                       const std::vector<double>& cos_weights, int n_phi) {
  SphereGrid grid;
  grid.kind = kind;
  grid.n_theta = static_cast<int>(cos_nodes.size());
  grid.n_phi = n_phi;
  const double dphi = 2.0 * kPi / n_phi;
  for (std::size_t i = 0; i < cos_nodes.size(); ++i) {
    const double y = cos_nodes[i];
    const double s = std::sqrt(std::max(0.0, 1.0 - y * y));
    for (int k = 0; k < n_phi; ++k) {
      const double phi = k * dphi;
      grid.points.emplace_back(s * std::sin(phi), y, s * std::cos(phi));
      grid.weights.push_back(cos_weights[i] * dphi);
    }
  }
  return grid;
}

}  // namespace

SphereGrid make_grid(GridKind kind, int n_theta, int n_phi) {
  if (n_theta < 1) throw DomainError("make_grid: resolution must be >= 1");
  if (kind == GridKind::fibonacci) return make_fibonacci_grid(n_theta);
  if (n_phi < 1) throw DomainError("make_grid: resolution must be >= 1");

  std::vector<double> nodes(n_theta), weights(n_theta);
  if (kind == GridKind::equiangular) {
    // Fejer's first rule on cos(theta) at theta_j = (2j+1) pi / (2n).
    const int n = n_theta;
    for (int j = 0; j < n; ++j) {
      const double theta = (2.0 * j + 1.0) * kPi / (2.0 * n);
      double acc = 0.0;
      for (int k = 1; k <= n / 2; ++k)
        acc += std::cos(2.0 * k * theta) / (4.0 * k * k - 1.0);
      nodes[j] = std::cos(theta);
      weights[j] = 2.0 / n * (1.0 - 2.0 * acc);
    }
  } else {
    std::unique_ptr<gsl_integration_glfixed_table,
                    decltype(&gsl_integration_glfixed_table_free)>
        table(gsl_integration_glfixed_table_alloc(n_theta),
              &gsl_integration_glfixed_table_free);
    for (int j = 0; j < n_theta; ++j)
      gsl_integration_glfixed_point(-1.0, 1.0, j, &nodes[j], &weights[j], table.get());
  }
  return tensor_grid(kind, nodes, weights, n_phi);
}

SphereGrid make_grid(GridKind kind, int resolution) {
  switch (kind) {
    case GridKind::equiangular: return make_grid(kind, resolution, resolution);
    case GridKind::gauss_legendre:
      return make_grid(kind, resolution, std::max(1, 2 * resolution - 1));
    case GridKind::fibonacci: return make_fibonacci_grid(resolution);
  }
  throw DomainError("make_grid: unknown kind");
}

SphereGrid make_fibonacci_grid(int n, int exact_degree) {
  if (n < 1) throw DomainError("make_grid: resolution must be >= 1");
  SphereGrid grid;
  grid.kind = GridKind::fibonacci;
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double y = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i;
    grid.points.emplace_back(r * std::sin(phi), y, r * std::cos(phi));
  }

  int degree = exact_degree;
  if (degree < 0) {
    degree = 0;
    while ((degree + 2) * (degree + 2) * 2 <= n) ++degree;
  }
  const Eigen::VectorXd equal = Eigen::VectorXd::Constant(n, 4.0 * kPi / n);
  for (; degree >= 0; --degree) {
    const int k = num_coeffs(degree);
    if (k > n) continue;
    Eigen::MatrixXd basis(n, k);
    for (int p = 0; p < n; ++p) {
      Eigen::VectorXd row(k);
      eval_real_sh(degree, grid.points[p], std::span<double>(row.data(), k));
      basis.row(p) = row.transpose();
    }
    Eigen::VectorXd target = Eigen::VectorXd::Zero(k);
    target(0) = std::sqrt(4.0 * kPi);
    const Eigen::VectorXd residual = target - basis.transpose() * equal;
    const Eigen::VectorXd lambda =
        (basis.transpose() * basis).ldlt().solve(residual);
    const Eigen::VectorXd w = equal + basis * lambda;
    if ((w.array() > 0.0).all()) {
      grid.weights.assign(w.data(), w.data() + n);
      return grid;
    }
  }
  grid.weights.assign(equal.data(), equal.data() + n);
  return grid;
}

Eigen::MatrixXd grid_basis(const SphereGrid& grid, int lmax) {
  const int k = num_coeffs(lmax);
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(grid.size()), k);
  Eigen::VectorXd row(k);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    eval_real_sh(lmax, grid.points[p], std::span<double>(row.data(), k));
    basis.row(static_cast<Eigen::Index>(p)) = row.transpose();
  }
  return basis;
}

Eigen::MatrixXd sample_on_grid(const IrrepsCoeffs& x, const SphereGrid& grid) {
  return grid_basis(grid, x.lmax) * x.data;
}

IrrepsCoeffs project_to_coeffs(const Eigen::MatrixXd& samples,
                               const SphereGrid& grid, int lmax) {
  if (samples.rows() != static_cast<Eigen::Index>(grid.size()))
    throw DomainError("project_to_coeffs: sample count does not match grid size");
  if (samples.cols() < 1)
    throw DomainError("project_to_coeffs: need at least one channel");
  const Eigen::MatrixXd basis = grid_basis(grid, lmax);
  const Eigen::Map<const Eigen::VectorXd> w(grid.weights.data(),
                                            static_cast<Eigen::Index>(grid.size()));
  IrrepsCoeffs out(lmax, static_cast<int>(samples.cols()));
  out.data = basis.transpose() * (w.asDiagonal() * samples);
  return out;
}

GridTransform::GridTransform(const SphereGrid& grid, int lmax_) : lmax(lmax_) {
  to_grid = grid_basis(grid, lmax);
  const Eigen::Map<const Eigen::VectorXd> w(grid.weights.data(),
                                            static_cast<Eigen::Index>(grid.size()));
  from_grid = to_grid.transpose() * w.asDiagonal();
}

}  // namespace escn::sphere
