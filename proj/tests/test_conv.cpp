#include "support.hpp"

#include <escn/conv.hpp>

#include <numbers>

using namespace escn;
using namespace escn::conv;
using escn::testing::for_all;
using escn::testing::max_abs;

namespace {

cg::HTensor random_h(int lmax, int channels, std::mt19937_64& rng) {
  cg::HTensor h(lmax, channels);
  testing::fill_normal(h.values.data(), h.values.size(), rng);
  return h;
}

}  // namespace

TEST_CASE("ConvSpec validation") {
  CHECK_NOTHROW(ConvSpec::full(3, 2).validate());
  CHECK_THROWS_AS(ConvSpec::full(11, 1), DomainError);
  ConvSpec s = ConvSpec::full(2, 1);
  s.triples.push_back({0, 3, 1});
  CHECK_THROWS_AS(s.validate(), DomainError);
  CHECK(ConvSpec::full(2, 1).triples.size() == 19);
}

TEST_CASE("degree-0 convolution is a scalar product") {
  std::mt19937_64 rng(1);
  const IrrepsCoeffs x = testing::random_coeffs(0, 3, rng);
  const auto dir = testing::random_direction(rng);
  const cg::HTensor h = random_h(0, 3, rng);
  const auto spec = ConvSpec::full(0, 3);
  const IrrepsCoeffs y = naive_conv(x, dir, h, spec);
  const double y00 = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  for (int c = 0; c < 3; ++c) CHECK(y.data(0, c) == doctest::Approx(x.data(0, c) * h(0, 0, 0, c) * y00).epsilon(1e-15));
  const auto ht = cg::h_to_htilde(h, *cg::real_cg_table(0, 0));
  CHECK(max_abs(so2_conv(x, dir, ht, spec).data - y.data) < 1e-15);
}

TEST_CASE("zero input gives zero output on every path") {
  std::mt19937_64 rng(2);
  const auto spec = ConvSpec::full(3, 2);
  const IrrepsCoeffs x(3, 2);
  const auto dir = testing::random_direction(rng);
  const cg::HTensor h = random_h(3, 2, rng);
  CHECK(max_abs(naive_conv(x, dir, h, spec).data) == 0.0);
  CHECK(max_abs(aligned_conv(x, dir, h, spec).data) == 0.0);
  CHECK(max_abs(so2_conv(x, dir, cg::h_to_htilde(h, *cg::real_cg_table(3, 6)), spec).data) == 0.0);
}

TEST_CASE("naive convolution is rotation equivariant") {
  for_all(20, 3, [](std::mt19937_64& rng) {
    const int L = 3;
    const auto spec = ConvSpec::full(L, 2);
    const IrrepsCoeffs x = testing::random_coeffs(L, 2, rng);
    const auto dir = testing::random_direction(rng);
    const cg::HTensor h = random_h(L, 2, rng);
    const Mat3 r = rot::random_rotation(rng);
    const auto d = rot::wigner_d(L, r);
    const IrrepsCoeffs lhs = naive_conv(rot::rotate_irreps(x, d), sphere::Direction::normalized(r * dir.vec()), h, spec);
    const IrrepsCoeffs rhs = rot::rotate_irreps(naive_conv(x, dir, h, spec), d);
    CHECK(max_abs(lhs.data - rhs.data) < 1e-12);
  });
}

TEST_CASE("three paths agree") {
  for (int L : {1, 2, 3, 5}) {
    const auto table = cg::real_cg_table(L, 2 * L);
    for_all(10, 4 + static_cast<std::uint64_t>(L), [&](std::mt19937_64& rng) {
      const auto spec = ConvSpec::full(L, 3);
      const IrrepsCoeffs x = testing::random_coeffs(L, 3, rng);
      const auto dir = testing::random_direction(rng);
      const cg::HTensor h = random_h(L, 3, rng);
      const IrrepsCoeffs ref = naive_conv(x, dir, h, spec);
      CHECK(max_abs(aligned_conv(x, dir, h, spec).data - ref.data) < 1e-12);
      CHECK(max_abs(so2_conv(x, dir, cg::h_to_htilde(h, *table), spec).data - ref.data) < 1e-12);
    });
  }
}

TEST_CASE("edge along the poles") {
  std::mt19937_64 rng(5);
  const int L = 3;
  const auto spec = ConvSpec::full(L, 1);
  const IrrepsCoeffs x = testing::random_coeffs(L, 1, rng);
  const cg::HTensor h = random_h(L, 1, rng);
  const auto ht = cg::h_to_htilde(h, *cg::real_cg_table(L, 2 * L));
  for (const Vec3 v : {Vec3(0, 1, 0), Vec3(0, -1, 0)}) {
    const sphere::Direction d(v);
    CHECK(max_abs(so2_conv(x, d, ht, spec).data - naive_conv(x, d, h, spec).data) < 1e-12);
  }
}

TEST_CASE("so2 result does not depend on the roll about the edge") {
  for_all(20, 6, [](std::mt19937_64& rng) {
    const int L = 4;
    const auto spec = ConvSpec::full(L, 2);
    const IrrepsCoeffs x = testing::random_coeffs(L, 2, rng);
    const auto dir = testing::random_direction(rng);
    const auto w = SO2Weights::from_htilde(cg::h_to_htilde(random_h(L, 2, rng), *cg::real_cg_table(L, 2 * L)), L);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const Mat3 a = rot::align_to_y(dir);
    const Mat3 b = rot::rotation_about_y(angle(rng)) * a;
    CHECK(max_abs(so2_conv_in_frame(x, a, w, spec).data - so2_conv_in_frame(x, b, w, spec).data) < 1e-12);
  });
}

TEST_CASE("SO(2) mixing commutes with rolls about the primary axis") {
  for_all(20, 7, [](std::mt19937_64& rng) {
    const int L = 4;
    SO2Weights w(L, 2, 2);
    for (auto& m : w.a) testing::fill_normal(m.data(), m.size(), rng);
    for (auto& m : w.b) testing::fill_normal(m.data(), m.size(), rng);
    const IrrepsCoeffs x = testing::random_coeffs(L, 2, rng);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const rot::FactoredRotation roll(rot::rotation_about_y(angle(rng)), L);
    IrrepsCoeffs rx = x;
    roll.apply(rx);
    IrrepsCoeffs lhs = so2_unproject(so2_mix(so2_project(rx), w));
    IrrepsCoeffs rhs = so2_unproject(so2_mix(so2_project(x), w));
    roll.apply(rhs);
    CHECK(max_abs(lhs.data - rhs.data) < 1e-12);
    // orders above mmax are cut
    for (int l = 3; l <= L; ++l)
      for (int m : {-l, -3, 3, l}) CHECK(rhs.at(l, m, 0) == doctest::Approx(0.0).epsilon(1e-12));
  });
}

TEST_CASE("order grouping round trips") {
  std::mt19937_64 rng(8);
  const IrrepsCoeffs x = testing::random_coeffs(5, 3, rng);
  const SO2Irreps g = so2_project(x);
  REQUIRE(g.orders.size() == 6);
  CHECK(g.orders[0].rows() == 6);
  CHECK(g.orders[0].cols() == 3);
  CHECK(g.orders[2].rows() == 4);
  CHECK(g.orders[2].cols() == 6);
  CHECK(g.orders[2](1, 0) == x.at(3, -2, 0));
  CHECK(g.orders[2](1, 3) == x.at(3, 2, 0));
  CHECK(so2_unproject(g).data == x.data);
}

TEST_CASE("weights layout") {
  CHECK(SO2Weights::row(4, 0, 0, 0) == 0);
  CHECK(SO2Weights::row(4, 1, 2, 1) == 1);
  CHECK(SO2Weights::row(4, 1, 1, 2) == 4);
  const SO2Weights w(4, 2, 3);
  CHECK(w.a.size() == 3);
  CHECK(w.a[1].rows() == 16);
  CHECK(w.b[0].size() == 0);
}

TEST_CASE("operation counts") {
  SUBCASE("so2 is cheaper from degree 1 up and both grow") {
    std::uint64_t prev_naive = 0, prev_so2 = 0;
    for (int L = 1; L <= 8; ++L) {
      const auto n = count_cost(Path::naive, L, L, 16);
      const auto s = count_cost(Path::so2, L, L, 16);
      CHECK(n.multiplies > s.multiplies);
      CHECK(n.multiplies > prev_naive);
      CHECK(s.multiplies > prev_so2);
      prev_naive = n.multiplies;
      prev_so2 = s.multiplies;
      CHECK(n.wall_seconds == 0.0);
    }
  }
  SUBCASE("naive count grows like the squared coefficient count") {
    const auto a = count_cost(Path::naive, 6, 6, 1).multiplies;
    const auto b = count_cost(Path::naive, 6, 6, 2).multiplies;
    CHECK(b > a);
  }
  SUBCASE("timed run") {
    const auto r = count_cost(Path::so2, 2, 2, 4, 10, 1);
    CHECK(r.edges == 10);
    CHECK(r.wall_seconds > 0.0);
  }
  CHECK(path_from_string(to_string(Path::so2)) == Path::so2);
  CHECK_THROWS(path_from_string("fft"));
  CHECK_THROWS_AS(count_cost(Path::naive, 2, 2, 1, -1), DomainError);
}
