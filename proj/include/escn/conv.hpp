#pragma once

// Three equivalent equivariant convolutions of node coefficients x with the
// edge filter h Y(r):
//   naive_conv    full Clebsch-Gordan tensor product (reference)
//   aligned_conv  rotate r onto +y, contract only the m_f = 0 slice
//   so2_conv      rotate, then per-order 2x2 mixing on coefficients grouped by m

#include <escn/cg.hpp>
#include <escn/rotations.hpp>
#include <escn/sphere_math.hpp>
#include <escn/types.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace escn::conv {

struct ConvSpec {
  int lmax = 0;
  int mmax = 0;
  int channels = 1;
  std::vector<std::array<int, 3>> triples;  // (l_i, l_f, l_o)

  /// Every triangle-admissible triple with l_i, l_o <= lmax; mmax < 0 means lmax.
  static ConvSpec full(int lmax, int channels, int mmax = -1);

  /// Throws DomainError on bad bounds or a non-admissible triple.
  void validate() const;
};

/// Per-order weights of the SO(2) mixing. For order m, A[m] and B[m] have
/// rows (l_o - m) * (L + 1 - m) + (l_i - m) for l_i, l_o in [m, L] and one
/// column per channel. B[0] is empty.
struct SO2Weights {
  int lmax = 0;
  int mmax = 0;
  int channels = 0;
  std::vector<CoeffMatrix> a, b;

  SO2Weights() = default;
  SO2Weights(int lmax, int mmax, int channels);
  static SO2Weights from_htilde(const cg::HTildeTensor& ht, int mmax);

  static int row(int lmax, int m, int li, int lo) { return (lo - m) * (lmax + 1 - m) + (li - m); }
};

IrrepsCoeffs naive_conv(const IrrepsCoeffs& x, const sphere::Direction& dir,
                        const cg::HTensor& h, const ConvSpec& spec);

IrrepsCoeffs aligned_conv(const IrrepsCoeffs& x, const sphere::Direction& dir,
                          const cg::HTensor& h, const ConvSpec& spec);

IrrepsCoeffs so2_conv(const IrrepsCoeffs& x, const sphere::Direction& dir,
                      const cg::HTildeTensor& ht, const ConvSpec& spec);
IrrepsCoeffs so2_conv(const IrrepsCoeffs& x, const sphere::Direction& dir,
                      const SO2Weights& w, const ConvSpec& spec);

/// so2_conv with a caller-chosen alignment; `align` must carry the edge
/// direction onto +y (any roll about y is allowed).
IrrepsCoeffs so2_conv_in_frame(const IrrepsCoeffs& x, const Mat3& align,
                               const SO2Weights& w, const ConvSpec& spec);

/// Coefficients of an aligned frame regrouped by order. orders[k] has one
/// row per degree l = k..L; for k > 0 the columns are [x_{l,-k} | x_{l,k}]
/// (2C columns), for k = 0 just x_{l,0} (C columns).
struct SO2Irreps {
  int lmax = 0;
  int channels = 0;
  std::vector<CoeffMatrix> orders;
};

SO2Irreps so2_project(const IrrepsCoeffs& x);
IrrepsCoeffs so2_unproject(const SO2Irreps& w);

/// Order-grouped mixing in the aligned frame; orders above w.mmax give zero.
SO2Irreps so2_mix(const SO2Irreps& in, const SO2Weights& w);

enum class Path { naive, so2 };

const char* to_string(Path path);
Path path_from_string(const std::string& name);

struct CostReport {
  Path path = Path::naive;
  int lmax = 0, mmax = 0, channels = 0;
  std::uint64_t multiplies = 0;
  std::uint64_t adds = 0;
  std::uint64_t peak_live = 0;  // scalars held in working buffers
  int edges = 0;
  double wall_seconds = 0.0;    // 0 when edges == 0
};

/// Exact per-edge operation counts of the coefficient arithmetic in each
/// path's loops. When edges > 0 the path is also timed on that many seeded
/// random edges.
CostReport count_cost(Path path, int lmax, int mmax, int channels, int edges = 0,
                      std::uint64_t seed = 0);

}  // namespace escn::conv
