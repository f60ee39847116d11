#pragma once

// Clebsch-Gordan coefficients in the complex SU(2) basis and in the real
// basis of escn::sphere harmonics, the compact m-indexed form of the
// filter-aligned (m_f = 0) slice, and the h <-> h~ reparametrisation.

#include <escn/types.hpp>

#include <iosfwd>
#include <memory>
#include <vector>

namespace escn::cg {

/// <l_i m_i; l_f m_f | l_o m_o>, Condon-Shortley convention. Evaluated with
/// the Racah sum in exact rational arithmetic; only the final square root is
/// taken in extended precision and rounded to double.
/// Returns 0 when the triangle rule or m_o = m_i + m_f fails.
double su2_cg(int li, int mi, int lf, int mf, int lo, int mo);

inline bool triangle(int li, int lf, int lo) {
  return lf >= (li > lo ? li - lo : lo - li) && lf <= li + lo;
}

enum class Basis { complex_su2, real_so3 };

const char* to_string(Basis basis);

/// Dense coefficient block for one (l_i, l_f, l_o), indexed [m_i][m_f][m_o].
struct CGBlock {
  int li = 0, lf = 0, lo = 0;
  std::vector<double> values;

  int stride_f() const { return 2 * lo + 1; }
  int stride_i() const { return (2 * lf + 1) * (2 * lo + 1); }
  std::size_t offset(int mi, int mf, int mo) const {
    return static_cast<std::size_t>((mi + li) * stride_i() + (mf + lf) * stride_f() + (mo + lo));
  }
  double operator()(int mi, int mf, int mo) const { return values[offset(mi, mf, mo)]; }
};

/// Every triangle-admissible block with l_i, l_o <= lmax_io and
/// l_f <= lmax_filter.
class CGTable {
 public:
  CGTable(Basis basis, int lmax_io, int lmax_filter);

  Basis basis() const { return basis_; }
  int lmax_io() const { return lmax_io_; }
  int lmax_filter() const { return lmax_filter_; }

  /// nullptr when the triple is not admissible or outside the bounds.
  const CGBlock* find(int li, int lf, int lo) const;
  const CGBlock& block(int li, int lf, int lo) const;
  double at(int li, int mi, int lf, int mf, int lo, int mo) const;

  const std::vector<CGBlock>& blocks() const { return blocks_; }
  std::size_t entry_count() const;

  /// Largest |Im| discarded when converting to the real basis.
  double imaginary_residue() const { return imag_residue_; }

 private:
  friend std::shared_ptr<const CGTable> build_table(Basis, int, int);
  friend std::shared_ptr<const CGTable> read_table(std::istream&);
  int slot(int li, int lf, int lo) const;
  void insert(CGBlock block);

  Basis basis_;
  int lmax_io_, lmax_filter_;
  std::vector<CGBlock> blocks_;
  std::vector<int> index_;
  double imag_residue_ = 0.0;
};

/// Cached, immutable tables. lmax_io <= 10, lmax_filter <= 20.
std::shared_ptr<const CGTable> su2_cg_table(int lmax_io, int lmax_filter);
std::shared_ptr<const CGTable> real_cg_table(int lmax_io, int lmax_filter);
inline std::shared_ptr<const CGTable> real_cg_table(int lmax) {
  return real_cg_table(lmax, lmax);
}

/// Plain-text dump, 17 significant digits; read_table(write_table(t))
/// reproduces the same text.
void write_table(std::ostream& out, const CGTable& table);
std::shared_ptr<const CGTable> read_table(std::istream& in);

/// (c)_m for m in [-min(l_i,l_o), min(l_i,l_o)] taken from the m_f = 0 slice:
///   m > 0 : C(m_i = m -> m_o = m)
///   m = 0 : C(0 -> 0)
///   m < 0 : C(m_i = |m| -> m_o = -|m|)
struct CompactCG {
  int li = 0, lf = 0, lo = 0;
  std::vector<double> values;

  int mmax() const { return li < lo ? li : lo; }
  double at(int m) const { return values[static_cast<std::size_t>(m + mmax())]; }
};

CompactCG compact_cg(int li, int lf, int lo, const CGTable& table);

/// Compact form of every block of a real-basis table, in table order.
struct CompactTable {
  int lmax_io = 0, lmax_filter = 0;
  std::vector<CompactCG> entries;
};

CompactTable compact_table(const CGTable& table);
void write_compact(std::ostream& out, const CompactTable& table);
CompactTable read_compact(std::istream& in);

/// Value of the order-0 harmonic of degree l at the pole (0, 1, 0).
double pole_value(int l);

/// Scalars indexed by (l_i, l_o) pairs with l_i, l_o <= lmax. Each pair owns
/// 2 min(l_i, l_o) + 1 consecutive rows; columns are channels.
class PairTensor {
 public:
  PairTensor() = default;
  PairTensor(int lmax, int channels);

  int lmax() const { return lmax_; }
  int channels() const { return static_cast<int>(values.cols()); }
  static int pair_width(int li, int lo) { return 2 * (li < lo ? li : lo) + 1; }
  int pair_offset(int li, int lo) const {
    return offsets_[static_cast<std::size_t>(li * (lmax_ + 1) + lo)];
  }

  CoeffMatrix values;

 private:
  int lmax_ = 0;
  std::vector<int> offsets_;
};

/// h_{l_i, l_f, l_o}; row = pair_offset(l_i, l_o) + (l_f - |l_i - l_o|).
class HTensor : public PairTensor {
 public:
  using PairTensor::PairTensor;
  double& operator()(int li, int lf, int lo, int c = 0);
  double operator()(int li, int lf, int lo, int c = 0) const;
};

/// h~^{(l_i, l_o)}_m; row = pair_offset(l_i, l_o) + m + min(l_i, l_o).
class HTildeTensor : public PairTensor {
 public:
  using PairTensor::PairTensor;
  double& operator()(int li, int lo, int m, int c = 0);
  double operator()(int li, int lo, int m, int c = 0) const;
};

/// h~_m = sum_{l_f} h_{l_i,l_f,l_o} (c_{l_i,l_f,l_o})_m Y^{l_f}_0(0,1,0).
/// The pole value makes h~ reproduce the tensor product with the actual
/// filter harmonics rather than the unit delta.
HTildeTensor h_to_htilde(const HTensor& h, const CGTable& table);

/// Inverse of h_to_htilde, solving one square system per (l_i, l_o).
HTensor htilde_to_h(const HTildeTensor& ht, const CGTable& table);

}  // namespace escn::cg
