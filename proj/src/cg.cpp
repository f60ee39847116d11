#include <escn/cg.hpp>

#include <Eigen/Dense>
#include <gmpxx.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

namespace escn::cg {

namespace {

constexpr int kMaxFactorial = 200;
constexpr int kMaxTableIO = 10;
constexpr int kMaxTableFilter = 20;
constexpr double kImagTol = 1e-10;

const mpz_class& factorial(int n) {
  static const std::vector<mpz_class> table = [] {
    std::vector<mpz_class> f(kMaxFactorial + 1);
    f[0] = 1;
    for (int i = 1; i <= kMaxFactorial; ++i) f[i] = f[i - 1] * i;
    return f;
  }();
  if (n < 0 || n > kMaxFactorial) throw DomainError("su2_cg: degree too large");
  return table[static_cast<std::size_t>(n)];
}

using cplx = std::complex<double>;

// Row m of the complex -> real change of basis for degree l, as
// (coefficient on M = -|m|, coefficient on M = +|m|).
std::pair<cplx, cplx> real_row(int m) {
  const double r = 1.0 / std::numbers::sqrt2;
  const int k = std::abs(m);
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  if (m == 0) return {cplx(1.0, 0.0), cplx(0.0, 0.0)};
  if (m < 0) return {cplx(r, 0.0), cplx(sign * r, 0.0)};
  return {cplx(0.0, -r), cplx(0.0, sign * r)};
}

}  // namespace

double su2_cg(int li, int mi, int lf, int mf, int lo, int mo) {
  if (li < 0 || lf < 0 || lo < 0) throw DomainError("su2_cg: negative degree");
  if (std::abs(mi) > li || std::abs(mf) > lf || std::abs(mo) > lo)
    throw DomainError("su2_cg: |m| exceeds its degree");
  if (mi + mf != mo || !triangle(li, lf, lo)) return 0.0;

  mpq_class prefactor(
      mpz_class(2 * lo + 1) * factorial(li + lf - lo) * factorial(li - lf + lo) *
          factorial(-li + lf + lo) * factorial(li + mi) * factorial(li - mi) *
          factorial(lf + mf) * factorial(lf - mf) * factorial(lo + mo) * factorial(lo - mo),
      factorial(li + lf + lo + 1));
  prefactor.canonicalize();

  const int kmin = std::max({0, lf - lo - mi, li - lo + mf});
  const int kmax = std::min({li + lf - lo, li - mi, lf + mf});
  mpq_class sum = 0;
  for (int k = kmin; k <= kmax; ++k) {
    mpz_class den = factorial(k) * factorial(li + lf - lo - k) * factorial(li - mi - k) *
                    factorial(lf + mf - k) * factorial(lo - lf + mi + k) *
                    factorial(lo - li - mf + k);
    mpq_class term(k % 2 == 0 ? 1 : -1, 1);
    term /= den;
    sum += term;
  }
  if (sgn(sum) == 0) return 0.0;
  const mpq_class squared = prefactor * sum * sum;
  mpf_class root(squared, 256);
  root = sqrt(root);
  const double value = root.get_d();
  return sgn(sum) > 0 ? value : -value;
}

const char* to_string(Basis basis) {
  return basis == Basis::complex_su2 ? "complex-su2" : "real-so3";
}

CGTable::CGTable(Basis basis, int lmax_io, int lmax_filter)
    : basis_(basis), lmax_io_(lmax_io), lmax_filter_(lmax_filter) {
  if (lmax_io < 0 || lmax_filter < 0) throw DomainError("CGTable: negative degree bound");
  index_.assign(static_cast<std::size_t>((lmax_io + 1) * (lmax_filter + 1) * (lmax_io + 1)), -1);
}

int CGTable::slot(int li, int lf, int lo) const {
  if (li < 0 || lo < 0 || lf < 0 || li > lmax_io_ || lo > lmax_io_ || lf > lmax_filter_)
    return -1;
  return index_[static_cast<std::size_t>((li * (lmax_filter_ + 1) + lf) * (lmax_io_ + 1) + lo)];
}

void CGTable::insert(CGBlock block) {
  const auto pos = static_cast<std::size_t>(
      (block.li * (lmax_filter_ + 1) + block.lf) * (lmax_io_ + 1) + block.lo);
  index_[pos] = static_cast<int>(blocks_.size());
  blocks_.push_back(std::move(block));
}

const CGBlock* CGTable::find(int li, int lf, int lo) const {
  const int s = slot(li, lf, lo);
  return s < 0 ? nullptr : &blocks_[static_cast<std::size_t>(s)];
}

const CGBlock& CGTable::block(int li, int lf, int lo) const {
  const CGBlock* b = find(li, lf, lo);
  if (!b) throw DomainError("CGTable: triple not admissible or out of range");
  return *b;
}

double CGTable::at(int li, int mi, int lf, int mf, int lo, int mo) const {
  const CGBlock* b = find(li, lf, lo);
  if (!b || std::abs(mi) > li || std::abs(mf) > lf || std::abs(mo) > lo) return 0.0;
  return (*b)(mi, mf, mo);
}

std::size_t CGTable::entry_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.values.size();
  return n;
}

std::shared_ptr<const CGTable> build_table(Basis basis, int lmax_io, int lmax_filter) {
  auto table = std::make_shared<CGTable>(basis, lmax_io, lmax_filter);
  std::shared_ptr<const CGTable> complex_table;
  if (basis == Basis::real_so3) complex_table = su2_cg_table(lmax_io, lmax_filter);

  for (int li = 0; li <= lmax_io; ++li) {
    for (int lf = 0; lf <= lmax_filter; ++lf) {
      for (int lo = 0; lo <= lmax_io; ++lo) {
        if (!triangle(li, lf, lo)) continue;
        CGBlock b;
        b.li = li;
        b.lf = lf;
        b.lo = lo;
        b.values.assign(static_cast<std::size_t>((2 * li + 1) * (2 * lf + 1) * (2 * lo + 1)), 0.0);

        if (basis == Basis::complex_su2) {
          for (int mi = -li; mi <= li; ++mi)
            for (int mf = -lf; mf <= lf; ++mf) {
              const int mo = mi + mf;
              if (std::abs(mo) <= lo) b.values[b.offset(mi, mf, mo)] = su2_cg(li, mi, lf, mf, lo, mo);
            }
        } else {
          const CGBlock& c = complex_table->block(li, lf, lo);
          // Per-degree phase i^l on the real basis keeps odd-parity triples real.
          const int turns = (((lo - li - lf) % 4) + 4) % 4;
          const cplx phase = std::pow(cplx(0.0, 1.0), turns);
          for (int mi = -li; mi <= li; ++mi) {
            const auto ai = real_row(mi);
            for (int mf = -lf; mf <= lf; ++mf) {
              const auto af = real_row(mf);
              for (int mo = -lo; mo <= lo; ++mo) {
                const auto ao = real_row(mo);
                cplx acc = 0.0;
                for (int si = 0; si < 2; ++si) {
                  const int Mi = si == 0 ? -std::abs(mi) : std::abs(mi);
                  const cplx wi = std::conj(si == 0 ? ai.first : ai.second);
                  if (wi == 0.0) continue;
                  for (int sf = 0; sf < 2; ++sf) {
                    const int Mf = sf == 0 ? -std::abs(mf) : std::abs(mf);
                    const cplx wf = std::conj(sf == 0 ? af.first : af.second);
                    if (wf == 0.0) continue;
                    const int Mo = Mi + Mf;
                    if (std::abs(Mo) != std::abs(mo)) continue;
                    const cplx wo = Mo <= 0 ? ao.first : ao.second;
                    acc += wo * c(Mi, Mf, Mo) * wi * wf;
                  }
                }
                acc *= phase;
                table->imag_residue_ = std::max(table->imag_residue_, std::abs(acc.imag()));
                b.values[b.offset(mi, mf, mo)] = acc.real();
              }
            }
          }
        }
        table->insert(std::move(b));
      }
    }
  }
  if (table->imag_residue_ > kImagTol)
    throw std::logic_error("real CG table: imaginary residue above tolerance");
  return table;
}

namespace {

std::shared_ptr<const CGTable> cached_table(Basis basis, int lmax_io, int lmax_filter) {
  if (lmax_io < 0 || lmax_filter < 0) throw DomainError("CG table: negative degree bound");
  if (lmax_io > kMaxTableIO || lmax_filter > kMaxTableFilter)
    throw DomainError("CG table: degree bound too large");
  static std::recursive_mutex mutex;
  static std::map<std::tuple<int, int, int>, std::shared_ptr<const CGTable>> cache;
  const std::lock_guard<std::recursive_mutex> lock(mutex);
  const auto key = std::make_tuple(static_cast<int>(basis), lmax_io, lmax_filter);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto table = build_table(basis, lmax_io, lmax_filter);
  cache.emplace(key, table);
  return table;
}

}  // namespace

std::shared_ptr<const CGTable> su2_cg_table(int lmax_io, int lmax_filter) {
  return cached_table(Basis::complex_su2, lmax_io, lmax_filter);
}

std::shared_ptr<const CGTable> real_cg_table(int lmax_io, int lmax_filter) {
  return cached_table(Basis::real_so3, lmax_io, lmax_filter);
}

void write_table(std::ostream& out, const CGTable& table) {
  char buf[64];
  out << "escn-cgtable 1\n";
  out << "basis " << to_string(table.basis()) << "\n";
  out << "lmax_io " << table.lmax_io() << "\n";
  out << "lmax_filter " << table.lmax_filter() << "\n";
  out << "blocks " << table.blocks().size() << "\n";
  for (const auto& b : table.blocks()) {
    out << "block " << b.li << " " << b.lf << " " << b.lo << "\n";
    for (int mi = -b.li; mi <= b.li; ++mi)
      for (int mf = -b.lf; mf <= b.lf; ++mf) {
        for (int mo = -b.lo; mo <= b.lo; ++mo) {
          const double v = b(mi, mf, mo);
          std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
          out << (mo == -b.lo ? "" : " ") << buf;
        }
        out << "\n";
      }
  }
}

std::shared_ptr<const CGTable> read_table(std::istream& in) {
  auto fail = [](const std::string& what) -> InputError {
    return InputError("CG table file: " + what);
  };
  std::string word, basis_name;
  int version = 0, lmax_io = -1, lmax_filter = -1;
  std::size_t count = 0;
  if (!(in >> word >> version) || word != "escn-cgtable" || version != 1)
    throw fail("bad header");
  if (!(in >> word >> basis_name) || word != "basis") throw fail("missing basis");
  Basis basis;
  if (basis_name == "complex-su2") basis = Basis::complex_su2;
  else if (basis_name == "real-so3") basis = Basis::real_so3;
  else throw fail("unknown basis " + basis_name);
  if (!(in >> word >> lmax_io) || word != "lmax_io") throw fail("missing lmax_io");
  if (!(in >> word >> lmax_filter) || word != "lmax_filter") throw fail("missing lmax_filter");
  if (!(in >> word >> count) || word != "blocks") throw fail("missing block count");
  if (lmax_io < 0 || lmax_filter < 0 || lmax_io > kMaxTableIO || lmax_filter > kMaxTableFilter)
    throw fail("degree bounds out of range");

  auto table = std::make_shared<CGTable>(basis, lmax_io, lmax_filter);
  for (std::size_t n = 0; n < count; ++n) {
    CGBlock b;
    if (!(in >> word >> b.li >> b.lf >> b.lo) || word != "block") throw fail("bad block header");
    if (b.li < 0 || b.lo < 0 || b.lf < 0 || b.li > lmax_io || b.lo > lmax_io ||
        b.lf > lmax_filter || !triangle(b.li, b.lf, b.lo) || table->find(b.li, b.lf, b.lo))
      throw fail("invalid or duplicate block");
    b.values.resize(static_cast<std::size_t>((2 * b.li + 1) * (2 * b.lf + 1) * (2 * b.lo + 1)));
    for (auto& v : b.values) {
      if (!(in >> word)) throw fail("truncated block");
      try {
        std::size_t used = 0;
        v = std::stod(word, &used);
        if (used != word.size()) throw fail("bad number " + word);
      } catch (const std::logic_error&) {
        throw fail("bad number " + word);
      }
    }
    table->insert(std::move(b));
  }
  return table;
}

CompactCG compact_cg(int li, int lf, int lo, const CGTable& table) {
  if (table.basis() != Basis::real_so3) throw DomainError("compact_cg: need a real-basis table");
  const CGBlock& b = table.block(li, lf, lo);
  CompactCG c;
  c.li = li;
  c.lf = lf;
  c.lo = lo;
  const int mmax = c.mmax();
  c.values.resize(static_cast<std::size_t>(2 * mmax + 1));
  for (int m = -mmax; m <= mmax; ++m) {
    const int k = std::abs(m);
    c.values[static_cast<std::size_t>(m + mmax)] = m < 0 ? b(k, 0, -k) : b(k, 0, k);
  }
  return c;
}

CompactTable compact_table(const CGTable& table) {
  CompactTable t;
  t.lmax_io = table.lmax_io();
  t.lmax_filter = table.lmax_filter();
  for (const auto& b : table.blocks()) t.entries.push_back(compact_cg(b.li, b.lf, b.lo, table));
  return t;
}

void write_compact(std::ostream& out, const CompactTable& table) {
  char buf[64];
  out << "escn-compactcg 1\n";
  out << "lmax_io " << table.lmax_io << "\n";
  out << "lmax_filter " << table.lmax_filter << "\n";
  out << "blocks " << table.entries.size() << "\n";
  for (const auto& c : table.entries) {
    out << "block " << c.li << " " << c.lf << " " << c.lo << "\n";
    for (std::size_t k = 0; k < c.values.size(); ++k) {
      const double v = c.values[k];
      std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
      out << (k == 0 ? "" : " ") << buf;
    }
    out << "\n";
  }
}

CompactTable read_compact(std::istream& in) {
  auto fail = [](const std::string& what) -> InputError {
    return InputError("compact CG file: " + what);
  };
  std::string word;
  int version = 0;
  std::size_t count = 0;
  CompactTable t;
  if (!(in >> word >> version) || word != "escn-compactcg" || version != 1) throw fail("bad header");
  if (!(in >> word >> t.lmax_io) || word != "lmax_io") throw fail("missing lmax_io");
  if (!(in >> word >> t.lmax_filter) || word != "lmax_filter") throw fail("missing lmax_filter");
  if (!(in >> word >> count) || word != "blocks") throw fail("missing block count");
  if (t.lmax_io < 0 || t.lmax_filter < 0 || t.lmax_io > kMaxTableIO ||
      t.lmax_filter > kMaxTableFilter)
    throw fail("degree bounds out of range");
  for (std::size_t n = 0; n < count; ++n) {
    CompactCG c;
    if (!(in >> word >> c.li >> c.lf >> c.lo) || word != "block") throw fail("bad block header");
    if (c.li < 0 || c.lo < 0 || c.lf < 0 || c.li > t.lmax_io || c.lo > t.lmax_io ||
        c.lf > t.lmax_filter || !triangle(c.li, c.lf, c.lo))
      throw fail("invalid block");
    c.values.resize(static_cast<std::size_t>(2 * c.mmax() + 1));
    for (auto& v : c.values) {
      if (!(in >> word)) throw fail("truncated block");
      try {
        std::size_t used = 0;
        v = std::stod(word, &used);
        if (used != word.size()) throw fail("bad number " + word);
      } catch (const std::logic_error&) {
        throw fail("bad number " + word);
      }
    }
    t.entries.push_back(std::move(c));
  }
  return t;
}

double pole_value(int l) { return std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi)); }

PairTensor::PairTensor(int lmax, int channels) : lmax_(lmax) {
  if (lmax < 0) throw DomainError("PairTensor: lmax must be >= 0");
  if (channels < 1) throw DomainError("PairTensor: channels must be >= 1");
  offsets_.resize(static_cast<std::size_t>((lmax + 1) * (lmax + 1)));
  int rows = 0;
  for (int li = 0; li <= lmax; ++li)
    for (int lo = 0; lo <= lmax; ++lo) {
      offsets_[static_cast<std::size_t>(li * (lmax + 1) + lo)] = rows;
      rows += pair_width(li, lo);
    }
  values = CoeffMatrix::Zero(rows, channels);
}

double& HTensor::operator()(int li, int lf, int lo, int c) {
  return values(pair_offset(li, lo) + lf - std::abs(li - lo), c);
}

double HTensor::operator()(int li, int lf, int lo, int c) const {
  return values(pair_offset(li, lo) + lf - std::abs(li - lo), c);
}

double& HTildeTensor::operator()(int li, int lo, int m, int c) {
  return values(pair_offset(li, lo) + m + std::min(li, lo), c);
}

double HTildeTensor::operator()(int li, int lo, int m, int c) const {
  return values(pair_offset(li, lo) + m + std::min(li, lo), c);
}

namespace {

// Row m + mmax, column l_f - |l_i - l_o| of the map h -> h~ for one pair.
Eigen::MatrixXd pair_map(int li, int lo, const CGTable& table) {
  if (table.lmax_io() < std::max(li, lo) || table.lmax_filter() < li + lo)
    throw DomainError("h/h~ conversion: CG table does not cover the filter degrees");
  const int width = PairTensor::pair_width(li, lo);
  const int lf0 = std::abs(li - lo);
  Eigen::MatrixXd map(width, width);
  for (int j = 0; j < width; ++j) {
    const CompactCG c = compact_cg(li, lf0 + j, lo, table);
    const double pole = pole_value(lf0 + j);
    for (int i = 0; i < width; ++i) map(i, j) = c.values[static_cast<std::size_t>(i)] * pole;
  }
  return map;
}

}  // namespace

HTildeTensor h_to_htilde(const HTensor& h, const CGTable& table) {
  HTildeTensor out(h.lmax(), h.channels());
  for (int li = 0; li <= h.lmax(); ++li)
    for (int lo = 0; lo <= h.lmax(); ++lo) {
      const int off = h.pair_offset(li, lo), width = PairTensor::pair_width(li, lo);
      out.values.middleRows(off, width).noalias() =
          pair_map(li, lo, table) * h.values.middleRows(off, width);
    }
  return out;
}

HTensor htilde_to_h(const HTildeTensor& ht, const CGTable& table) {
  HTensor out(ht.lmax(), ht.channels());
  for (int li = 0; li <= ht.lmax(); ++li)
    for (int lo = 0; lo <= ht.lmax(); ++lo) {
      const int off = ht.pair_offset(li, lo), width = PairTensor::pair_width(li, lo);
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(pair_map(li, lo, table));
      if (!lu.isInvertible()) throw std::logic_error("htilde_to_h: singular pair map");
      out.values.middleRows(off, width) = lu.solve(Eigen::MatrixXd(ht.values.middleRows(off, width)));
    }
  return out;
}

}  // namespace escn::cg
