#include <escn/conv.hpp>

#include <chrono>
#include <cmath>
#include <random>

namespace escn::conv {

ConvSpec ConvSpec::full(int lmax, int channels, int mmax) {
  ConvSpec s;
  s.lmax = lmax;
  s.mmax = mmax < 0 ? lmax : mmax;
  s.channels = channels;
  for (int li = 0; li <= lmax; ++li)
    for (int lo = 0; lo <= lmax; ++lo)
      for (int lf = std::abs(li - lo); lf <= li + lo; ++lf) s.triples.push_back({li, lf, lo});
  s.validate();
  return s;
}

void ConvSpec::validate() const {
  if (lmax < 0 || lmax > 10) throw DomainError("ConvSpec: lmax must lie in [0, 10]");
  if (mmax < 0 || mmax > lmax) throw DomainError("ConvSpec: mmax must lie in [0, lmax]");
  if (channels < 1) throw DomainError("ConvSpec: channels must be >= 1");
  for (const auto& t : triples) {
    if (t[0] < 0 || t[2] < 0 || t[0] > lmax || t[2] > lmax || !cg::triangle(t[0], t[1], t[2]))
      throw DomainError("ConvSpec: triple is not admissible");
  }
}

SO2Weights::SO2Weights(int lmax_, int mmax_, int channels_)
    : lmax(lmax_), mmax(mmax_), channels(channels_) {
  if (lmax < 0 || mmax < 0 || mmax > lmax || channels < 1)
    throw DomainError("SO2Weights: bad shape");
  for (int m = 0; m <= mmax; ++m) {
    const int n = (lmax + 1 - m) * (lmax + 1 - m);
    a.push_back(CoeffMatrix::Zero(n, channels));
    b.push_back(m == 0 ? CoeffMatrix() : CoeffMatrix::Zero(n, channels));
  }
}

SO2Weights SO2Weights::from_htilde(const cg::HTildeTensor& ht, int mmax) {
  SO2Weights w(ht.lmax(), mmax, ht.channels());
  const int lmax = ht.lmax();
  for (int m = 0; m <= mmax; ++m)
    for (int lo = m; lo <= lmax; ++lo)
      for (int li = m; li <= lmax; ++li) {
        const int r = row(lmax, m, li, lo);
        for (int c = 0; c < w.channels; ++c) {
          w.a[m](r, c) = ht(li, lo, m, c);
          if (m > 0) w.b[m](r, c) = ht(li, lo, -m, c);
        }
      }
  return w;
}

namespace {

void check_inputs(const IrrepsCoeffs& x, const ConvSpec& spec) {
  spec.validate();
  if (x.lmax != spec.lmax || x.channels() != spec.channels)
    throw DomainError("conv: coefficient shape does not match the ConvSpec");
}

void check_h(const cg::PairTensor& h, const ConvSpec& spec) {
  if (h.lmax() != spec.lmax || h.channels() != spec.channels)
    throw DomainError("conv: filter weight shape does not match the ConvSpec");
}

}  // namespace

IrrepsCoeffs naive_conv(const IrrepsCoeffs& x, const sphere::Direction& dir,
                        const cg::HTensor& h, const ConvSpec& spec) {
  check_inputs(x, spec);
  check_h(h, spec);
  const int lmax = spec.lmax, channels = spec.channels;
  const auto table = cg::real_cg_table(lmax, 2 * lmax);
  const Eigen::VectorXd y = sphere::eval_real_sh(2 * lmax, dir);

  IrrepsCoeffs out(lmax, channels);
  std::vector<double> acc(static_cast<std::size_t>(channels));
  for (const auto& [li, lf, lo] : spec.triples) {
    const cg::CGBlock& b = table->block(li, lf, lo);
    const double* hrow = &h.values(h.pair_offset(li, lo) + lf - std::abs(li - lo), 0);
    for (int mo = -lo; mo <= lo; ++mo) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int mi = -li; mi <= li; ++mi) {
        const double* xrow = x.data.row(lm_index(li, mi)).data();
        for (int mf = -lf; mf <= lf; ++mf) {
          const double w = b(mi, mf, mo) * y[lm_index(lf, mf)];
          for (int c = 0; c < channels; ++c) acc[c] += w * xrow[c];
        }
      }
      double* orow = out.data.row(lm_index(lo, mo)).data();
      for (int c = 0; c < channels; ++c) orow[c] += hrow[c] * acc[c];
    }
  }
  return out;
}

IrrepsCoeffs aligned_conv(const IrrepsCoeffs& x, const sphere::Direction& dir,
                          const cg::HTensor& h, const ConvSpec& spec) {
  check_inputs(x, spec);
  check_h(h, spec);
  const int lmax = spec.lmax;
  const auto table = cg::real_cg_table(lmax, 2 * lmax);
  const rot::WignerDBlocks d = rot::wigner_d(lmax, rot::align_to_y(dir));
  const IrrepsCoeffs xr = rot::rotate_irreps(x, d);

  IrrepsCoeffs yr(lmax, spec.channels);
  for (const auto& [li, lf, lo] : spec.triples) {
    const cg::CGBlock& b = table->block(li, lf, lo);
    const auto hrow = h.values.row(h.pair_offset(li, lo) + lf - std::abs(li - lo)).array();
    const double pole = cg::pole_value(lf);
    for (int mo = -lo; mo <= lo; ++mo) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(spec.channels);
      for (int mi = -li; mi <= li; ++mi) acc += (b(mi, 0, mo) * pole) * xr.data.row(lm_index(li, mi));
      yr.data.row(lm_index(lo, mo)).array() += hrow * acc.array();
    }
  }
  return rot::rotate_irreps(yr, d.transposed());
}

SO2Irreps so2_project(const IrrepsCoeffs& x) {
  SO2Irreps w;
  w.lmax = x.lmax;
  w.channels = x.channels();
  const int c = w.channels;
  for (int k = 0; k <= x.lmax; ++k) {
    CoeffMatrix block(x.lmax + 1 - k, k == 0 ? c : 2 * c);
    for (int l = k; l <= x.lmax; ++l) {
      if (k == 0) {
        block.row(l) = x.data.row(lm_index(l, 0));
      } else {
        block.row(l - k).head(c) = x.data.row(lm_index(l, -k));
        block.row(l - k).tail(c) = x.data.row(lm_index(l, k));
      }
    }
    w.orders.push_back(std::move(block));
  }
  return w;
}

IrrepsCoeffs so2_unproject(const SO2Irreps& w) {
  IrrepsCoeffs x(w.lmax, w.channels);
  const int c = w.channels;
  for (int k = 0; k <= w.lmax; ++k) {
    const CoeffMatrix& block = w.orders[static_cast<std::size_t>(k)];
    for (int l = k; l <= w.lmax; ++l) {
      if (k == 0) {
        x.data.row(lm_index(l, 0)) = block.row(l);
      } else {
        x.data.row(lm_index(l, -k)) = block.row(l - k).head(c);
        x.data.row(lm_index(l, k)) = block.row(l - k).tail(c);
      }
    }
  }
  return x;
}

SO2Irreps so2_mix(const SO2Irreps& in, const SO2Weights& w) {
  if (in.lmax != w.lmax || in.channels != w.channels)
    throw DomainError("so2_mix: weight shape does not match coefficients");
  const int lmax = in.lmax, channels = in.channels;
  SO2Irreps out;
  out.lmax = lmax;
  out.channels = channels;
  for (int k = 0; k <= lmax; ++k)
    out.orders.push_back(CoeffMatrix::Zero(lmax + 1 - k, k == 0 ? channels : 2 * channels));

  for (int m = 0; m <= w.mmax; ++m) {
    const CoeffMatrix& src = in.orders[static_cast<std::size_t>(m)];
    CoeffMatrix& dst = out.orders[static_cast<std::size_t>(m)];
    for (int lo = m; lo <= lmax; ++lo) {
      double* yo = dst.row(lo - m).data();
      for (int li = m; li <= lmax; ++li) {
        const int r = SO2Weights::row(lmax, m, li, lo);
        const double* a = w.a[m].row(r).data();
        const double* xi = src.row(li - m).data();
        if (m == 0) {
          for (int c = 0; c < channels; ++c) yo[c] += a[c] * xi[c];
        } else {
          const double* b = w.b[m].row(r).data();
          for (int c = 0; c < channels; ++c) {
            const double xn = xi[c], xp = xi[channels + c];
            yo[channels + c] += a[c] * xp - b[c] * xn;
            yo[c] += b[c] * xp + a[c] * xn;
          }
        }
      }
    }
  }
  return out;
}

IrrepsCoeffs so2_conv_in_frame(const IrrepsCoeffs& x, const Mat3& align,
                               const SO2Weights& w, const ConvSpec& spec) {
  check_inputs(x, spec);
  if (w.lmax != spec.lmax || w.mmax != spec.mmax || w.channels != spec.channels)
    throw DomainError("so2_conv: weight shape does not match the ConvSpec");
  if (!rot::is_rotation(align, 1e-9)) throw DomainError("so2_conv: frame is not a rotation");
  const rot::FactoredRotation rotation(align, spec.lmax);
  IrrepsCoeffs xr = x;
  rotation.apply(xr);
  IrrepsCoeffs y = so2_unproject(so2_mix(so2_project(xr), w));
  rotation.apply_inverse(y);
  return y;
}

IrrepsCoeffs so2_conv(const IrrepsCoeffs& x, const sphere::Direction& dir,
                      const SO2Weights& w, const ConvSpec& spec) {
  return so2_conv_in_frame(x, rot::align_to_y(dir), w, spec);
}

IrrepsCoeffs so2_conv(const IrrepsCoeffs& x, const sphere::Direction& dir,
                      const cg::HTildeTensor& ht, const ConvSpec& spec) {
  spec.validate();
  check_h(ht, spec);
  return so2_conv(x, dir, SO2Weights::from_htilde(ht, spec.mmax), spec);
}

const char* to_string(Path path) { return path == Path::naive ? "naive" : "so2"; }

Path path_from_string(const std::string& name) {
  if (name == "naive") return Path::naive;
  if (name == "so2") return Path::so2;
  throw DomainError("unknown convolution path: " + name);
}

namespace {

void count_naive(CostReport& r) {
  const std::uint64_t c = static_cast<std::uint64_t>(r.channels);
  const int lmax = r.lmax;
  for (int li = 0; li <= lmax; ++li)
    for (int lo = 0; lo <= lmax; ++lo)
      for (int lf = std::abs(li - lo); lf <= li + lo; ++lf) {
        const std::uint64_t inner =
            static_cast<std::uint64_t>((2 * li + 1) * (2 * lf + 1) * (2 * lo + 1));
        const std::uint64_t outer = static_cast<std::uint64_t>(2 * lo + 1);
        // w = cg * Y once per (m_o, m_i, m_f), then one fused update per channel
        r.multiplies += inner * (1 + c) + outer * c;
        r.adds += inner * c + outer * c;
      }
  const std::uint64_t k = static_cast<std::uint64_t>(num_coeffs(lmax));
  r.peak_live = 2 * k * c + c + static_cast<std::uint64_t>(num_coeffs(2 * lmax));
}

void count_so2(CostReport& r) {
  const std::uint64_t c = static_cast<std::uint64_t>(r.channels);
  const int lmax = r.lmax;
  std::uint64_t mul = 0, add = 0;
  // One factored rotation: three y-rotations and two dense swap products.
  for (int l = 1; l <= lmax; ++l) {
    const std::uint64_t n = static_cast<std::uint64_t>(2 * l + 1);
    mul += 3 * static_cast<std::uint64_t>(l) * 4 * c + 2 * n * n * c;
    add += 3 * static_cast<std::uint64_t>(l) * 2 * c + 2 * n * (n - 1) * c;
  }
  r.multiplies = 2 * mul;
  r.adds = 2 * add;
  for (int m = 0; m <= r.mmax; ++m) {
    const std::uint64_t pairs = static_cast<std::uint64_t>((lmax + 1 - m) * (lmax + 1 - m));
    r.multiplies += pairs * c * (m == 0 ? 1 : 4);
    r.adds += pairs * c * (m == 0 ? 1 : 4);
  }
  const std::uint64_t k = static_cast<std::uint64_t>(num_coeffs(lmax));
  r.peak_live = 3 * k * c + static_cast<std::uint64_t>(2 * lmax + 1) * c;
}

}  // namespace

CostReport count_cost(Path path, int lmax, int mmax, int channels, int edges,
                      std::uint64_t seed) {
  if (mmax < 0) mmax = lmax;
  const ConvSpec spec = ConvSpec::full(lmax, channels, mmax);
  if (edges < 0) throw DomainError("count_cost: edges must be >= 0");
  CostReport r;
  r.path = path;
  r.lmax = lmax;
  r.mmax = mmax;
  r.channels = channels;
  r.edges = edges;
  if (path == Path::naive) count_naive(r);
  else count_so2(r);
  if (edges == 0) return r;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  cg::HTensor h(lmax, channels);
  for (Eigen::Index i = 0; i < h.values.size(); ++i) h.values.data()[i] = normal(rng);
  std::vector<IrrepsCoeffs> xs;
  std::vector<sphere::Direction> dirs;
  for (int e = 0; e < edges; ++e) {
    IrrepsCoeffs x(lmax, channels);
    for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = normal(rng);
    xs.push_back(std::move(x));
    dirs.push_back(sphere::Direction::normalized(Vec3(normal(rng), normal(rng), normal(rng))));
  }
  cg::real_cg_table(lmax, 2 * lmax);
  const SO2Weights w =
      SO2Weights::from_htilde(cg::h_to_htilde(h, *cg::real_cg_table(lmax, 2 * lmax)), mmax);

  double sink = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (int e = 0; e < edges; ++e) {
    const IrrepsCoeffs y = path == Path::naive ? naive_conv(xs[e], dirs[e], h, spec)
                                               : so2_conv(xs[e], dirs[e], w, spec);
    sink += y.data(0, 0);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!std::isfinite(sink)) r.wall_seconds = -1.0;
  return r;
}

}  // namespace escn::conv
