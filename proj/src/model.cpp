#include <escn/model.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <tuple>

namespace escn::model {

const char* to_string(Activation a) { return a == Activation::silu ? "silu" : "identity"; }
const char* to_string(Aggregation a) { return a == Aggregation::sum ? "sum" : "mean"; }

Activation activation_from_string(const std::string& name) {
  if (name == "silu") return Activation::silu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation: " + name);
}

Aggregation aggregation_from_string(const std::string& name) {
  if (name == "sum") return Aggregation::sum;
  if (name == "mean") return Aggregation::mean;
  throw ConfigError("unknown aggregation: " + name);
}

int ModelConfig::basis_size() const {
  return static_cast<int>(std::floor(cutoff / basis_spacing + 1e-9)) + 1;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("model config: ") + what);
  };
  require(lmax >= 0 && lmax <= rot::kMaxWignerDegree, "lmax out of range");
  require(mmax >= 0 && mmax <= lmax, "mmax must lie in [0, lmax]");
  require(channels >= 1 && hidden >= 1 && layers >= 1 && edge_channels >= 1,
          "sizes must be >= 1");
  require(max_neighbors >= 1, "max_neighbors must be >= 1");
  require(std::isfinite(cutoff) && cutoff > 0.0, "cutoff must be positive");
  require(std::isfinite(basis_spacing) && basis_spacing > 0.0, "basis spacing must be positive");
  require(std::isfinite(basis_width) && basis_width > 0.0, "basis width must be positive");
  require(max_atomic_number >= 1, "max_atomic_number must be >= 1");
  require(output_points >= 1, "output_points must be >= 1");
}

AtomicGraph build_graph(const std::vector<Vec3>& positions,
                        const std::vector<int>& atomic_numbers, const ModelConfig& config) {
  config.validate();
  const int n = static_cast<int>(positions.size());
  if (n < 1) throw InputError("build_graph: need at least one atom");
  if (atomic_numbers.size() != positions.size())
    throw InputError("build_graph: one atomic number per atom required");
  for (int i = 0; i < n; ++i) {
    if (!positions[i].allFinite()) throw InputError("build_graph: non-finite coordinate");
    if (atomic_numbers[i] < 1 || atomic_numbers[i] > config.max_atomic_number)
      throw InputError("build_graph: atomic number outside the embedding table");
  }

  AtomicGraph g;
  g.positions = positions;
  g.atomic_numbers = atomic_numbers;
  std::vector<Edge> candidates;
  for (int t = 0; t < n; ++t) {
    candidates.clear();
    for (int s = 0; s < n; ++s) {
      if (s == t) continue;
      Edge e;
      e.source = s;
      e.target = t;
      e.vec = positions[t] - positions[s];
      e.length = e.vec.norm();
      if (e.length < 1e-8) throw InputError("build_graph: coincident atoms");
      if (e.length <= config.cutoff) candidates.push_back(e);
    }
    std::sort(candidates.begin(), candidates.end(), [](const Edge& a, const Edge& b) {
      return a.length != b.length ? a.length < b.length : a.source < b.source;
    });
    if (static_cast<int>(candidates.size()) > config.max_neighbors)
      candidates.resize(static_cast<std::size_t>(config.max_neighbors));
    g.edges.insert(g.edges.end(), candidates.begin(), candidates.end());
  }
  return g;
}

namespace {

double silu(double v) { return v / (1.0 + std::exp(-v)); }

void activate(Eigen::MatrixXd& m, Activation a) {
  if (a == Activation::silu) m = m.unaryExpr(&silu);
}

// x: features x batch
Eigen::MatrixXd apply_dense(const Dense& d, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = d.weight * x;
  y.colwise() += d.bias;
  return y;
}

// Same layer on row-major samples: x is batch x features.
Eigen::MatrixXd apply_dense_rows(const Dense& d, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = x * d.weight.transpose();
  y.rowwise() += d.bias.transpose();
  return y;
}

Dense make_dense(int in, int out) {
  return Dense{Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
}

SO2BlockWeights make_block(const ModelConfig& c) {
  SO2BlockWeights b;
  for (int m = 0; m <= c.mmax; ++m) {
    const int n = (c.lmax + 1 - m) * c.channels;
    b.down_re.push_back(Eigen::MatrixXd::Zero(c.hidden, n));
    b.up_re.push_back(Eigen::MatrixXd::Zero(n, c.hidden));
    b.down_im.push_back(m == 0 ? Eigen::MatrixXd() : Eigen::MatrixXd::Zero(c.hidden, n));
    b.up_im.push_back(m == 0 ? Eigen::MatrixXd() : Eigen::MatrixXd::Zero(n, c.hidden));
  }
  return b;
}

}  // namespace

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
  config.validate();
  const ModelConfig& c = config;
  ModelWeights w;
  w.config = c;
  w.node_embedding = Eigen::MatrixXd::Zero(c.max_atomic_number + 1, c.channels);
  w.source_embedding = Eigen::MatrixXd::Zero(c.max_atomic_number + 1, c.edge_channels);
  w.target_embedding = Eigen::MatrixXd::Zero(c.max_atomic_number + 1, c.edge_channels);
  w.radial = make_dense(c.basis_size(), c.edge_channels);
  for (int k = 0; k < c.layers; ++k) {
    LayerWeights l;
    l.edge1 = make_dense(c.edge_channels, c.hidden);
    l.edge2 = make_dense(c.hidden, 2 * (c.mmax + 1) * c.hidden);
    l.source = make_block(c);
    l.target = make_block(c);
    l.agg1 = make_dense(2 * c.channels, c.channels);
    l.agg2 = make_dense(c.channels, c.channels);
    l.agg3 = make_dense(c.channels, c.channels);
    w.layers.push_back(std::move(l));
  }
  w.energy1 = make_dense(c.channels, c.channels);
  w.energy2 = make_dense(c.channels, c.channels);
  w.energy3 = make_dense(c.channels, 1);
  w.force1 = make_dense(c.channels, c.channels);
  w.force2 = make_dense(c.channels, c.channels);
  w.force3 = make_dense(c.channels, 1);
  return w;
}

ModelWeights ModelWeights::random(const ModelConfig& config, std::uint64_t seed) {
  ModelWeights w = zeros(config);
  std::mt19937_64 rng(seed);
  Eigen::Index fan_in = 1;
  for_each_array(w, [&](const std::string& name, double* data, Eigen::Index rows,
                        Eigen::Index cols) {
    const bool bias = name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
    const bool table = name.find("_embedding") != std::string::npos;
    if (table) fan_in = 1;
    else if (!bias) fan_in = cols;
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (Eigen::Index i = 0; i < rows * cols; ++i) data[i] = uni(rng);
  });
  return w;
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for_each_array(const_cast<ModelWeights&>(*this),
                 [&](const std::string&, double*, Eigen::Index r, Eigen::Index c) {
                   n += static_cast<std::size_t>(r * c);
                 });
  return n;
}

RadialBasis::RadialBasis(const ModelConfig& config)
    : spacing_(config.basis_spacing), width_(config.basis_width) {
  const int n = config.basis_size();
  for (int i = 0; i < n; ++i) centers_.push_back(i * spacing_);
}

Eigen::VectorXd RadialBasis::operator()(double distance) const {
  Eigen::VectorXd out(size());
  for (int i = 0; i < size(); ++i) {
    const double u = (distance - centers_[static_cast<std::size_t>(i)]) / width_;
    out[i] = std::exp(-0.5 * u * u);
  }
  return out;
}

namespace {

void check_z(int z, const ModelConfig& c) {
  if (z < 1 || z > c.max_atomic_number)
    throw InputError("atomic number " + std::to_string(z) + " outside the embedding table");
}

// Layer-independent edge features: radial projection plus both atomic-number
// tables. One column per edge.
Eigen::MatrixXd edge_inputs(const std::vector<double>& lengths, const std::vector<int>& zs,
                            const std::vector<int>& zt, const ModelWeights& w) {
  const ModelConfig& c = w.config;
  const RadialBasis basis(c);
  const auto n = static_cast<Eigen::Index>(lengths.size());
  Eigen::MatrixXd rbf(basis.size(), n);
  for (Eigen::Index e = 0; e < n; ++e) {
    check_z(zs[e], c);
    check_z(zt[e], c);
    rbf.col(e) = basis(lengths[e]);
  }
  Eigen::MatrixXd u = apply_dense(w.radial, rbf);
  for (Eigen::Index e = 0; e < n; ++e)
    u.col(e) += (w.source_embedding.row(zs[e]) + w.target_embedding.row(zt[e])).transpose();
  return u;
}

Eigen::MatrixXd layer_edge_embedding(const Eigen::MatrixXd& inputs, const LayerWeights& l) {
  Eigen::MatrixXd h = apply_dense(l.edge1, inputs);
  activate(h, Activation::silu);
  Eigen::MatrixXd out = apply_dense(l.edge2, h);
  activate(out, Activation::silu);
  return out;
}

// Aligned coefficients of a batch grouped by order: cos[m] holds x_{l,-m}
// (x_{l,0} for m = 0) and sin[m] holds x_{l,m}; row (l - m) C + c, one
// column per batch item.
struct OrderBatch {
  std::vector<Eigen::MatrixXd> cos, sin;
};

OrderBatch gather_orders(const std::vector<IrrepsCoeffs>& xs, int mmax) {
  const int lmax = xs.front().lmax, ch = xs.front().channels();
  const auto n = static_cast<Eigen::Index>(xs.size());
  OrderBatch b;
  for (int m = 0; m <= mmax; ++m) {
    const int rows = (lmax + 1 - m) * ch;
    Eigen::MatrixXd c(rows, n), s;
    if (m > 0) s.resize(rows, n);
    for (Eigen::Index e = 0; e < n; ++e)
      for (int l = m; l <= lmax; ++l)
        for (int k = 0; k < ch; ++k) {
          c((l - m) * ch + k, e) = xs[e].data(lm_index(l, -m), k);
          if (m > 0) s((l - m) * ch + k, e) = xs[e].data(lm_index(l, m), k);
        }
    b.cos.push_back(std::move(c));
    b.sin.push_back(std::move(s));
  }
  return b;
}

// emb: rows [emb_offset + m H, emb_offset + (m+1) H) modulate order m.
OrderBatch apply_block(const OrderBatch& x, const Eigen::MatrixXd& emb, Eigen::Index emb_offset,
                       const SO2BlockWeights& w, int hidden) {
  OrderBatch y;
  for (std::size_t m = 0; m < x.cos.size(); ++m) {
    const auto e = emb.middleRows(emb_offset + static_cast<Eigen::Index>(m) * hidden, hidden);
    if (m == 0) {
      Eigen::MatrixXd h = w.down_re[0] * x.cos[0];
      h.array() *= e.array();
      y.cos.push_back(w.up_re[0] * h);
      y.sin.emplace_back();
      continue;
    }
    Eigen::MatrixXd hr = w.down_re[m] * x.cos[m] - w.down_im[m] * x.sin[m];
    Eigen::MatrixXd hi = w.down_re[m] * x.sin[m] + w.down_im[m] * x.cos[m];
    hr.array() *= e.array();
    hi.array() *= e.array();
    y.cos.push_back(w.up_re[m] * hr - w.up_im[m] * hi);
    y.sin.push_back(w.up_re[m] * hi + w.up_im[m] * hr);
  }
  return y;
}

// Scatter order batches into one (L+1)^2 x (n C) matrix, item e in columns
// [e C, (e+1) C).
CoeffMatrix scatter_orders(const OrderBatch& y, int lmax, int ch, Eigen::Index n) {
  CoeffMatrix out = CoeffMatrix::Zero(num_coeffs(lmax), n * ch);
  for (std::size_t mm = 0; mm < y.cos.size(); ++mm) {
    const int m = static_cast<int>(mm);
    for (Eigen::Index e = 0; e < n; ++e)
      for (int l = m; l <= lmax; ++l)
        for (int k = 0; k < ch; ++k) {
          out(lm_index(l, -m), e * ch + k) = y.cos[mm]((l - m) * ch + k, e);
          if (m > 0) out(lm_index(l, m), e * ch + k) = y.sin[mm]((l - m) * ch + k, e);
        }
  }
  return out;
}

const SphereActivation& message_activation(const ModelConfig& c) {
  thread_local std::vector<std::pair<std::tuple<int, int, int>, std::unique_ptr<SphereActivation>>>
      cache;
  const auto key = std::make_tuple(c.lmax, c.mmax, static_cast<int>(c.activation));
  for (const auto& [k, v] : cache)
    if (k == key) return *v;
  const sphere::SphereGrid grid = sphere::make_grid(
      sphere::GridKind::equiangular, c.message_grid_theta(), c.message_grid_phi());
  cache.emplace_back(key, std::make_unique<SphereActivation>(grid, c.lmax, c.activation, c.mmax));
  return *cache.back().second;
}

// Messages for a batch of edges in one layer.
std::vector<IrrepsCoeffs> batch_messages(const std::vector<const IrrepsCoeffs*>& x_source,
                                         const std::vector<const IrrepsCoeffs*>& x_target,
                                         const std::vector<Mat3>& frames,
                                         const Eigen::MatrixXd& inputs, const ModelWeights& w,
                                         int layer, bool activation = true) {
  const ModelConfig& c = w.config;
  const auto n = static_cast<Eigen::Index>(frames.size());
  if (n == 0) return {};
  const LayerWeights& lw = w.layers.at(static_cast<std::size_t>(layer));
  const Eigen::MatrixXd emb = layer_edge_embedding(inputs, lw);

  std::vector<rot::FactoredRotation> rotations;
  std::vector<IrrepsCoeffs> src, tgt;
  rotations.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index e = 0; e < n; ++e) {
    rotations.emplace_back(frames[e], c.lmax);
    src.push_back(*x_source[e]);
    tgt.push_back(*x_target[e]);
    rotations.back().apply(src.back());
    rotations.back().apply(tgt.back());
  }
  const OrderBatch ys = apply_block(gather_orders(src, c.mmax), emb, 0, lw.source, c.hidden);
  OrderBatch yt = apply_block(gather_orders(tgt, c.mmax), emb,
                              static_cast<Eigen::Index>(c.mmax + 1) * c.hidden, lw.target,
                              c.hidden);
  for (std::size_t m = 0; m < yt.cos.size(); ++m) {
    yt.cos[m] += ys.cos[m];
    if (m > 0) yt.sin[m] += ys.sin[m];
  }
  CoeffMatrix act = scatter_orders(yt, c.lmax, c.channels, n);
  if (activation) act = message_activation(c).apply(act);

  std::vector<IrrepsCoeffs> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index e = 0; e < n; ++e) {
    IrrepsCoeffs a(c.lmax, c.channels);
    a.data = act.middleCols(e * c.channels, c.channels);
    rotations[e].apply_inverse(a);
    out.push_back(std::move(a));
  }
  return out;
}

// Elementwise sum that does not depend on the order of `parts`: the values
// for each entry are sorted before adding.
CoeffMatrix canonical_sum(const std::vector<const CoeffMatrix*>& parts, Eigen::Index rows,
                          Eigen::Index cols) {
  CoeffMatrix out = CoeffMatrix::Zero(rows, cols);
  if (parts.empty()) return out;
  if (parts.size() == 1) return *parts.front();
  std::vector<double> vals(parts.size());
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (std::size_t p = 0; p < parts.size(); ++p) vals[p] = (*parts[p])(i, j);
      std::sort(vals.begin(), vals.end());
      double s = 0.0;
      for (double v : vals) s += v;
      out(i, j) = s;
    }
  return out;
}

struct GridCache {
  sphere::SphereGrid grid;
  sphere::GridTransform transform;
};

const GridCache& aggregate_grid(const ModelConfig& c) {
  thread_local std::vector<std::pair<int, std::unique_ptr<GridCache>>> cache;
  for (const auto& [k, v] : cache)
    if (k == c.lmax) return *v;
  auto g = std::make_unique<GridCache>();
  g->grid = sphere::make_grid(sphere::GridKind::equiangular, c.aggregate_grid(), c.aggregate_grid());
  g->transform = sphere::GridTransform(g->grid, c.lmax);
  cache.emplace_back(c.lmax, std::move(g));
  return *cache.back().second;
}

const GridCache& output_grid(const ModelConfig& c) {
  thread_local std::vector<std::pair<std::pair<int, int>, std::unique_ptr<GridCache>>> cache;
  const auto key = std::make_pair(c.lmax, c.output_points);
  for (const auto& [k, v] : cache)
    if (k == key) return *v;
  auto g = std::make_unique<GridCache>();
  g->grid = sphere::make_fibonacci_grid(c.output_points);
  g->transform = sphere::GridTransform(g->grid, c.lmax);
  cache.emplace_back(key, std::move(g));
  return *cache.back().second;
}

// x_t' for a batch of nodes given their summed messages.
std::vector<IrrepsCoeffs> batch_aggregate(const std::vector<CoeffMatrix>& summed,
                                          const std::vector<const IrrepsCoeffs*>& x,
                                          const ModelWeights& w, int layer) {
  const ModelConfig& c = w.config;
  const LayerWeights& lw = w.layers.at(static_cast<std::size_t>(layer));
  const sphere::GridTransform& t = aggregate_grid(c).transform;
  const auto points = t.to_grid.rows();
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n == 0) return {};

  Eigen::MatrixXd features(points * n, 2 * c.channels);
  for (Eigen::Index i = 0; i < n; ++i) {
    features.block(i * points, 0, points, c.channels) = t.to_grid * summed[i];
    features.block(i * points, c.channels, points, c.channels) = t.to_grid * x[i]->data;
  }
  Eigen::MatrixXd h = apply_dense_rows(lw.agg1, features);
  activate(h, c.activation);
  h = apply_dense_rows(lw.agg2, h);
  activate(h, c.activation);
  h = apply_dense_rows(lw.agg3, h);

  std::vector<IrrepsCoeffs> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    IrrepsCoeffs y = *x[i];
    y.data += t.from_grid * h.middleRows(i * points, points);
    out.push_back(std::move(y));
  }
  return out;
}

void check_weights(const ModelWeights& w) {
  w.config.validate();
  if (static_cast<int>(w.layers.size()) != w.config.layers)
    throw ConfigError("model weights: layer count does not match config");
}

}  // namespace

EdgeEmbedding edge_embedding(double distance, int z_source, int z_target, const ModelWeights& w,
                             int layer) {
  check_weights(w);
  const ModelConfig& c = w.config;
  if (!(distance > 0.0) || distance > c.cutoff)
    throw DomainError("edge_embedding: distance must lie in (0, cutoff]");
  if (layer < 0 || layer >= c.layers) throw DomainError("edge_embedding: layer out of range");
  const Eigen::MatrixXd emb = layer_edge_embedding(
      edge_inputs({distance}, {z_source}, {z_target}, w), w.layers[static_cast<std::size_t>(layer)]);
  EdgeEmbedding out;
  for (int m = 0; m <= c.mmax; ++m) {
    out.source.push_back(emb.col(0).segment(m * c.hidden, c.hidden));
    out.target.push_back(emb.col(0).segment((c.mmax + 1 + m) * c.hidden, c.hidden));
  }
  return out;
}

IrrepsCoeffs so2_block(const IrrepsCoeffs& aligned, const std::vector<Eigen::VectorXd>& emb,
                       const SO2BlockWeights& weights, const ModelConfig& config) {
  config.validate();
  if (aligned.lmax != config.lmax || aligned.channels() != config.channels)
    throw DomainError("so2_block: coefficient shape does not match config");
  if (static_cast<int>(emb.size()) != config.mmax + 1 ||
      static_cast<int>(weights.down_re.size()) != config.mmax + 1)
    throw DomainError("so2_block: need one embedding and weight set per order");
  Eigen::MatrixXd stacked((config.mmax + 1) * config.hidden, 1);
  for (int m = 0; m <= config.mmax; ++m) {
    if (emb[m].size() != config.hidden) throw DomainError("so2_block: embedding size mismatch");
    stacked.block(m * config.hidden, 0, config.hidden, 1) = emb[m];
  }
  for (int m = 0; m <= config.mmax; ++m) {
    const int n = (config.lmax + 1 - m) * config.channels;
    const bool ok = weights.down_re[m].rows() == config.hidden && weights.down_re[m].cols() == n &&
                    weights.up_re[m].rows() == n && weights.up_re[m].cols() == config.hidden &&
                    (m == 0 || (weights.down_im[m].rows() == config.hidden &&
                                weights.down_im[m].cols() == n && weights.up_im[m].rows() == n &&
                                weights.up_im[m].cols() == config.hidden));
    if (!ok) throw DomainError("so2_block: weight shape mismatch");
  }
  const OrderBatch y =
      apply_block(gather_orders({aligned}, config.mmax), stacked, 0, weights, config.hidden);
  IrrepsCoeffs out(config.lmax, config.channels);
  out.data = scatter_orders(y, config.lmax, config.channels, 1);
  return out;
}

SphereActivation::SphereActivation(const sphere::SphereGrid& grid, int lmax, Activation act,
                                   int mmax)
    : lmax_(lmax), mmax_(mmax < 0 ? lmax : mmax), act_(act) {
  if (lmax < 0 || mmax_ > lmax) throw DomainError("SphereActivation: bad degree bounds");
  for (int l = 0; l <= lmax; ++l)
    for (int m = -std::min(l, mmax_); m <= std::min(l, mmax_); ++m) rows_.push_back(lm_index(l, m));
  const Eigen::MatrixXd basis = sphere::grid_basis(grid, lmax);
  const auto k = static_cast<Eigen::Index>(rows_.size());
  to_grid_.resize(basis.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) to_grid_.col(j) = basis.col(rows_[j]);
  const Eigen::Map<const Eigen::VectorXd> w(grid.weights.data(),
                                            static_cast<Eigen::Index>(grid.size()));
  from_grid_ = to_grid_.transpose() * w.asDiagonal();
}

CoeffMatrix SphereActivation::apply(const CoeffMatrix& coeffs) const {
  if (coeffs.rows() != num_coeffs(lmax_))
    throw DomainError("SphereActivation: coefficient rows do not match lmax");
  const auto k = static_cast<Eigen::Index>(rows_.size());
  Eigen::MatrixXd kept(k, coeffs.cols());
  for (Eigen::Index j = 0; j < k; ++j) kept.row(j) = coeffs.row(rows_[j]);
  Eigen::MatrixXd f = to_grid_ * kept;
  activate(f, act_);
  const Eigen::MatrixXd back = from_grid_ * f;
  CoeffMatrix out = CoeffMatrix::Zero(coeffs.rows(), coeffs.cols());
  for (Eigen::Index j = 0; j < k; ++j) out.row(rows_[j]) = back.row(j);
  return out;
}

IrrepsCoeffs pointwise_nonlinearity(const IrrepsCoeffs& x, const sphere::SphereGrid& grid,
                                    Activation act) {
  const SphereActivation a(grid, x.lmax, act);
  IrrepsCoeffs out(x.lmax, x.channels());
  out.data = a.apply(x.data);
  return out;
}

namespace {

IrrepsCoeffs single_message(const IrrepsCoeffs& x_source, const IrrepsCoeffs& x_target,
                            const Vec3& r_st, int z_source, int z_target, const ModelWeights& w,
                            int layer, const Mat3* frame, bool activation) {
  check_weights(w);
  const ModelConfig& c = w.config;
  if (layer < 0 || layer >= c.layers) throw DomainError("message: layer out of range");
  for (const IrrepsCoeffs* x : {&x_source, &x_target})
    if (x->lmax != c.lmax || x->channels() != c.channels)
      throw DomainError("message: coefficient shape does not match config");
  const double length = r_st.norm();
  if (!(length > 0.0) || length > c.cutoff)
    throw DomainError("message: edge length must lie in (0, cutoff]");
  Mat3 align = frame ? *frame : rot::align_to_y(sphere::Direction::normalized(r_st));
  if (frame && (!rot::is_rotation(align, 1e-9) ||
                (align * (r_st / length) - Vec3::UnitY()).norm() > 1e-9))
    throw DomainError("message: frame does not align the edge with +y");
  const auto out =
      batch_messages({&x_source}, {&x_target}, {align},
                     edge_inputs({length}, {z_source}, {z_target}, w), w, layer, activation);
  return out.front();
}

}  // namespace

IrrepsCoeffs message(const IrrepsCoeffs& x_source, const IrrepsCoeffs& x_target, const Vec3& r_st,
                     int z_source, int z_target, const ModelWeights& w, int layer,
                     const Mat3* frame) {
  return single_message(x_source, x_target, r_st, z_source, z_target, w, layer, frame, true);
}

IrrepsCoeffs message_preactivation(const IrrepsCoeffs& x_source, const IrrepsCoeffs& x_target,
                                   const Vec3& r_st, int z_source, int z_target,
                                   const ModelWeights& w, int layer) {
  return single_message(x_source, x_target, r_st, z_source, z_target, w, layer, nullptr, false);
}

IrrepsCoeffs aggregate(const std::vector<IrrepsCoeffs>& messages, const IrrepsCoeffs& x_target,
                       const ModelWeights& w, int layer) {
  check_weights(w);
  const ModelConfig& c = w.config;
  if (layer < 0 || layer >= c.layers) throw DomainError("aggregate: layer out of range");
  std::vector<const CoeffMatrix*> parts;
  for (const auto& m : messages) {
    if (m.lmax != c.lmax || m.channels() != c.channels)
      throw DomainError("aggregate: message shape does not match config");
    parts.push_back(&m.data);
  }
  CoeffMatrix sum = canonical_sum(parts, num_coeffs(c.lmax), c.channels);
  if (c.aggregation == Aggregation::mean && !parts.empty())
    sum /= static_cast<double>(parts.size());
  return batch_aggregate({sum}, {&x_target}, w, layer).front();
}

namespace {

std::vector<IrrepsCoeffs> embed_in_order(const AtomicGraph& graph, const ModelWeights& w);

// Atoms sorted by position then atomic number, edges by (target, length,
// source), so the batch layout depends on geometry alone.
AtomicGraph canonical_order(const AtomicGraph& graph, std::vector<int>& rank) {
  const int n = graph.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const Vec3& pa = graph.positions[static_cast<std::size_t>(a)];
    const Vec3& pb = graph.positions[static_cast<std::size_t>(b)];
    return std::make_tuple(pa.x(), pa.y(), pa.z(), graph.atomic_numbers[static_cast<std::size_t>(a)]) <
           std::make_tuple(pb.x(), pb.y(), pb.z(), graph.atomic_numbers[static_cast<std::size_t>(b)]);
  });
  rank.assign(static_cast<std::size_t>(n), 0);
  AtomicGraph g;
  for (int k = 0; k < n; ++k) {
    rank[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;
    g.positions.push_back(graph.positions[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
    g.atomic_numbers.push_back(graph.atomic_numbers[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
  }
  g.edges = graph.edges;
  for (Edge& e : g.edges) {
    e.source = rank[static_cast<std::size_t>(e.source)];
    e.target = rank[static_cast<std::size_t>(e.target)];
  }
  std::stable_sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
    return std::make_tuple(a.target, a.length, a.source) < std::make_tuple(b.target, b.length, b.source);
  });
  return g;
}

}  // namespace

std::vector<IrrepsCoeffs> node_embeddings(const AtomicGraph& graph, const ModelWeights& w) {
  std::vector<int> rank;
  const std::vector<IrrepsCoeffs> x = embed_in_order(canonical_order(graph, rank), w);
  std::vector<IrrepsCoeffs> out;
  out.reserve(x.size());
  for (int r : rank) out.push_back(x[static_cast<std::size_t>(r)]);
  return out;
}

namespace {

std::vector<IrrepsCoeffs> embed_in_order(const AtomicGraph& graph, const ModelWeights& w) {
  check_weights(w);
  const ModelConfig& c = w.config;
  const int n = graph.size();
  for (int z : graph.atomic_numbers) check_z(z, c);

  std::vector<IrrepsCoeffs> x;
  for (int i = 0; i < n; ++i) {
    IrrepsCoeffs xi(c.lmax, c.channels);
    xi.data.row(0) = w.node_embedding.row(graph.atomic_numbers[static_cast<std::size_t>(i)]);
    x.push_back(std::move(xi));
  }

  const std::size_t ne = graph.edges.size();
  std::vector<double> lengths(ne);
  std::vector<int> zs(ne), zt(ne);
  std::vector<Mat3> frames(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const Edge& edge = graph.edges[e];
    if (edge.length > c.cutoff || edge.source == edge.target)
      throw InputError("forward: graph edge violates the cutoff or is a self-edge");
    lengths[e] = edge.length;
    zs[e] = graph.atomic_numbers[static_cast<std::size_t>(edge.source)];
    zt[e] = graph.atomic_numbers[static_cast<std::size_t>(edge.target)];
    frames[e] = rot::align_to_y(sphere::Direction::normalized(edge.vec));
  }
  const Eigen::MatrixXd inputs = edge_inputs(lengths, zs, zt, w);

  std::vector<std::vector<std::size_t>> incoming(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < ne; ++e)
    incoming[static_cast<std::size_t>(graph.edges[e].target)].push_back(e);

  for (int layer = 0; layer < c.layers; ++layer) {
    std::vector<const IrrepsCoeffs*> xs(ne), xt(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      xs[e] = &x[static_cast<std::size_t>(graph.edges[e].source)];
      xt[e] = &x[static_cast<std::size_t>(graph.edges[e].target)];
    }
    const std::vector<IrrepsCoeffs> msgs = batch_messages(xs, xt, frames, inputs, w, layer);

    std::vector<CoeffMatrix> summed;
    std::vector<const IrrepsCoeffs*> xptr;
    for (int t = 0; t < n; ++t) {
      std::vector<const CoeffMatrix*> parts;
      for (std::size_t e : incoming[static_cast<std::size_t>(t)]) parts.push_back(&msgs[e].data);
      CoeffMatrix s = canonical_sum(parts, num_coeffs(c.lmax), c.channels);
      if (c.aggregation == Aggregation::mean && !parts.empty())
        s /= static_cast<double>(parts.size());
      summed.push_back(std::move(s));
      xptr.push_back(&x[static_cast<std::size_t>(t)]);
    }
    x = batch_aggregate(summed, xptr, w, layer);
  }
  return x;
}

}  // namespace

Prediction forward(const AtomicGraph& graph, const ModelWeights& w) {
  const std::vector<IrrepsCoeffs> x = node_embeddings(graph, w);
  const ModelConfig& c = w.config;
  const GridCache& out_grid = output_grid(c);
  const auto& grid = out_grid.grid;
  const Eigen::Map<const Eigen::VectorXd> weights(grid.weights.data(),
                                                  static_cast<Eigen::Index>(grid.size()));

  Prediction p;
  for (const IrrepsCoeffs& xi : x) {
    const Eigen::MatrixXd f = out_grid.transform.to_grid * xi.data;  // points x C
    Eigen::MatrixXd he = apply_dense_rows(w.energy1, f);
    activate(he, c.activation);
    he = apply_dense_rows(w.energy2, he);
    activate(he, c.activation);
    he = apply_dense_rows(w.energy3, he);
    Eigen::MatrixXd hf = apply_dense_rows(w.force1, f);
    activate(hf, c.activation);
    hf = apply_dense_rows(w.force2, hf);
    activate(hf, c.activation);
    hf = apply_dense_rows(w.force3, hf);

    p.atom_energies.push_back(weights.dot(he.col(0)));
    Vec3 force = Vec3::Zero();
    for (std::size_t q = 0; q < grid.size(); ++q)
      force += grid.weights[q] * hf(static_cast<Eigen::Index>(q), 0) * grid.points[q];
    p.forces.push_back(force);
  }
  std::vector<double> sorted = p.atom_energies;
  std::sort(sorted.begin(), sorted.end());
  p.energy = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  return p;
}

}  // namespace escn::model
