#pragma once

// Forward-only message-passing model on atomic structures built from
// edge-aligned SO(2) convolutions and point-wise spherical activations.

#include <escn/conv.hpp>
#include <escn/rotations.hpp>
#include <escn/sphere_math.hpp>
#include <escn/types.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace escn::model {

enum class Activation { silu, identity };
enum class Aggregation { sum, mean };

const char* to_string(Activation a);
const char* to_string(Aggregation a);
Activation activation_from_string(const std::string& name);
Aggregation aggregation_from_string(const std::string& name);

struct ModelConfig {
  int lmax = 6;
  int mmax = 2;
  int channels = 128;
  int hidden = 256;
  int layers = 12;
  double cutoff = 12.0;
  int max_neighbors = 20;
  int edge_channels = 128;     // atomic-number tables and radial projection
  double basis_spacing = 0.02;
  double basis_width = 0.04;
  int max_atomic_number = 118;
  int output_points = 128;
  // Spherical activation used in messages, P_agg and the output heads. The
  // edge network always uses SiLU since it only sees invariants.
  Activation activation = Activation::silu;
  Aggregation aggregation = Aggregation::sum;

  // Equiangular grids: messages (2L+1) x (2M+1), aggregation (2L+1) x (2L+1).
  int message_grid_theta() const { return 2 * lmax + 1; }
  int message_grid_phi() const { return 2 * mmax + 1; }
  int aggregate_grid() const { return 2 * lmax + 1; }
  int basis_size() const;

  /// Throws ConfigError.
  void validate() const;
};

struct Edge {
  int source = 0;
  int target = 0;
  Vec3 vec = Vec3::Zero();  // position[target] - position[source]
  double length = 0.0;
};

/// Edges are grouped by target in ascending order; within a target they are
/// sorted by (length, source).
struct AtomicGraph {
  std::vector<Vec3> positions;
  std::vector<int> atomic_numbers;
  std::vector<Edge> edges;

  int size() const { return static_cast<int>(positions.size()); }
};

AtomicGraph build_graph(const std::vector<Vec3>& positions,
                        const std::vector<int>& atomic_numbers, const ModelConfig& config);

/// y = W x + b (W is out x in).
struct Dense {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
};

/// Per order m: complex-style down projection (n_m C -> H) and up
/// projection (H -> n_m C) with n_m = L + 1 - m. Imaginary parts are empty
/// for m = 0.
struct SO2BlockWeights {
  std::vector<Eigen::MatrixXd> down_re, down_im, up_re, up_im;
};

struct LayerWeights {
  Dense edge1, edge2;              // edge_channels -> H -> 2 (M+1) H
  SO2BlockWeights source, target;
  Dense agg1, agg2, agg3;          // 2C -> C -> C -> C
};

struct ModelWeights {
  ModelConfig config;
  Eigen::MatrixXd node_embedding;    // (Zmax+1) x C
  Eigen::MatrixXd source_embedding;  // (Zmax+1) x edge_channels
  Eigen::MatrixXd target_embedding;  // (Zmax+1) x edge_channels
  Dense radial;                      // basis_size -> edge_channels
  std::vector<LayerWeights> layers;
  Dense energy1, energy2, energy3;   // C -> C -> C -> 1
  Dense force1, force2, force3;      // C -> C -> C -> 1

  /// Zero-filled arrays with the shapes implied by `config`.
  static ModelWeights zeros(const ModelConfig& config);
  /// Uniform in +-1/sqrt(fan_in) from a seeded generator.
  static ModelWeights random(const ModelConfig& config, std::uint64_t seed);

  std::size_t parameter_count() const;
};

/// Visit every array in a fixed order; biases are (n x 1).
template <class Fn>
void for_each_array(ModelWeights& w, Fn&& fn);

/// Gaussian radial basis with centres every `basis_spacing` on [0, cutoff].
class RadialBasis {
 public:
  explicit RadialBasis(const ModelConfig& config);
  int size() const { return static_cast<int>(centers_.size()); }
  double spacing() const { return spacing_; }
  double width() const { return width_; }
  const std::vector<double>& centers() const { return centers_; }
  Eigen::VectorXd operator()(double distance) const;

 private:
  double spacing_, width_;
  std::vector<double> centers_;
};

/// Invariant per-order embeddings of one edge for one layer; source[m] and
/// target[m] (m = 0..M) have H entries each.
struct EdgeEmbedding {
  std::vector<Eigen::VectorXd> source, target;
};

EdgeEmbedding edge_embedding(double distance, int z_source, int z_target,
                             const ModelWeights& w, int layer);

/// Aligned-frame SO(2) block. Orders above M are zero in the output.
IrrepsCoeffs so2_block(const IrrepsCoeffs& aligned, const std::vector<Eigen::VectorXd>& emb,
                       const SO2BlockWeights& weights, const ModelConfig& config);

/// Sample on a grid, apply the activation, project back. With mmax >= 0
/// only orders |m| <= mmax enter and leave (the input must have none above).
class SphereActivation {
 public:
  SphereActivation(const sphere::SphereGrid& grid, int lmax, Activation act, int mmax = -1);

  /// Rows: coefficients (full (lmax+1)^2 layout), any number of columns.
  CoeffMatrix apply(const CoeffMatrix& coeffs) const;

 private:
  int lmax_, mmax_;
  Activation act_;
  std::vector<int> rows_;        // coefficient rows kept
  Eigen::MatrixXd to_grid_;      // points x kept
  Eigen::MatrixXd from_grid_;    // kept x points
};

IrrepsCoeffs pointwise_nonlinearity(const IrrepsCoeffs& x, const sphere::SphereGrid& grid,
                                    Activation act);

/// a_st for one edge. `frame`, when given, replaces the default alignment
/// rotation; it must carry r_st onto +y.
IrrepsCoeffs message(const IrrepsCoeffs& x_source, const IrrepsCoeffs& x_target, const Vec3& r_st,
                     int z_source, int z_target, const ModelWeights& w, int layer,
                     const Mat3* frame = nullptr);

/// Sum of the two SO(2) block outputs for one edge, rotated back to the
/// global frame without the spherical activation.
IrrepsCoeffs message_preactivation(const IrrepsCoeffs& x_source, const IrrepsCoeffs& x_target,
                                   const Vec3& r_st, int z_source, int z_target,
                                   const ModelWeights& w, int layer);

/// x_t' = x_t + projection of P_agg(F_a, F_x) with a_t the order-independent
/// sum (or mean) of `messages`.
IrrepsCoeffs aggregate(const std::vector<IrrepsCoeffs>& messages, const IrrepsCoeffs& x_target,
                       const ModelWeights& w, int layer);

struct Prediction {
  double energy = 0.0;
  std::vector<double> atom_energies;
  std::vector<Vec3> forces;
};

Prediction forward(const AtomicGraph& graph, const ModelWeights& w);

/// Final node embeddings after all layers (used by tests and diagnostics).
std::vector<IrrepsCoeffs> node_embeddings(const AtomicGraph& graph, const ModelWeights& w);

// ---------------------------------------------------------------------------

namespace detail {
template <class Fn>
void visit_dense(const std::string& name, Dense& d, Fn& fn) {
  fn(name + ".weight", d.weight.data(), d.weight.rows(), d.weight.cols());
  fn(name + ".bias", d.bias.data(), d.bias.rows(), Eigen::Index{1});
}
template <class Fn>
void visit_block(const std::string& name, SO2BlockWeights& b, Fn& fn) {
  for (std::size_t m = 0; m < b.down_re.size(); ++m) {
    const std::string p = name + ".m" + std::to_string(m);
    fn(p + ".down_re", b.down_re[m].data(), b.down_re[m].rows(), b.down_re[m].cols());
    if (m > 0) fn(p + ".down_im", b.down_im[m].data(), b.down_im[m].rows(), b.down_im[m].cols());
    fn(p + ".up_re", b.up_re[m].data(), b.up_re[m].rows(), b.up_re[m].cols());
    if (m > 0) fn(p + ".up_im", b.up_im[m].data(), b.up_im[m].rows(), b.up_im[m].cols());
  }
}
}  // namespace detail

// Arrays are column-major (Eigen default).
template <class Fn>
void for_each_array(ModelWeights& w, Fn&& fn) {
  fn(std::string("node_embedding"), w.node_embedding.data(), w.node_embedding.rows(),
     w.node_embedding.cols());
  fn(std::string("source_embedding"), w.source_embedding.data(), w.source_embedding.rows(),
     w.source_embedding.cols());
  fn(std::string("target_embedding"), w.target_embedding.data(), w.target_embedding.rows(),
     w.target_embedding.cols());
  detail::visit_dense("radial", w.radial, fn);
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    const std::string p = "layers." + std::to_string(k);
    LayerWeights& l = w.layers[k];
    detail::visit_dense(p + ".edge1", l.edge1, fn);
    detail::visit_dense(p + ".edge2", l.edge2, fn);
    detail::visit_block(p + ".source", l.source, fn);
    detail::visit_block(p + ".target", l.target, fn);
    detail::visit_dense(p + ".agg1", l.agg1, fn);
    detail::visit_dense(p + ".agg2", l.agg2, fn);
    detail::visit_dense(p + ".agg3", l.agg3, fn);
  }
  detail::visit_dense("energy1", w.energy1, fn);
  detail::visit_dense("energy2", w.energy2, fn);
  detail::visit_dense("energy3", w.energy3, fn);
  detail::visit_dense("force1", w.force1, fn);
  detail::visit_dense("force2", w.force2, fn);
  detail::visit_dense("force3", w.force3, fn);
}

}  // namespace escn::model
