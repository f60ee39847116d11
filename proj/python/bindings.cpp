#include <escn/cg.hpp>
#include <escn/conv.hpp>
#include <escn/harness.hpp>
#include <escn/model.hpp>
#include <escn/rotations.hpp>
#include <escn/sphere_math.hpp>
#include <escn/weights_io.hpp>
#include <escn/xyz.hpp>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace escn;

namespace {

using RowVectors = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

IrrepsCoeffs coeffs_from(const Eigen::MatrixXd& x) {
  const auto rows = x.rows();
  int lmax = 0;
  while (num_coeffs(lmax) < rows) ++lmax;
  if (num_coeffs(lmax) != rows || x.cols() < 1)
    throw DomainError("coefficients need (L+1)^2 rows and at least one column");
  IrrepsCoeffs c(lmax, static_cast<int>(x.cols()));
  c.data = x;
  return c;
}

cg::HTensor h_from(const Eigen::MatrixXd& values, int lmax) {
  cg::HTensor h(lmax, static_cast<int>(values.cols()));
  if (values.rows() != h.values.rows())
    throw DomainError("h has " + std::to_string(values.rows()) + " rows, expected " +
                      std::to_string(h.values.rows()));
  h.values = values;
  return h;
}

cg::HTildeTensor htilde_from(const Eigen::MatrixXd& values, int lmax) {
  cg::HTildeTensor ht(lmax, static_cast<int>(values.cols()));
  if (values.rows() != ht.values.rows())
    throw DomainError("h~ has " + std::to_string(values.rows()) + " rows, expected " +
                      std::to_string(ht.values.rows()));
  ht.values = values;
  return ht;
}

conv::ConvSpec spec_for(const IrrepsCoeffs& x, int mmax) {
  return conv::ConvSpec::full(x.lmax, x.channels(), mmax);
}

std::string report_json(const harness::Report& r, bool timings) { return r.to_json(timings).dump(); }

model::ModelWeights weights_for(const std::string& path, std::uint64_t seed, int lmax, int mmax,
                                int layers, int channels, const std::string& activation) {
  if (!path.empty()) return io::load_weights(path);
  model::ModelConfig c;
  c.lmax = lmax;
  c.mmax = mmax;
  c.layers = layers;
  c.channels = channels;
  c.activation = model::activation_from_string(activation);
  c.validate();
  return model::ModelWeights::random(c, seed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Equivariant convolutions on spherical-harmonic features";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_IOError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("num_coeffs", &num_coeffs, py::arg("lmax"));
  m.def("lm_index", &lm_index, py::arg("l"), py::arg("m"));

  m.def(
      "real_sh",
      [](int lmax, const Vec3& v) { return sphere::eval_real_sh(lmax, sphere::Direction::normalized(v)); },
      py::arg("lmax"), py::arg("direction"),
      "Real spherical harmonics up to lmax at a direction (normalised first).");

  m.def(
      "wigner_d",
      [](int lmax, const Mat3& r) {
        if (!rot::is_rotation(r, 1e-9)) throw DomainError("wigner_d: not a rotation matrix");
        return rot::wigner_d(lmax, r).blocks;
      },
      py::arg("lmax"), py::arg("rotation"), "Per-degree blocks D_l with Y(R r) = D Y(r).");

  m.def(
      "rotate",
      [](const Eigen::MatrixXd& x, const Mat3& r) {
        const IrrepsCoeffs c = coeffs_from(x);
        return Eigen::MatrixXd(rot::rotate_irreps(c, rot::wigner_d(c.lmax, r)).data);
      },
      py::arg("coeffs"), py::arg("rotation"));

  m.def("align_to_y",
        [](const Vec3& v) { return rot::align_to_y(sphere::Direction::normalized(v)); },
        py::arg("direction"), "Rotation taking the direction onto +y.");

  m.def("su2_cg", &cg::su2_cg, py::arg("li"), py::arg("mi"), py::arg("lf"), py::arg("mf"),
        py::arg("lo"), py::arg("mo"));
  m.def(
      "real_cg",
      [](int li, int mi, int lf, int mf, int lo, int mo) {
        const int lio = li > lo ? li : lo;
        return cg::real_cg_table(lio, lf)->at(li, mi, lf, mf, lo, mo);
      },
      py::arg("li"), py::arg("mi"), py::arg("lf"), py::arg("mf"), py::arg("lo"), py::arg("mo"));

  m.def("h_rows", [](int lmax) { return static_cast<int>(cg::HTensor(lmax, 1).values.rows()); },
        py::arg("lmax"), "Row count of the h and h~ arrays for a given lmax.");
  m.def(
      "h_index",
      [](int lmax, int li, int lf, int lo) {
        const cg::HTensor h(lmax, 1);
        return h.pair_offset(li, lo) + (lf - (li > lo ? li - lo : lo - li));
      },
      py::arg("lmax"), py::arg("li"), py::arg("lf"), py::arg("lo"));
  m.def(
      "h_to_htilde",
      [](const Eigen::MatrixXd& h, int lmax) {
        return Eigen::MatrixXd(cg::h_to_htilde(h_from(h, lmax), *cg::real_cg_table(lmax, 2 * lmax)).values);
      },
      py::arg("h"), py::arg("lmax"));
  m.def(
      "htilde_to_h",
      [](const Eigen::MatrixXd& ht, int lmax) {
        return Eigen::MatrixXd(cg::htilde_to_h(htilde_from(ht, lmax), *cg::real_cg_table(lmax, 2 * lmax)).values);
      },
      py::arg("htilde"), py::arg("lmax"));

  m.def(
      "naive_conv",
      [](const Eigen::MatrixXd& x, const Vec3& dir, const Eigen::MatrixXd& h) {
        const IrrepsCoeffs c = coeffs_from(x);
        return Eigen::MatrixXd(
            conv::naive_conv(c, sphere::Direction::normalized(dir), h_from(h, c.lmax), spec_for(c, -1)).data);
      },
      py::arg("x"), py::arg("direction"), py::arg("h"));
  m.def(
      "aligned_conv",
      [](const Eigen::MatrixXd& x, const Vec3& dir, const Eigen::MatrixXd& h) {
        const IrrepsCoeffs c = coeffs_from(x);
        return Eigen::MatrixXd(
            conv::aligned_conv(c, sphere::Direction::normalized(dir), h_from(h, c.lmax), spec_for(c, -1)).data);
      },
      py::arg("x"), py::arg("direction"), py::arg("h"));
  m.def(
      "so2_conv",
      [](const Eigen::MatrixXd& x, const Vec3& dir, const Eigen::MatrixXd& htilde, int mmax) {
        const IrrepsCoeffs c = coeffs_from(x);
        return Eigen::MatrixXd(conv::so2_conv(c, sphere::Direction::normalized(dir),
                                              htilde_from(htilde, c.lmax), spec_for(c, mmax))
                                   .data);
      },
      py::arg("x"), py::arg("direction"), py::arg("htilde"), py::arg("mmax") = -1);

  m.def(
      "forward",
      [](const RowVectors& positions, const std::vector<int>& atomic_numbers, std::uint64_t seed,
         const std::string& weights, int lmax, int mmax, int layers, int channels,
         const std::string& activation) {
        if (static_cast<std::size_t>(positions.rows()) != atomic_numbers.size())
          throw DomainError("forward: positions and atomic_numbers differ in length");
        const auto w = weights_for(weights, seed, lmax, mmax, layers, channels, activation);
        std::vector<Vec3> pos;
        for (Eigen::Index i = 0; i < positions.rows(); ++i) pos.emplace_back(positions.row(i).transpose());
        const model::Prediction p = model::forward(model::build_graph(pos, atomic_numbers, w.config), w);
        RowVectors f(static_cast<Eigen::Index>(p.forces.size()), 3);
        for (std::size_t i = 0; i < p.forces.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = p.forces[i].transpose();
        return py::make_tuple(p.energy, f);
      },
      py::arg("positions"), py::arg("atomic_numbers"), py::arg("seed") = 0, py::arg("weights") = "",
      py::arg("lmax") = 6, py::arg("mmax") = 2, py::arg("layers") = 12, py::arg("channels") = 128,
      py::arg("activation") = "silu",
      "Energy and per-atom forces; random weights from seed unless a weight file is given.");

  m.def(
      "save_random_weights",
      [](const std::string& path, std::uint64_t seed, int lmax, int mmax, int layers, int channels,
         const std::string& activation) {
        io::save_weights(path, weights_for("", seed, lmax, mmax, layers, channels, activation));
      },
      py::arg("path"), py::arg("seed") = 0, py::arg("lmax") = 6, py::arg("mmax") = 2,
      py::arg("layers") = 12, py::arg("channels") = 128, py::arg("activation") = "silu");

  m.def("atomic_number", &io::atomic_number, py::arg("symbol"));

  m.def(
      "check_equivalence",
      [](int lmax, int channels, int trials, std::uint64_t seed, bool timings) {
        return report_json(harness::check_equivalence({lmax, channels, trials, seed}), timings);
      },
      py::arg("lmax") = 6, py::arg("channels") = 4, py::arg("trials") = 100, py::arg("seed") = 0,
      py::arg("timings") = true);
  m.def(
      "check_equivariance",
      [](const std::vector<int>& grids, const std::string& activation, int trials, std::uint64_t seed,
         int lmax, int mmax, int channels, bool timings) {
        harness::EquivarianceOptions o;
        o.grids = grids;
        o.activation = model::activation_from_string(activation);
        o.trials = trials;
        o.seed = seed;
        o.lmax = lmax;
        o.mmax = mmax;
        o.channels = channels;
        return report_json(harness::check_equivariance(o), timings);
      },
      py::arg("grids") = std::vector<int>{10, 12, 14, 16, 18}, py::arg("activation") = "silu",
      py::arg("trials") = 256, py::arg("seed") = 0, py::arg("lmax") = 6, py::arg("mmax") = 2,
      py::arg("channels") = 128, py::arg("timings") = true);
  m.def(
      "bench",
      [](const std::vector<int>& lmax_list, int channels, int edges, const std::string& mode,
         std::uint64_t seed, bool timings) {
        return report_json(harness::bench({lmax_list, channels, edges, mode, seed}), timings);
      },
      py::arg("lmax_list") = std::vector<int>{2, 4, 6, 8}, py::arg("channels") = 64,
      py::arg("edges") = 1000, py::arg("mode") = "both", py::arg("seed") = 0, py::arg("timings") = true);
  m.def(
      "predict",
      [](const std::string& input, const std::string& weights, std::uint64_t seed,
         std::optional<int> lmax, std::optional<int> mmax, std::optional<int> layers,
         std::optional<int> channels, std::optional<std::string> activation, bool timings) {
        harness::PredictOptions o;
        o.input = input;
        o.weights = weights;
        o.seed = seed;
        o.lmax = lmax;
        o.mmax = mmax;
        o.layers = layers;
        o.channels = channels;
        if (activation) o.activation = model::activation_from_string(*activation);
        return report_json(harness::predict(o), timings);
      },
      py::arg("input"), py::arg("weights") = "", py::arg("seed") = 0, py::arg("lmax") = py::none(),
      py::arg("mmax") = py::none(), py::arg("layers") = py::none(), py::arg("channels") = py::none(),
      py::arg("activation") = py::none(), py::arg("timings") = true);
  m.def(
      "cgtable",
      [](int lmax, int lmax_filter, const std::string& basis) {
        const auto r = harness::cgtable({lmax, lmax_filter, basis});
        return py::make_tuple(r.text, report_json(r.report, true));
      },
      py::arg("lmax") = 2, py::arg("lmax_filter") = -1, py::arg("basis") = "real");
}
