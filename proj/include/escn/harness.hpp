#pragma once

// Verification, benchmark and prediction commands. Each returns a Report
// whose JSON form is what the command line tool prints.

#include <escn/cg.hpp>
#include <escn/model.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace escn::harness {

/// value must satisfy min <= value <= max for whichever bounds are set.
struct Check {
  std::string name;
  double value = 0.0;
  std::optional<double> min, max;
  bool pass = false;
};

struct Report {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<Check> checks;
  nlohmann::json results = nlohmann::json::object();
  nlohmann::json timings = nlohmann::json::object();
  std::uint64_t seed = 0;

  const Check& check_below(const std::string& name, double value, double max);
  const Check& check_above(const std::string& name, double value, double min);
  const Check& check_within(const std::string& name, double value, double min, double max);

  bool pass() const;
  /// Timings are left out when `with_timings` is false so that two runs
  /// with the same seed can be compared byte for byte.
  nlohmann::json to_json(bool with_timings = true) const;
};

struct EquivalenceOptions {
  int lmax = 6;
  int channels = 4;
  int trials = 100;
  std::uint64_t seed = 0;
};

/// naive vs aligned vs so2 convolution on random (x, direction, h) and the
/// h -> h~ -> h round trip. Tolerance 1e-10 for lmax <= 6, 1e-9 above.
Report check_equivalence(const EquivalenceOptions& opt);

struct EquivarianceOptions {
  std::vector<int> grids = {10, 12, 14, 16, 18};
  model::Activation activation = model::Activation::silu;
  int trials = 256;
  std::uint64_t seed = 0;
  int lmax = 6;
  int mmax = 2;
  int channels = 128;
  bool white_noise = true;  // extra unchecked rows on N(0,1) coefficients
};

/// Mean of |N(a) - D^T N(D a)|_1 / |N(a)|_1 over uniform rotations for one
/// model message a, where N is the point-wise activation on a g x g
/// equiangular grid.
Report check_equivariance(const EquivarianceOptions& opt);

/// The same statistic for an arbitrary coefficient set.
double equivariance_error(const IrrepsCoeffs& a, const sphere::SphereGrid& grid,
                          model::Activation act, int trials, std::uint64_t seed);

/// Model message used by check_equivariance (inputs drawn from `seed`).
IrrepsCoeffs sample_message(const EquivarianceOptions& opt);

struct BenchOptions {
  std::vector<int> lmax_list = {2, 4, 6, 8};
  int channels = 64;
  int edges = 1000;
  std::string mode = "both";  // naive | so2 | both
  std::uint64_t seed = 0;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

Report bench(const BenchOptions& opt);

struct PredictOptions {
  std::string input;
  std::string weights;  // empty: random weights from seed
  std::uint64_t seed = 0;
  std::optional<int> lmax, mmax, layers, channels;
  std::optional<model::Activation> activation;
};

Report predict(const PredictOptions& opt);

struct CgTableOptions {
  int lmax = 2;
  int lmax_filter = -1;  // < 0: 2 lmax
  std::string basis = "real";  // real | complex | compact
};

/// Table text plus a report with the round-trip and sparsity checks.
struct CgTableResult {
  std::string text;
  Report report;
};

CgTableResult cgtable(const CgTableOptions& opt);

}  // namespace escn::harness
