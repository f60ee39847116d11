#include <escn/harness.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace escn;

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

void emit(const std::string& text, const std::string& path, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw InputError("write failed: " + path);
}

int finish(const harness::Report& r, const std::string& out_path, std::ostream& fallback = std::cout) {
  emit(r.to_json().dump(2) + "\n", out_path, fallback);
  return r.pass() ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equivariant convolutions via SO(2) reduction: checks, benchmarks, prediction"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string out_path;

  auto* eqv = app.add_subcommand("check-equivalence", "naive vs aligned vs SO(2) convolution");
  harness::EquivalenceOptions eqv_opt;
  eqv->add_option("--lmax", eqv_opt.lmax, "Largest degree (<= 8)")->capture_default_str();
  eqv->add_option("--channels", eqv_opt.channels)->capture_default_str();
  eqv->add_option("--trials", eqv_opt.trials)->capture_default_str();

  auto* eqr = app.add_subcommand("check-equivariance", "Rotation error of the spherical activation");
  harness::EquivarianceOptions eqr_opt;
  std::string eqr_act = "silu";
  eqr->add_option("--grid", eqr_opt.grids, "Equiangular grid sizes")->capture_default_str();
  eqr->add_option("--activation", eqr_act)->check(CLI::IsMember({"silu", "identity"}))->capture_default_str();
  eqr->add_option("--trials", eqr_opt.trials, "Random rotations")->capture_default_str();

  auto* bch = app.add_subcommand("bench", "Operation counts and wall time, naive vs SO(2)");
  harness::BenchOptions bch_opt;
  bch->add_option("--lmax-list", bch_opt.lmax_list)->capture_default_str();
  bch->add_option("--channels", bch_opt.channels)->capture_default_str();
  bch->add_option("--edges", bch_opt.edges)->capture_default_str();
  bch->add_option("--mode", bch_opt.mode)->check(CLI::IsMember({"naive", "so2", "both"}))->capture_default_str();

  auto* prd = app.add_subcommand("predict", "Energy and forces for an XYZ structure");
  harness::PredictOptions prd_opt;
  int p_lmax = -1, p_mmax = -1, p_layers = -1, p_channels = -1;
  std::string p_act;
  prd->add_option("--input", prd_opt.input, "XYZ file")->required();
  prd->add_option("--weights", prd_opt.weights, "Weight file (random weights from --seed otherwise)");
  prd->add_option("--lmax", p_lmax);
  prd->add_option("--mmax", p_mmax);
  prd->add_option("--layers", p_layers);
  prd->add_option("--channels", p_channels);
  prd->add_option("--activation", p_act)->check(CLI::IsMember({"silu", "identity"}));

  auto* cgt = app.add_subcommand("cgtable", "Dump a Clebsch-Gordan table");
  harness::CgTableOptions cgt_opt;
  std::string report_path;
  cgt->add_option("--lmax", cgt_opt.lmax, "Largest input/output degree (<= 10)")->capture_default_str();
  cgt->add_option("--lmax-filter", cgt_opt.lmax_filter, "Largest filter degree (default 2 lmax)");
  cgt->add_option("--basis", cgt_opt.basis)->check(CLI::IsMember({"real", "complex", "compact"}))->capture_default_str();
  cgt->add_option("--report", report_path, "JSON report path (stderr when the table goes to stdout)");

  for (auto* sub : {eqv, eqr, bch, prd, cgt}) {
    sub->add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
    sub->add_option("--out", out_path, sub == cgt ? "Table path (default stdout)" : "Report path (default stdout)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*eqv) {
      eqv_opt.seed = seed;
      return finish(harness::check_equivalence(eqv_opt), out_path);
    }
    if (*eqr) {
      eqr_opt.seed = seed;
      eqr_opt.activation = model::activation_from_string(eqr_act);
      return finish(harness::check_equivariance(eqr_opt), out_path);
    }
    if (*bch) {
      bch_opt.seed = seed;
      return finish(harness::bench(bch_opt), out_path);
    }
    if (*prd) {
      prd_opt.seed = seed;
      if (p_lmax >= 0) prd_opt.lmax = p_lmax;
      if (p_mmax >= 0) prd_opt.mmax = p_mmax;
      if (p_layers >= 0) prd_opt.layers = p_layers;
      if (p_channels >= 0) prd_opt.channels = p_channels;
      if (!p_act.empty()) prd_opt.activation = model::activation_from_string(p_act);
      return finish(harness::predict(prd_opt), out_path);
    }
    if (*cgt) {
      auto res = harness::cgtable(cgt_opt);
      res.report.seed = seed;
      emit(res.text, out_path, std::cout);
      const bool table_on_stdout = out_path.empty() || out_path == "-";
      return finish(res.report, report_path, table_on_stdout ? std::cerr : std::cout);
    }
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
