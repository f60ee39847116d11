// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--allow-fail N]...
//
// Exit status is 0 when every criterion passes, except those named with
// --allow-fail, whose failures are still printed as FAIL.

#include <escn/harness.hpp>
#include <escn/rotations.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace escn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  for (;;) {
    Vec3 v(n(rng), n(rng), n(rng));
    if (v.norm() > 1e-3) return v.normalized();
  }
}

Eigen::MatrixXd dense(const rot::WignerDBlocks& d) {
  const int n = num_coeffs(d.lmax);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l <= d.lmax; ++l) m.block(l * l, l * l, 2 * l + 1, 2 * l + 1) = d.block(l);
  return m;
}

// 1 -------------------------------------------------------------------------
Outcome oracle_equivalence() {
  double worst_low = 0.0, worst_high = 0.0;
  for (int L : {1, 2, 4, 6, 8})
    for (int C : {1, 4}) {
      harness::EquivalenceOptions o;
      o.lmax = L;
      o.channels = C;
      o.trials = 100;
      o.seed = 1000 + static_cast<std::uint64_t>(10 * L + C);
      const auto r = harness::check_equivalence(o);
      double e = 0.0;
      for (const auto& c : r.checks)
        if (c.name == "max_abs_naive_vs_so2") e = c.value;
      (L <= 6 ? worst_low : worst_high) = std::max(L <= 6 ? worst_low : worst_high, e);
    }
  return {worst_low < 1e-10 && worst_high < 1e-9,
          fmt("max|naive-so2| L<=6 %.2e (<1e-10), L=8 %.2e (<1e-9)", worst_low, worst_high)};
}

// 2 -------------------------------------------------------------------------
Outcome filter_sparsity() {
  const auto t = cg::real_cg_table(8, 8);
  double off = 0.0, sym = 0.0, anti = 0.0, parity = 0.0;
  int blocks = 0;
  for (const auto& b : t->blocks()) {
    ++blocks;
    const bool odd = (b.li + b.lf + b.lo) % 2 != 0;
    for (int mi = -b.li; mi <= b.li; ++mi)
      for (int mo = -b.lo; mo <= b.lo; ++mo)
        if (std::abs(mi) != std::abs(mo)) off = std::max(off, std::abs(b(mi, 0, mo)));
    for (int m = 1; m <= std::min(b.li, b.lo); ++m) {
      sym = std::max(sym, std::abs(b(m, 0, m) - b(-m, 0, -m)));
      anti = std::max(anti, std::abs(b(-m, 0, m) + b(m, 0, -m)));
      parity = std::max(parity, std::abs(odd ? b(m, 0, m) : b(-m, 0, m)));
    }
    if (odd) parity = std::max(parity, std::abs(b(0, 0, 0)));
  }
  const double worst = std::max({off, sym, anti, parity});
  return {worst < 1e-12,
          fmt("%d triples; off-pattern %.1e, symmetry %.1e, antisymmetry %.1e, parity %.1e (<1e-12)",
              blocks, off, sym, anti, parity)};
}

// 3 -------------------------------------------------------------------------
Outcome bijection() {
  const int L = 8;
  const auto t = cg::real_cg_table(L, 2 * L);
  bool dims = true;
  for (int li = 0; li <= L; ++li)
    for (int lo = 0; lo <= L; ++lo) {
      int n = 0;
      for (int lf = 0; lf <= 2 * L; ++lf) n += cg::triangle(li, lf, lo);
      dims = dims && n == 2 * std::min(li, lo) + 1;
    }
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  cg::HTensor h(L, 1000);  // 1000 independent h, one per channel
  for (Eigen::Index i = 0; i < h.values.size(); ++i) h.values.data()[i] = normal(rng);
  const auto back = cg::htilde_to_h(cg::h_to_htilde(h, *t), *t);
  const double err = (back.values - h.values).cwiseAbs().maxCoeff();
  return {dims && err < 1e-10,
          fmt("dimension count %s; max round-trip error %.2e over 1000 h (<1e-10)", dims ? "ok" : "MISMATCH", err)};
}

// 4 -------------------------------------------------------------------------
Outcome complexity() {
  std::vector<double> ls, naive, so2;
  for (int L : {2, 4, 6, 8}) {
    ls.push_back(L);
    naive.push_back(static_cast<double>(conv::count_cost(conv::Path::naive, L, L, 64).multiplies));
    so2.push_back(static_cast<double>(conv::count_cost(conv::Path::so2, L, L, 64).multiplies));
  }
  const double sn = harness::loglog_slope(ls, naive), ss = harness::loglog_slope(ls, so2);
  const auto tn = conv::count_cost(conv::Path::naive, 6, 6, 64, 1000, 41);
  const auto ts = conv::count_cost(conv::Path::so2, 6, 6, 64, 1000, 41);
  const double ratio = tn.wall_seconds / ts.wall_seconds;
  return {sn >= 5.0 && ss <= 3.5 && ratio >= 5.0,
          fmt("multiply slope naive %.2f (>=5.0) %s, so2 %.2f (<=3.5) %s; wall ratio L=6 %.1fx (>=5) %s", sn,
              sn >= 5.0 ? "ok" : "MISSED", ss, ss <= 3.5 ? "ok" : "MISSED", ratio, ratio >= 5.0 ? "ok" : "MISSED")};
}

// 5 -------------------------------------------------------------------------
Outcome quasi_equivariance() {
  harness::EquivarianceOptions silu;
  silu.seed = 5;
  silu.white_noise = false;
  const auto rs = harness::check_equivariance(silu);
  harness::EquivarianceOptions ident = silu;
  ident.activation = model::Activation::identity;
  ident.grids = {13, 14, 16, 18};
  const auto ri = harness::check_equivariance(ident);
  double g14 = 0.0, id = 0.0;
  std::string trend;
  for (const auto& row : rs.results["rows"]) {
    if (row["grid"] == 14) g14 = row["relative_error"];
    trend += fmt("%s%d:%.2f%%", trend.empty() ? "" : " ", row["grid"].get<int>(),
                 100.0 * row["relative_error"].get<double>());
  }
  for (const auto& row : ri.results["rows"]) id = std::max(id, row["relative_error"].get<double>());
  return {rs.pass() && ri.pass(),
          fmt("SiLU grid 14 %.2f%% (0.3%%..3%%); trend %s; identity %.1e (<1e-9)", 100.0 * g14, trend.c_str(), id)};
}

// 6 -------------------------------------------------------------------------
std::vector<Vec3> dyadic_cluster(int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(-160, 160);
  std::vector<Vec3> p;
  while (static_cast<int>(p.size()) < n) {
    const Vec3 v(u(rng) / 64.0, u(rng) / 64.0, u(rng) / 64.0);
    bool ok = true;
    for (const auto& q : p) ok = ok && (q - v).norm() > 0.9;
    if (ok) p.push_back(v);
  }
  return p;
}

double rel_force(const std::vector<Vec3>& ref, const std::vector<Vec3>& got) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += (ref[i] - got[i]).squaredNorm();
    den += ref[i].squaredNorm();
  }
  return std::sqrt(num / den);
}

Outcome model_properties() {
  std::mt19937_64 rng(6);
  const int n = 8;
  const auto pos = dyadic_cluster(n, rng);
  const std::vector<int> z = {6, 8, 1, 1, 7, 6, 1, 26};
  const model::ModelConfig c;
  const auto w = model::ModelWeights::random(c, 6);
  const auto p = model::forward(model::build_graph(pos, z, c), w);

  auto moved = pos;
  for (auto& v : moved) v += Vec3(7.25, -3.5, 0.015625);
  const auto pt = model::forward(model::build_graph(moved, z, c), w);
  const bool translation = pt.energy == p.energy && pt.forces == p.forces;

  const std::vector<int> perm = {3, 7, 0, 5, 1, 6, 2, 4};
  std::vector<Vec3> pp;
  std::vector<int> zp;
  for (int i : perm) {
    pp.push_back(pos[static_cast<std::size_t>(i)]);
    zp.push_back(z[static_cast<std::size_t>(i)]);
  }
  const auto pq = model::forward(model::build_graph(pp, zp, c), w);
  bool permutation = pq.energy == p.energy;
  for (int k = 0; k < n; ++k)
    permutation = permutation && pq.forces[static_cast<std::size_t>(k)] == p.forces[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];

  const Mat3 r = rot::random_rotation(rng);
  auto rp = pos;
  for (auto& v : rp) v = r * v;
  std::vector<Vec3> rf;
  for (const auto& f : p.forces) rf.push_back(r * f);
  const auto pr = model::forward(model::build_graph(rp, z, c), w);
  const double silu_e = std::abs(pr.energy - p.energy) / std::abs(p.energy);
  const double silu_f = rel_force(rf, pr.forces);

  model::ModelConfig ci;
  ci.activation = model::Activation::identity;
  ci.layers = 2;
  const auto wi = model::ModelWeights::random(ci, 7);
  const auto pi = model::forward(model::build_graph(pos, z, ci), wi);
  const auto pir = model::forward(model::build_graph(rp, z, ci), wi);
  std::vector<Vec3> rfi;
  for (const auto& f : pi.forces) rfi.push_back(r * f);
  const double id_e = std::abs(pir.energy - pi.energy) / std::max(1.0, std::abs(pi.energy));
  const double id_f = rel_force(rfi, pir.forces);

  auto joint = pos;
  for (const auto& v : pos) joint.push_back(v + Vec3(0.0, 40.0, 0.0));
  auto zj = z;
  zj.insert(zj.end(), z.begin(), z.end());
  const auto pj = model::forward(model::build_graph(joint, zj, c), w);
  const double additivity = std::abs(pj.energy - 2.0 * p.energy);

  const bool ok = translation && permutation && silu_e <= 0.02 && silu_f <= 0.02 && id_e < 1e-8 &&
                  id_f < 1e-8 && additivity < 1e-10;
  return {ok, fmt("translation %s, permutation %s; rotation SiLU dE %.1e dF %.1e (<=2e-2), identity K=2 "
                  "dE %.1e dF %.1e (<1e-8); additivity %.1e (<1e-10)",
                  translation ? "bit-exact" : "DIFFERS", permutation ? "bit-exact" : "DIFFERS", silu_e, silu_f,
                  id_e, id_f, additivity)};
}

// 7 -------------------------------------------------------------------------
Outcome steerability() {
  std::mt19937_64 rng(7);
  double steer = 0.0, hom = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Mat3 r = rot::random_rotation(rng);
    const Vec3 d = random_unit(rng);
    const Eigen::VectorXd lhs = sphere::eval_real_sh(8, sphere::Direction::normalized(r * d));
    const Eigen::VectorXd rhs = dense(rot::wigner_d(8, r)) * sphere::eval_real_sh(8, sphere::Direction(d));
    steer = std::max(steer, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  for (int t = 0; t < 100; ++t) {
    const Mat3 a = rot::random_rotation(rng), b = rot::random_rotation(rng);
    const Eigen::MatrixXd diff = dense(rot::wigner_d(6, a)) * dense(rot::wigner_d(6, b)) - dense(rot::wigner_d(6, a * b));
    hom = std::max(hom, diff.cwiseAbs().maxCoeff());
  }
  return {steer < 1e-9 && hom < 1e-9,
          fmt("Y(Rr) vs D(R)Y(r) L=8 %.1e (<1e-9); D(R1)D(R2) vs D(R1R2) L=6 %.1e (<1e-9)", steer, hom)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, allowed;
  for (int i = 1; i < argc; ++i) {
    const bool o = std::strcmp(argv[i], "--only") == 0, a = std::strcmp(argv[i], "--allow-fail") == 0;
    if ((o || a) && i + 1 < argc) {
      (o ? only : allowed).insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--only N]... [--allow-fail N]...\n", argv[0]);
      return 2;
    }
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"filter-aligned CG sparsity", filter_sparsity},
      {"h <-> h~ bijection", bijection},
      {"complexity", complexity},
      {"quasi-equivariance", quasi_equivariance},
      {"end-to-end model properties", model_properties},
      {"steerability and group structure", steerability},
  };

  int unexpected = 0;
  std::vector<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %d  %-34s %s  [%.1fs]\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first,
                out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) {
      failed.push_back(id);
      if (!allowed.count(id)) ++unexpected;
    }
  }
  if (!failed.empty()) {
    std::printf("failed:");
    for (int id : failed) std::printf(" %d%s", id, allowed.count(id) ? " (allowed)" : "");
    std::printf("\n");
  }
  return unexpected == 0 ? 0 : 1;
}
