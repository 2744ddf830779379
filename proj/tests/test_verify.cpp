#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "depsketch/rng.hpp"
#include "depsketch/stats.hpp"
#include "depsketch/verify.hpp"

using namespace depsketch;
namespace vf = depsketch::verify;
using processes::ProcessConfig;
using graph::GmFamily;

namespace {

ProcessConfig iid_gaussian(int n) {
  ProcessConfig cfg;
  cfg.family = GmFamily::GM1;
  cfg.n = n;
  cfg.modulate = false;
  return cfg;
}

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
  auto eng = make_engine(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) B(i, j) = B(j, i) = gauss(eng);
  return B;
}

}  // namespace

TEST_CASE("estimate_cbd: zero matrix gives exact zeros") {
  std::vector<Eigen::MatrixXd> mats{Eigen::MatrixXd::Zero(3, 4)};
  auto rep = vf::estimate_cbd(mats, iid_gaussian(4), 100, 1);
  CHECK(rep.verdict == vf::Verdict::Pass);
  for (const auto& s : rep.stats) {
    CHECK(s.mean == 0.0);
    CHECK(s.max == 0.0);
  }
}

TEST_CASE("estimate_cbd: identity fixture matches the chi-square oracle") {
  // A = {I_4}, iid N(0,1): C = D = |chi^2_4 - 4| with E = 16 e^{-2}.
  std::vector<Eigen::MatrixXd> mats{Eigen::MatrixXd::Identity(4, 4)};
  auto rep = vf::estimate_cbd(mats, iid_gaussian(4), 20000, 2);
  CHECK(rep.verdict == vf::Verdict::Pass);
  const auto& C = rep.stats[0];
  const auto& B = rep.stats[1];
  const auto& D = rep.stats[2];
  double oracle = 16.0 * std::exp(-2.0);
  CHECK(std::fabs(C.mean - oracle) <= 3.0 * C.se);
  // Diagonal split is exact: D equals C trial by trial for A = I.
  CHECK(D.mean == doctest::Approx(C.mean));
  CHECK(D.max == doctest::Approx(C.max));
  // The Gram of the identity has no off-diagonal part.
  CHECK(B.mean == 0.0);
}

TEST_CASE("estimate_cbd: C <= B + D in 100% of trials, dependent config") {
  ProcessConfig cfg;
  cfg.family = GmFamily::GM2;
  cfg.n = 6;
  std::vector<Eigen::MatrixXd> mats;
  for (int k = 0; k < 3; ++k)
    mats.push_back(random_symmetric(6, 50 + k) +
                   Eigen::MatrixXd::Identity(6, 6) * (k + 1));
  auto rep = vf::estimate_cbd(mats, cfg, 5000, 3);
  CHECK(rep.verdict == vf::Verdict::Pass);
}

TEST_CASE("estimate_cbd input validation") {
  CHECK_THROWS(vf::estimate_cbd({}, iid_gaussian(4), 100, 1));
  std::vector<Eigen::MatrixXd> wrong{Eigen::MatrixXd::Zero(2, 5)};
  CHECK_THROWS(vf::estimate_cbd(wrong, iid_gaussian(4), 100, 1));
}

TEST_CASE("materialize_set covers the V_theta descriptors") {
  auto mats = vf::materialize_set(complexity::VThetaSphere{4, 3}, 10, 1);
  CHECK(mats.size() == 3 + 10);  // basis + sampled directions
  for (const auto& M : mats) {
    CHECK(M.rows() == 4);
    CHECK(M.cols() == 12);
    CHECK(M.norm() == doctest::Approx(1.0));
  }
  auto sp = vf::materialize_set(complexity::VThetaSparse{4, 6, 2}, 5, 1);
  CHECK(sp.size() == 5);
  CHECK_THROWS(vf::materialize_set(complexity::Explicit{}, 5, 1));
}

TEST_CASE("check_offdiag_zero: iid and strongly dependent configs pass") {
  CHECK(vf::check_offdiag_zero(iid_gaussian(4), 20000, 4).verdict ==
        vf::Verdict::Pass);
  ProcessConfig gm2;
  gm2.family = GmFamily::GM2;
  gm2.n = 6;
  gm2.rho = 0.9;
  CHECK(vf::check_offdiag_zero(gm2, 20000, 5).verdict == vf::Verdict::Pass);
}

TEST_CASE("check_offdiag_zero power control: uncentered process fails") {
  auto rep = vf::check_offdiag_zero(iid_gaussian(4), 20000, 6, {}, true);
  CHECK(rep.verdict == vf::Verdict::Fail);
}

TEST_CASE("check_decoupling: closed-form n=2 fixture") {
  // LHS = E|2 xi1 xi2| = 4/pi for iid N(0,1).
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 2);
  B(0, 1) = B(1, 0) = 1.0;
  auto rep = vf::check_decoupling(iid_gaussian(2), {B}, 1, 20000, 7);
  CHECK(rep.verdict == vf::Verdict::Pass);
  const auto& lhs = rep.stats[0];
  CHECK(std::fabs(lhs.mean - 4.0 / M_PI) <= 4.0 * lhs.se);
}

TEST_CASE("check_decoupling: GM1 set of three, h = x^2") {
  ProcessConfig cfg;
  cfg.n = 6;
  std::vector<Eigen::MatrixXd> Bset;
  for (int k = 0; k < 3; ++k) Bset.push_back(random_symmetric(6, 80 + k));
  CHECK(vf::check_decoupling(cfg, Bset, 2, 20000, 8).verdict == vf::Verdict::Pass);
}

TEST_CASE("check_decoupling: zero set and validation") {
  std::vector<Eigen::MatrixXd> zero{Eigen::MatrixXd::Zero(3, 3)};
  CHECK(vf::check_decoupling(iid_gaussian(3), zero, 1, 100, 9).verdict ==
        vf::Verdict::Pass);
  CHECK_THROWS(vf::check_decoupling(iid_gaussian(3), zero, 3, 100, 9));
  std::vector<Eigen::MatrixXd> asym{Eigen::MatrixXd::Zero(3, 3)};
  asym[0](0, 1) = 1.0;
  CHECK_THROWS(vf::check_decoupling(iid_gaussian(3), asym, 1, 100, 9));
}

TEST_CASE("verdicts stable under reseeding") {
  Eigen::MatrixXd B = random_symmetric(4, 90);
  for (int r = 0; r < 10; ++r) {
    CHECK(vf::check_decoupling(iid_gaussian(4), {B}, 1, 4000, 1000 + r).verdict ==
          vf::Verdict::Pass);
  }
}

TEST_CASE("check_tangent_equivalence: bipartite fixtures do not reject") {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2, 2);
  B(0, 1) = 1.0;
  CHECK(vf::check_tangent_equivalence(iid_gaussian(2), B, 10000, 11).verdict ==
        vf::Verdict::Pass);

  ProcessConfig gm2;
  gm2.family = GmFamily::GM2;
  gm2.n = 4;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(4, 4);  // I = {0,1}
  mask(0, 2) = 0.7;
  mask(1, 3) = -1.3;
  mask(0, 3) = 0.4;
  CHECK(vf::check_tangent_equivalence(gm2, mask, 10000, 12).verdict ==
        vf::Verdict::Pass);

  // Degenerate zero mask: both samples constant zero.
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 3);
  CHECK(vf::check_tangent_equivalence(iid_gaussian(3), zero, 200, 13).verdict ==
        vf::Verdict::Pass);
}

TEST_CASE("check_tangent_equivalence rejects non-bipartite masks") {
  Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(3, 3);
  tri(0, 1) = tri(1, 2) = tri(2, 0) = 1.0;  // odd cycle
  CHECK_THROWS_WITH_AS(
      vf::check_tangent_equivalence(iid_gaussian(3), tri, 100, 14),
      doctest::Contains("bipartite"), std::invalid_argument);
  Eigen::MatrixXd diag = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS(vf::check_tangent_equivalence(iid_gaussian(2), diag, 100, 14));
  // Both orientations on the same pair change the conditional variance.
  Eigen::MatrixXd both = Eigen::MatrixXd::Zero(2, 2);
  both(0, 1) = both(1, 0) = 1.0;
  CHECK_THROWS(vf::check_tangent_equivalence(iid_gaussian(2), both, 100, 14));
}

TEST_CASE("check_symmetrization: n=1 identity fixture and GM1 class") {
  std::vector<vf::NamedFunction> id{{"x", [](double x) { return x; }}};
  Eigen::VectorXd w1 = Eigen::VectorXd::Ones(1);
  auto rep = vf::check_symmetrization(iid_gaussian(1), w1, id, 1, 20000, 15);
  CHECK(rep.verdict == vf::Verdict::Pass);
  // E|xi| vs 2 E|eps xi| = 2 E|xi|: factor two exactly.
  CHECK(rep.stats[1].mean == doctest::Approx(2.0 * rep.stats[0].mean).epsilon(0.05));

  ProcessConfig gm1;
  gm1.n = 6;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(6, 1.0 / std::sqrt(6.0));
  std::vector<vf::NamedFunction> fns{
      {"x", [](double x) { return x; }},
      {"x^2", [](double x) { return x * x; }},
  };
  CHECK(vf::check_symmetrization(gm1, w, fns, 2, 20000, 16).verdict ==
        vf::Verdict::Pass);
  CHECK_THROWS(vf::check_symmetrization(gm1, w, {}, 1, 100, 17));
}

TEST_CASE("jl_distortion basic contract") {
  std::vector<Eigen::VectorXd> pts;
  auto eng = make_engine(18, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXd u(32);
    for (int j = 0; j < 32; ++j) u(j) = gauss(eng);
    pts.push_back(u.normalized());
  }
  processes::DependentMatrixConfig gen;
  auto ds = vf::jl_distortion(pts, 64, gen, 0.5, 200, 19);
  CHECK(ds.max_distortion >= 0.0);
  CHECK(ds.failure_rate >= 0.0);
  CHECK(ds.failure_rate <= 1.0);
  CHECK(ds.quantiles.size() == 3);
  // More rows shrink the distortion markedly.
  auto big = vf::jl_distortion(pts, 512, gen, 0.5, 200, 19);
  CHECK(big.quantiles[0].second < ds.quantiles[0].second);

  pts.push_back(Eigen::VectorXd::Zero(32));
  CHECK_THROWS(vf::jl_distortion(pts, 64, gen, 0.5, 10, 19));
}

TEST_CASE("rip_constant: isometry, s=1 reduction, mc lower bound, guard") {
  int n = 64, p = 8;
  // Orthonormal columns scaled by sqrt(n): X^T X = n I, delta_s = 0.
  Eigen::MatrixXd G(n, p);
  auto eng = make_engine(20, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) G(i, j) = gauss(eng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  Eigen::MatrixXd X = std::sqrt(static_cast<double>(n)) * Q;
  for (int s : {1, 2, 3})
    CHECK(vf::rip_constant(X, s, vf::RipMode::Exact).delta_s < 1e-10);

  // s = 1 reduces to column norms.
  double d1 = vf::rip_constant(G, 1, vf::RipMode::Exact).delta_s;
  double byhand = 0.0;
  for (int j = 0; j < p; ++j)
    byhand = std::max(byhand, std::fabs(G.col(j).squaredNorm() / n - 1.0));
  CHECK(d1 == doctest::Approx(byhand).epsilon(1e-12));

  auto exact = vf::rip_constant(G, 2, vf::RipMode::Exact);
  auto mc = vf::rip_constant(G, 2, vf::RipMode::Mc, 2000, 21);
  CHECK(mc.delta_s <= exact.delta_s + 1e-12);
  CHECK(exact.supports_examined == p * (p - 1) / 2);

  CHECK_THROWS(vf::rip_constant(Eigen::MatrixXd::Zero(4, 100), 10, vf::RipMode::Exact));
  CHECK_THROWS(vf::rip_constant(G, p + 1, vf::RipMode::Exact));
}

TEST_CASE("bandit: eps = 1 threshold is trivially satisfied") {
  vf::BanditOptions bo;
  bo.eps = 1.0;
  bo.runs = 3;
  bo.rounds = 50;
  auto rep = vf::bandit_min_eig_experiment(bo, 22);
  CHECK(rep.verdict == vf::Verdict::Pass);
  CHECK_THROWS(vf::bandit_min_eig_experiment({.k = 1}, 0));
  CHECK_THROWS(vf::bandit_min_eig_experiment({.sigma = -1.0}, 0));
}

TEST_CASE("TrialReport serialization") {
  auto rep = vf::check_offdiag_zero(iid_gaussian(2), 500, 23);
  auto js = rep.to_json();
  CHECK(js.find("\"verdict\"") != std::string::npos);
  CHECK(js.find("offdiag_zero") != std::string::npos);
  std::stringstream ss;
  rep.write_csv(ss);
  CHECK(ss.str().find("quantity,stat,value") != std::string::npos);
}

TEST_CASE("worker count does not change results") {
  Eigen::MatrixXd B = random_symmetric(4, 95);
  vf::RunOptions w1;
  vf::RunOptions w8;
  w8.workers = 8;
  auto a = vf::check_decoupling(iid_gaussian(4), {B}, 2, 4000, 31, w1);
  auto b = vf::check_decoupling(iid_gaussian(4), {B}, 2, 4000, 31, w8);
  CHECK(a.to_json() == b.to_json());
}
