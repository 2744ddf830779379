#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "depsketch/complexity.hpp"
#include "depsketch/rng.hpp"
#include "depsketch/stats.hpp"

using namespace depsketch;
namespace cx = depsketch::complexity;

TEST_CASE("radii closed forms for V_theta sets") {
  cx::MatrixSetDescriptor sphere = cx::VThetaSphere{16, 8};
  CHECK(cx::frob_radius(sphere) == doctest::Approx(1.0));
  CHECK(cx::opnorm_radius(sphere) == doctest::Approx(1.0 / 4.0));

  cx::MatrixSetDescriptor sparse = cx::VThetaSparse{25, 10, 3};
  CHECK(cx::frob_radius(sparse) == doctest::Approx(1.0));
  CHECK(cx::opnorm_radius(sparse) == doctest::Approx(1.0 / 5.0));
}

TEST_CASE("operator_norm matches SVD on random matrices") {
  auto eng = make_engine(1, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd A(7, 5);
    for (int i = 0; i < A.size(); ++i) A(i / 5, i % 5) = gauss(eng);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    CHECK(cx::operator_norm(A) ==
          doctest::Approx(svd.singularValues()(0)).epsilon(1e-8));
  }
}

TEST_CASE("finite-list radii") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3) * 2.0;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 3);
  B(0, 0) = 3.0;
  cx::MatrixSetDescriptor set = cx::FiniteList{{A, B}};
  // Frobenius max comes from 2I (2 sqrt 3 > 3); spectral max from B.
  CHECK(cx::frob_radius(set) == doctest::Approx(2.0 * std::sqrt(3.0)));
  CHECK(cx::opnorm_radius(set) == doctest::Approx(3.0));
}

TEST_CASE("gaussian width MC against closed forms") {
  // Single matrix: w = E|tr(G^T A)| = ||A||_F E|N(0,1)| = ||A||_F sqrt(2/pi).
  Eigen::MatrixXd A(2, 3);
  A << 1, 2, 0, -1, 0, 2;
  auto est = cx::gaussian_width_mc(cx::FiniteList{{A}}, 20000, 9);
  CHECK(std::fabs(est.value - A.norm() * std::sqrt(2.0 / M_PI)) <=
        4.0 * est.standard_error);

  // V_theta sphere: per-draw sup reduces to ||v||_2, v ~ N(0, I_p).
  auto sph = cx::gaussian_width_mc(cx::VThetaSphere{16, 6}, 20000, 9);
  CHECK(std::fabs(sph.value - stats::chi_mean(6)) <= 4.0 * sph.standard_error);

  // Determinism: same seed, same value.
  auto rep = cx::gaussian_width_mc(cx::VThetaSphere{16, 6}, 20000, 9);
  CHECK(rep.value == sph.value);
}

TEST_CASE("sparse width scales like sqrt(s log(2p/s))") {
  // s-sparse sup = l2 norm of the top-s magnitudes; sanity fit only.
  int p = 64;
  double prev = 0.0;
  for (int s : {1, 4, 16}) {
    auto est = cx::gaussian_width_mc(cx::VThetaSparse{16, p, s}, 5000, 2);
    double target = std::sqrt(s * std::log(2.0 * p / s));
    double ratio = est.value / target;
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
    CHECK(est.value > prev);  // monotone in s
    prev = est.value;
  }
}

TEST_CASE("deviation bound hand fixtures") {
  auto b = cx::deviation_bound(2.0, 3.0, 5.0);
  CHECK(b.M == doctest::Approx(5.0 * (5.0 + 2.0)));  // 35
  CHECK(b.V == doctest::Approx(3.0 * (5.0 + 2.0)));  // 21
  CHECK(b.U == doctest::Approx(9.0));

  auto r = cx::deviation_bound(2.0, 3.0, 5.0, 1.0, 1.0, cx::BoundVariant::IidReference);
  CHECK(r.M == doctest::Approx(35.0 + 6.0));
  CHECK(r.V == b.V);
  CHECK(r.U == b.U);

  // iid reference M' >= dependent M, equality iff d_F * d_op = 0.
  CHECK(r.M > b.M);
  auto z = cx::deviation_bound(0.0, 3.0, 5.0, 1.0, 1.0, cx::BoundVariant::IidReference);
  CHECK(z.M == cx::deviation_bound(0.0, 3.0, 5.0).M);
}

TEST_CASE("tail probability: formula, monotonicity, degenerate cases") {
  auto b = cx::deviation_bound(2.0, 3.0, 5.0, 1.0, 0.5);
  double eps = 4.0;
  double expect =
      2.0 * std::exp(-0.5 * std::min(eps * eps / (b.V * b.V), eps / b.U));
  auto t = cx::tail_probability(b, eps);
  CHECK(t.raw == doctest::Approx(expect));
  CHECK(t.clamped == doctest::Approx(std::min(1.0, expect)));
  CHECK(t.threshold == doctest::Approx(b.c1 * b.M));

  double last = 2.0;
  for (double e = 0.5; e < 40.0; e *= 2.0) {
    double cur = cx::tail_probability(b, e).clamped;
    CHECK(cur <= last + 1e-15);
    last = cur;
  }

  cx::DeviationBound degenerate;  // V = U = 0
  CHECK(cx::tail_probability(degenerate, 1.0).clamped == 0.0);
}

TEST_CASE("sample size calculators") {
  CHECK(cx::jl_sample_size(0.5, 32, 8.0) ==
        static_cast<int>(std::ceil(8.0 * std::log(32.0) / 0.25)));
  CHECK(cx::jl_sample_size(0.9, 2, 1e-6) == 1);  // floor at one row
  CHECK_THROWS(cx::jl_sample_size(1.5, 2));
  CHECK(cx::rip_sample_size(0.25, 2, 64, 1.0) ==
        static_cast<int>(std::ceil(2.0 * std::log(64.0) / 0.0625)));
  CHECK(cx::bandit_sample_size(0.5, 0.1, 8) ==
        static_cast<int>(std::ceil(8.0 / (0.25 * 0.01))));
  CHECK_THROWS(cx::jl_sample_size(0.0, 32));
  CHECK_THROWS(cx::rip_sample_size(0.5, 0, 64));
}

TEST_CASE("azuma tails against hand arithmetic") {
  Eigen::VectorXd c(3);
  c << 1.0, 2.0, 2.0;  // ||c||_2^2 = 9
  auto h = cx::azuma_hoeffding_tail(c, 3.0);
  CHECK(h.raw == doctest::Approx(2.0 * std::exp(-9.0 / 18.0)));

  Eigen::VectorXd a(2);
  a << 3.0, 4.0;  // ||a||_2^2 = 25, ||a||_inf = 4
  double kappa = 2.0, tau = 10.0, cc = 1.0, eta = 1.0;
  double e1 = tau * tau / (4.0 * cc * kappa * kappa * 25.0);
  double e2 = eta * tau / (2.0 * kappa * 4.0);
  auto b = cx::azuma_bernstein_tail(a, kappa, tau, cc, eta);
  CHECK(b.raw == doctest::Approx(2.0 * std::exp(-std::min(e1, e2))));
  CHECK(b.clamped <= 1.0);
}

TEST_CASE("complexity report ties the pieces together") {
  auto rep = cx::complexity_report(cx::VThetaSphere{16, 6}, 5000, 3, 2.0);
  CHECK(rep.d_F == doctest::Approx(1.0));
  CHECK(rep.d_op == doctest::Approx(0.25));
  CHECK(rep.gamma2_upper == doctest::Approx(2.0 * rep.width.value));
  CHECK(rep.gamma2_constant == 2.0);
}
