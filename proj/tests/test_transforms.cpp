#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "depsketch/rng.hpp"
#include "depsketch/stats.hpp"
#include "depsketch/transforms.hpp"

using namespace depsketch;
namespace tf = depsketch::transforms;

namespace {

Eigen::VectorXd random_vec(int n, std::uint64_t seed) {
  auto eng = make_engine(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = gauss(eng);
  return v;
}

}  // namespace

TEST_CASE("fft matches a naive DFT and round trips") {
  auto eng = make_engine(2, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int N = 16;
  std::vector<std::complex<double>> a(N);
  for (auto& z : a) z = {gauss(eng), gauss(eng)};
  auto orig = a;

  auto dft = orig;
  for (int k = 0; k < N; ++k) {
    std::complex<double> s = 0.0;
    for (int j = 0; j < N; ++j)
      s += orig[j] * std::polar(1.0, -2.0 * M_PI * k * j / N);
    dft[k] = s;
  }
  tf::fft(a, false);
  for (int k = 0; k < N; ++k) CHECK(std::abs(a[k] - dft[k]) < 1e-10);
  tf::fft(a, true);
  for (int k = 0; k < N; ++k) CHECK(std::abs(a[k] - orig[k]) < 1e-12);

  std::vector<std::complex<double>> bad(3);
  CHECK_THROWS(tf::fft(bad, false));
}

TEST_CASE("toeplitz dense layout follows the first-row convention") {
  // p = 3, xi = (x1..x5): first row (x3 x4 x5), first column (x3 x2 x1).
  Eigen::VectorXd xi(5);
  xi << 1, 2, 3, 4, 5;
  auto A = tf::toeplitz_dense(xi);
  Eigen::MatrixXd expect(3, 3);
  expect << 3, 4, 5, 2, 3, 4, 1, 2, 3;
  CHECK(A == expect);
}

TEST_CASE("fft apply equals dense multiply for p in 2..64") {
  for (int p = 2; p <= 64; ++p) {
    Eigen::VectorXd xi = random_vec(2 * p - 1, 100 + p);
    auto dense = tf::toeplitz_dense(xi);
    for (int rep = 0; rep < 3; ++rep) {
      Eigen::VectorXd u = random_vec(p, 1000 * p + rep);
      Eigen::VectorXd fast = tf::toeplitz_full_apply(xi, u);
      CHECK((fast - dense * u).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("partial toeplitz operator: row selection and scale") {
  int p = 8;
  Eigen::VectorXd xi = random_vec(2 * p - 1, 5);
  std::vector<int> rows{1, 4, 7};
  auto op = tf::build_toeplitz(xi, rows);
  CHECK(op.rows() == 3);
  CHECK(op.cols() == p);
  Eigen::MatrixXd full = tf::toeplitz_dense(xi);
  Eigen::VectorXd u = random_vec(p, 6);
  Eigen::VectorXd expect(3);
  double scale = 1.0 / std::sqrt(3.0);
  for (int i = 0; i < 3; ++i) expect(i) = scale * full.row(rows[i] - 1).dot(u);
  CHECK((op.apply(u) - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((op.dense() * u - expect).cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS(tf::build_toeplitz(xi, {3, 2}));           // not increasing
  CHECK_THROWS(tf::build_toeplitz(xi, {0, 2}));           // out of range
  CHECK_THROWS(tf::build_toeplitz(random_vec(6, 1), {1}));  // even length
}

TEST_CASE("jl builder: scale and determinism") {
  processes::DependentMatrixConfig gen;
  auto op = tf::build_jl(16, 9, gen, 11);
  CHECK(op.rows() == 16);
  CHECK(op.cols() == 9);
  CHECK(op.dense() == tf::build_jl(16, 9, gen, 11).dense());

  // E||Xu||^2 = ||u||^2 after the second-moment normalization.
  Eigen::VectorXd u = random_vec(9, 3).normalized();
  std::vector<double> norms;
  for (int t = 0; t < 4000; ++t)
    norms.push_back(tf::build_jl(16, 9, gen, substream(8, t)).apply(u).squaredNorm());
  CHECK(std::fabs(stats::mean(norms) - 1.0) <= 4.0 * stats::standard_error(norms));
}

TEST_CASE("countsketch: exactly d signed nonzeros per column") {
  for (auto pattern : {tf::CountSketchPattern::Uniform, tf::CountSketchPattern::Adaptive}) {
    auto op = tf::build_countsketch(32, 10, 4, pattern, 21);
    auto M = op.dense();
    for (int j = 0; j < 10; ++j) {
      int nnz = 0;
      for (int i = 0; i < 32; ++i)
        if (M(i, j) != 0.0) {
          ++nnz;
          CHECK(std::fabs(std::fabs(M(i, j)) - 1.0 / 2.0) < 1e-15);  // 1/sqrt(4)
        }
      CHECK(nnz == 4);
      CHECK(M.col(j).squaredNorm() == doctest::Approx(1.0));
    }
    // apply agrees with the dense materialization
    Eigen::VectorXd u = random_vec(10, 31);
    CHECK((op.apply(u) - M * u).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS(tf::build_countsketch(3, 5, 4, tf::CountSketchPattern::Uniform, 0));
}

TEST_CASE("countsketch unbiasedness") {
  Eigen::VectorXd u = random_vec(12, 17);
  std::vector<double> norms;
  for (int t = 0; t < 5000; ++t) {
    auto op = tf::build_countsketch(24, 12, 3, tf::CountSketchPattern::Uniform,
                                    substream(9, t));
    norms.push_back(op.apply(u).squaredNorm());
  }
  CHECK(std::fabs(stats::mean(norms) - u.squaredNorm()) <=
        4.0 * stats::standard_error(norms));
}

TEST_CASE("V_theta reshape identities") {
  int p = 6, n = 4;
  Eigen::VectorXd theta = random_vec(p, 41).normalized();

  SUBCASE("block diagonal: V_theta x = (1/sqrt n) Xtilde theta") {
    auto V = tf::build_vtheta(theta, n, false);
    CHECK(V.rows() == n);
    CHECK(V.cols() == n * p);
    Eigen::MatrixXd Xt(n, p);
    auto eng = make_engine(7, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) Xt(i, j) = gauss(eng);
    Eigen::VectorXd x(n * p);
    for (int i = 0; i < n; ++i) x.segment(i * p, p) = Xt.row(i);
    Eigen::VectorXd lhs = Xt * theta / std::sqrt(static_cast<double>(n));
    CHECK((V.apply(x) - lhs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((V.dense() * x - lhs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(V.frob_norm() == doctest::Approx(1.0));
  }

  SUBCASE("banded: V_theta xi = (1/sqrt n) A_xi theta on the selected rows") {
    auto V = tf::build_vtheta(theta, n, true);
    CHECK(V.cols() == 2 * p - 1);
    Eigen::VectorXd xi = random_vec(2 * p - 1, 43);
    Eigen::MatrixXd A = tf::toeplitz_dense(xi);
    Eigen::VectorXd lhs =
        (A * theta).head(n) / std::sqrt(static_cast<double>(n));
    CHECK((V.apply(xi) - lhs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((V.dense() * xi - lhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sketch operator serialization round trips bit-exactly") {
  processes::DependentMatrixConfig gen;
  std::vector<tf::SketchOperator> ops;
  ops.push_back(tf::build_jl(8, 5, gen, 1));
  ops.push_back(tf::build_toeplitz(random_vec(11, 2), {1, 3, 6}));
  ops.push_back(tf::build_countsketch(16, 6, 3, tf::CountSketchPattern::Adaptive, 3));
  for (const auto& op : ops) {
    std::stringstream ss;
    op.save(ss);
    auto back = tf::SketchOperator::load(ss);
    CHECK(back.rows() == op.rows());
    CHECK(back.cols() == op.cols());
    CHECK(back.dense() == op.dense());  // exact, hex-float round trip
  }
}
