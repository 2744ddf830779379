#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "depsketch/processes.hpp"
#include "depsketch/rng.hpp"
#include "depsketch/stats.hpp"

using namespace depsketch;
using processes::ProcessConfig;
using graph::GmFamily;

TEST_CASE("path shapes and determinism") {
  for (auto fam : {GmFamily::GM1, GmFamily::GM2, GmFamily::GM3}) {
    ProcessConfig cfg;
    cfg.family = fam;
    cfg.n = 6;
    auto a = processes::sample_path(cfg, 42);
    auto b = processes::sample_path(cfg, 42);
    auto c = processes::sample_path(cfg, 43);
    CHECK(a.xi.size() == 6);
    CHECK(a.has_prior == (fam != GmFamily::GM2));
    CHECK(a.latent.size() == (a.has_prior ? 7 : 6));
    CHECK(a.xi == b.xi);
    CHECK(a.xi != c.xi);
  }
}

TEST_CASE("GM3 support and latent recursion") {
  ProcessConfig cfg;
  cfg.family = GmFamily::GM3;
  cfg.n = 10;
  auto p = processes::sample_path(cfg, 7);
  for (int i = 1; i <= cfg.n; ++i) {
    CHECK(std::fabs(std::fabs(p.xi(i - 1)) - 1.0) < 1e-15);
    CHECK(p.latent_at(i) ==
          doctest::Approx(std::tanh(p.latent_at(i - 1) + p.xi(i - 1))).epsilon(1e-12));
  }
}

TEST_CASE("modulated sd stays in (0.5, 1]") {
  CHECK(processes::modulated_sd(0.0) == doctest::Approx(0.75));
  CHECK(processes::modulated_sd(50.0) == doctest::Approx(1.0));
  CHECK(processes::modulated_sd(-50.0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("bucketed conditional means vanish") {
  // Bucket xi_i by the conditioning latent; each bucket mean within 4 SE of 0.
  for (auto fam : {GmFamily::GM1, GmFamily::GM2}) {
    ProcessConfig cfg;
    cfg.family = fam;
    cfg.n = 4;
    const int trials = 20000, buckets = 8;
    std::vector<std::vector<double>> bucket(buckets);
    for (int t = 0; t < trials; ++t) {
      auto p = processes::sample_path(cfg, substream(11, t));
      for (int i = 1; i <= cfg.n; ++i) {
        double f = p.latent_at(cfg.varrho(i));
        int b = std::clamp(static_cast<int>((f + 4.0) / 8.0 * buckets), 0, buckets - 1);
        bucket[b].push_back(p.xi(i - 1));
      }
    }
    for (auto& bs : bucket) {
      if (bs.size() < 100) continue;
      CHECK(std::fabs(stats::mean(bs)) <= 4.0 * stats::standard_error(bs));
    }
  }
}

TEST_CASE("empirical sub-Gaussian tail with L = sqrt(2)") {
  ProcessConfig cfg;
  cfg.n = 8;
  const int trials = 20000;
  std::vector<double> all;
  for (int t = 0; t < trials; ++t) {
    auto p = processes::sample_path(cfg, substream(5, t));
    for (int i = 0; i < cfg.n; ++i) all.push_back(p.xi(i));
  }
  for (double tau : {1.0, 2.0, 3.0}) {
    double freq = 0.0;
    for (double x : all)
      if (std::fabs(x) > tau) ++freq;
    freq /= static_cast<double>(all.size());
    double bound = 2.0 * std::exp(-tau * tau / (cfg.subgaussian_L * cfg.subgaussian_L));
    CHECK(freq <= bound * 1.1);
  }
}

TEST_CASE("tangent sampling leaves the base path unchanged") {
  for (auto fam : {GmFamily::GM1, GmFamily::GM2, GmFamily::GM3}) {
    ProcessConfig cfg;
    cfg.family = fam;
    cfg.n = 5;
    auto base = processes::sample_path(cfg, 99);
    auto both = processes::sample_with_tangent(cfg, 99);
    CHECK(base.xi == both.xi);
    CHECK(base.latent == both.latent);
    REQUIRE(both.tangent.has_value());
    if (fam == GmFamily::GM3) {
      // Deterministic latent recursion: the posterior is a point mass.
      CHECK(*both.tangent == both.xi);
    } else {
      CHECK(*both.tangent != both.xi);
    }
  }
}

TEST_CASE("tangent matches the conditional law (GM1, KS)") {
  // xi_1 | F_0 and xi'_1 | F_0 share the law N(0, s(F_0)^2); marginally the
  // two samples must agree in distribution.
  ProcessConfig cfg;
  cfg.n = 3;
  const int trials = 20000;
  std::vector<double> base(trials), tang(trials);
  for (int t = 0; t < trials; ++t) {
    auto p = processes::sample_with_tangent(cfg, substream(123, t));
    base[t] = p.xi(1);
    tang[t] = (*p.tangent)(1);
  }
  double d = stats::ks_statistic(base, tang);
  CHECK(stats::ks_pvalue(d, trials, trials) >= 0.01);
}

TEST_CASE("config validation and round trip") {
  ProcessConfig cfg;
  cfg.family = GmFamily::GM2;
  cfg.n = 17;
  cfg.rho = 0.3;
  cfg.modulate = false;
  std::stringstream ss;
  cfg.save(ss);
  auto back = ProcessConfig::load(ss);
  CHECK(back.family == cfg.family);
  CHECK(back.n == cfg.n);
  CHECK(back.rho == doctest::Approx(cfg.rho));
  CHECK(back.modulate == cfg.modulate);

  ProcessConfig bad;
  bad.n = 0;
  CHECK_THROWS(bad.validate());
  bad.n = 3;
  bad.rho = 1.5;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("dependent matrix: shape, determinism, entry moment") {
  processes::DependentMatrixConfig g;
  g.rows = 5;
  g.cols = 7;
  auto X = processes::sample_dependent_matrix(g, 1);
  CHECK(X.rows() == 5);
  CHECK(X.cols() == 7);
  CHECK(X == processes::sample_dependent_matrix(g, 1));

  double v = processes::entry_second_moment(g);
  CHECK(v > 0.25);
  CHECK(v < 1.0);
  g.modulate = false;
  CHECK(processes::entry_second_moment(g) == 1.0);

  // MC agreement with the quadrature constant.
  g.modulate = true;
  g.rows = 64;
  g.cols = 64;
  std::vector<double> m2;
  for (int t = 0; t < 50; ++t) {
    auto M = processes::sample_dependent_matrix(g, substream(3, t));
    m2.push_back(M.squaredNorm() / (64.0 * 64.0));
  }
  CHECK(std::fabs(stats::mean(m2) - v) <= 5.0 * stats::standard_error(m2) + 0.01);
}

TEST_CASE("csv export includes tangent column when present") {
  ProcessConfig cfg;
  cfg.n = 3;
  auto p = processes::sample_with_tangent(cfg, 4);
  std::stringstream ss;
  processes::write_path_csv(ss, p);
  std::string header;
  std::getline(ss, header);
  CHECK(header.find("tangent") != std::string::npos);
}
