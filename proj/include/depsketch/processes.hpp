#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "depsketch/graph.hpp"

namespace depsketch::processes {

using graph::GmFamily;

// A stochastic process xi adapted to a latent process F.
//
// Conditional-law defaults:
//   GM1/GM2: xi_i ~ N(0, s(f)^2) with s(f) = 0.5 + 0.5*logistic(f) and f the
//            most recent latent the family allows (F_{i-1} for GM1, F_i for
//            GM2). Conditional sd stays in (0.5, 1].
//   GM3:     xi_i Rademacher, F_i = tanh(F_{i-1} + xi_i) (deterministic).
// With modulate=false the conditional sd is 1 and xi is i.i.d. N(0,1)
// (GM1/GM2) or i.i.d. Rademacher (GM3).
struct ProcessConfig {
  GmFamily family = GmFamily::GM1;
  int n = 1;
  double rho = 0.8;  // AR(1) coefficient of the latent process
  bool modulate = true;
  // Uniform conditional sub-Gaussian constant: P(|xi|>t) <= 2 exp(-t^2/L^2).
  // sqrt(2) covers the Gaussian conditionals with sd <= 1 for all t.
  double subgaussian_L = std::sqrt(2.0);

  int varrho(int i) const { return family == GmFamily::GM1 ? i - 1 : i; }
  void validate() const;

  // Key-value config schema ("key = value" per line, '#' comments).
  static ProcessConfig load(std::istream& in);
  void save(std::ostream& out) const;
};

struct PathSample {
  Eigen::VectorXd xi;                      // length n
  Eigen::VectorXd latent;                  // F0..Fn (GM1/GM3) or F1..Fn (GM2)
  std::optional<Eigen::VectorXd> tangent;  // xi', when requested
  std::uint64_t seed = 0;

  bool has_prior = false;  // latent(0) is the prior F0
  double latent_at(int i) const { return latent(has_prior ? i : i - 1); }
};

PathSample sample_path(const ProcessConfig& config, std::uint64_t seed);

// Populates tangent: xi'_i drawn from P(xi_i | F_{1:i}) of the realized
// latent path, independently of xi_i. For GM3's deterministic latent the
// posterior is enumerated over the discrete xi support.
PathSample sample_with_tangent(const ProcessConfig& config, std::uint64_t seed);

double conditional_center(double raw, double conditional_mean);

// Conditional sd used by the Gaussian families.
double modulated_sd(double latent_value);

struct DependentMatrixConfig {
  int rows = 1;
  int cols = 1;
  bool modulate = true;  // history-modulated conditional sd in [0.5, 1]
  double rho = 0.8;      // AR(1) over the row-major entry order

  void validate() const;
};

// Unscaled dependent-entry matrix: entries generated row-major, each
// conditionally centered Gaussian with sd in [0.5,1] given the history.
Eigen::MatrixXd sample_dependent_matrix(const DependentMatrixConfig& config,
                                        std::uint64_t seed);

// E[entry^2] under the stationary latent law: quadrature of s(z)^2 against
// N(0,1). Sketch builders divide by this so E||Xu||^2 = ||u||^2, which the
// isometry statements assume.
double entry_second_moment(const DependentMatrixConfig& config);

// CSV export: index,latent,xi[,tangent].
void write_path_csv(std::ostream& out, const PathSample& path);

}  // namespace depsketch::processes
