#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "depsketch/complexity.hpp"
#include "depsketch/processes.hpp"

namespace depsketch::verify {

enum class Verdict { Pass, Fail, Inconclusive };

std::string verdict_name(Verdict v);

struct QuantityStats {
  std::string name;
  double mean = 0.0;
  double se = 0.0;
  double max = 0.0;
  std::vector<std::pair<double, double>> quantiles;  // (q, value)
};

struct TrialReport {
  std::string quantity;
  Verdict verdict = Verdict::Inconclusive;
  double tolerance = 0.0;
  std::uint64_t seed = 0;
  int trials = 0;
  double runtime_s = 0.0;
  std::vector<QuantityStats> stats;
  std::vector<std::string> notes;

  std::string to_json() const;
  // CSV long format: quantity,stat,value.
  void write_csv(std::ostream& out) const;
};

struct RunOptions {
  unsigned workers = 1;
  // Inconclusive verdicts escalate trials 4x, once.
  bool escalate = true;
};

// Samples of C_A, B_A, D_A per trial over the given finite matrix list.
// E||A xi||^2 and E[xi_j^2] come from a closed form when the config has
// constant conditional variance, otherwise from an independent MC batch
// (batch_factor x trials, separate seed stream).
TrialReport estimate_cbd(const std::vector<Eigen::MatrixXd>& mats,
                         const processes::ProcessConfig& config, int trials,
                         std::uint64_t seed, const RunOptions& opt = {},
                         int batch_factor = 10);

// Materializes a descriptor into a finite list for CBD estimation; sphere
// and sparse V_theta sets are approximated by dense direction sampling
// (documented in the report notes).
std::vector<Eigen::MatrixXd> materialize_set(
    const complexity::MatrixSetDescriptor& set, int directions,
    std::uint64_t seed);

// E[xi_j xi_k] for all j != k; pass iff every estimate within 4 SE of 0.
// disable_centering shifts xi by a constant to give the power control.
TrialReport check_offdiag_zero(const processes::ProcessConfig& config, int trials,
                               std::uint64_t seed, const RunOptions& opt = {},
                               bool disable_centering = false);

// LHS = E sup_B h(sum_{j!=k} xi_j xi_k B_jk) vs 4x the decoupled RHS.
TrialReport check_decoupling(const processes::ProcessConfig& config,
                             const std::vector<Eigen::MatrixXd>& Bset,
                             int p_norm, int trials, std::uint64_t seed,
                             const RunOptions& opt = {});

// Two-sample KS between X_n = sum xi_j xi_k B_jk and its tangent version
// for a bipartite-supported mask (I x I^c).
TrialReport check_tangent_equivalence(const processes::ProcessConfig& config,
                                      const Eigen::MatrixXd& Bmask, int trials,
                                      std::uint64_t seed,
                                      const RunOptions& opt = {});

struct NamedFunction {
  std::string name;
  std::function<double(double)> fn;
};

// Symmetrization (factor 2) and de-symmetrization (factor 1/2) inequalities
// over a finite function class.
TrialReport check_symmetrization(const processes::ProcessConfig& config,
                                 const Eigen::VectorXd& weights,
                                 const std::vector<NamedFunction>& fns,
                                 int p_norm, int trials, std::uint64_t seed,
                                 const RunOptions& opt = {});

struct DistortionStats {
  double failure_rate = 0.0;
  double max_distortion = 0.0;
  std::vector<std::pair<double, double>> quantiles;
  int n = 0, N = 0, trials = 0;
  std::uint64_t seed = 0;
};

DistortionStats jl_distortion(const std::vector<Eigen::VectorXd>& points, int n,
                              const processes::DependentMatrixConfig& gen,
                              double eps, int trials, std::uint64_t seed,
                              const RunOptions& opt = {});

enum class RipMode { Exact, Mc };

struct RipEstimate {
  double delta_s = 0.0;
  RipMode mode = RipMode::Exact;
  int s = 0, p = 0, n = 0;
  long supports_examined = 0;
};

// Exact mode enumerates all C(p,s) supports (guard <= 1e5) and maximizes
// the distortion of X_S^T X_S / n; MC mode samples random unit s-sparse
// vectors and lower-bounds the exact constant.
RipEstimate rip_constant(const Eigen::MatrixXd& X, int s, RipMode mode,
                         int mc_trials = 0, std::uint64_t seed = 0);

using Adversary = std::function<std::vector<Eigen::VectorXd>(
    const std::vector<Eigen::VectorXd>& selected_rows, int k, int p)>;

Adversary zero_adversary();
Adversary repeater_adversary();  // same fixed unit context every round

struct BanditOptions {
  int k = 4;
  int p = 8;
  double sigma = 0.5;
  int rounds = 0;  // 0 => 1.2x the sample-size threshold
  double eps = 0.5;
  int runs = 50;
  Adversary adversary = zero_adversary();
};

// Greedy least-squares loop over adversarial smoothed contexts; checks
// lambda_min(X_t^T X_t) >= t kappa_hat (1 - eps) past the sample-size
// threshold in >= 95% of runs.
TrialReport bandit_min_eig_experiment(const BanditOptions& bo, std::uint64_t seed,
                                      const RunOptions& opt = {});

}  // namespace depsketch::verify
