#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace depsketch::complexity {

// Structural descriptions of a set of (m x n) matrices for which radii and
// the per-draw width supremum have closed or tractable forms.
struct FiniteList {
  std::vector<Eigen::MatrixXd> mats;
};

// { V_theta : ||theta||_2 = 1, theta in R^p } with V_theta the (n x np)
// block-diagonal reshape operator carrying a 1/sqrt(n) scale.
struct VThetaSphere {
  int n = 1;
  int p = 1;
};

// Same image set restricted to unit s-sparse theta.
struct VThetaSparse {
  int n = 1;
  int p = 1;
  int s = 1;
};

// Row-subsampled banded Toeplitz V_theta over unit s-sparse theta; rows is
// the 1-based selection of n Toeplitz rows (defaults to the first n).
struct ToeplitzBand {
  int n = 1;
  int p = 1;
  int s = 1;
  std::vector<int> rows;  // empty => 1..n
};

// Escape hatch: caller supplies the per-draw supremum sup_A |tr(G^T A)|.
struct Explicit {
  int m = 1;
  int n = 1;
  std::function<double(const Eigen::MatrixXd&)> sup;
};

using MatrixSetDescriptor =
    std::variant<FiniteList, VThetaSphere, VThetaSparse, ToeplitzBand, Explicit>;

// sup ||A||_F over the set. Closed form ||theta||_2 = 1 for V_theta sets.
double frob_radius(const MatrixSetDescriptor& set);

// sup ||A||_{2->2}. Closed form 1/sqrt(n) for V_theta sets; power iteration
// (tol 1e-10, max 1000 iterations) for finite lists.
double opnorm_radius(const MatrixSetDescriptor& set);

double operator_norm(const Eigen::MatrixXd& A, double tol = 1e-10,
                     int max_iter = 1000);

struct WidthEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
};

// Monte-Carlo estimate of w(A) = E sup_A |tr(G^T A)|.
WidthEstimate gaussian_width_mc(const MatrixSetDescriptor& set, int trials,
                                std::uint64_t seed);

// gamma_2 surrogate: C * width, C default 1.
double gamma2_upper(double width, double C = 1.0);

struct ComplexityReport {
  double d_F = 0.0;
  double d_op = 0.0;
  WidthEstimate width;
  double gamma2_upper = 0.0;
  double gamma2_constant = 1.0;
};

ComplexityReport complexity_report(const MatrixSetDescriptor& set, int trials,
                                   std::uint64_t seed, double gamma2_C = 1.0);

enum class BoundVariant { Dependent, IidReference };

// The (M, V, U) triple of the main deviation bound. The i.i.d. reference
// variant adds d_F * d_op to M.
struct DeviationBound {
  double M = 0.0;
  double V = 0.0;
  double U = 0.0;
  double c1 = 1.0;
  double c2 = 1.0;
  BoundVariant variant = BoundVariant::Dependent;
};

DeviationBound deviation_bound(double d_F, double d_op, double gamma2,
                               double c1 = 1.0, double c2 = 1.0,
                               BoundVariant variant = BoundVariant::Dependent);

struct TailBound {
  double raw = 0.0;      // 2 exp(-c2 min(eps^2/V^2, eps/U)), unclamped
  double clamped = 0.0;  // min(1, raw)
  double threshold = 0.0;  // c1 * M: deviation level the bound refers to
};

TailBound tail_probability(const DeviationBound& b, double eps);

// Sample-size calculators; C is a free constant, default 1.
int jl_sample_size(double eps, int N, double C = 1.0);
int rip_sample_size(double eps, int s, int p, double C = 1.0);
int bandit_sample_size(double eps, double kappa, int p, double C = 1.0);

struct ProbabilityBound {
  double raw = 0.0;
  double clamped = 0.0;
};

// 2 exp(-tau^2 / (2 ||c||_2^2)) for a bounded-difference martingale.
ProbabilityBound azuma_hoeffding_tail(const Eigen::VectorXd& c, double tau);

// 2 exp(-min(tau^2 / (4 c kappa^2 ||a||_2^2), eta tau / (2 kappa ||a||_inf))).
ProbabilityBound azuma_bernstein_tail(const Eigen::VectorXd& a, double kappa,
                                      double tau, double c = 1.0,
                                      double eta = 1.0);

}  // namespace depsketch::complexity
