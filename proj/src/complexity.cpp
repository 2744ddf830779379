#include "depsketch/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "depsketch/rng.hpp"
#include "depsketch/stats.hpp"

namespace depsketch::complexity {

namespace {

std::vector<int> band_rows(const ToeplitzBand& tb) {
  std::vector<int> rows = tb.rows;
  if (rows.empty())
    for (int r = 1; r <= tb.n; ++r) rows.push_back(r);
  if (static_cast<int>(rows.size()) != tb.n)
    throw std::invalid_argument("ToeplitzBand: |rows| must equal n");
  int prev = 0;
  for (int r : rows) {
    if (r < 1 || r > tb.p || r <= prev)
      throw std::invalid_argument("ToeplitzBand: rows must be strictly increasing in [1,p]");
    prev = r;
  }
  return rows;
}

// l2 norm of the s largest-magnitude coordinates.
double sparse_sup(const Eigen::VectorXd& v, int s) {
  std::vector<double> mags(v.size());
  for (int i = 0; i < v.size(); ++i) mags[i] = v(i) * v(i);
  std::partial_sort(mags.begin(), mags.begin() + s, mags.end(),
                    std::greater<double>());
  double acc = 0.0;
  for (int i = 0; i < s; ++i) acc += mags[i];
  return std::sqrt(acc);
}

void check_sparse(int s, int p, const char* what) {
  if (s < 1 || s > p)
    throw std::invalid_argument(std::string(what) + ": need 1 <= s <= p");
}

}  // namespace

double operator_norm(const Eigen::MatrixXd& A, double tol, int max_iter) {
  if (A.size() == 0) throw std::invalid_argument("operator_norm: empty matrix");
  Eigen::MatrixXd G = A.transpose() * A;  // p x p
  Eigen::VectorXd v = Eigen::VectorXd::Ones(G.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = G * v;
    double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    double next = w.dot(G * w);
    if (std::fabs(next - lambda) <= tol * std::max(1.0, next)) {
      return std::sqrt(std::max(0.0, next));
    }
    lambda = next;
    v = w;
  }
  // Power iteration stalls on (near-)tied leading singular values; fall back
  // to a dense solve rather than reporting a residual for small matrices.
  if (G.rows() <= 512) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  throw std::runtime_error("operator_norm: power iteration did not converge, residual " +
                           std::to_string(std::fabs((G * v).norm() - lambda)));
}

double frob_radius(const MatrixSetDescriptor& set) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FiniteList>) {
          if (d.mats.empty()) throw std::invalid_argument("frob_radius: empty set");
          double best = 0.0;
          for (const auto& A : d.mats) best = std::max(best, A.norm());
          return best;
        } else if constexpr (std::is_same_v<T, VThetaSphere>) {
          return 1.0;  // ||V_theta||_F = ||theta||_2
        } else if constexpr (std::is_same_v<T, VThetaSparse>) {
          check_sparse(d.s, d.p, "VThetaSparse");
          return 1.0;
        } else if constexpr (std::is_same_v<T, ToeplitzBand>) {
          check_sparse(d.s, d.p, "ToeplitzBand");
          band_rows(d);
          return 1.0;  // ||R V_theta||_F = ||theta||_2
        } else {
          throw std::invalid_argument("frob_radius: unsupported for Explicit sets");
        }
      },
      set);
}

double opnorm_radius(const MatrixSetDescriptor& set) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, FiniteList>) {
          if (d.mats.empty()) throw std::invalid_argument("opnorm_radius: empty set");
          double best = 0.0;
          for (const auto& A : d.mats) best = std::max(best, operator_norm(A));
          return best;
        } else if constexpr (std::is_same_v<T, VThetaSphere> ||
                             std::is_same_v<T, VThetaSparse> ||
                             std::is_same_v<T, ToeplitzBand>) {
          return 1.0 / std::sqrt(static_cast<double>(d.n));
        } else {
          throw std::invalid_argument("opnorm_radius: unsupported for Explicit sets");
        }
      },
      set);
}

WidthEstimate gaussian_width_mc(const MatrixSetDescriptor& set, int trials,
                                std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("gaussian_width_mc: trials must be >= 2");
  std::vector<double> sups(trials);
  for (int t = 0; t < trials; ++t) {
    auto eng = make_engine(seed, static_cast<std::uint64_t>(t));
    std::normal_distribution<double> gauss(0.0, 1.0);
    sups[t] = std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, FiniteList>) {
            if (d.mats.empty())
              throw std::invalid_argument("gaussian_width_mc: empty set");
            Eigen::MatrixXd G(d.mats[0].rows(), d.mats[0].cols());
            for (int i = 0; i < G.rows(); ++i)
              for (int j = 0; j < G.cols(); ++j) G(i, j) = gauss(eng);
            double best = 0.0;
            for (const auto& A : d.mats)
              best = std::max(best, std::fabs((G.array() * A.array()).sum()));
            return best;
          } else if constexpr (std::is_same_v<T, VThetaSphere>) {
            // tr(G^T V_theta) = <theta, v> with v ~ N(0, I_p); sup over the
            // unit sphere is ||v||.
            Eigen::VectorXd v(d.p);
            for (int j = 0; j < d.p; ++j) v(j) = gauss(eng);
            return v.norm();
          } else if constexpr (std::is_same_v<T, VThetaSparse>) {
            check_sparse(d.s, d.p, "VThetaSparse");
            Eigen::VectorXd v(d.p);
            for (int j = 0; j < d.p; ++j) v(j) = gauss(eng);
            return sparse_sup(v, d.s);
          } else if constexpr (std::is_same_v<T, ToeplitzBand>) {
            check_sparse(d.s, d.p, "ToeplitzBand");
            auto rows = band_rows(d);
            // Row r (1-based) of the band carries theta_j at column
            // p - r + j (0-based); reduce G (n x 2p-1) to
            // v_j = (1/sqrt(n)) sum_i G_{i, p - r_i + j}. Entries of v are
            // standard normal but correlated across j through shared G
            // columns, so G is sampled in full.
            Eigen::VectorXd v = Eigen::VectorXd::Zero(d.p);
            double scale = 1.0 / std::sqrt(static_cast<double>(d.n));
            std::vector<double> grow(2 * d.p - 1);
            for (int i = 0; i < d.n; ++i) {
              for (auto& g : grow) g = gauss(eng);
              int off = d.p - rows[i];
              for (int j = 0; j < d.p; ++j) v(j) += scale * grow[off + j];
            }
            return sparse_sup(v, d.s);
          } else {
            if (!d.sup)
              throw std::invalid_argument("gaussian_width_mc: Explicit set without sampler");
            Eigen::MatrixXd G(d.m, d.n);
            for (int i = 0; i < d.m; ++i)
              for (int j = 0; j < d.n; ++j) G(i, j) = gauss(eng);
            return d.sup(G);
          }
        },
        set);
  }
  WidthEstimate est;
  est.value = stats::mean(sups);
  est.standard_error = stats::standard_error(sups);
  est.trials = trials;
  est.seed = seed;
  return est;
}

double gamma2_upper(double width, double C) {
  if (width < 0.0) throw std::invalid_argument("gamma2_upper: width must be >= 0");
  return C * width;
}

ComplexityReport complexity_report(const MatrixSetDescriptor& set, int trials,
                                   std::uint64_t seed, double gamma2_C) {
  ComplexityReport rep;
  rep.d_F = frob_radius(set);
  rep.d_op = opnorm_radius(set);
  rep.width = gaussian_width_mc(set, trials, seed);
  rep.gamma2_constant = gamma2_C;
  rep.gamma2_upper = gamma2_upper(rep.width.value, gamma2_C);
  return rep;
}

DeviationBound deviation_bound(double d_F, double d_op, double gamma2, double c1,
                               double c2, BoundVariant variant) {
  if (d_F < 0.0 || d_op < 0.0 || gamma2 < 0.0)
    throw std::invalid_argument("deviation_bound: inputs must be >= 0");
  DeviationBound b;
  b.M = gamma2 * (gamma2 + d_F);
  if (variant == BoundVariant::IidReference) b.M += d_F * d_op;
  b.V = d_op * (gamma2 + d_F);
  b.U = d_op * d_op;
  b.c1 = c1;
  b.c2 = c2;
  b.variant = variant;
  return b;
}

TailBound tail_probability(const DeviationBound& b, double eps) {
  if (eps < 0.0) throw std::invalid_argument("tail_probability: eps must be >= 0");
  TailBound t;
  t.threshold = b.c1 * b.M;
  double exponent;
  if (b.V == 0.0 && b.U == 0.0) {
    t.raw = eps > 0.0 ? 0.0 : 2.0;
    t.clamped = std::min(1.0, t.raw);
    return t;
  }
  if (b.V == 0.0)
    exponent = eps / b.U;
  else if (b.U == 0.0)
    exponent = eps * eps / (b.V * b.V);
  else
    exponent = std::min(eps * eps / (b.V * b.V), eps / b.U);
  t.raw = 2.0 * std::exp(-b.c2 * exponent);
  t.clamped = std::min(1.0, t.raw);
  return t;
}

namespace {
int ceil_size(double x) {
  return std::max(1, static_cast<int>(std::ceil(x - 1e-12)));
}
}  // namespace

int jl_sample_size(double eps, int N, double C) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("jl_sample_size: eps must be in (0,1)");
  if (N < 1) throw std::invalid_argument("jl_sample_size: N must be positive");
  return ceil_size(C * std::log(static_cast<double>(N)) / (eps * eps));
}

int rip_sample_size(double eps, int s, int p, double C) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("rip_sample_size: eps must be in (0,1)");
  if (s < 1 || p < 1 || s > p)
    throw std::invalid_argument("rip_sample_size: need 1 <= s <= p");
  return ceil_size(C * s * std::log(2.0 * p / s) / (eps * eps));
}

int bandit_sample_size(double eps, double kappa, int p, double C) {
  if (eps <= 0.0 || eps >= 1.0)
    throw std::invalid_argument("bandit_sample_size: eps must be in (0,1)");
  if (kappa <= 0.0) throw std::invalid_argument("bandit_sample_size: kappa must be positive");
  if (p < 1) throw std::invalid_argument("bandit_sample_size: p must be positive");
  return ceil_size(C * p / (eps * eps * kappa * kappa));
}

ProbabilityBound azuma_hoeffding_tail(const Eigen::VectorXd& c, double tau) {
  if (c.size() == 0) throw std::invalid_argument("azuma_hoeffding_tail: empty bound vector");
  if (tau < 0.0) throw std::invalid_argument("azuma_hoeffding_tail: tau must be >= 0");
  for (int i = 0; i < c.size(); ++i)
    if (c(i) <= 0.0)
      throw std::invalid_argument("azuma_hoeffding_tail: bound entries must be positive");
  ProbabilityBound b;
  b.raw = 2.0 * std::exp(-tau * tau / (2.0 * c.squaredNorm()));
  b.clamped = std::min(1.0, b.raw);
  return b;
}

ProbabilityBound azuma_bernstein_tail(const Eigen::VectorXd& a, double kappa,
                                      double tau, double c, double eta) {
  if (a.size() == 0) throw std::invalid_argument("azuma_bernstein_tail: empty weight vector");
  if (kappa <= 0.0 || c <= 0.0 || eta <= 0.0)
    throw std::invalid_argument("azuma_bernstein_tail: constants must be positive");
  if (tau < 0.0) throw std::invalid_argument("azuma_bernstein_tail: tau must be >= 0");
  double quad = tau * tau / (4.0 * c * kappa * kappa * a.squaredNorm());
  double lin = eta * tau / (2.0 * kappa * a.cwiseAbs().maxCoeff());
  ProbabilityBound b;
  b.raw = 2.0 * std::exp(-std::min(quad, lin));
  b.clamped = std::min(1.0, b.raw);
  return b;
}

}  // namespace depsketch::complexity
