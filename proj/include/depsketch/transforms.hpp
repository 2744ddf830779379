#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include "depsketch/processes.hpp"

namespace depsketch::transforms {

struct DenseOp {
  Eigen::MatrixXd mat;
  double scale = 1.0;
};

// X = R A_xi with A_xi the p x p Toeplitz matrix over xi (length 2p-1),
// first row (xi_p ... xi_{2p-1}) and descending first column. rows holds
// the 1-based selected row indices, strictly increasing.
struct ToeplitzOp {
  Eigen::VectorXd xi;
  std::vector<int> rows;
  double scale = 1.0;
  int p = 0;
};

// Each column j has exactly d nonzeros at rows idx[j] with signs
// sign[j] in {-1,+1}; entries are sign/sqrt(d).
struct CountSketchOp {
  int n = 0, p = 0, d = 0;
  std::vector<std::vector<int>> idx;
  std::vector<std::vector<double>> sign;
};

class SketchOperator {
 public:
  using Payload = std::variant<DenseOp, ToeplitzOp, CountSketchOp>;

  explicit SketchOperator(Payload payload);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;

  // Materializes the operator (scale included); for tests and small dims.
  Eigen::MatrixXd dense() const;

  const Payload& payload() const { return payload_; }

  // Textual serialization: variant tag + payload arrays, hex-float so the
  // round trip is lossless.
  void save(std::ostream& out) const;
  static SketchOperator load(std::istream& in);

 private:
  Payload payload_;
  int rows_ = 0, cols_ = 0;
};

// X = (1/sqrt(n)) Xtilde with Xtilde from sample_dependent_matrix.
SketchOperator build_jl(int n, int p, const processes::DependentMatrixConfig& gen,
                        std::uint64_t seed);

// Unscaled partial Toeplitz R A_xi; apply contributes the 1/sqrt(n) scale.
SketchOperator build_toeplitz(const Eigen::VectorXd& xi,
                              const std::vector<int>& row_selector);

enum class CountSketchPattern { Uniform, Adaptive };

// Column j gets d distinct rows, drawn uniformly without replacement or
// tilted toward under-occupied rows given columns < j (Adaptive).
SketchOperator build_countsketch(int n, int p, int d, CountSketchPattern pattern,
                                 std::uint64_t seed);

// Block-diagonal (banded=false) or banded Toeplitz (banded=true) reshape
// operator V_theta, scale 1/sqrt(n) included.
struct VThetaOperator {
  Eigen::VectorXd theta;
  int n = 1;
  bool banded = false;

  int rows() const;
  int cols() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd dense() const;
  double frob_norm() const { return theta.norm(); }
};

VThetaOperator build_vtheta(const Eigen::VectorXd& theta, int n, bool banded);

// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Full Toeplitz product A_xi u (all p rows, no scale) via circulant
// embedding of size next power of two >= 2p.
Eigen::VectorXd toeplitz_full_apply(const Eigen::VectorXd& xi,
                                    const Eigen::VectorXd& u);

// Dense materialization of A_xi, oracle for the FFT path.
Eigen::MatrixXd toeplitz_dense(const Eigen::VectorXd& xi);

}  // namespace depsketch::transforms
