#include "depsketch/transforms.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "depsketch/rng.hpp"

namespace depsketch::transforms {

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

Eigen::MatrixXd toeplitz_dense(const Eigen::VectorXd& xi) {
  if (xi.size() % 2 == 0)
    throw std::invalid_argument("toeplitz_dense: xi length must be 2p-1");
  int p = static_cast<int>((xi.size() + 1) / 2);
  Eigen::MatrixXd A(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) A(r, c) = xi(p - 1 - r + c);
  return A;
}

Eigen::VectorXd toeplitz_full_apply(const Eigen::VectorXd& xi,
                                    const Eigen::VectorXd& u) {
  if (xi.size() % 2 == 0)
    throw std::invalid_argument("toeplitz_full_apply: xi length must be 2p-1");
  int p = static_cast<int>((xi.size() + 1) / 2);
  if (u.size() != p)
    throw std::invalid_argument("toeplitz_full_apply: dimension mismatch");
  std::size_t N = 1;
  while (N < static_cast<std::size_t>(2 * p)) N <<= 1;
  // Circulant embedding: first column c[k] = A[k][0] = xi_{p-1-k},
  // wrap c[N-k] = A[0][k] = xi_{p-1+k}.
  std::vector<std::complex<double>> c(N), x(N);
  for (int k = 0; k < p; ++k) c[k] = xi(p - 1 - k);
  for (int k = 1; k < p; ++k) c[N - k] = xi(p - 1 + k);
  for (int j = 0; j < p; ++j) x[j] = u(j);
  fft(c, false);
  fft(x, false);
  for (std::size_t i = 0; i < N; ++i) c[i] *= x[i];
  fft(c, true);
  Eigen::VectorXd y(p);
  for (int r = 0; r < p; ++r) y(r) = c[r].real();
  return y;
}

SketchOperator::SketchOperator(Payload payload) : payload_(std::move(payload)) {
  std::visit(
      [this](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, DenseOp>) {
          rows_ = static_cast<int>(op.mat.rows());
          cols_ = static_cast<int>(op.mat.cols());
        } else if constexpr (std::is_same_v<T, ToeplitzOp>) {
          rows_ = static_cast<int>(op.rows.size());
          cols_ = op.p;
        } else {
          rows_ = op.n;
          cols_ = op.p;
        }
      },
      payload_);
}

Eigen::VectorXd SketchOperator::apply(const Eigen::VectorXd& u) const {
  if (u.size() != cols_)
    throw std::invalid_argument("SketchOperator::apply: dimension mismatch");
  return std::visit(
      [&](const auto& op) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, DenseOp>) {
          return op.scale * (op.mat * u);
        } else if constexpr (std::is_same_v<T, ToeplitzOp>) {
          Eigen::VectorXd full = toeplitz_full_apply(op.xi, u);
          Eigen::VectorXd y(rows_);
          for (int i = 0; i < rows_; ++i) y(i) = op.scale * full(op.rows[i] - 1);
          return y;
        } else {
          Eigen::VectorXd y = Eigen::VectorXd::Zero(op.n);
          double inv = 1.0 / std::sqrt(static_cast<double>(op.d));
          for (int j = 0; j < op.p; ++j)
            for (int t = 0; t < op.d; ++t)
              y(op.idx[j][t]) += op.sign[j][t] * inv * u(j);
          return y;
        }
      },
      payload_);
}

Eigen::MatrixXd SketchOperator::dense() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows_, cols_);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(cols_);
  for (int j = 0; j < cols_; ++j) {
    e(j) = 1.0;
    M.col(j) = apply(e);
    e(j) = 0.0;
  }
  return M;
}

SketchOperator build_jl(int n, int p, const processes::DependentMatrixConfig& gen,
                        std::uint64_t seed) {
  if (n < 1 || p < 1) throw std::invalid_argument("build_jl: dims must be positive");
  processes::DependentMatrixConfig cfg = gen;
  cfg.rows = n;
  cfg.cols = p;
  DenseOp op;
  op.mat = processes::sample_dependent_matrix(cfg, seed);
  // Normalize by the entry second moment so E||Xu||^2 = ||u||^2.
  op.scale = 1.0 / std::sqrt(n * processes::entry_second_moment(cfg));
  return SketchOperator(std::move(op));
}

SketchOperator build_toeplitz(const Eigen::VectorXd& xi,
                              const std::vector<int>& row_selector) {
  if (xi.size() % 2 == 0)
    throw std::invalid_argument("build_toeplitz: xi length must be 2p-1");
  int p = static_cast<int>((xi.size() + 1) / 2);
  if (row_selector.empty() || static_cast<int>(row_selector.size()) > p)
    throw std::invalid_argument("build_toeplitz: need 1 <= |rows| <= p");
  int prev = 0;
  for (int r : row_selector) {
    if (r < 1 || r > p || r <= prev)
      throw std::invalid_argument("build_toeplitz: rows must be strictly increasing in [1,p]");
    prev = r;
  }
  ToeplitzOp op;
  op.xi = xi;
  op.rows = row_selector;
  op.p = p;
  op.scale = 1.0 / std::sqrt(static_cast<double>(row_selector.size()));
  return SketchOperator(std::move(op));
}

SketchOperator build_countsketch(int n, int p, int d, CountSketchPattern pattern,
                                 std::uint64_t seed) {
  if (d < 1 || d > n) throw std::invalid_argument("build_countsketch: need 1 <= d <= n");
  if (p < 1) throw std::invalid_argument("build_countsketch: p must be positive");
  CountSketchOp op;
  op.n = n;
  op.p = p;
  op.d = d;
  op.idx.resize(p);
  op.sign.resize(p);
  auto eng = make_engine(seed, 0);
  std::vector<int> occupancy(n, 0);
  for (int j = 0; j < p; ++j) {
    // Weighted sampling of d distinct rows; uniform weights, or tilted by
    // 1/(1+occupancy) so adaptive columns load-balance across rows.
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
      w[i] = pattern == CountSketchPattern::Adaptive
                 ? 1.0 / (1.0 + static_cast<double>(occupancy[i]))
                 : 1.0;
    for (int t = 0; t < d; ++t) {
      std::discrete_distribution<int> pick(w.begin(), w.end());
      int row = pick(eng);
      w[row] = 0.0;
      op.idx[j].push_back(row);
      double u = std::uniform_real_distribution<double>(0.0, 1.0)(eng);
      op.sign[j].push_back(u < 0.5 ? -1.0 : 1.0);
      ++occupancy[row];
    }
  }
  return SketchOperator(std::move(op));
}

int VThetaOperator::rows() const {
  return banded ? static_cast<int>(theta.size()) : n;
}

int VThetaOperator::cols() const {
  int p = static_cast<int>(theta.size());
  return banded ? 2 * p - 1 : n * p;
}

Eigen::VectorXd VThetaOperator::apply(const Eigen::VectorXd& x) const {
  if (x.size() != cols())
    throw std::invalid_argument("VThetaOperator::apply: dimension mismatch");
  int p = static_cast<int>(theta.size());
  double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd y(rows());
  if (banded) {
    // Row r reproduces Toeplitz row r: y_r = (1/sqrt n) sum_j theta_j x_{p-1-r+j}.
    for (int r = 0; r < p; ++r) {
      double acc = 0.0;
      for (int j = 0; j < p; ++j) acc += theta(j) * x(p - 1 - r + j);
      y(r) = scale * acc;
    }
  } else {
    for (int i = 0; i < n; ++i) y(i) = scale * theta.dot(x.segment(i * p, p));
  }
  return y;
}

Eigen::MatrixXd VThetaOperator::dense() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows(), cols());
  int p = static_cast<int>(theta.size());
  double scale = 1.0 / std::sqrt(static_cast<double>(n));
  if (banded) {
    for (int r = 0; r < p; ++r)
      for (int j = 0; j < p; ++j) M(r, p - 1 - r + j) = scale * theta(j);
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) M(i, i * p + j) = scale * theta(j);
  }
  return M;
}

VThetaOperator build_vtheta(const Eigen::VectorXd& theta, int n, bool banded) {
  if (theta.size() < 1) throw std::invalid_argument("build_vtheta: theta must be non-empty");
  if (n < 1) throw std::invalid_argument("build_vtheta: n must be positive");
  return VThetaOperator{theta, n, banded};
}

namespace {

void write_vec(std::ostream& out, const Eigen::VectorXd& v) {
  out << v.size();
  out << std::hexfloat;
  for (int i = 0; i < v.size(); ++i) out << ' ' << v(i);
  out << std::defaultfloat << '\n';
}

Eigen::VectorXd read_vec(std::istream& in) {
  int n;
  if (!(in >> n)) throw std::invalid_argument("operator load: bad vector length");
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    std::string tok;
    if (!(in >> tok)) throw std::invalid_argument("operator load: truncated vector");
    v(i) = std::strtod(tok.c_str(), nullptr);
  }
  return v;
}

}  // namespace

void SketchOperator::save(std::ostream& out) const {
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, DenseOp>) {
          out << "dense " << op.mat.rows() << ' ' << op.mat.cols() << ' '
              << std::hexfloat << op.scale << std::defaultfloat << '\n';
          for (int i = 0; i < op.mat.rows(); ++i)
            write_vec(out, op.mat.row(i).transpose());
        } else if constexpr (std::is_same_v<T, ToeplitzOp>) {
          out << "toeplitz " << op.p << ' ' << op.rows.size() << ' '
              << std::hexfloat << op.scale << std::defaultfloat;
          for (int r : op.rows) out << ' ' << r;
          out << '\n';
          write_vec(out, op.xi);
        } else {
          out << "countsketch " << op.n << ' ' << op.p << ' ' << op.d << '\n';
          for (int j = 0; j < op.p; ++j) {
            for (int t = 0; t < op.d; ++t)
              out << op.idx[j][t] << ' ' << (op.sign[j][t] > 0 ? 1 : -1)
                  << (t + 1 == op.d ? '\n' : ' ');
          }
        }
      },
      payload_);
}

SketchOperator SketchOperator::load(std::istream& in) {
  std::string tag;
  if (!(in >> tag)) throw std::invalid_argument("operator load: empty input");
  if (tag == "dense") {
    int r, c;
    std::string scale_tok;
    if (!(in >> r >> c >> scale_tok))
      throw std::invalid_argument("operator load: bad dense header");
    DenseOp op;
    op.scale = std::strtod(scale_tok.c_str(), nullptr);
    op.mat.resize(r, c);
    for (int i = 0; i < r; ++i) op.mat.row(i) = read_vec(in).transpose();
    return SketchOperator(std::move(op));
  }
  if (tag == "toeplitz") {
    int p;
    std::size_t nrows;
    std::string scale_tok;
    if (!(in >> p >> nrows >> scale_tok))
      throw std::invalid_argument("operator load: bad toeplitz header");
    ToeplitzOp op;
    op.p = p;
    op.scale = std::strtod(scale_tok.c_str(), nullptr);
    op.rows.resize(nrows);
    for (auto& r : op.rows)
      if (!(in >> r)) throw std::invalid_argument("operator load: truncated rows");
    op.xi = read_vec(in);
    return SketchOperator(std::move(op));
  }
  if (tag == "countsketch") {
    CountSketchOp op;
    if (!(in >> op.n >> op.p >> op.d))
      throw std::invalid_argument("operator load: bad countsketch header");
    op.idx.resize(op.p);
    op.sign.resize(op.p);
    for (int j = 0; j < op.p; ++j)
      for (int t = 0; t < op.d; ++t) {
        int row, s;
        if (!(in >> row >> s))
          throw std::invalid_argument("operator load: truncated countsketch");
        op.idx[j].push_back(row);
        op.sign[j].push_back(s > 0 ? 1.0 : -1.0);
      }
    return SketchOperator(std::move(op));
  }
  throw std::invalid_argument("operator load: unknown tag " + tag);
}

}  // namespace depsketch::transforms
