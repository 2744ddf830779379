#include "depsketch/processes.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "depsketch/rng.hpp"
#include "depsketch/stats.hpp"

namespace depsketch::processes {

void ProcessConfig::validate() const {
  if (n < 1) throw std::invalid_argument("ProcessConfig: n must be >= 1");
  if (subgaussian_L <= 0.0)
    throw std::invalid_argument("ProcessConfig: subgaussian_L must be positive");
  if (rho <= -1.0 || rho >= 1.0)
    throw std::invalid_argument("ProcessConfig: rho must be in (-1, 1)");
}

double conditional_center(double raw, double conditional_mean) {
  if (!std::isfinite(conditional_mean))
    throw std::invalid_argument("conditional_center: mean must be finite");
  return raw - conditional_mean;
}

double modulated_sd(double latent_value) {
  return 0.5 + 0.5 * stats::logistic(latent_value);
}

namespace {

double latent_zeta(double f, double x) { return std::tanh(f + x); }

struct PathSampler {
  const ProcessConfig& cfg;
  std::mt19937_64 eng;
  std::normal_distribution<double> gauss{0.0, 1.0};

  double ar_step(double prev) {
    return cfg.rho * prev + std::sqrt(1.0 - cfg.rho * cfg.rho) * gauss(eng);
  }

  double draw_xi(double history_latent) {
    if (cfg.family == GmFamily::GM3) {
      double u = std::uniform_real_distribution<double>(0.0, 1.0)(eng);
      return u < 0.5 ? -1.0 : 1.0;
    }
    double sd = cfg.modulate ? modulated_sd(history_latent) : 1.0;
    return sd * gauss(eng);
  }
};

}  // namespace

PathSample sample_path(const ProcessConfig& config, std::uint64_t seed) {
  config.validate();
  PathSample out;
  out.seed = seed;
  out.has_prior = config.family != GmFamily::GM2;
  int n = config.n;
  out.xi.resize(n);
  out.latent.resize(out.has_prior ? n + 1 : n);

  PathSampler s{config, make_engine(seed, 0)};
  switch (config.family) {
    case GmFamily::GM1: {
      out.latent(0) = s.gauss(s.eng);  // prior F0
      for (int i = 1; i <= n; ++i) {
        out.xi(i - 1) = s.draw_xi(out.latent(i - 1));
        out.latent(i) = s.ar_step(out.latent(i - 1));
      }
      break;
    }
    case GmFamily::GM2: {
      for (int i = 1; i <= n; ++i) {
        out.latent(i - 1) = (i == 1) ? s.gauss(s.eng) : s.ar_step(out.latent(i - 2));
        out.xi(i - 1) = s.draw_xi(out.latent(i - 1));
      }
      break;
    }
    case GmFamily::GM3: {
      out.latent(0) = s.gauss(s.eng);
      for (int i = 1; i <= n; ++i) {
        out.xi(i - 1) = s.draw_xi(out.latent(i - 1));
        out.latent(i) = config.modulate
                            ? latent_zeta(out.latent(i - 1), out.xi(i - 1))
                            : s.ar_step(out.latent(i - 1));
      }
      break;
    }
  }
  return out;
}

PathSample sample_with_tangent(const ProcessConfig& config, std::uint64_t seed) {
  PathSample out = sample_path(config, seed);
  int n = config.n;
  Eigen::VectorXd tangent(n);
  // Tangent draws come from a separate stream so the base path is
  // unchanged relative to sample_path with the same seed.
  PathSampler s{config, make_engine(seed, 1)};
  for (int i = 1; i <= n; ++i) {
    switch (config.family) {
      case GmFamily::GM1:
        // P(xi_i | F_{1:i}) = P(xi_i | F_{1:(i-1)}) for GM1.
        tangent(i - 1) = s.draw_xi(out.latent_at(i - 1));
        break;
      case GmFamily::GM2:
        tangent(i - 1) = s.draw_xi(out.latent_at(i));
        break;
      case GmFamily::GM3: {
        if (!config.modulate) {
          tangent(i - 1) = s.draw_xi(0.0);
          break;
        }
        // Posterior over the discrete support given the realized F_i:
        // keep support points consistent with F_i = zeta(F_{i-1}, xi_i).
        double fprev = out.latent_at(i - 1), fcur = out.latent_at(i);
        double mass = 0.0, pick = 0.0;
        int matches = 0;
        for (double z : {-1.0, 1.0}) {
          if (std::fabs(latent_zeta(fprev, z) - fcur) < 1e-12) {
            mass += 0.5;
            ++matches;
            pick = z;
          }
        }
        if (matches == 0)
          throw std::runtime_error("GM3 posterior: no support point matches F_i");
        if (matches == 1) {
          tangent(i - 1) = pick;
        } else {
          double u = std::uniform_real_distribution<double>(0.0, 1.0)(s.eng);
          tangent(i - 1) = u < 0.5 ? -1.0 : 1.0;
        }
        break;
      }
    }
  }
  out.tangent = tangent;
  return out;
}

void DependentMatrixConfig::validate() const {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("DependentMatrixConfig: dims must be positive");
  if (rho <= -1.0 || rho >= 1.0)
    throw std::invalid_argument("DependentMatrixConfig: rho must be in (-1, 1)");
}

Eigen::MatrixXd sample_dependent_matrix(const DependentMatrixConfig& config,
                                        std::uint64_t seed) {
  config.validate();
  Eigen::MatrixXd X(config.rows, config.cols);
  auto eng = make_engine(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double f = 0.0;  // latent over the row-major entry order
  for (int i = 0; i < config.rows; ++i) {
    for (int j = 0; j < config.cols; ++j) {
      double sd = config.modulate ? modulated_sd(f) : 1.0;
      X(i, j) = sd * gauss(eng);
      f = config.rho * f + std::sqrt(1.0 - config.rho * config.rho) * gauss(eng);
    }
  }
  return X;
}

double entry_second_moment(const DependentMatrixConfig& config) {
  config.validate();
  if (!config.modulate) return 1.0;
  const int grid = 20000;
  const double lo = -10.0, hi = 10.0;
  double h = (hi - lo) / grid, sum = 0.0;
  for (int i = 0; i <= grid; ++i) {
    double z = lo + i * h;
    double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    double s = modulated_sd(z);
    sum += ((i == 0 || i == grid) ? 0.5 : 1.0) * s * s * phi;
  }
  return sum * h;
}

ProcessConfig ProcessConfig::load(std::istream& in) {
  ProcessConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::stringstream key(line.substr(0, eq)), val(line.substr(eq + 1));
    std::string k, v;
    key >> k;
    val >> v;
    if (k.empty()) continue;
    if (k == "family")
      cfg.family = graph::parse_family(v);
    else if (k == "n")
      cfg.n = std::stoi(v);
    else if (k == "rho")
      cfg.rho = std::stod(v);
    else if (k == "modulate")
      cfg.modulate = (v == "true" || v == "1");
    else if (k == "subgaussian_L")
      cfg.subgaussian_L = std::stod(v);
    else
      throw std::invalid_argument("unknown ProcessConfig key: " + k);
  }
  cfg.validate();
  return cfg;
}

void ProcessConfig::save(std::ostream& out) const {
  out << "family = " << graph::family_name(family) << "\n"
      << "n = " << n << "\n"
      << "rho = " << rho << "\n"
      << "modulate = " << (modulate ? "true" : "false") << "\n"
      << "subgaussian_L = " << subgaussian_L << "\n";
}

void write_path_csv(std::ostream& out, const PathSample& path) {
  out << "index,latent,xi" << (path.tangent ? ",tangent" : "") << "\n";
  int n = static_cast<int>(path.xi.size());
  for (int i = 1; i <= n; ++i) {
    out << i << ',' << path.latent_at(i) << ',' << path.xi(i - 1);
    if (path.tangent) out << ',' << (*path.tangent)(i - 1);
    out << "\n";
  }
}

}  // namespace depsketch::processes
