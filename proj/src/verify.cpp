#include "depsketch/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "depsketch/rng.hpp"
#include "depsketch/stats.hpp"
#include "depsketch/transforms.hpp"

namespace depsketch::verify {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

QuantityStats summarize(const std::string& name, const std::vector<double>& xs,
                        bool with_quantiles = false) {
  QuantityStats q;
  q.name = name;
  q.mean = stats::mean(xs);
  q.se = xs.size() >= 2 ? stats::standard_error(xs) : 0.0;
  q.max = *std::max_element(xs.begin(), xs.end());
  if (with_quantiles)
    for (double p : {0.5, 0.9, 0.99})
      q.quantiles.emplace_back(p, stats::quantile(xs, p));
  return q;
}

// Trial-indexed evaluation; aggregation order is fixed regardless of the
// worker count.
std::vector<double> run_trials(int trials, unsigned workers,
                               const std::function<double(int)>& fn) {
  std::vector<double> out(trials);
  parallel_for(static_cast<std::size_t>(trials), workers,
               [&](std::size_t t) { out[t] = fn(static_cast<int>(t)); });
  return out;
}

bool constant_conditional_variance(const processes::ProcessConfig& cfg) {
  if (cfg.family == graph::GmFamily::GM3) return true;  // Rademacher, xi^2 = 1
  return !cfg.modulate;
}

Eigen::VectorXd second_moments(const processes::ProcessConfig& cfg, int batch,
                               std::uint64_t seed) {
  if (constant_conditional_variance(cfg)) return Eigen::VectorXd::Ones(cfg.n);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(cfg.n);
  for (int b = 0; b < batch; ++b) {
    auto path = processes::sample_path(cfg, substream(seed, b));
    acc += path.xi.cwiseProduct(path.xi);
  }
  return acc / static_cast<double>(batch);
}

double offdiag_form(const Eigen::VectorXd& xi, const Eigen::MatrixXd& G) {
  double full = xi.dot(G * xi);
  double diag = G.diagonal().dot(xi.cwiseProduct(xi));
  return full - diag;
}

}  // namespace

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  throw std::logic_error("unreachable");
}

std::string TrialReport::to_json() const {
  nlohmann::json j;
  j["quantity"] = quantity;
  j["verdict"] = verdict_name(verdict);
  j["tolerance"] = tolerance;
  j["seed"] = seed;
  j["trials"] = trials;
  // runtime_s stays out of the JSON so replayed runs are bit-identical.
  j["notes"] = notes;
  j["stats"] = nlohmann::json::array();
  for (const auto& s : stats) {
    nlohmann::json q;
    q["name"] = s.name;
    q["mean"] = s.mean;
    q["se"] = s.se;
    q["max"] = s.max;
    for (const auto& [p, v] : s.quantiles) q["q" + std::to_string(p)] = v;
    j["stats"].push_back(q);
  }
  return j.dump(2);
}

void TrialReport::write_csv(std::ostream& out) const {
  out << "quantity,stat,value\n";
  out << quantity << ",verdict," << verdict_name(verdict) << "\n";
  out << quantity << ",tolerance," << tolerance << "\n";
  for (const auto& s : stats) {
    out << quantity << ',' << s.name << "_mean," << s.mean << "\n";
    out << quantity << ',' << s.name << "_se," << s.se << "\n";
    out << quantity << ',' << s.name << "_max," << s.max << "\n";
  }
}

std::vector<Eigen::MatrixXd> materialize_set(
    const complexity::MatrixSetDescriptor& set, int directions,
    std::uint64_t seed) {
  using namespace complexity;
  if (const auto* fl = std::get_if<FiniteList>(&set)) return fl->mats;
  auto eng = make_engine(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::MatrixXd> out;
  auto vtheta_dense = [](const Eigen::VectorXd& theta, int n) {
    return transforms::build_vtheta(theta, n, false).dense();
  };
  if (const auto* vs = std::get_if<VThetaSphere>(&set)) {
    for (int j = 0; j < vs->p; ++j)
      out.push_back(vtheta_dense(Eigen::VectorXd::Unit(vs->p, j), vs->n));
    for (int t = 0; t < directions; ++t) {
      Eigen::VectorXd theta(vs->p);
      for (int j = 0; j < vs->p; ++j) theta(j) = gauss(eng);
      out.push_back(vtheta_dense(theta.normalized(), vs->n));
    }
    return out;
  }
  if (const auto* vsp = std::get_if<VThetaSparse>(&set)) {
    for (int t = 0; t < directions; ++t) {
      Eigen::VectorXd theta = Eigen::VectorXd::Zero(vsp->p);
      std::vector<int> perm(vsp->p);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), eng);
      for (int i = 0; i < vsp->s; ++i) theta(perm[i]) = gauss(eng);
      out.push_back(vtheta_dense(theta.normalized(), vsp->n));
    }
    return out;
  }
  throw std::invalid_argument("materialize_set: unsupported descriptor");
}

TrialReport estimate_cbd(const std::vector<Eigen::MatrixXd>& mats,
                         const processes::ProcessConfig& config, int trials,
                         std::uint64_t seed, const RunOptions& opt,
                         int batch_factor) {
  auto t0 = Clock::now();
  if (mats.empty()) throw std::invalid_argument("estimate_cbd: empty matrix set");
  for (const auto& A : mats)
    if (A.cols() != config.n)
      throw std::invalid_argument("estimate_cbd: matrix columns must match process length");
  if (trials < 2) throw std::invalid_argument("estimate_cbd: trials must be >= 2");

  bool closed_form = constant_conditional_variance(config);
  Eigen::VectorXd m2 =
      second_moments(config, batch_factor * trials, substream(seed, 0xbadc0de));

  struct PerMatrix {
    Eigen::MatrixXd gram;      // A^T A
    Eigen::VectorXd colnorm2;  // ||A_j||^2
    double expected = 0.0;     // sum_j E[xi_j^2] ||A_j||^2
  };
  std::vector<PerMatrix> pre(mats.size());
  for (std::size_t a = 0; a < mats.size(); ++a) {
    pre[a].gram = mats[a].transpose() * mats[a];
    pre[a].colnorm2 = pre[a].gram.diagonal();
    pre[a].expected = pre[a].colnorm2.dot(m2);
  }

  std::vector<double> Cs(trials), Bs(trials), Ds(trials);
  int violations = 0;
  std::vector<int> viol(trials, 0);
  parallel_for(static_cast<std::size_t>(trials), opt.workers, [&](std::size_t t) {
    auto path = processes::sample_path(config, substream(seed, t));
    const auto& xi = path.xi;
    double C = 0.0, B = 0.0, D = 0.0;
    for (const auto& pm : pre) {
      double quad = xi.dot(pm.gram * xi);
      double off = quad - pm.colnorm2.dot(xi.cwiseProduct(xi));
      Eigen::VectorXd xi2 = xi.cwiseProduct(xi);
      double diag = pm.colnorm2.dot(xi2 - m2);
      C = std::max(C, std::fabs(quad - pm.expected));
      B = std::max(B, std::fabs(off));
      D = std::max(D, std::fabs(diag));
    }
    Cs[t] = C;
    Bs[t] = B;
    Ds[t] = D;
    viol[t] = C > B + D + 1e-9 ? 1 : 0;
  });
  violations = std::accumulate(viol.begin(), viol.end(), 0);

  TrialReport rep;
  rep.quantity = "cbd";
  rep.seed = seed;
  rep.trials = trials;
  rep.stats = {summarize("C", Cs), summarize("B", Bs), summarize("D", Ds)};
  rep.tolerance = 1e-9;
  rep.verdict = violations == 0 ? Verdict::Pass : Verdict::Fail;
  rep.notes.push_back(closed_form
                          ? "E||A xi||^2 from closed form (constant conditional variance)"
                          : "E||A xi||^2 from independent batch of " +
                                std::to_string(batch_factor * trials) + " paths");
  rep.notes.push_back("pointwise C <= B + D violations: " + std::to_string(violations));
  rep.runtime_s = elapsed_s(t0);
  return rep;
}

TrialReport check_offdiag_zero(const processes::ProcessConfig& config, int trials,
                               std::uint64_t seed, const RunOptions& opt,
                               bool disable_centering) {
  auto t0 = Clock::now();
  if (config.n < 2)
    throw std::invalid_argument("check_offdiag_zero: need n >= 2");
  int n = config.n;
  int pairs = n * (n - 1) / 2;
  std::vector<std::vector<double>> prod(pairs, std::vector<double>(trials));
  parallel_for(static_cast<std::size_t>(trials), opt.workers, [&](std::size_t t) {
    auto path = processes::sample_path(config, substream(seed, t));
    Eigen::VectorXd xi = path.xi;
    if (disable_centering) xi.array() += 0.5;
    int pi = 0;
    for (int j = 0; j < n; ++j)
      for (int k = j + 1; k < n; ++k) prod[pi++][t] = xi(j) * xi(k);
  });
  TrialReport rep;
  rep.quantity = "offdiag_zero";
  rep.seed = seed;
  rep.trials = trials;
  rep.tolerance = 4.0;  // SE multiples
  bool all_ok = true;
  double worst = 0.0;
  int pi = 0;
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k) {
      double m = stats::mean(prod[pi]);
      double se = stats::standard_error(prod[pi]);
      double z = se > 0.0 ? std::fabs(m) / se : (m == 0.0 ? 0.0 : 1e18);
      worst = std::max(worst, z);
      if (z > 4.0) all_ok = false;
      if (j == 0 && k == 1)
        rep.stats.push_back(summarize("xi1_xi2_product", prod[pi]));
      ++pi;
    }
  QuantityStats w;
  w.name = "worst_z_score";
  w.mean = worst;
  w.max = worst;
  rep.stats.push_back(w);
  rep.verdict = all_ok ? Verdict::Pass : Verdict::Fail;
  if (!all_ok && worst < 6.0 && opt.escalate) {
    RunOptions o2 = opt;
    o2.escalate = false;
    auto rep2 = check_offdiag_zero(config, 4 * trials, substream(seed, 0xe5ca), o2,
                                   disable_centering);
    rep2.notes.push_back("escalated 4x after borderline first pass");
    return rep2;
  }
  rep.runtime_s = elapsed_s(t0);
  return rep;
}

TrialReport check_decoupling(const processes::ProcessConfig& config,
                             const std::vector<Eigen::MatrixXd>& Bset,
                             int p_norm, int trials, std::uint64_t seed,
                             const RunOptions& opt) {
  auto t0 = Clock::now();
  if (p_norm != 1 && p_norm != 2)
    throw std::invalid_argument("check_decoupling: p_norm must be 1 or 2");
  if (Bset.empty()) throw std::invalid_argument("check_decoupling: empty B set");
  for (const auto& B : Bset) {
    if (B.rows() != config.n || B.cols() != config.n)
      throw std::invalid_argument("check_decoupling: B must be n x n");
    if (!B.isApprox(B.transpose(), 1e-12))
      throw std::invalid_argument("check_decoupling: B must be symmetric");
  }
  auto h = [p_norm](double x) {
    return p_norm == 1 ? std::fabs(x) : x * x;
  };
  auto lhs = run_trials(trials, opt.workers, [&](int t) {
    auto path = processes::sample_path(config, substream(seed, 2 * t));
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& B : Bset) best = std::max(best, h(offdiag_form(path.xi, B)));
    return best;
  });
  auto rhs = run_trials(trials, opt.workers, [&](int t) {
    auto path = processes::sample_with_tangent(config, substream(seed, 2 * t + 1));
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& B : Bset)
      best = std::max(best, h(path.xi.dot(B * (*path.tangent))));
    return best;
  });
  double mL = stats::mean(lhs), mR = stats::mean(rhs);
  double seL = stats::standard_error(lhs), seR = stats::standard_error(rhs);
  double comb_se = std::sqrt(seL * seL + 16.0 * seR * seR);
  double threshold = 4.0 * mR + 3.0 * comb_se;

  TrialReport rep;
  rep.quantity = "decoupling_p" + std::to_string(p_norm);
  rep.seed = seed;
  rep.trials = trials;
  rep.tolerance = threshold;
  rep.stats = {summarize("lhs", lhs), summarize("rhs", rhs)};
  if (mL <= threshold)
    rep.verdict = Verdict::Pass;
  else if (mL <= threshold + comb_se)
    rep.verdict = Verdict::Inconclusive;
  else
    rep.verdict = Verdict::Fail;
  if (rep.verdict == Verdict::Inconclusive && opt.escalate) {
    RunOptions o2 = opt;
    o2.escalate = false;
    auto rep2 = check_decoupling(config, Bset, p_norm, 4 * trials,
                                 substream(seed, 0xe5ca), o2);
    rep2.notes.push_back("escalated 4x after inconclusive first pass");
    return rep2;
  }
  rep.runtime_s = elapsed_s(t0);
  return rep;
}

namespace {

// The mask must be supported on I x I^c for some partition, with a
// consistent orientation: every nonzero B(j,k) has j in I (the xi factor)
// and k in I^c (the tangent factor). Without that, the base and tangent
// quadratic forms have different conditional variances and the claimed
// equivalence fails (e.g. a symmetric 2x2 support gives Var 4b^2 vs 2b^2).
void check_bipartite(const Eigen::MatrixXd& B) {
  int n = static_cast<int>(B.rows());
  if (B.cols() != n) throw std::invalid_argument("tangent mask must be square");
  for (int j = 0; j < n; ++j)
    if (B(j, j) != 0.0)
      throw std::invalid_argument("tangent mask must have zero diagonal");
  // color 0 = candidate I (row side), 1 = candidate I^c (column side).
  std::vector<int> color(n, -1);
  auto assign = [&](int v, int c, std::vector<int>& stack) {
    if (color[v] == -1) {
      color[v] = c;
      stack.push_back(v);
    } else if (color[v] != c) {
      throw std::invalid_argument(
          "tangent mask support is not bipartite with a consistent "
          "orientation: every nonzero B(j,k) needs j in I and k in I^c for "
          "one partition (I, I^c); equivalence fails otherwise");
    }
  };
  for (int s = 0; s < n; ++s) {
    if (color[s] != -1) continue;
    bool touched = false;
    for (int w = 0; w < n && !touched; ++w)
      touched = B(s, w) != 0.0 || B(w, s) != 0.0;
    if (!touched) continue;  // isolated index, either side
    std::vector<int> stack;
    // Seed by the first incident nonzero's orientation.
    color[s] = -1;
    for (int w = 0; w < n && color[s] == -1; ++w) {
      if (B(s, w) != 0.0) color[s] = 0;
      if (B(w, s) != 0.0) color[s] = 1;
    }
    stack.push_back(s);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w = 0; w < n; ++w) {
        if (B(v, w) != 0.0) {
          assign(v, 0, stack);
          assign(w, 1, stack);
        }
        if (B(w, v) != 0.0) {
          assign(w, 0, stack);
          assign(v, 1, stack);
        }
      }
    }
  }
}

}  // namespace

TrialReport check_tangent_equivalence(const processes::ProcessConfig& config,
                                      const Eigen::MatrixXd& Bmask, int trials,
                                      std::uint64_t seed, const RunOptions& opt) {
  auto t0 = Clock::now();
  check_bipartite(Bmask);
  auto form = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double acc = 0.0;
    for (int j = 0; j < Bmask.rows(); ++j)
      for (int k = 0; k < Bmask.cols(); ++k)
        if (j != k) acc += a(j) * b(k) * Bmask(j, k);
    return acc;
  };
  auto base = run_trials(trials, opt.workers, [&](int t) {
    auto path = processes::sample_path(config, substream(seed, 2 * t));
    return form(path.xi, path.xi);
  });
  auto tang = run_trials(trials, opt.workers, [&](int t) {
    auto path = processes::sample_with_tangent(config, substream(seed, 2 * t + 1));
    return form(path.xi, *path.tangent);
  });
  double d = stats::ks_statistic(base, tang);
  double p = stats::ks_pvalue(d, base.size(), tang.size());

  TrialReport rep;
  rep.quantity = "tangent_equivalence";
  rep.seed = seed;
  rep.trials = trials;
  rep.tolerance = 0.01;
  rep.stats = {summarize("base_form", base), summarize("tangent_form", tang)};
  QuantityStats ks;
  ks.name = "ks";
  ks.mean = d;
  ks.max = p;  // p-value stashed in max
  rep.stats.push_back(ks);
  rep.notes.push_back("ks_statistic=" + std::to_string(d) +
                      " p_value=" + std::to_string(p));
  rep.verdict = p >= 0.01 ? Verdict::Pass : Verdict::Fail;
  rep.runtime_s = elapsed_s(t0);
  return rep;
}

TrialReport check_symmetrization(const processes::ProcessConfig& config,
                                 const Eigen::VectorXd& weights,
                                 const std::vector<NamedFunction>& fns,
                                 int p_norm, int trials, std::uint64_t seed,
                                 const RunOptions& opt) {
  auto t0 = Clock::now();
  if (fns.empty()) throw std::invalid_argument("check_symmetrization: empty function class");
  if (weights.size() != config.n)
    throw std::invalid_argument("check_symmetrization: weights length must be n");
  if (p_norm != 1 && p_norm != 2)
    throw std::invalid_argument("check_symmetrization: p_norm must be 1 or 2");
  auto H = [p_norm](double x) { return p_norm == 1 ? x : x * x; };

  // E[g(xi_i)] over the joint law, independent batch.
  int batch = 10 * trials;
  std::vector<Eigen::VectorXd> Eg(fns.size(), Eigen::VectorXd::Zero(config.n));
  for (int b = 0; b < batch; ++b) {
    auto path = processes::sample_path(config, substream(seed, 0x6a7c00 + b));
    for (std::size_t g = 0; g < fns.size(); ++g)
      for (int i = 0; i < config.n; ++i) Eg[g](i) += fns[g].fn(path.xi(i));
  }
  for (auto& v : Eg) v /= static_cast<double>(batch);

  std::vector<double> sym_lhs(trials), sym_rhs(trials), desym_lhs(trials);
  parallel_for(static_cast<std::size_t>(trials), opt.workers, [&](std::size_t t) {
    std::uint64_t st = substream(seed, t);
    auto path = processes::sample_path(config, st);
    auto eng = make_engine(st, 7);
    Eigen::VectorXd eps(config.n);
    for (int i = 0; i < config.n; ++i)
      eps(i) = std::uniform_real_distribution<double>(0.0, 1.0)(eng) < 0.5 ? -1.0 : 1.0;
    double centered_sup = 0.0, rad_sup = 0.0, rad_centered_sup = 0.0;
    for (std::size_t g = 0; g < fns.size(); ++g) {
      double centered = 0.0, rad = 0.0, rad_centered = 0.0;
      for (int i = 0; i < config.n; ++i) {
        double gi = fns[g].fn(path.xi(i));
        centered += weights(i) * (gi - Eg[g](i));
        rad += weights(i) * eps(i) * gi;
        rad_centered += weights(i) * eps(i) * (gi - Eg[g](i));
      }
      centered_sup = std::max(centered_sup, std::fabs(centered));
      rad_sup = std::max(rad_sup, std::fabs(rad));
      rad_centered_sup = std::max(rad_centered_sup, std::fabs(rad_centered));
    }
    sym_lhs[t] = H(centered_sup);
    sym_rhs[t] = H(2.0 * rad_sup);
    desym_lhs[t] = H(0.5 * rad_centered_sup);
  });

  double mSL = stats::mean(sym_lhs), mSR = stats::mean(sym_rhs);
  double mDL = stats::mean(desym_lhs);
  double seSL = stats::standard_error(sym_lhs), seSR = stats::standard_error(sym_rhs);
  double seDL = stats::standard_error(desym_lhs);
  double comb_sym = std::sqrt(seSL * seSL + seSR * seSR);
  double comb_desym = std::sqrt(seDL * seDL + seSL * seSL);
  bool sym_ok = mSL <= mSR + 3.0 * comb_sym;
  bool desym_ok = mDL <= mSL + 3.0 * comb_desym;

  TrialReport rep;
  rep.quantity = "symmetrization_p" + std::to_string(p_norm);
  rep.seed = seed;
  rep.trials = trials;
  rep.tolerance = 3.0;
  rep.stats = {summarize("sym_lhs", sym_lhs), summarize("sym_rhs", sym_rhs),
               summarize("desym_lhs", desym_lhs)};
  rep.verdict = (sym_ok && desym_ok) ? Verdict::Pass : Verdict::Fail;
  bool borderline = (!sym_ok && mSL <= mSR + 4.0 * comb_sym) ||
                    (!desym_ok && mDL <= mSL + 4.0 * comb_desym);
  if (rep.verdict == Verdict::Fail && borderline && opt.escalate) {
    RunOptions o2 = opt;
    o2.escalate = false;
    auto rep2 = check_symmetrization(config, weights, fns, p_norm, 4 * trials,
                                     substream(seed, 0xe5ca), o2);
    rep2.notes.push_back("escalated 4x after borderline first pass");
    return rep2;
  }
  rep.runtime_s = elapsed_s(t0);
  return rep;
}

DistortionStats jl_distortion(const std::vector<Eigen::VectorXd>& points, int n,
                              const processes::DependentMatrixConfig& gen,
                              double eps, int trials, std::uint64_t seed,
                              const RunOptions& opt) {
  if (points.empty()) throw std::invalid_argument("jl_distortion: no points");
  int p = static_cast<int>(points[0].size());
  for (const auto& u : points) {
    if (u.size() != p) throw std::invalid_argument("jl_distortion: inconsistent dims");
    if (u.norm() == 0.0) throw std::invalid_argument("jl_distortion: zero vector in points");
  }
  auto dists = run_trials(trials, opt.workers, [&](int t) {
    auto op = transforms::build_jl(n, p, gen, substream(seed, t));
    double worst = 0.0;
    for (const auto& u : points) {
      double un2 = u.squaredNorm();
      double d = std::fabs(op.apply(u).squaredNorm() - un2) / un2;
      worst = std::max(worst, d);
    }
    return worst;
  });
  DistortionStats ds;
  ds.n = n;
  ds.N = static_cast<int>(points.size());
  ds.trials = trials;
  ds.seed = seed;
  ds.max_distortion = *std::max_element(dists.begin(), dists.end());
  int failures = 0;
  for (double d : dists)
    if (d > eps) ++failures;
  ds.failure_rate = static_cast<double>(failures) / trials;
  for (double q : {0.5, 0.9, 0.99})
    ds.quantiles.emplace_back(q, stats::quantile(dists, q));
  return ds;
}

RipEstimate rip_constant(const Eigen::MatrixXd& X, int s, RipMode mode,
                         int mc_trials, std::uint64_t seed) {
  int p = static_cast<int>(X.cols());
  int n = static_cast<int>(X.rows());
  if (s < 1 || s > p) throw std::invalid_argument("rip_constant: need 1 <= s <= p");
  RipEstimate est;
  est.s = s;
  est.p = p;
  est.n = n;
  est.mode = mode;
  if (mode == RipMode::Exact) {
    double count = 1.0;
    for (int i = 0; i < s; ++i) count *= static_cast<double>(p - i) / (i + 1);
    if (count > 1e5)
      throw std::invalid_argument("rip_constant: C(p,s) exceeds the 1e5 exact-mode guard");
    std::vector<int> idx(s);
    std::iota(idx.begin(), idx.end(), 0);
    double delta = 0.0;
    long examined = 0;
    while (true) {
      Eigen::MatrixXd Xs(n, s);
      for (int i = 0; i < s; ++i) Xs.col(i) = X.col(idx[i]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Xs.transpose() * Xs /
                                                        static_cast<double>(n));
      delta = std::max({delta, es.eigenvalues().maxCoeff() - 1.0,
                        1.0 - es.eigenvalues().minCoeff()});
      ++examined;
      int i = s - 1;
      while (i >= 0 && idx[i] == p - s + i) --i;
      if (i < 0) break;
      ++idx[i];
      for (int j = i + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
    }
    est.delta_s = delta;
    est.supports_examined = examined;
    return est;
  }
  if (mc_trials < 1) throw std::invalid_argument("rip_constant: mc mode needs trials");
  auto eng = make_engine(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double delta = 0.0;
  std::vector<int> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  for (int t = 0; t < mc_trials; ++t) {
    std::shuffle(perm.begin(), perm.end(), eng);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < s; ++i) u(perm[i]) = gauss(eng);
    u.normalize();
    delta = std::max(delta, std::fabs((X * u).squaredNorm() / n - 1.0));
  }
  est.delta_s = delta;
  est.supports_examined = mc_trials;
  return est;
}

Adversary zero_adversary() {
  return [](const std::vector<Eigen::VectorXd>&, int k, int p) {
    return std::vector<Eigen::VectorXd>(k, Eigen::VectorXd::Zero(p));
  };
}

Adversary repeater_adversary() {
  return [](const std::vector<Eigen::VectorXd>&, int k, int p) {
    return std::vector<Eigen::VectorXd>(k, Eigen::VectorXd::Unit(p, 0));
  };
}

namespace {

struct BanditRun {
  Eigen::MatrixXd gram;            // accumulated xi xi^T
  std::vector<double> lambda_min;  // indexed by t-1, only filled when asked
};

// One simulated run; fills lambda_min for t in [t_from, rounds].
BanditRun simulate_bandit(const BanditOptions& bo, int rounds, int t_from,
                          double max_mean_k, std::uint64_t seed) {
  auto eng = make_engine(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int p = bo.p;
  Eigen::VectorXd theta_star = Eigen::VectorXd::Unit(p, 0);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);  // LS normal matrix
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  std::vector<Eigen::VectorXd> selected;
  BanditRun run;
  run.gram = Eigen::MatrixXd::Zero(p, p);
  run.lambda_min.assign(rounds, 0.0);
  for (int t = 1; t <= rounds; ++t) {
    auto mus = bo.adversary(selected, bo.k, p);
    Eigen::VectorXd theta_hat =
        (A + 1e-9 * Eigen::MatrixXd::Identity(p, p)).ldlt().solve(b);
    std::vector<Eigen::VectorXd> gs(bo.k);
    int pick = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < bo.k; ++i) {
      gs[i].resize(p);
      for (int j = 0; j < p; ++j) gs[i](j) = gauss(eng);
      double score = (mus[i] + bo.sigma * gs[i]).dot(theta_hat);
      if (score > best) {
        best = score;
        pick = i;
      }
    }
    Eigen::VectorXd x_sel = mus[pick] + bo.sigma * gs[pick];
    // Conditional centering of the selected perturbation: with identical
    // mu across contexts the greedy pick maximizes <g_i, theta_hat>, so
    // E[g_sel | theta_hat] = E[max of k normals] along theta_hat.
    Eigen::VectorXd xi = bo.sigma * gs[pick];
    double tn = theta_hat.norm();
    if (tn > 1e-12 && bo.k > 1)
      xi -= bo.sigma * max_mean_k * (theta_hat / tn);
    run.gram += xi * xi.transpose();
    if (t >= t_from) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(run.gram);
      run.lambda_min[t - 1] = es.eigenvalues().minCoeff();
    }
    double y = x_sel.dot(theta_star) + 0.1 * gauss(eng);
    A += x_sel * x_sel.transpose();
    b += y * x_sel;
    selected.push_back(x_sel);
  }
  return run;
}

}  // namespace

TrialReport bandit_min_eig_experiment(const BanditOptions& bo, std::uint64_t seed,
                                      const RunOptions& opt) {
  auto t0 = Clock::now();
  if (bo.sigma <= 0.0) throw std::invalid_argument("bandit: sigma must be positive");
  if (bo.k < 2) throw std::invalid_argument("bandit: need k >= 2 contexts");
  double max_mean_k = stats::expected_max_gaussian(bo.k);

  // Pilot phase: estimate kappa_hat = lambda_min(E Gram_t)/t at a
  // reference horizon, then size the main runs from it.
  int pilot_rounds = std::max(20 * bo.p, 200);
  int pilot_runs = 8;
  Eigen::MatrixXd mean_gram = Eigen::MatrixXd::Zero(bo.p, bo.p);
  for (int r = 0; r < pilot_runs; ++r) {
    auto run = simulate_bandit(bo, pilot_rounds, pilot_rounds + 1, max_mean_k,
                               substream(seed, 0xb111 + r));
    mean_gram += run.gram;
  }
  mean_gram /= static_cast<double>(pilot_runs);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mean_gram);
  double kappa_hat = es.eigenvalues().minCoeff() / pilot_rounds;
  if (kappa_hat <= 0.0) throw std::runtime_error("bandit: nonpositive kappa estimate");

  int t_star = complexity::bandit_sample_size(std::min(bo.eps, 1.0 - 1e-9),
                                              kappa_hat, bo.p);
  int rounds = bo.rounds > 0
                   ? bo.rounds
                   : static_cast<int>(std::ceil(1.2 * t_star));
  double thr_slope = kappa_hat * (1.0 - bo.eps);

  std::vector<int> ok(bo.runs, 0);
  std::vector<double> final_lmin(bo.runs);
  parallel_for(static_cast<std::size_t>(bo.runs), opt.workers, [&](std::size_t r) {
    auto run = simulate_bandit(bo, rounds, std::min(t_star, rounds), max_mean_k,
                               substream(seed, r));
    bool pass = true;
    for (int t = t_star; t <= rounds; ++t)
      if (run.lambda_min[t - 1] < t * thr_slope) pass = false;
    ok[r] = pass ? 1 : 0;
    final_lmin[r] = run.lambda_min[rounds - 1];
  });
  double pass_rate =
      static_cast<double>(std::accumulate(ok.begin(), ok.end(), 0)) / bo.runs;

  TrialReport rep;
  rep.quantity = "bandit_min_eig";
  rep.seed = seed;
  rep.trials = bo.runs;
  rep.tolerance = 0.95;
  rep.stats = {summarize("final_lambda_min", final_lmin)};
  QuantityStats pr;
  pr.name = "pass_rate";
  pr.mean = pass_rate;
  pr.max = pass_rate;
  rep.stats.push_back(pr);
  rep.notes.push_back("kappa_hat=" + std::to_string(kappa_hat) +
                      " t_star=" + std::to_string(t_star) +
                      " rounds=" + std::to_string(rounds));
  rep.verdict = bo.eps >= 1.0 || pass_rate >= 0.95 ? Verdict::Pass : Verdict::Fail;
  rep.runtime_s = elapsed_s(t0);
  return rep;
}

}  // namespace depsketch::verify
