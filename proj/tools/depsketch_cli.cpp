// depsketch: experiment runner over the library modules. Every run writes a
// JSON report, a CSV summary, and a manifest that `replay` can re-execute to
// reproduce the output files bit-identically.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "depsketch/complexity.hpp"
#include "depsketch/graph.hpp"
#include "depsketch/processes.hpp"
#include "depsketch/rng.hpp"
#include "depsketch/stats.hpp"
#include "depsketch/transforms.hpp"
#include "depsketch/verify.hpp"

namespace cx = depsketch::complexity;
namespace tf = depsketch::transforms;
namespace vf = depsketch::verify;
namespace gr = depsketch::graph;
namespace pr = depsketch::processes;
using depsketch::make_engine;
using depsketch::substream;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "depsketch 1.0.0";
constexpr std::uint64_t kDefaultSeed = 0xDEC0DE;

int run(const std::vector<std::string>& args);

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DEPSKETCH_SEED")) {
    try {
      return std::stoull(env, nullptr, 0);
    } catch (const std::exception&) {
      throw CLI::ValidationError("DEPSKETCH_SEED", "not a valid integer");
    }
  }
  return kDefaultSeed;
}

struct Common {
  std::uint64_t seed = kDefaultSeed;
  unsigned workers = 1;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_out) {
  c.seed = default_seed();
  c.out = "depsketch-out/" + default_out;
  sub->add_option("--seed", c.seed, "RNG seed (env DEPSKETCH_SEED overrides the default)")
      ->capture_default_str();
  sub->add_option("--workers", c.workers, "trial parallelism; results are identical for any value")
      ->capture_default_str();
  sub->add_option("--out", c.out, "output path prefix")->capture_default_str();
}

void write_file(const std::string& path, const std::string& content) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

// The manifest stores the exact argv so `replay` can re-run it.
void write_manifest(const std::string& out, const std::vector<std::string>& args,
                    const std::vector<std::string>& outputs, double runtime_s) {
  json m;
  m["tool"] = kVersion;
  m["args"] = args;
  m["outputs"] = outputs;
  m["runtime_s"] = runtime_s;
  write_file(out + ".manifest.json", m.dump(2) + "\n");
}

int exit_code(vf::Verdict v) { return v == vf::Verdict::Pass ? 0 : 2; }

// Emits <out>.json / <out>.csv plus the manifest and a one-line summary.
int finish_report(const vf::TrialReport& rep, const Common& c,
                  const std::vector<std::string>& args,
                  std::chrono::steady_clock::time_point t0) {
  write_file(c.out + ".json", rep.to_json() + "\n");
  std::ostringstream csv;
  rep.write_csv(csv);
  write_file(c.out + ".csv", csv.str());
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".json", c.out + ".csv"}, secs);
  std::cout << rep.quantity << ": " << vf::verdict_name(rep.verdict) << " ("
            << rep.trials << " trials";
  for (const auto& s : rep.stats)
    std::cout << ", " << s.name << "=" << s.mean;
  std::cout << ")\n";
  for (const auto& note : rep.notes) std::cout << "  note: " << note << "\n";
  return exit_code(rep.verdict);
}

pr::ProcessConfig make_config(const std::string& family, int n, double rho,
                              bool no_modulate) {
  pr::ProcessConfig cfg;
  cfg.family = gr::parse_family(family);
  cfg.n = n;
  cfg.rho = rho;
  cfg.modulate = !no_modulate;
  cfg.validate();
  return cfg;
}

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
  auto eng = make_engine(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) B(i, j) = B(j, i) = gauss(eng);
  return B;
}

// "start:stop:count" -> linear grid.
std::vector<double> parse_grid(const std::string& spec) {
  double start, stop;
  int count;
  char c1, c2;
  std::istringstream ss(spec);
  if (!(ss >> start >> c1 >> stop >> c2 >> count) || c1 != ':' || c2 != ':' ||
      count < 1 || !(ss >> std::ws).eof())
    throw CLI::ValidationError("--eps-grid", "expected start:stop:count");
  std::vector<double> grid;
  for (int i = 0; i < count; ++i)
    grid.push_back(count == 1 ? start
                              : start + (stop - start) * i / (count - 1));
  return grid;
}

cx::MatrixSetDescriptor parse_set(const std::string& name, int n, int p, int s) {
  if (name == "vtheta-sphere") return cx::VThetaSphere{n, p};
  if (name == "vtheta-sparse") return cx::VThetaSparse{n, p, s};
  if (name == "toeplitz-band") return cx::ToeplitzBand{n, p, s, {}};
  throw CLI::ValidationError("--set", "unknown set " + name);
}

// ---------------------------------------------------------------------------

int cmd_dsep(const Common& c, const std::vector<std::string>& args,
             const std::string& tmpl, int n, const std::string& varrho,
             const std::string& dag_file, const std::string& query,
             bool with_tangent) {
  auto t0 = std::chrono::steady_clock::now();
  gr::Dag dag;
  if (!dag_file.empty()) {
    std::ifstream f(dag_file);
    if (!f) throw CLI::ValidationError("--dag", "cannot open " + dag_file);
    dag = gr::parse_dag(f);
  } else {
    dag = gr::build_gm_template(gr::parse_family(tmpl), n, with_tangent);
  }

  json out;
  out["nodes"] = dag.size();
  bool pass = true;
  std::ostringstream csv;
  csv << "query,separated\n";
  if (!query.empty()) {
    auto q = gr::parse_ci_query(query);
    bool sep = gr::d_separated(dag, q);
    std::cout << query << " -> " << (sep ? "d-separated" : "d-connected") << "\n";
    out["query"] = query;
    out["separated"] = sep;
    csv << '"' << query << "\"," << sep << "\n";
    pass = sep;
  } else {
    std::string vr = varrho.empty()
                         ? (tmpl == "gm1" ? "shift1" : "ident")
                         : varrho;
    std::function<int(int)> fn;
    if (vr == "shift1")
      fn = [](int i) { return i - 1; };
    else if (vr == "ident")
      fn = [](int i) { return i; };
    else
      throw CLI::ValidationError("--varrho", "expected shift1 or ident");
    auto rep = with_tangent ? gr::verify_dts(dag) : gr::verify_sp2(dag, fn);
    out["checks"] = json::array();
    for (const auto& chk : rep.checks) {
      std::string qs;
      for (const auto& v : chk.query.x) qs += v + " ";
      qs += "; ";
      for (const auto& v : chk.query.y) qs += v + " ";
      qs += "| ";
      for (const auto& v : chk.query.z) qs += v + " ";
      out["checks"].push_back({{"query", qs}, {"separated", chk.separated}});
      csv << '"' << qs << "\"," << chk.separated << "\n";
    }
    pass = rep.all_passed;
    std::cout << (with_tangent ? "verify_dts: " : "verify_sp2: ")
              << rep.checks.size() << " checks, "
              << (pass ? "all d-separated" : "FAILED") << "\n";
  }
  out["pass"] = pass;
  write_file(c.out + ".json", out.dump(2) + "\n");
  write_file(c.out + ".csv", csv.str());
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".json", c.out + ".csv"}, secs);
  return pass ? 0 : 2;
}

int cmd_gen(const Common& c, const std::vector<std::string>& args,
            const std::string& family, int n, double rho, bool no_modulate,
            int trials, bool tangent, int mat_rows, int mat_cols) {
  auto t0 = std::chrono::steady_clock::now();
  std::ostringstream csv;
  if (mat_rows > 0) {
    pr::DependentMatrixConfig g;
    g.rows = mat_rows;
    g.cols = mat_cols;
    g.rho = rho;
    g.modulate = !no_modulate;
    auto M = pr::sample_dependent_matrix(g, c.seed);
    csv << std::hexfloat;
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j)
        csv << M(i, j) << (j + 1 == M.cols() ? '\n' : ',');
    std::cout << "wrote " << mat_rows << "x" << mat_cols << " matrix\n";
  } else {
    auto cfg = make_config(family, n, rho, no_modulate);
    csv << "trial,index,latent,xi" << (tangent ? ",tangent" : "") << "\n";
    csv << std::hexfloat;
    for (int t = 0; t < trials; ++t) {
      auto p = tangent ? pr::sample_with_tangent(cfg, substream(c.seed, t))
                       : pr::sample_path(cfg, substream(c.seed, t));
      for (int i = 1; i <= cfg.n; ++i) {
        csv << t << ',' << i << ',' << p.latent_at(i) << ',' << p.xi(i - 1);
        if (tangent) csv << ',' << (*p.tangent)(i - 1);
        csv << "\n";
      }
    }
    std::cout << "wrote " << trials << " paths of length " << n << "\n";
  }
  write_file(c.out + ".csv", csv.str());
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".csv"}, secs);
  return 0;
}

int cmd_width(const Common& c, const std::vector<std::string>& args,
              const std::string& set, int n, int p, int s, int trials,
              double gamma2_C) {
  auto t0 = std::chrono::steady_clock::now();
  auto rep = cx::complexity_report(parse_set(set, n, p, s), trials, c.seed, gamma2_C);
  json out;
  out["set"] = set;
  out["d_F"] = rep.d_F;
  out["d_op"] = rep.d_op;
  out["width"] = rep.width.value;
  out["width_se"] = rep.width.standard_error;
  out["gamma2_upper"] = rep.gamma2_upper;
  out["gamma2_constant"] = rep.gamma2_constant;
  out["trials"] = rep.width.trials;
  write_file(c.out + ".json", out.dump(2) + "\n");
  std::ostringstream csv;
  csv << "stat,value\nd_F," << rep.d_F << "\nd_op," << rep.d_op << "\nwidth,"
      << rep.width.value << "\nwidth_se," << rep.width.standard_error
      << "\ngamma2_upper," << rep.gamma2_upper << "\n";
  write_file(c.out + ".csv", csv.str());
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".json", c.out + ".csv"}, secs);
  std::cout << set << ": d_F=" << rep.d_F << " d_op=" << rep.d_op
            << " width=" << rep.width.value << " +/- " << rep.width.standard_error
            << " gamma2<=" << rep.gamma2_upper << "\n";
  return 0;
}

int cmd_bound(const Common& c, const std::vector<std::string>& args,
              const std::string& set, int n, int p, int s, int trials,
              const std::string& grid_spec, double c1, double c2, bool iid_ref) {
  auto t0 = std::chrono::steady_clock::now();
  auto grid = parse_grid(grid_spec);
  auto rep = cx::complexity_report(parse_set(set, n, p, s), trials, c.seed);
  auto bound = cx::deviation_bound(rep.d_F, rep.d_op, rep.gamma2_upper, c1, c2,
                                   iid_ref ? cx::BoundVariant::IidReference
                                           : cx::BoundVariant::Dependent);
  json out;
  out["M"] = bound.M;
  out["V"] = bound.V;
  out["U"] = bound.U;
  out["threshold"] = c1 * bound.M;
  out["table"] = json::array();
  std::ostringstream csv;
  csv << "eps,tail_raw,tail\n";
  std::cout << "M=" << bound.M << " V=" << bound.V << " U=" << bound.U << "\n";
  std::cout << "eps\ttail\n";
  for (double e : grid) {
    auto tl = cx::tail_probability(bound, e);
    out["table"].push_back({{"eps", e}, {"raw", tl.raw}, {"tail", tl.clamped}});
    csv << e << ',' << tl.raw << ',' << tl.clamped << "\n";
    std::cout << e << '\t' << tl.clamped << "\n";
  }
  write_file(c.out + ".json", out.dump(2) + "\n");
  write_file(c.out + ".csv", csv.str());
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".json", c.out + ".csv"}, secs);
  return 0;
}

int cmd_jl(const Common& c, const std::vector<std::string>& args, int n, int p,
           int npoints, double eps, int trials, double rho, bool no_modulate) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<Eigen::VectorXd> pts;
  auto eng = make_engine(c.seed, 0xA0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < npoints; ++i) {
    Eigen::VectorXd u(p);
    for (int j = 0; j < p; ++j) u(j) = gauss(eng);
    pts.push_back(u.normalized());
  }
  pr::DependentMatrixConfig gen;
  gen.rho = rho;
  gen.modulate = !no_modulate;
  vf::RunOptions opt;
  opt.workers = c.workers;
  auto ds = vf::jl_distortion(pts, n, gen, eps, trials, c.seed, opt);
  json out;
  out["n"] = ds.n;
  out["N"] = ds.N;
  out["eps"] = eps;
  out["trials"] = ds.trials;
  out["failure_rate"] = ds.failure_rate;
  out["max_distortion"] = ds.max_distortion;
  std::ostringstream csv;
  csv << "stat,value\nfailure_rate," << ds.failure_rate << "\nmax_distortion,"
      << ds.max_distortion << "\n";
  for (const auto& [q, v] : ds.quantiles) {
    out["q" + std::to_string(q)] = v;
    csv << 'q' << q << ',' << v << "\n";
  }
  write_file(c.out + ".json", out.dump(2) + "\n");
  write_file(c.out + ".csv", csv.str());
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".json", c.out + ".csv"}, secs);
  std::cout << "jl: n=" << n << " N=" << npoints
            << " failure_rate=" << ds.failure_rate
            << " max_distortion=" << ds.max_distortion << "\n";
  return 0;
}

int cmd_rip(const Common& c, const std::vector<std::string>& args, int p, int s,
            int n, bool exact, int mc_trials, const std::string& gen,
            double rho) {
  auto t0 = std::chrono::steady_clock::now();
  Eigen::MatrixXd X(n, p);
  if (gen == "iid") {
    auto eng = make_engine(c.seed, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) X(i, j) = gauss(eng);
  } else if (gen == "gm") {
    pr::DependentMatrixConfig g;
    g.rows = n;
    g.cols = p;
    g.rho = rho;
    X = pr::sample_dependent_matrix(g, c.seed) /
        std::sqrt(pr::entry_second_moment(g));
  } else {
    throw CLI::ValidationError("--gen", "expected iid or gm");
  }
  auto est = vf::rip_constant(X, s, exact ? vf::RipMode::Exact : vf::RipMode::Mc,
                              mc_trials, substream(c.seed, 1));
  json out;
  out["delta_s"] = est.delta_s;
  out["mode"] = exact ? "exact" : "mc";
  out["s"] = est.s;
  out["p"] = est.p;
  out["n"] = est.n;
  out["supports_examined"] = est.supports_examined;
  write_file(c.out + ".json", out.dump(2) + "\n");
  std::ostringstream csv;
  csv << "stat,value\ndelta_s," << est.delta_s << "\nsupports,"
      << est.supports_examined << "\n";
  write_file(c.out + ".csv", csv.str());
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".json", c.out + ".csv"}, secs);
  std::cout << "rip: delta_" << s << " = " << est.delta_s << " ("
            << (exact ? "exact, " : "mc, ") << est.supports_examined
            << " supports)\n";
  return 0;
}

int cmd_toeplitz(const Common& c, const std::vector<std::string>& args, int p,
                 const std::string& rows_spec, int checks) {
  auto t0 = std::chrono::steady_clock::now();
  pr::ProcessConfig cfg;
  cfg.family = gr::GmFamily::GM1;
  cfg.n = 2 * p - 1;
  Eigen::VectorXd xi = pr::sample_path(cfg, c.seed).xi;
  std::vector<int> rows;
  if (rows_spec.empty()) {
    for (int r = 1; r <= p; ++r) rows.push_back(r);
  } else {
    std::istringstream ss(rows_spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) rows.push_back(std::stoi(tok));
  }
  auto op = tf::build_toeplitz(xi, rows);
  // Cross-check the FFT apply path against the dense materialization.
  auto eng = make_engine(c.seed, 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd dense = op.dense();
  double max_err = 0.0;
  for (int t = 0; t < checks; ++t) {
    Eigen::VectorXd u(p);
    for (int i = 0; i < p; ++i) u(i) = gauss(eng);
    max_err = std::max(max_err,
                       (op.apply(u) - dense * u).cwiseAbs().maxCoeff());
  }
  std::ostringstream opfile;
  op.save(opfile);
  write_file(c.out + ".op.txt", opfile.str());
  json out;
  out["p"] = p;
  out["rows"] = rows;
  out["fft_vs_dense_max_err"] = max_err;
  out["pass"] = max_err < 1e-10;
  write_file(c.out + ".json", out.dump(2) + "\n");
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".op.txt", c.out + ".json"}, secs);
  std::cout << "toeplitz: " << rows.size() << "x" << p
            << " fft-vs-dense max err " << max_err << "\n";
  return max_err < 1e-10 ? 0 : 2;
}

int cmd_countsketch(const Common& c, const std::vector<std::string>& args, int n,
                    int p, int d, const std::string& pattern) {
  auto t0 = std::chrono::steady_clock::now();
  tf::CountSketchPattern pat;
  if (pattern == "uniform")
    pat = tf::CountSketchPattern::Uniform;
  else if (pattern == "adaptive")
    pat = tf::CountSketchPattern::Adaptive;
  else
    throw CLI::ValidationError("--pattern", "expected uniform or adaptive");
  auto op = tf::build_countsketch(n, p, d, pat, c.seed);
  const auto& cs = std::get<tf::CountSketchOp>(op.payload());
  std::vector<int> occupancy(n, 0);
  for (const auto& col : cs.idx)
    for (int r : col) ++occupancy[r];
  std::ostringstream opfile;
  op.save(opfile);
  write_file(c.out + ".op.txt", opfile.str());
  json out;
  out["n"] = n;
  out["p"] = p;
  out["d"] = d;
  out["pattern"] = pattern;
  out["row_occupancy"] = occupancy;
  out["max_row_occupancy"] = *std::max_element(occupancy.begin(), occupancy.end());
  write_file(c.out + ".json", out.dump(2) + "\n");
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(c.out, args, {c.out + ".op.txt", c.out + ".json"}, secs);
  std::cout << "countsketch: " << n << "x" << p << ", d=" << d
            << ", max row occupancy " << out["max_row_occupancy"] << "\n";
  return 0;
}

int cmd_bandit(const Common& c, const std::vector<std::string>& args, int k,
               int p, double sigma, int rounds, double eps, int runs,
               const std::string& adversary) {
  auto t0 = std::chrono::steady_clock::now();
  vf::BanditOptions bo;
  bo.k = k;
  bo.p = p;
  bo.sigma = sigma;
  bo.rounds = rounds;
  bo.eps = eps;
  bo.runs = runs;
  if (adversary == "zero")
    bo.adversary = vf::zero_adversary();
  else if (adversary == "repeater")
    bo.adversary = vf::repeater_adversary();
  else
    throw CLI::ValidationError("--adversary", "expected zero or repeater");
  vf::RunOptions opt;
  opt.workers = c.workers;
  return finish_report(vf::bandit_min_eig_experiment(bo, c.seed, opt), c, args, t0);
}

// verify subcommand family: each builds its fixture from the seed.

int cmd_verify_decoupling(const Common& c, const std::vector<std::string>& args,
                          const pr::ProcessConfig& cfg, int nb, int p_norm,
                          int trials) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<Eigen::MatrixXd> Bset;
  for (int b = 0; b < nb; ++b)
    Bset.push_back(random_symmetric(cfg.n, substream(c.seed, 0xB0 + b)));
  vf::RunOptions opt;
  opt.workers = c.workers;
  return finish_report(
      vf::check_decoupling(cfg, Bset, p_norm, trials, c.seed, opt), c, args, t0);
}

int cmd_verify_symmetrization(const Common& c, const std::vector<std::string>& args,
                              const pr::ProcessConfig& cfg, int p_norm, int trials) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<vf::NamedFunction> fns{
      {"x", [](double x) { return x; }},
      {"x^2", [](double x) { return x * x; }},
      {"tanh", [](double x) { return std::tanh(x); }},
  };
  Eigen::VectorXd w =
      Eigen::VectorXd::Constant(cfg.n, 1.0 / std::sqrt(double(cfg.n)));
  vf::RunOptions opt;
  opt.workers = c.workers;
  return finish_report(
      vf::check_symmetrization(cfg, w, fns, p_norm, trials, c.seed, opt), c,
      args, t0);
}

int cmd_verify_tangent(const Common& c, const std::vector<std::string>& args,
                       const pr::ProcessConfig& cfg, int trials) {
  auto t0 = std::chrono::steady_clock::now();
  if (cfg.n < 2) throw CLI::ValidationError("--n", "need n >= 2");
  // I = first half; xi factors from I, tangent factors from I^c.
  auto eng = make_engine(c.seed, 0xC0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(cfg.n, cfg.n);
  for (int i = 0; i < cfg.n / 2; ++i)
    for (int j = cfg.n / 2; j < cfg.n; ++j) mask(i, j) = gauss(eng);
  vf::RunOptions opt;
  opt.workers = c.workers;
  return finish_report(vf::check_tangent_equivalence(cfg, mask, trials, c.seed, opt),
                       c, args, t0);
}

int cmd_verify_offdiag(const Common& c, const std::vector<std::string>& args,
                       const pr::ProcessConfig& cfg, int trials, bool uncentered) {
  auto t0 = std::chrono::steady_clock::now();
  vf::RunOptions opt;
  opt.workers = c.workers;
  return finish_report(
      vf::check_offdiag_zero(cfg, trials, c.seed, opt, uncentered), c, args, t0);
}

int cmd_verify_cbd(const Common& c, const std::vector<std::string>& args,
                   const pr::ProcessConfig& cfg, const std::string& set, int nmats,
                   int trials) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<Eigen::MatrixXd> mats;
  if (set == "identity") {
    mats.push_back(Eigen::MatrixXd::Identity(cfg.n, cfg.n));
  } else if (set == "finite-random") {
    for (int k = 0; k < nmats; ++k)
      mats.push_back(random_symmetric(cfg.n, substream(c.seed, 0xD0 + k)) +
                     Eigen::MatrixXd::Identity(cfg.n, cfg.n));
  } else {
    throw CLI::ValidationError("--set", "expected identity or finite-random");
  }
  vf::RunOptions opt;
  opt.workers = c.workers;
  return finish_report(vf::estimate_cbd(mats, cfg, trials, c.seed, opt), c, args, t0);
}

int cmd_replay(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw CLI::ValidationError("manifest", "cannot open " + manifest_path);
  json m = json::parse(f);
  std::vector<std::string> args = m.at("args").get<std::vector<std::string>>();
  if (!args.empty() && args[0] == "replay")
    throw CLI::ValidationError("manifest", "refusing to replay a replay");
  std::cout << "replaying:";
  for (const auto& a : args) std::cout << ' ' << a;
  std::cout << "\n";
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"dependent-entry sketching toolbox"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // Shared process flags, reused by several subcommands.
  struct ProcFlags {
    std::string family = "gm1";
    int n = 6;
    double rho = 0.8;
    bool no_modulate = false;
    void add(CLI::App* sub) {
      sub->add_option("--family", family, "gm1|gm2|gm3")->capture_default_str();
      sub->add_option("--n", n, "process length")->capture_default_str();
      sub->add_option("--rho", rho, "latent AR(1) coefficient")->capture_default_str();
      sub->add_flag("--no-modulate", no_modulate, "constant conditional variance");
    }
    pr::ProcessConfig config() const {
      return make_config(family, n, rho, no_modulate);
    }
  };

  // dsep
  auto* dsep = app.add_subcommand("dsep", "d-separation queries and SP-2/DTS checks");
  Common c_dsep;
  add_common(dsep, c_dsep, "dsep");
  std::string dsep_tmpl = "gm1", dsep_varrho, dsep_dag, dsep_query;
  int dsep_n = 5;
  bool dsep_tangent = false;
  dsep->add_option("--template", dsep_tmpl, "gm1|gm2|gm3")->capture_default_str();
  dsep->add_option("--n", dsep_n, "template length")->capture_default_str();
  dsep->add_option("--varrho", dsep_varrho, "shift1|ident (default per family)");
  dsep->add_option("--dag", dsep_dag, "DAG file instead of a template");
  dsep->add_option("--query", dsep_query, "single query \"X ; Y | Z\"");
  dsep->add_flag("--tangent", dsep_tangent, "include tangent copies, check DTS");

  // gen
  auto* gen = app.add_subcommand("gen", "sample paths or matrices to CSV");
  Common c_gen;
  add_common(gen, c_gen, "gen");
  ProcFlags gen_proc;
  gen_proc.add(gen);
  int gen_trials = 1, gen_mat_rows = 0, gen_mat_cols = 0;
  bool gen_tangent = false;
  gen->add_option("--trials", gen_trials, "number of paths")->capture_default_str();
  gen->add_flag("--tangent", gen_tangent, "include tangent draws");
  gen->add_option("--matrix-rows", gen_mat_rows, "emit a dependent matrix instead");
  gen->add_option("--matrix-cols", gen_mat_cols, "columns for --matrix-rows");

  // width
  auto* width = app.add_subcommand("width", "complexity report for a matrix set");
  Common c_width;
  add_common(width, c_width, "width");
  std::string width_set = "vtheta-sphere";
  int width_n = 64, width_p = 16, width_s = 2, width_trials = 5000;
  double width_g2c = 1.0;
  width->add_option("--set", width_set, "vtheta-sphere|vtheta-sparse|toeplitz-band")
      ->capture_default_str();
  width->add_option("--n", width_n)->capture_default_str();
  width->add_option("--p", width_p)->capture_default_str();
  width->add_option("--s", width_s)->capture_default_str();
  width->add_option("--trials", width_trials)->capture_default_str();
  width->add_option("--gamma2-c", width_g2c, "gamma2 surrogate constant")
      ->capture_default_str();

  // bound
  auto* bound = app.add_subcommand("bound", "M/V/U and a tail table over an eps grid");
  Common c_bound;
  add_common(bound, c_bound, "bound");
  std::string bound_set = "vtheta-sphere", bound_grid = "0.1:1.0:10";
  int bound_n = 64, bound_p = 16, bound_s = 2, bound_trials = 5000;
  double bound_c1 = 1.0, bound_c2 = 1.0;
  bool bound_iid = false;
  bound->add_option("--set", bound_set)->capture_default_str();
  bound->add_option("--n", bound_n)->capture_default_str();
  bound->add_option("--p", bound_p)->capture_default_str();
  bound->add_option("--s", bound_s)->capture_default_str();
  bound->add_option("--trials", bound_trials)->capture_default_str();
  bound->add_option("--eps-grid", bound_grid, "start:stop:count")->capture_default_str();
  bound->add_option("--c1", bound_c1)->capture_default_str();
  bound->add_option("--c2", bound_c2)->capture_default_str();
  bound->add_flag("--iid-ref", bound_iid, "use the i.i.d. reference variant");

  // jl
  auto* jl = app.add_subcommand("jl", "JL distortion of dependent-entry sketches");
  Common c_jl;
  add_common(jl, c_jl, "jl");
  int jl_n = 64, jl_p = 256, jl_npoints = 32, jl_trials = 200;
  double jl_eps = 0.5, jl_rho = 0.8;
  bool jl_nomod = false;
  jl->add_option("--n", jl_n, "sketch rows")->capture_default_str();
  jl->add_option("--p", jl_p, "ambient dimension")->capture_default_str();
  jl->add_option("--npoints", jl_npoints)->capture_default_str();
  jl->add_option("--eps", jl_eps)->capture_default_str();
  jl->add_option("--trials", jl_trials)->capture_default_str();
  jl->add_option("--rho", jl_rho)->capture_default_str();
  jl->add_flag("--no-modulate", jl_nomod);

  // rip
  auto* rip = app.add_subcommand("rip", "restricted isometry constant");
  Common c_rip;
  add_common(rip, c_rip, "rip");
  int rip_p = 12, rip_s = 2, rip_n = 1024, rip_mc = 10000;
  bool rip_exact = false;
  std::string rip_gen = "iid";
  double rip_rho = 0.8;
  rip->add_option("--p", rip_p)->capture_default_str();
  rip->add_option("--s", rip_s)->capture_default_str();
  rip->add_option("--n", rip_n)->capture_default_str();
  rip->add_flag("--exact", rip_exact, "enumerate all supports (C(p,s) <= 1e5)");
  rip->add_option("--mc-trials", rip_mc)->capture_default_str();
  rip->add_option("--gen", rip_gen, "iid|gm")->capture_default_str();
  rip->add_option("--rho", rip_rho)->capture_default_str();

  // toeplitz
  auto* toep = app.add_subcommand("toeplitz", "partial Toeplitz sketch, FFT cross-check");
  Common c_toep;
  add_common(toep, c_toep, "toeplitz");
  int toep_p = 32, toep_checks = 20;
  std::string toep_rows;
  toep->add_option("--p", toep_p)->capture_default_str();
  toep->add_option("--rows", toep_rows, "comma-separated 1-based rows (default all)");
  toep->add_option("--checks", toep_checks)->capture_default_str();

  // countsketch
  auto* csk = app.add_subcommand("countsketch", "sparse embedding builder");
  Common c_csk;
  add_common(csk, c_csk, "countsketch");
  int cs_n = 64, cs_p = 32, cs_d = 4;
  std::string cs_pattern = "uniform";
  csk->add_option("--n", cs_n)->capture_default_str();
  csk->add_option("--p", cs_p)->capture_default_str();
  csk->add_option("--d", cs_d, "nonzeros per column")->capture_default_str();
  csk->add_option("--pattern", cs_pattern, "uniform|adaptive")->capture_default_str();

  // bandit
  auto* bandit = app.add_subcommand("bandit", "greedy-LS min-eigenvalue experiment");
  Common c_bandit;
  add_common(bandit, c_bandit, "bandit");
  int bd_k = 4, bd_p = 8, bd_rounds = 0, bd_runs = 50;
  double bd_sigma = 0.5, bd_eps = 0.5;
  std::string bd_adv = "zero";
  bandit->add_option("--k", bd_k)->capture_default_str();
  bandit->add_option("--p", bd_p)->capture_default_str();
  bandit->add_option("--sigma", bd_sigma)->capture_default_str();
  bandit->add_option("--rounds", bd_rounds, "0 = 1.2x the sample-size threshold")
      ->capture_default_str();
  bandit->add_option("--eps", bd_eps)->capture_default_str();
  bandit->add_option("--runs", bd_runs)->capture_default_str();
  bandit->add_option("--adversary", bd_adv, "zero|repeater")->capture_default_str();

  // verify
  auto* verify = app.add_subcommand("verify", "Monte-Carlo verification harness");
  verify->require_subcommand(1);
  struct VerifySub {
    CLI::App* sub = nullptr;
    Common common;
    ProcFlags proc;
    int trials = 20000;
  };
  auto add_verify = [&](const std::string& name, const std::string& desc) {
    VerifySub vs;
    vs.sub = verify->add_subcommand(name, desc);
    add_common(vs.sub, vs.common, "verify-" + name);
    vs.proc.add(vs.sub);
    vs.sub->add_option("--trials", vs.trials)->capture_default_str();
    return vs;
  };
  auto vd = add_verify("decoupling", "decoupling inequality (factor 4)");
  int vd_nb = 3, vd_pnorm = 1;
  vd.sub->add_option("--nb", vd_nb, "matrices in the B set")->capture_default_str();
  vd.sub->add_option("--p-norm", vd_pnorm, "1|2")->capture_default_str();
  auto vs = add_verify("symmetrization", "symmetrization / de-symmetrization");
  int vs_pnorm = 1;
  vs.sub->add_option("--p-norm", vs_pnorm, "1|2")->capture_default_str();
  auto vt = add_verify("tangent", "tangent distributional equivalence (KS)");
  auto vo = add_verify("offdiag", "vanishing off-diagonal products");
  bool vo_uncentered = false;
  vo.sub->add_flag("--uncentered", vo_uncentered, "power control: shift the process");
  auto vc = add_verify("cbd", "C/B/D split and pointwise C <= B + D");
  std::string vc_set = "finite-random";
  int vc_nmats = 3;
  vc.sub->add_option("--set", vc_set, "identity|finite-random")->capture_default_str();
  vc.sub->add_option("--nmats", vc_nmats)->capture_default_str();

  // replay
  auto* replay = app.add_subcommand("replay", "re-run a manifest");
  std::string replay_path;
  replay->add_option("manifest", replay_path, "manifest JSON path")->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);  // CLI11 expects a reversed vector
  } catch (const CLI::ParseError& e) {
    // Prints help or the error; anything but help maps to usage-error 1.
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (dsep->parsed())
    return cmd_dsep(c_dsep, args, dsep_tmpl, dsep_n, dsep_varrho, dsep_dag,
                    dsep_query, dsep_tangent);
  if (gen->parsed())
    return cmd_gen(c_gen, args, gen_proc.family, gen_proc.n, gen_proc.rho,
                   gen_proc.no_modulate, gen_trials, gen_tangent, gen_mat_rows,
                   gen_mat_cols);
  if (width->parsed())
    return cmd_width(c_width, args, width_set, width_n, width_p, width_s,
                     width_trials, width_g2c);
  if (bound->parsed())
    return cmd_bound(c_bound, args, bound_set, bound_n, bound_p, bound_s,
                     bound_trials, bound_grid, bound_c1, bound_c2, bound_iid);
  if (jl->parsed())
    return cmd_jl(c_jl, args, jl_n, jl_p, jl_npoints, jl_eps, jl_trials, jl_rho,
                  jl_nomod);
  if (rip->parsed())
    return cmd_rip(c_rip, args, rip_p, rip_s, rip_n, rip_exact, rip_mc, rip_gen,
                   rip_rho);
  if (toep->parsed())
    return cmd_toeplitz(c_toep, args, toep_p, toep_rows, toep_checks);
  if (csk->parsed())
    return cmd_countsketch(c_csk, args, cs_n, cs_p, cs_d, cs_pattern);
  if (bandit->parsed())
    return cmd_bandit(c_bandit, args, bd_k, bd_p, bd_sigma, bd_rounds, bd_eps,
                      bd_runs, bd_adv);
  if (verify->parsed()) {
    if (vd.sub->parsed())
      return cmd_verify_decoupling(vd.common, args, vd.proc.config(), vd_nb,
                                   vd_pnorm, vd.trials);
    if (vs.sub->parsed())
      return cmd_verify_symmetrization(vs.common, args, vs.proc.config(),
                                       vs_pnorm, vs.trials);
    if (vt.sub->parsed())
      return cmd_verify_tangent(vt.common, args, vt.proc.config(), vt.trials);
    if (vo.sub->parsed())
      return cmd_verify_offdiag(vo.common, args, vo.proc.config(), vo.trials,
                                vo_uncentered);
    if (vc.sub->parsed())
      return cmd_verify_cbd(vc.common, args, vc.proc.config(), vc_set, vc_nmats,
                            vc.trials);
  }
  if (replay->parsed()) return cmd_replay(replay_path);
  throw CLI::ValidationError("subcommand", "nothing to do");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
