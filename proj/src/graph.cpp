#include "depsketch/graph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace depsketch::graph {

GmFamily parse_family(const std::string& name) {
  if (name == "gm1" || name == "GM1") return GmFamily::GM1;
  if (name == "gm2" || name == "GM2") return GmFamily::GM2;
  if (name == "gm3" || name == "GM3") return GmFamily::GM3;
  throw std::invalid_argument("unknown graphical model family: " + name);
}

std::string family_name(GmFamily f) {
  switch (f) {
    case GmFamily::GM1: return "gm1";
    case GmFamily::GM2: return "gm2";
    case GmFamily::GM3: return "gm3";
  }
  throw std::logic_error("unreachable");
}

int Dag::add_node(const std::string& name, NodeKind kind) {
  if (by_name_.count(name))
    throw std::invalid_argument("duplicate node identifier: " + name);
  int id = static_cast<int>(names_.size());
  names_.push_back(name);
  kinds_.push_back(kind);
  parents_.emplace_back();
  children_.emplace_back();
  by_name_[name] = id;
  return id;
}

void Dag::add_edge(const std::string& parent, const std::string& child) {
  int p = index(parent), c = index(child);
  if (p == c) throw std::invalid_argument("self edge: " + parent);
  children_[p].push_back(c);
  parents_[c].push_back(p);
}

bool Dag::has_node(const std::string& name) const { return by_name_.count(name) > 0; }

int Dag::index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end())
    throw std::invalid_argument("unknown node identifier: " + name);
  return it->second;
}

void Dag::check_acyclic() const {
  std::vector<int> indeg(size());
  for (int v = 0; v < size(); ++v) indeg[v] = static_cast<int>(parents_[v].size());
  std::deque<int> ready;
  for (int v = 0; v < size(); ++v)
    if (indeg[v] == 0) ready.push_back(v);
  int seen = 0;
  while (!ready.empty()) {
    int v = ready.front();
    ready.pop_front();
    ++seen;
    for (int c : children_[v])
      if (--indeg[c] == 0) ready.push_back(c);
  }
  if (seen != size()) throw std::invalid_argument("edge relation has a cycle");
}

std::vector<std::pair<std::string, std::string>> Dag::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (int v = 0; v < size(); ++v)
    for (int c : children_[v]) out.emplace_back(names_[v], names_[c]);
  return out;
}

namespace {

std::vector<int> resolve(const Dag& dag, const std::vector<std::string>& names) {
  std::vector<int> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(dag.index(n));
  return out;
}

void check_disjoint(const std::vector<int>& a, const std::vector<int>& b,
                    const char* what) {
  std::set<int> sa(a.begin(), a.end());
  for (int v : b)
    if (sa.count(v))
      throw std::invalid_argument(std::string("overlapping query sets: ") + what);
}

}  // namespace

bool d_separated(const Dag& dag, const CiQuery& q) {
  auto xs = resolve(dag, q.x);
  auto ys = resolve(dag, q.y);
  auto zs = resolve(dag, q.z);
  check_disjoint(xs, ys, "x/y");
  check_disjoint(xs, zs, "x/z");
  check_disjoint(ys, zs, "y/z");

  std::vector<char> in_z(dag.size(), 0);
  for (int v : zs) in_z[v] = 1;

  // Ancestors of z (inclusive); colliders open only when in this set.
  std::vector<char> anc_z(dag.size(), 0);
  {
    std::deque<int> q2(zs.begin(), zs.end());
    for (int v : zs) anc_z[v] = 1;
    while (!q2.empty()) {
      int v = q2.front();
      q2.pop_front();
      for (int p : dag.parents(v))
        if (!anc_z[p]) {
          anc_z[p] = 1;
          q2.push_back(p);
        }
    }
  }

  std::vector<char> in_y(dag.size(), 0);
  for (int v : ys) in_y[v] = 1;

  // Reachability over (node, direction) states. Direction "up" means the
  // trail entered v from a child; "down" means it entered from a parent.
  enum { kUp = 0, kDown = 1 };
  std::vector<std::array<char, 2>> seen(dag.size(), {0, 0});
  std::deque<std::pair<int, int>> frontier;
  for (int x : xs) {
    frontier.emplace_back(x, kUp);
    seen[x][kUp] = 1;
  }
  auto push = [&](int v, int dir) {
    if (!seen[v][dir]) {
      seen[v][dir] = 1;
      frontier.emplace_back(v, dir);
    }
  };
  while (!frontier.empty()) {
    auto [v, dir] = frontier.front();
    frontier.pop_front();
    if (in_y[v]) return false;  // active trail reaches y
    if (dir == kUp) {
      if (!in_z[v]) {
        for (int p : dag.parents(v)) push(p, kUp);
        for (int c : dag.children(v)) push(c, kDown);
      }
    } else {
      if (!in_z[v])
        for (int c : dag.children(v)) push(c, kDown);
      if (anc_z[v])
        for (int p : dag.parents(v)) push(p, kUp);
    }
  }
  return true;
}

Dag build_gm_template(GmFamily family, int n, bool with_tangent) {
  if (n < 1) throw std::invalid_argument("build_gm_template: n must be >= 1");
  Dag dag;
  bool has_prior = family != GmFamily::GM2;
  int first_latent = has_prior ? 0 : 1;
  for (int i = first_latent; i <= n; ++i)
    dag.add_node("F" + std::to_string(i),
                 (has_prior && i == 0) ? NodeKind::Prior : NodeKind::Latent);
  for (int i = 1; i <= n; ++i) dag.add_node("xi" + std::to_string(i), NodeKind::Obs);
  if (with_tangent)
    for (int i = 1; i <= n; ++i)
      dag.add_node("xip" + std::to_string(i), NodeKind::Tangent);

  auto F = [](int i) { return "F" + std::to_string(i); };
  auto xi = [](int i) { return "xi" + std::to_string(i); };
  auto xip = [](int i) { return "xip" + std::to_string(i); };

  for (int i = first_latent + 1; i <= n; ++i) dag.add_edge(F(i - 1), F(i));

  for (int i = 1; i <= n; ++i) {
    // Full history materialized: one edge per allowed ancestor.
    int hi = (family == GmFamily::GM2) ? i : i - 1;
    for (int j = first_latent; j <= hi; ++j) dag.add_edge(F(j), xi(i));
    if (with_tangent)
      for (int j = first_latent; j <= hi; ++j) dag.add_edge(F(j), xip(i));
    if (family == GmFamily::GM3) dag.add_edge(xi(i), F(i));
  }
  dag.check_acyclic();
  return dag;
}

namespace {

int count_obs(const Dag& dag) {
  int n = 0;
  for (int v = 0; v < dag.size(); ++v)
    if (dag.kind(v) == NodeKind::Obs) ++n;
  return n;
}

std::vector<std::string> latent_prefix(const Dag& dag, int upto) {
  std::vector<std::string> z;
  if (dag.has_node("F0")) z.push_back("F0");
  for (int j = 1; j <= upto; ++j) z.push_back("F" + std::to_string(j));
  return z;
}

}  // namespace

Sp2Report verify_sp2(const Dag& dag, const std::function<int(int)>& varrho) {
  int n = count_obs(dag);
  Sp2Report rep;
  int prev = 0;
  for (int i = 1; i <= n; ++i) {
    int r = varrho(i);
    if (r > i) throw std::invalid_argument("varrho(i) must be <= i");
    if (r < prev) throw std::invalid_argument("varrho must be non-decreasing");
    prev = r;
    auto z = latent_prefix(dag, r);
    for (int j = 1; j < i; ++j) {
      CiQuery q{{"xi" + std::to_string(i)}, {"xi" + std::to_string(j)}, z};
      bool sep = d_separated(dag, q);
      rep.checks.push_back({q, sep});
      rep.all_passed = rep.all_passed && sep;
    }
    for (int k = r + 1; k <= n; ++k) {
      CiQuery q{{"xi" + std::to_string(i)}, {"F" + std::to_string(k)}, z};
      bool sep = d_separated(dag, q);
      rep.checks.push_back({q, sep});
      rep.all_passed = rep.all_passed && sep;
    }
  }
  return rep;
}

Sp2Report verify_dts(const Dag& dag) {
  int n = count_obs(dag);
  Sp2Report rep;
  for (int i = 1; i <= n; ++i) {
    if (!dag.has_node("xip" + std::to_string(i)))
      throw std::invalid_argument("verify_dts: graph has no tangent nodes");
    CiQuery q{{"xi" + std::to_string(i)},
              {"xip" + std::to_string(i)},
              latent_prefix(dag, i)};
    bool sep = d_separated(dag, q);
    rep.checks.push_back({q, sep});
    rep.all_passed = rep.all_passed && sep;
  }
  return rep;
}

namespace {

NodeKind infer_kind(const std::string& name) {
  if (name.rfind("xip", 0) == 0) return NodeKind::Tangent;
  if (name.rfind("xi", 0) == 0) return NodeKind::Obs;
  if (name == "F0") return NodeKind::Prior;
  return NodeKind::Latent;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

Dag parse_dag(std::istream& in) {
  Dag dag;
  auto ensure = [&dag](const std::string& name) {
    if (!dag.has_node(name)) dag.add_node(name, infer_kind(name));
  };
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("node ", 0) == 0) {
      ensure(trim(line.substr(5)));
      continue;
    }
    auto arrow = line.find("->");
    if (arrow == std::string::npos)
      throw std::invalid_argument("bad DAG line (expected 'parent -> child'): " + line);
    std::string p = trim(line.substr(0, arrow));
    std::string c = trim(line.substr(arrow + 2));
    if (p.empty() || c.empty())
      throw std::invalid_argument("bad DAG line: " + line);
    ensure(p);
    ensure(c);
    dag.add_edge(p, c);
  }
  dag.check_acyclic();
  return dag;
}

void write_dag(std::ostream& out, const Dag& dag) {
  std::vector<char> covered(dag.size(), 0);
  for (const auto& [p, c] : dag.edges()) {
    covered[dag.index(p)] = covered[dag.index(c)] = 1;
    out << p << " -> " << c << "\n";
  }
  for (int v = 0; v < dag.size(); ++v)
    if (!covered[v]) out << "node " << dag.name(v) << "\n";
}

CiQuery parse_ci_query(const std::string& line) {
  auto semi = line.find(';');
  if (semi == std::string::npos)
    throw std::invalid_argument("bad CI query (expected 'X ; Y | Z'): " + line);
  auto bar = line.find('|', semi);
  CiQuery q;
  q.x = split_names(line.substr(0, semi));
  if (bar == std::string::npos) {
    q.y = split_names(line.substr(semi + 1));
  } else {
    q.y = split_names(line.substr(semi + 1, bar - semi - 1));
    q.z = split_names(line.substr(bar + 1));
  }
  if (q.x.empty() || q.y.empty())
    throw std::invalid_argument("CI query needs non-empty X and Y: " + line);
  return q;
}

}  // namespace depsketch::graph
