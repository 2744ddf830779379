#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace depsketch::graph {

enum class NodeKind { Prior, Latent, Obs, Tangent };

enum class GmFamily { GM1, GM2, GM3 };

GmFamily parse_family(const std::string& name);
std::string family_name(GmFamily f);

// Directed acyclic graph over named nodes. Node names follow the fixed
// scheme "F0","F1",... for latents, "xi1",... for observations and
// "xip1",... for tangent copies.
class Dag {
 public:
  int add_node(const std::string& name, NodeKind kind);
  void add_edge(const std::string& parent, const std::string& child);

  bool has_node(const std::string& name) const;
  int index(const std::string& name) const;  // throws on unknown name
  int size() const { return static_cast<int>(names_.size()); }

  const std::string& name(int i) const { return names_[i]; }
  NodeKind kind(int i) const { return kinds_[i]; }
  const std::vector<int>& parents(int i) const { return parents_[i]; }
  const std::vector<int>& children(int i) const { return children_[i]; }

  // Throws if the edge relation has a cycle.
  void check_acyclic() const;

  std::vector<std::pair<std::string, std::string>> edges() const;

 private:
  std::vector<std::string> names_;
  std::vector<NodeKind> kinds_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
  std::unordered_map<std::string, int> by_name_;
};

struct CiQuery {
  std::vector<std::string> x;
  std::vector<std::string> y;
  std::vector<std::string> z;
};

// Exact d-separation via reachability with collider bookkeeping.
// Returns true iff every undirected path between x and y is blocked by z.
bool d_separated(const Dag& dag, const CiQuery& q);

// Builds the full-history DAG of the named family:
//   GM1: F0 -> F1 -> ... -> Fn, parents(xi_i) = {F0..F_{i-1}}
//   GM2: F1 -> ... -> Fn,       parents(xi_i) = {F1..F_i}
//   GM3: as GM1 plus the adaptive edge xi_i -> F_i
// with_tangent adds xip_i with the same parent set as xi_i.
Dag build_gm_template(GmFamily family, int n, bool with_tangent);

struct CiCheck {
  CiQuery query;
  bool separated = false;  // verdict of the d-separation oracle
};

struct Sp2Report {
  std::vector<CiCheck> checks;
  bool all_passed = true;
};

// Checks, for every i, xi_i _||_ xi_j | F_{1:varrho(i)} (j < i) and
// xi_i _||_ F_k | F_{1:varrho(i)} (k > varrho(i)). The prior F0, when the
// graph has one, is always part of the conditioning set.
Sp2Report verify_sp2(const Dag& dag, const std::function<int(int)>& varrho);

// Additionally checks (DTS-1): xi_i _||_ xip_i | F_{1:i} for every i.
Sp2Report verify_dts(const Dag& dag);

// Text format: one line per edge "parent -> child", '#' starts a comment.
// Isolated nodes may be declared as "node NAME". Kinds are inferred from
// the naming scheme (F*, xi*, xip*).
Dag parse_dag(std::istream& in);
void write_dag(std::ostream& out, const Dag& dag);

// Query format: "X ; Y | Z" with comma-separated node lists.
CiQuery parse_ci_query(const std::string& line);

}  // namespace depsketch::graph
