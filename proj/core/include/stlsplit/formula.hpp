#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stlsplit/interval.hpp"

namespace stlsplit {

enum class NodeKind {
  True,
  Pred,
  Not,
  And,
  Or,
  Implies,
  Always,
  Eventually,
  Until,
  Historically,
  Once,
};

struct FormulaNode {
  NodeKind kind = NodeKind::True;
  Interval interval{};       // temporal operators only
  int child0 = -1;           // left / only child
  int child1 = -1;           // right child (And/Or/Implies/Until)
  std::string pred;          // Pred only

  bool temporal() const {
    return kind == NodeKind::Always || kind == NodeKind::Eventually ||
           kind == NodeKind::Until || kind == NodeKind::Historically ||
           kind == NodeKind::Once;
  }
};

/// Immutable STL abstract syntax tree. Nodes live in an arena in strict
/// post-order (children before parents); the node-id is the arena index,
/// so ids are distinct, deterministic, and enumerable by a single scan.
class Formula {
 public:
  Formula() { nodes_.push_back(FormulaNode{NodeKind::True}); }

  static Formula top();
  static Formula pred(std::string name);
  static Formula negate(Formula f);
  static Formula conj(Formula a, Formula b);
  static Formula disj(Formula a, Formula b);
  static Formula implies(Formula a, Formula b);
  static Formula always(Interval iv, Formula f);
  static Formula eventually(Interval iv, Formula f);
  static Formula until(Interval iv, Formula a, Formula b);
  static Formula historically(Interval iv, Formula f);
  static Formula once(Interval iv, Formula f);

  /// Conjunction over a non-empty list.
  static Formula conj_all(std::vector<Formula> fs);

  int root() const { return static_cast<int>(nodes_.size()) - 1; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const FormulaNode& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  /// Post-order (node-id, node) enumeration: simply ids 0..size()-1.
  std::vector<int> subformula_ids() const;

  /// Maximum future lookahead in timesteps needed to evaluate the node
  /// (kUnbounded if any reachable future interval is open-ended).
  int time_horizon() const { return horizon_of(root()); }
  int horizon_of(int id) const;

  /// Names of all predicates appearing in the tree (deduplicated).
  std::vector<std::string> predicate_names() const;

  bool structurally_equal(const Formula& other) const;

  std::string to_string() const;

 private:
  int append(FormulaNode n);
  /// Append another arena, offsetting its child links; returns new root id.
  int absorb(const Formula& f);
  std::string print_node(int id, int parent_prec) const;

  std::vector<FormulaNode> nodes_;
};

}  // namespace stlsplit
