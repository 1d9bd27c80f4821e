#include "stlsplit/formula.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

namespace stlsplit {

Interval Interval::from_seconds(double lo_s, double hi_s, double dt) {
  auto convert = [dt](double sec) {
    double steps = sec / dt;
    double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9) {
      throw std::invalid_argument("interval bound " + std::to_string(sec) +
                                  "s is not a multiple of dt=" + std::to_string(dt));
    }
    return static_cast<int>(rounded);
  };
  if (std::isinf(hi_s)) return open_ended(convert(lo_s));
  return bounded(convert(lo_s), convert(hi_s));
}

std::string Interval::to_string() const {
  std::ostringstream os;
  os << "[" << lo << ",";
  if (unbounded())
    os << "inf";
  else
    os << hi;
  os << "]";
  return os.str();
}

int Formula::append(FormulaNode n) {
  nodes_.push_back(std::move(n));
  return root();
}

int Formula::absorb(const Formula& f) {
  const int offset = static_cast<int>(nodes_.size());
  for (const FormulaNode& n : f.nodes_) {
    FormulaNode copy = n;
    if (copy.child0 >= 0) copy.child0 += offset;
    if (copy.child1 >= 0) copy.child1 += offset;
    nodes_.push_back(std::move(copy));
  }
  return f.root() + offset;
}

Formula Formula::top() { return Formula(); }

Formula Formula::pred(std::string name) {
  Formula f;
  f.nodes_.clear();
  FormulaNode n;
  n.kind = NodeKind::Pred;
  n.pred = std::move(name);
  f.append(std::move(n));
  return f;
}

Formula Formula::negate(Formula f) {
  FormulaNode n;
  n.kind = NodeKind::Not;
  n.child0 = f.root();
  f.append(std::move(n));
  return f;
}

Formula Formula::always(Interval iv, Formula f) {
  FormulaNode n;
  n.kind = NodeKind::Always;
  n.interval = iv;
  n.child0 = f.root();
  f.append(std::move(n));
  return f;
}

Formula Formula::eventually(Interval iv, Formula f) {
  FormulaNode n;
  n.kind = NodeKind::Eventually;
  n.interval = iv;
  n.child0 = f.root();
  f.append(std::move(n));
  return f;
}

Formula Formula::historically(Interval iv, Formula f) {
  FormulaNode n;
  n.kind = NodeKind::Historically;
  n.interval = iv;
  n.child0 = f.root();
  f.append(std::move(n));
  return f;
}

Formula Formula::once(Interval iv, Formula f) {
  FormulaNode n;
  n.kind = NodeKind::Once;
  n.interval = iv;
  n.child0 = f.root();
  f.append(std::move(n));
  return f;
}

Formula Formula::conj(Formula a, Formula b) {
  const int left = a.root();
  const int right = a.absorb(b);
  FormulaNode n;
  n.kind = NodeKind::And;
  n.child0 = left;
  n.child1 = right;
  a.append(std::move(n));
  return a;
}

Formula Formula::disj(Formula a, Formula b) {
  const int left = a.root();
  const int right = a.absorb(b);
  FormulaNode n;
  n.kind = NodeKind::Or;
  n.child0 = left;
  n.child1 = right;
  a.append(std::move(n));
  return a;
}

Formula Formula::implies(Formula a, Formula b) {
  const int left = a.root();
  const int right = a.absorb(b);
  FormulaNode n;
  n.kind = NodeKind::Implies;
  n.child0 = left;
  n.child1 = right;
  a.append(std::move(n));
  return a;
}

Formula Formula::until(Interval iv, Formula a, Formula b) {
  const int left = a.root();
  const int right = a.absorb(b);
  FormulaNode n;
  n.kind = NodeKind::Until;
  n.interval = iv;
  n.child0 = left;
  n.child1 = right;
  a.append(std::move(n));
  return a;
}

Formula Formula::conj_all(std::vector<Formula> fs) {
  if (fs.empty()) throw std::invalid_argument("conj_all needs at least one formula");
  Formula acc = std::move(fs.front());
  for (size_t i = 1; i < fs.size(); ++i) acc = conj(std::move(acc), std::move(fs[i]));
  return acc;
}

std::vector<int> Formula::subformula_ids() const {
  std::vector<int> ids(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) ids[i] = static_cast<int>(i);
  return ids;
}

int Formula::horizon_of(int id) const {
  const FormulaNode& n = nodes_[static_cast<size_t>(id)];
  switch (n.kind) {
    case NodeKind::True:
    case NodeKind::Pred:
      return 0;
    case NodeKind::Not:
      return horizon_of(n.child0);
    case NodeKind::And:
    case NodeKind::Or:
    case NodeKind::Implies:
      return horizon_max(horizon_of(n.child0), horizon_of(n.child1));
    case NodeKind::Always:
    case NodeKind::Eventually:
      return horizon_add(n.interval.hi, horizon_of(n.child0));
    case NodeKind::Until:
      return horizon_add(n.interval.hi,
                         horizon_max(horizon_of(n.child0), horizon_of(n.child1)));
    case NodeKind::Historically:
    case NodeKind::Once:
      // Past operators look backward; they add no future lookahead.
      return horizon_of(n.child0);
  }
  return 0;
}

std::vector<std::string> Formula::predicate_names() const {
  std::vector<std::string> names;
  for (const FormulaNode& n : nodes_) {
    if (n.kind == NodeKind::Pred &&
        std::find(names.begin(), names.end(), n.pred) == names.end()) {
      names.push_back(n.pred);
    }
  }
  return names;
}

bool Formula::structurally_equal(const Formula& other) const {
  // Post-order arenas built by the same constructors are index-aligned for
  // structurally equal trees.
  if (nodes_.size() != other.nodes_.size()) return false;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const FormulaNode& a = nodes_[i];
    const FormulaNode& b = other.nodes_[i];
    if (a.kind != b.kind || a.child0 != b.child0 || a.child1 != b.child1 ||
        a.pred != b.pred)
      return false;
    if (a.temporal() && !(a.interval == b.interval)) return false;
  }
  return true;
}

namespace {
// Precedence levels for printing: higher binds tighter.
int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::Implies:
      return 1;
    case NodeKind::Or:
      return 2;
    case NodeKind::And:
      return 3;
    case NodeKind::Until:
      return 4;
    default:
      return 5;
  }
}
}  // namespace

std::string Formula::print_node(int id, int parent_prec) const {
  const FormulaNode& n = nodes_[static_cast<size_t>(id)];
  const int prec = precedence(n.kind);
  std::string out;
  switch (n.kind) {
    case NodeKind::True:
      out = "true";
      break;
    case NodeKind::Pred:
      out = n.pred;
      break;
    case NodeKind::Not:
      out = "not " + print_node(n.child0, prec);
      break;
    case NodeKind::And:
      out = print_node(n.child0, prec) + " and " + print_node(n.child1, prec + 1);
      break;
    case NodeKind::Or:
      out = print_node(n.child0, prec) + " or " + print_node(n.child1, prec + 1);
      break;
    case NodeKind::Implies:
      // Right-associative.
      out = print_node(n.child0, prec + 1) + " -> " + print_node(n.child1, prec);
      break;
    case NodeKind::Always:
      out = "G" + n.interval.to_string() + " " + print_node(n.child0, prec);
      break;
    case NodeKind::Eventually:
      out = "F" + n.interval.to_string() + " " + print_node(n.child0, prec);
      break;
    case NodeKind::Historically:
      out = "H" + n.interval.to_string() + " " + print_node(n.child0, prec);
      break;
    case NodeKind::Once:
      out = "O" + n.interval.to_string() + " " + print_node(n.child0, prec);
      break;
    case NodeKind::Until:
      out = print_node(n.child0, prec + 1) + " U" + n.interval.to_string() + " " +
            print_node(n.child1, prec + 1);
      break;
  }
  if (prec < parent_prec) return "(" + out + ")";
  return out;
}

std::string Formula::to_string() const { return print_node(root(), 0); }

}  // namespace stlsplit
