#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "km/error.hpp"

namespace km {

enum class Connective : std::uint8_t { Var, Conj, Disj, Impl, Neg, Box };

/// Immutable formula of the modal language over variables p0, p1, ...
///
/// Nodes are shared between formulas; equality is syntactic identity and is
/// decided structurally (with a pointer and hash shortcut).
class Formula {
 public:
  static Formula var(std::uint32_t index) { return Formula(make(Connective::Var, index, {}, {})); }
  static Formula conj(Formula l, Formula r) { return binary(Connective::Conj, std::move(l), std::move(r)); }
  static Formula disj(Formula l, Formula r) { return binary(Connective::Disj, std::move(l), std::move(r)); }
  static Formula impl(Formula l, Formula r) { return binary(Connective::Impl, std::move(l), std::move(r)); }
  static Formula neg(Formula f) { return Formula(make(Connective::Neg, 0, std::move(f), {})); }
  static Formula box(Formula f) { return Formula(make(Connective::Box, 0, std::move(f), {})); }

  Connective op() const noexcept;
  bool is(Connective c) const noexcept;
  bool is_box() const noexcept { return is(Connective::Box); }

  /// Variable index; only meaningful for Var nodes.
  std::uint32_t index() const noexcept;

  std::size_t arity() const noexcept;
  const Formula& left() const noexcept;
  const Formula& right() const noexcept;
  const Formula& inner() const noexcept;
  const Formula& child(std::size_t i) const noexcept;

  std::size_t hash() const noexcept;
  /// Number of nodes.
  std::size_t size() const noexcept;
  bool has_box() const noexcept;
  std::uint32_t max_var() const noexcept;
  bool same_node(const Formula& o) const noexcept { return node_ == o.node_; }

  friend bool operator==(const Formula& a, const Formula& b) noexcept;

  Formula with_children(Formula l, Formula r) const;

 private:
  struct Node;
  Formula() = default;
  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static Formula binary(Connective c, Formula l, Formula r) {
    return Formula(make(c, 0, std::move(l), std::move(r)));
  }
  static std::shared_ptr<const Node> make(Connective c, std::uint32_t index, Formula l, Formula r);

  std::shared_ptr<const Node> node_;
};

struct Formula::Node {
  Connective op;
  std::uint32_t index;
  Formula kids[2];
  std::size_t hash;
  std::size_t size;
  std::uint32_t max_var;
  bool has_box;
};

inline Connective Formula::op() const noexcept { return node_->op; }
inline bool Formula::is(Connective c) const noexcept { return node_->op == c; }
inline std::uint32_t Formula::index() const noexcept { return node_->index; }
inline std::size_t Formula::arity() const noexcept {
  switch (node_->op) {
    case Connective::Var: return 0;
    case Connective::Neg:
    case Connective::Box: return 1;
    default: return 2;
  }
}
inline const Formula& Formula::left() const noexcept { return node_->kids[0]; }
inline const Formula& Formula::right() const noexcept { return node_->kids[1]; }
inline const Formula& Formula::inner() const noexcept { return node_->kids[0]; }
inline const Formula& Formula::child(std::size_t i) const noexcept { return node_->kids[i]; }
inline std::size_t Formula::hash() const noexcept { return node_->hash; }
inline std::size_t Formula::size() const noexcept { return node_->size; }
inline bool Formula::has_box() const noexcept { return node_->has_box; }
inline std::uint32_t Formula::max_var() const noexcept { return node_->max_var; }

inline bool operator==(const Formula& a, const Formula& b) noexcept {
  if (a.node_ == b.node_) return true;
  const Formula::Node& x = *a.node_;
  const Formula::Node& y = *b.node_;
  if (x.hash != y.hash || x.op != y.op || x.size != y.size || x.index != y.index) return false;
  for (std::size_t i = 0; i < a.arity(); ++i)
    if (!(x.kids[i] == y.kids[i])) return false;
  return true;
}

inline Formula Formula::with_children(Formula l, Formula r) const {
  switch (op()) {
    case Connective::Var: return *this;
    case Connective::Neg: return l.same_node(left()) ? *this : neg(std::move(l));
    case Connective::Box: return l.same_node(left()) ? *this : box(std::move(l));
    default:
      if (l.same_node(left()) && r.same_node(right())) return *this;
      return binary(op(), std::move(l), std::move(r));
  }
}

inline std::shared_ptr<const Formula::Node> Formula::make(Connective c, std::uint32_t index, Formula l,
                                                          Formula r) {
  auto n = std::make_shared<Node>();
  n->op = c;
  n->index = index;
  std::size_t h = static_cast<std::size_t>(c) * 0x9e3779b97f4a7c15ULL + index;
  n->size = 1;
  n->max_var = c == Connective::Var ? index : 0;
  n->has_box = c == Connective::Box;
  for (Formula* k : {&l, &r}) {
    if (!k->node_) continue;
    h ^= k->hash() + 0x9e3779b9 + (h << 6) + (h >> 2);
    n->size += k->size();
    n->max_var = std::max(n->max_var, k->max_var());
    n->has_box = n->has_box || k->has_box();
  }
  n->hash = h;
  n->kids[0] = std::move(l);
  n->kids[1] = std::move(r);
  return n;
}

}  // namespace km

template <>
struct std::hash<km::Formula> {
  std::size_t operator()(const km::Formula& f) const noexcept { return f.hash(); }
};

namespace km {

using FormulaSet = std::unordered_set<Formula>;

inline Formula var(std::uint32_t i) { return Formula::var(i); }
inline Formula conj(Formula a, Formula b) { return Formula::conj(std::move(a), std::move(b)); }
inline Formula disj(Formula a, Formula b) { return Formula::disj(std::move(a), std::move(b)); }
inline Formula impl(Formula a, Formula b) { return Formula::impl(std::move(a), std::move(b)); }
inline Formula neg(Formula a) { return Formula::neg(std::move(a)); }
inline Formula box(Formula a) { return Formula::box(std::move(a)); }

/// The constant 1, i.e. p0 -> p0.
inline Formula one() { return impl(var(0), var(0)); }

/// (a -> b) & (b -> a)
inline Formula iff(const Formula& a, const Formula& b) { return conj(impl(a, b), impl(b, a)); }

/// Right-nested conjunction; a single element yields itself.
inline Formula big_conj(std::span<const Formula> parts) {
  if (parts.empty()) throw PreconditionError("big_conj: empty conjunction");
  Formula acc = parts.back();
  for (std::size_t i = parts.size() - 1; i-- > 0;) acc = conj(parts[i], acc);
  return acc;
}

inline bool is_assertoric(const Formula& f) { return !f.has_box(); }

// ---------------------------------------------------------------------------
// Printing and parsing

namespace detail {

inline int precedence(const Formula& f) {
  switch (f.op()) {
    case Connective::Impl: return 0;
    case Connective::Disj: return 1;
    case Connective::Conj: return 2;
    default: return 3;
  }
}

inline void print_to(std::string& out, const Formula& f, int level) {
  const bool parens = precedence(f) < level;
  if (parens) out += '(';
  switch (f.op()) {
    case Connective::Var:
      out += 'p';
      out += std::to_string(f.index());
      break;
    case Connective::Neg:
      out += '~';
      print_to(out, f.inner(), 3);
      break;
    case Connective::Box:
      out += "[]";
      print_to(out, f.inner(), 3);
      break;
    case Connective::Conj:
      print_to(out, f.left(), 2);
      out += " & ";
      print_to(out, f.right(), 3);
      break;
    case Connective::Disj:
      print_to(out, f.left(), 1);
      out += " | ";
      print_to(out, f.right(), 2);
      break;
    case Connective::Impl:
      print_to(out, f.left(), 1);
      out += " -> ";
      print_to(out, f.right(), 0);
      break;
  }
  if (parens) out += ')';
}

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view text, std::size_t line = 1) : text_(text), line_(line) {}

  Formula parse_all() {
    Formula f = formula();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, pos_ + 1); }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r' ||
                                   text_[pos_] == '\n'))
      ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (text_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  Formula formula() {
    Formula lhs = disjunction();
    if (accept("->")) return impl(std::move(lhs), formula());
    return lhs;
  }

  Formula disjunction() {
    Formula acc = conjunction();
    while (accept("|")) acc = disj(std::move(acc), conjunction());
    return acc;
  }

  Formula conjunction() {
    Formula acc = unary();
    while (accept("&")) acc = conj(std::move(acc), unary());
    return acc;
  }

  Formula unary() {
    if (accept("~")) return neg(unary());
    if (accept("[]")) return box(unary());
    return atom();
  }

  Formula atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of formula");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Formula f = formula();
      if (!accept(")")) fail("expected ')'");
      return f;
    }
    if (c == '1') {
      ++pos_;
      return one();
    }
    if (c == 'p') {
      ++pos_;
      const std::size_t start = pos_;
      std::uint64_t v = 0;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
        v = v * 10 + static_cast<std::uint64_t>(text_[pos_] - '0');
        if (v > 0xffffffffULL) fail("variable index too large");
        ++pos_;
      }
      if (pos_ == start) fail("expected digits after 'p'");
      return var(static_cast<std::uint32_t>(v));
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Canonical text with minimal parentheses: ~ and [] bind tightest, then &,
/// then |, then -> (right-associative). & and | associate to the left.
inline std::string print(const Formula& f) {
  std::string out;
  detail::print_to(out, f, 0);
  return out;
}

/// Parses the ASCII grammar. The atom `1` abbreviates p0 -> p0 and is
/// expanded immediately.
inline Formula parse(std::string_view text, std::size_t line = 1) {
  return detail::FormulaParser(text, line).parse_all();
}

inline std::ostream& operator<<(std::ostream& os, const Formula& f) { return os << print(f); }

// ---------------------------------------------------------------------------
// Traversal

/// All distinct subtrees of f (including f), in pre-order of first occurrence.
inline std::vector<Formula> subformulas(const Formula& f) {
  std::vector<Formula> out;
  FormulaSet seen;
  std::vector<Formula> stack{f};
  while (!stack.empty()) {
    Formula g = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(g).second) continue;
    out.push_back(g);
    for (std::size_t i = g.arity(); i-- > 0;) stack.push_back(g.child(i));
  }
  return out;
}

inline bool occurs_in(const Formula& needle, const Formula& host) {
  if (needle.size() > host.size()) return false;
  if (needle == host) return true;
  for (std::size_t i = 0; i < host.arity(); ++i)
    if (occurs_in(needle, host.child(i))) return true;
  return false;
}

inline void collect_variables(const Formula& f, std::vector<std::uint32_t>& out) {
  if (f.is(Connective::Var)) {
    if (std::find(out.begin(), out.end(), f.index()) == out.end()) out.push_back(f.index());
    return;
  }
  for (std::size_t i = 0; i < f.arity(); ++i) collect_variables(f.child(i), out);
}

/// Distinct variable indices of f, sorted ascending.
inline std::vector<std::uint32_t> variables(const Formula& f) {
  std::vector<std::uint32_t> out;
  collect_variables(f, out);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Substitution

/// Finite map from variables to formulas, applied as an endomorphism of the
/// formula algebra. Unbound variables are fixed.
class Substitution {
 public:
  using Map = std::map<std::uint32_t, Formula>;

  Substitution() = default;
  Substitution(std::initializer_list<std::pair<const std::uint32_t, Formula>> init) : bindings_(init) {}

  void bind(std::uint32_t v, Formula f) { bindings_.insert_or_assign(v, std::move(f)); }
  const Formula* find(std::uint32_t v) const {
    auto it = bindings_.find(v);
    return it == bindings_.end() ? nullptr : &it->second;
  }
  bool empty() const noexcept { return bindings_.empty(); }
  std::size_t size() const noexcept { return bindings_.size(); }
  Map::const_iterator begin() const { return bindings_.begin(); }
  Map::const_iterator end() const { return bindings_.end(); }

  /// Image of v under this substitution.
  Formula operator()(std::uint32_t v) const {
    const Formula* f = find(v);
    return f ? *f : var(v);
  }

  Formula apply(const Formula& f) const {
    if (bindings_.empty()) return f;
    return apply_rec(f);
  }

  /// Bindings x := x are dropped.
  Substitution normalized() const {
    Substitution out;
    for (const auto& [v, f] : bindings_)
      if (!(f.is(Connective::Var) && f.index() == v)) out.bind(v, f);
    return out;
  }

  /// Restriction to the given variables.
  Substitution restricted(std::span<const std::uint32_t> vars) const {
    Substitution out;
    for (std::uint32_t v : vars)
      if (const Formula* f = find(v)) out.bind(v, *f);
    return out;
  }

  friend bool operator==(const Substitution& a, const Substitution& b) { return a.bindings_ == b.bindings_; }

 private:
  Formula apply_rec(const Formula& f) const {
    if (f.is(Connective::Var)) {
      const Formula* g = find(f.index());
      return g ? *g : f;
    }
    if (f.arity() == 1) return f.with_children(apply_rec(f.inner()), f.inner());
    return f.with_children(apply_rec(f.left()), apply_rec(f.right()));
  }

  Map bindings_;
};

inline Formula substitute(const Formula& f, const Substitution& s) { return s.apply(f); }

/// outer ∘ inner: the substitution that applies `inner` first, then `outer`.
inline Substitution compose(const Substitution& outer, const Substitution& inner) {
  Substitution out;
  for (const auto& [v, f] : outer) out.bind(v, f);
  for (const auto& [v, f] : inner) out.bind(v, outer.apply(f));
  return out;
}

inline std::string print(const Substitution& s) {
  std::string out = "[";
  bool first = true;
  for (const auto& [v, f] : s) {
    if (!first) out += "; ";
    first = false;
    out += 'p' + std::to_string(v) + ":=" + print(f);
  }
  return out + "]";
}

namespace detail {
inline bool match_rec(const Formula& pattern, const Formula& f, Substitution& s) {
  if (pattern.is(Connective::Var)) {
    if (const Formula* bound = s.find(pattern.index())) return *bound == f;
    s.bind(pattern.index(), f);
    return true;
  }
  if (pattern.op() != f.op()) return false;
  for (std::size_t i = 0; i < pattern.arity(); ++i)
    if (!match_rec(pattern.child(i), f.child(i), s)) return false;
  return true;
}
}  // namespace detail

/// One-sided matching: the unique s over the variables of `pattern` with
/// s(pattern) = f, if any.
inline std::optional<Substitution> match(const Formula& pattern, const Formula& f) {
  Substitution s;
  if (!detail::match_rec(pattern, f, s)) return std::nullopt;
  return s;
}

// ---------------------------------------------------------------------------
// Positions and replacement

/// Sequence of child indices from the root; 0 is the left (or only) child.
using Path = std::vector<std::uint8_t>;

/// Positions of occurrences of one designated subformula inside a host.
struct OccurrenceSet {
  std::vector<Path> positions;

  bool empty() const noexcept { return positions.empty(); }
  std::size_t size() const noexcept { return positions.size(); }
};

inline const Formula& subformula_at(const Formula& host, const Path& path) {
  const Formula* cur = &host;
  for (std::uint8_t step : path) {
    if (step >= cur->arity()) throw InvalidPathError("path leaves the formula " + print(host));
    cur = &cur->child(step);
  }
  return *cur;
}

namespace detail {
inline void occurrences_rec(const Formula& f, const Formula& target, Path& here, std::vector<Path>& out) {
  if (f.size() < target.size()) return;
  if (f == target) {
    out.push_back(here);
    return;
  }
  for (std::size_t i = 0; i < f.arity(); ++i) {
    here.push_back(static_cast<std::uint8_t>(i));
    occurrences_rec(f.child(i), target, here, out);
    here.pop_back();
  }
}

inline Formula replace_path(const Formula& f, const Path& path, std::size_t depth, const Formula& replacement) {
  if (depth == path.size()) return replacement;
  if (f.arity() == 1) return f.with_children(replace_path(f.inner(), path, depth + 1, replacement), f.inner());
  if (path[depth] == 0) return f.with_children(replace_path(f.left(), path, depth + 1, replacement), f.right());
  return f.with_children(f.left(), replace_path(f.right(), path, depth + 1, replacement));
}

inline Formula replace_all_rec(const Formula& f, const Formula& target, const Formula& replacement) {
  if (f.size() < target.size()) return f;
  if (f == target) return replacement;
  if (f.arity() == 0) return f;
  if (f.arity() == 1) return f.with_children(replace_all_rec(f.inner(), target, replacement), f.inner());
  return f.with_children(replace_all_rec(f.left(), target, replacement),
                         replace_all_rec(f.right(), target, replacement));
}
}  // namespace detail

/// Outermost occurrences of target in host, left to right. Occurrences nested
/// inside another occurrence are not listed.
inline OccurrenceSet occurrences(const Formula& host, const Formula& target) {
  OccurrenceSet occ;
  Path here;
  detail::occurrences_rec(host, target, here, occ.positions);
  return occ;
}

/// host[target : replacement]. Outermost occurrences are replaced and the
/// inserted replacement is not rescanned.
inline Formula replace_all(const Formula& host, const Formula& target, const Formula& replacement) {
  return detail::replace_all_rec(host, target, replacement);
}

/// Checks the OccurrenceSet invariants against host and returns the common
/// addressed subtree (nullopt for an empty set).
inline std::optional<Formula> validate_occurrences(const Formula& host, const OccurrenceSet& occ) {
  std::optional<Formula> common;
  for (std::size_t i = 0; i < occ.positions.size(); ++i) {
    const Formula& here = subformula_at(host, occ.positions[i]);
    if (common && !(*common == here)) throw InvalidPathError("occurrence set addresses different subformulas");
    if (!common) common = here;
    for (std::size_t j = 0; j < occ.positions.size(); ++j) {
      if (i == j) continue;
      const Path& a = occ.positions[i];
      const Path& b = occ.positions[j];
      if (a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin()))
        throw InvalidPathError("occurrence paths overlap");
    }
  }
  return common;
}

/// Replaces exactly the addressed occurrences.
inline Formula replace_at(const Formula& host, const OccurrenceSet& occ, const Formula& replacement) {
  validate_occurrences(host, occ);
  Formula out = host;
  for (const Path& p : occ.positions) out = detail::replace_path(out, p, 0, replacement);
  return out;
}

/// True if the position lies strictly below some Box node of host.
inline bool under_box(const Formula& host, const Path& path) {
  const Formula* cur = &host;
  for (std::uint8_t step : path) {
    if (cur->is_box()) return true;
    cur = &cur->child(step);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Maximal box subformulas and rank

/// M(S): the []-subformulas occurring in some member of S that never occur in
/// the scope of [] in any member. Returned in order of first occurrence
/// (member order, then pre-order).
inline std::vector<Formula> maximal_subformulas(std::span<const Formula> list) {
  std::vector<Formula> order;
  FormulaSet seen;
  FormulaSet nested;
  struct Item {
    Formula f;
    bool boxed;
  };
  std::vector<Item> stack;
  for (const Formula& member : list) {
    if (!member.has_box()) continue;
    stack.push_back({member, false});
    while (!stack.empty()) {
      Item it = std::move(stack.back());
      stack.pop_back();
      if (!it.f.has_box()) continue;
      if (it.f.is_box()) {
        if (it.boxed) {
          if (!nested.insert(it.f).second) continue;
        } else if (seen.insert(it.f).second) {
          order.push_back(it.f);
        }
      }
      const bool boxed = it.boxed || it.f.is_box();
      for (std::size_t i = it.f.arity(); i-- > 0;) stack.push_back({it.f.child(i), boxed});
    }
  }
  std::vector<Formula> out;
  for (const Formula& f : order)
    if (!nested.contains(f)) out.push_back(f);
  return out;
}

inline std::vector<Formula> maximal_subformulas(std::initializer_list<Formula> list) {
  return maximal_subformulas(std::span<const Formula>(list.begin(), list.size()));
}

inline std::size_t rank(std::span<const Formula> list) { return maximal_subformulas(list).size(); }
inline std::size_t rank(std::initializer_list<Formula> list) {
  return rank(std::span<const Formula>(list.begin(), list.size()));
}

}  // namespace km
