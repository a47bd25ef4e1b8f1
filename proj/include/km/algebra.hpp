#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "km/derivation_io.hpp"
#include "km/formula.hpp"

namespace km {

using Element = std::size_t;
using OrderMatrix = std::vector<std::vector<bool>>;
using BoxTable = std::vector<Element>;
using Valuation = std::map<std::uint32_t, Element>;

/// A finite Heyting algebra given by its order. Elements are numbered along a
/// canonical linear extension: 0 is the bottom, size() - 1 the top.
class HeytingAlgebra {
 public:
  /// Throws PreconditionError unless `order` is a distributive lattice order.
  /// `renumbering`, when given, receives the new index of each input element.
  static HeytingAlgebra from_order(const OrderMatrix& order, std::vector<Element>* renumbering = nullptr) {
    const std::size_t n = order.size();
    if (n == 0) throw PreconditionError("an algebra needs at least one element");
    for (const auto& row : order)
      if (row.size() != n) throw PreconditionError("order matrix is not square");
    for (std::size_t a = 0; a < n; ++a) {
      if (!order[a][a]) throw PreconditionError("order is not reflexive");
      for (std::size_t b = 0; b < n; ++b) {
        if (a != b && order[a][b] && order[b][a]) throw PreconditionError("order is not antisymmetric");
        for (std::size_t c = 0; c < n; ++c)
          if (order[a][b] && order[b][c] && !order[a][c]) throw PreconditionError("order is not transitive");
      }
    }

    // Stable Kahn: repeatedly take the smallest element all of whose strict
    // lower bounds are placed.
    std::vector<Element> rank_of(n);
    std::vector<bool> placed(n, false);
    for (std::size_t pos = 0; pos < n; ++pos) {
      for (std::size_t a = 0; a < n; ++a) {
        if (placed[a]) continue;
        bool ready = true;
        for (std::size_t b = 0; b < n && ready; ++b)
          if (b != a && order[b][a] && !placed[b]) ready = false;
        if (ready) {
          placed[a] = true;
          rank_of[a] = pos;
          break;
        }
      }
    }
    HeytingAlgebra h;
    h.n_ = n;
    h.leq_.assign(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) h.leq_[rank_of[a]][rank_of[b]] = order[a][b];
    h.build();
    if (renumbering) *renumbering = rank_of;
    return h;
  }

  std::size_t size() const { return n_; }
  Element bottom() const { return 0; }
  Element top() const { return n_ - 1; }
  bool leq(Element a, Element b) const { return leq_[a][b]; }
  Element meet(Element a, Element b) const { return meet_[a * n_ + b]; }
  Element join(Element a, Element b) const { return join_[a * n_ + b]; }
  Element impl(Element a, Element b) const { return impl_[a * n_ + b]; }
  Element neg(Element a) const { return impl(a, bottom()); }
  const OrderMatrix& order() const { return leq_; }

  friend bool operator==(const HeytingAlgebra& a, const HeytingAlgebra& b) { return a.leq_ == b.leq_; }

 private:
  HeytingAlgebra() = default;

  /// Greatest (or least) element of a set, if any.
  std::optional<Element> extreme(const std::vector<Element>& set, bool greatest) const {
    for (Element c : set) {
      bool ok = true;
      for (Element d : set)
        if (greatest ? !leq_[d][c] : !leq_[c][d]) {
          ok = false;
          break;
        }
      if (ok) return c;
    }
    return std::nullopt;
  }

  void build() {
    meet_.assign(n_ * n_, 0);
    join_.assign(n_ * n_, 0);
    impl_.assign(n_ * n_, 0);
    for (Element a = 0; a < n_; ++a) {
      if (!leq_[0][a]) throw PreconditionError("order has no bottom element");
      if (!leq_[a][n_ - 1]) throw PreconditionError("order has no top element");
    }
    for (Element a = 0; a < n_; ++a)
      for (Element b = 0; b < n_; ++b) {
        std::vector<Element> lower, upper;
        for (Element c = 0; c < n_; ++c) {
          if (leq_[c][a] && leq_[c][b]) lower.push_back(c);
          if (leq_[a][c] && leq_[b][c]) upper.push_back(c);
        }
        auto m = extreme(lower, true);
        auto j = extreme(upper, false);
        if (!m || !j) throw PreconditionError("order is not a lattice");
        meet_[a * n_ + b] = *m;
        join_[a * n_ + b] = *j;
      }
    for (Element a = 0; a < n_; ++a)
      for (Element b = 0; b < n_; ++b)
        for (Element c = 0; c < n_; ++c)
          if (meet(a, join(b, c)) != join(meet(a, b), meet(a, c))) throw PreconditionError("lattice is not distributive");
    for (Element a = 0; a < n_; ++a)
      for (Element b = 0; b < n_; ++b) {
        std::vector<Element> below;
        for (Element x = 0; x < n_; ++x)
          if (leq_[meet(a, x)][b]) below.push_back(x);
        auto r = extreme(below, true);
        if (!r) throw PreconditionError("relative pseudocomplement missing");
        impl_[a * n_ + b] = *r;
      }
  }

  std::size_t n_ = 0;
  OrderMatrix leq_;
  std::vector<Element> meet_, join_, impl_;
};

// ---------------------------------------------------------------------------
// Posets and upset algebras

struct Poset {
  OrderMatrix leq;
  std::size_t size() const { return leq.size(); }
};

inline void check_partial_order(const OrderMatrix& r) {
  const std::size_t n = r.size();
  for (std::size_t a = 0; a < n; ++a) {
    if (r[a].size() != n) throw PreconditionError("relation is not square");
    if (!r[a][a]) throw PreconditionError("relation is not reflexive");
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && r[a][b] && r[b][a]) throw PreconditionError("relation is not antisymmetric");
      for (std::size_t c = 0; c < n; ++c)
        if (r[a][b] && r[b][c] && !r[a][c]) throw PreconditionError("relation is not transitive");
    }
  }
}

/// Upward-closed subsets ordered by inclusion.
inline HeytingAlgebra upset_algebra(const Poset& p) {
  check_partial_order(p.leq);
  const std::size_t n = p.size();
  if (n > 20) throw PreconditionError("poset too large");
  std::vector<std::uint32_t> ups;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    bool closed = true;
    for (std::size_t a = 0; a < n && closed; ++a)
      if (mask >> a & 1u)
        for (std::size_t b = 0; b < n; ++b)
          if (p.leq[a][b] && !(mask >> b & 1u)) {
            closed = false;
            break;
          }
    if (closed) ups.push_back(mask);
  }
  std::stable_sort(ups.begin(), ups.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
  OrderMatrix order(ups.size(), std::vector<bool>(ups.size(), false));
  for (std::size_t i = 0; i < ups.size(); ++i)
    for (std::size_t j = 0; j < ups.size(); ++j) order[i][j] = (ups[i] & ~ups[j]) == 0;
  return HeytingAlgebra::from_order(order);
}

/// Representatives of the partial orders on n points, one per isomorphism
/// class, in a fixed order (the antichain first).
inline std::vector<Poset> posets_up_to_iso(std::size_t n) {
  if (n > 6) throw PreconditionError("poset enumeration is limited to 6 points");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<std::size_t> perm(n);
  std::set<std::uint64_t> seen;
  std::vector<Poset> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs.size()); ++mask) {
    OrderMatrix r(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) r[i][i] = true;
    for (std::size_t k = 0; k < pairs.size(); ++k)
      if (mask >> k & 1u) r[pairs[k].first][pairs[k].second] = true;
    bool transitive = true;
    for (std::size_t a = 0; a < n && transitive; ++a)
      for (std::size_t b = 0; b < n && transitive; ++b)
        for (std::size_t c = 0; c < n; ++c)
          if (r[a][b] && r[b][c] && !r[a][c]) {
            transitive = false;
            break;
          }
    if (!transitive) continue;
    std::iota(perm.begin(), perm.end(), 0);
    std::uint64_t best = ~std::uint64_t{0};
    do {
      std::uint64_t code = 0;
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          if (r[a][b]) code |= std::uint64_t{1} << (perm[a] * n + perm[b]);
      best = std::min(best, code);
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (seen.insert(best).second) out.push_back({std::move(r)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

inline Element eval(const Formula& f, const HeytingAlgebra& alg, const BoxTable* box,
                    const std::vector<Element>& v) {
  switch (f.op()) {
    case Connective::Var:
      if (f.index() >= v.size() || v[f.index()] == static_cast<Element>(-1))
        throw PreconditionError("variable p" + std::to_string(f.index()) + " is unassigned");
      return v[f.index()];
    case Connective::Conj: return alg.meet(eval(f.left(), alg, box, v), eval(f.right(), alg, box, v));
    case Connective::Disj: return alg.join(eval(f.left(), alg, box, v), eval(f.right(), alg, box, v));
    case Connective::Impl: return alg.impl(eval(f.left(), alg, box, v), eval(f.right(), alg, box, v));
    case Connective::Neg: return alg.neg(eval(f.inner(), alg, box, v));
    case Connective::Box:
      if (!box) throw PreconditionError("formula contains [] but no box table was given");
      return (*box)[eval(f.inner(), alg, box, v)];
  }
  return 0;
}

inline void check_box(const HeytingAlgebra& alg, const BoxTable* box) {
  if (!box) return;
  if (box->size() != alg.size()) throw PreconditionError("box table has the wrong size");
  for (Element e : *box)
    if (e >= alg.size()) throw PreconditionError("box table entry out of range");
}

}  // namespace detail

inline Element evaluate(const Formula& f, const HeytingAlgebra& alg, const BoxTable* box, const Valuation& v) {
  detail::check_box(alg, box);
  std::vector<Element> dense(f.max_var() + 1, static_cast<Element>(-1));
  for (const auto& [var_index, e] : v) {
    if (e >= alg.size()) throw PreconditionError("valuation value out of range");
    if (var_index < dense.size()) dense[var_index] = e;
  }
  return detail::eval(f, alg, box, dense);
}

/// A valuation sending f below the top, if there is one.
inline std::optional<Valuation> counter_valuation(const Formula& f, const HeytingAlgebra& alg, const BoxTable* box) {
  detail::check_box(alg, box);
  if (f.has_box() && !box) throw PreconditionError("formula contains [] but no box table was given");
  const std::vector<std::uint32_t> vars = variables(f);
  std::vector<Element> dense(f.max_var() + 1, static_cast<Element>(-1));
  std::vector<Element> digits(vars.size(), 0);
  while (true) {
    for (std::size_t i = 0; i < vars.size(); ++i) dense[vars[i]] = digits[i];
    if (detail::eval(f, alg, box, dense) != alg.top()) {
      Valuation v;
      for (std::size_t i = 0; i < vars.size(); ++i) v[vars[i]] = digits[i];
      return v;
    }
    std::size_t i = 0;
    while (i < digits.size() && ++digits[i] == alg.size()) digits[i++] = 0;
    if (i == digits.size()) return std::nullopt;
  }
}

inline bool validates(const Formula& f, const HeytingAlgebra& alg, const BoxTable* box = nullptr) {
  return !counter_valuation(f, alg, box);
}

// ---------------------------------------------------------------------------
// Box identities

/// (i) [](x & y) = []x & []y, (ii) x <= []x, (iii) []x <= y | (y -> x),
/// (iv) ([]x -> x) -> x = top.
enum class Identity : std::uint8_t { i = 1, ii = 2, iii = 4, iv = 8 };

class IdentitySet {
 public:
  constexpr IdentitySet() = default;
  constexpr IdentitySet(std::initializer_list<Identity> ids) {
    for (Identity id : ids) bits_ |= static_cast<std::uint8_t>(id);
  }
  static constexpr IdentitySet from_bits(std::uint8_t b) {
    IdentitySet s;
    s.bits_ = b & 15u;
    return s;
  }
  static constexpr IdentitySet all() { return from_bits(15); }
  static constexpr IdentitySet mhc() { return from_bits(7); }

  constexpr bool contains(Identity id) const { return bits_ & static_cast<std::uint8_t>(id); }
  constexpr bool includes(IdentitySet o) const { return (bits_ & o.bits_) == o.bits_; }
  constexpr void insert(Identity id) { bits_ |= static_cast<std::uint8_t>(id); }
  constexpr std::uint8_t bits() const { return bits_; }
  friend constexpr bool operator==(IdentitySet, IdentitySet) = default;

 private:
  std::uint8_t bits_ = 0;
};

inline std::string print(IdentitySet s) {
  static constexpr std::pair<Identity, const char*> names[] = {
      {Identity::i, "i"}, {Identity::ii, "ii"}, {Identity::iii, "iii"}, {Identity::iv, "iv"}};
  std::string out = "{";
  for (const auto& [id, name] : names) {
    if (!s.contains(id)) continue;
    if (out.size() > 1) out += ",";
    out += name;
  }
  return out + "}";
}

/// Accepts "i,ii,iii,iv" (any subset, any order); "none" or "" is empty.
inline IdentitySet parse_identities(std::string_view text) {
  IdentitySet s;
  if (text == "none") return s;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view tok = detail::trim(text.substr(start, end - start));
    if (tok == "i") s.insert(Identity::i);
    else if (tok == "ii") s.insert(Identity::ii);
    else if (tok == "iii") s.insert(Identity::iii);
    else if (tok == "iv") s.insert(Identity::iv);
    else if (!tok.empty()) throw ParseError("unknown identity '" + std::string(tok) + "'", 1, start + 1);
    start = end + 1;
  }
  return s;
}

namespace detail {

inline bool unary_ok(const HeytingAlgebra& a, Element x, Element c, IdentitySet req, const std::vector<Element>& upper) {
  if (req.contains(Identity::ii) && !a.leq(x, c)) return false;
  if (req.contains(Identity::iii) && !a.leq(c, upper[x])) return false;
  if (req.contains(Identity::iv) && a.impl(a.impl(c, x), x) != a.top()) return false;
  return true;
}

/// Greatest lower bound of y | (y -> x) over all y.
inline std::vector<Element> upper_bounds(const HeytingAlgebra& a) {
  std::vector<Element> u(a.size(), a.top());
  for (Element x = 0; x < a.size(); ++x)
    for (Element y = 0; y < a.size(); ++y) u[x] = a.meet(u[x], a.join(y, a.impl(y, x)));
  return u;
}

}  // namespace detail

inline IdentitySet check_box_identities(const HeytingAlgebra& a, const BoxTable& box) {
  detail::check_box(a, &box);
  const std::vector<Element> upper = detail::upper_bounds(a);
  bool i = true, ii = true, iii = true, iv = true;
  for (Element x = 0; x < a.size(); ++x) {
    ii = ii && a.leq(x, box[x]);
    iii = iii && a.leq(box[x], upper[x]);
    iv = iv && a.impl(a.impl(box[x], x), x) == a.top();
    for (Element y = 0; y < a.size() && i; ++y) i = box[a.meet(x, y)] == a.meet(box[x], box[y]);
  }
  IdentitySet s;
  if (i) s.insert(Identity::i);
  if (ii) s.insert(Identity::ii);
  if (iii) s.insert(Identity::iii);
  if (iv) s.insert(Identity::iv);
  return s;
}

/// []a = meet over b of b | (b -> a).
inline BoxTable canonical_box(const HeytingAlgebra& a) { return detail::upper_bounds(a); }

struct SearchOptions {
  std::size_t node_budget = 50'000'000;
  std::optional<std::size_t> max_results;
};

/// All box tables satisfying the required identities, in lexicographic order.
inline std::vector<BoxTable> search_box(const HeytingAlgebra& a, IdentitySet required, SearchOptions opt = {}) {
  const std::size_t n = a.size();
  const std::vector<Element> upper = detail::upper_bounds(a);
  std::vector<std::vector<Element>> candidates(n);
  for (Element x = 0; x < n; ++x)
    for (Element c = 0; c < n; ++c)
      if (detail::unary_ok(a, x, c, required, upper)) candidates[x].push_back(c);

  // Elements are assigned in index order; meets of assigned elements have
  // smaller or equal index, so (i) can be checked as soon as both arguments
  // are assigned.
  const bool need_i = required.contains(Identity::i);
  std::vector<BoxTable> out;
  BoxTable table(n, 0);
  std::size_t nodes = 0;
  std::function<bool(Element)> go = [&](Element x) -> bool {
    if (x == n) {
      out.push_back(table);
      return !(opt.max_results && out.size() >= *opt.max_results);
    }
    for (Element c : candidates[x]) {
      if (++nodes > opt.node_budget) throw SearchLimitError("box search exceeded its node budget");
      table[x] = c;
      bool ok = true;
      if (need_i)
        for (Element y = 0; y <= x && ok; ++y) ok = table[a.meet(x, y)] == a.meet(c, table[y]);
      if (ok && !go(x + 1)) return false;
    }
    return true;
  };
  go(0);
  return out;
}

// ---------------------------------------------------------------------------
// Refutation search

struct Refutation {
  Poset poset;
  HeytingAlgebra algebra;
  std::optional<BoxTable> box;
  Valuation valuation;
};

/// Looks for an upset algebra (with a KM box when []-formulas are involved)
/// validating every member of gamma as an identity but not a. A result
/// proves underivability; nullopt is inconclusive.
inline std::optional<Refutation> refutes(const std::vector<Formula>& gamma, const Formula& a,
                                         std::size_t max_poset_size) {
  bool modal = a.has_box();
  for (const Formula& g : gamma) modal = modal || g.has_box();
  for (std::size_t n = 1; n <= max_poset_size; ++n) {
    for (const Poset& p : posets_up_to_iso(n)) {
      const HeytingAlgebra alg = upset_algebra(p);
      std::vector<std::optional<BoxTable>> boxes;
      if (!modal) {
        boxes.push_back(std::nullopt);
      } else if (BoxTable c = canonical_box(alg); check_box_identities(alg, c) == IdentitySet::all()) {
        boxes.push_back(std::move(c));
      } else {
        for (BoxTable& b : search_box(alg, IdentitySet::all())) boxes.push_back(std::move(b));
      }
      for (const auto& box : boxes) {
        const BoxTable* bp = box ? &*box : nullptr;
        bool premises_hold = true;
        for (const Formula& g : gamma)
          if (!validates(g, alg, bp)) {
            premises_hold = false;
            break;
          }
        if (!premises_hold) continue;
        if (auto v = counter_valuation(a, alg, bp)) return Refutation{p, alg, box, std::move(*v)};
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Algebra files

struct AlgebraFile {
  HeytingAlgebra algebra;
  std::optional<BoxTable> box;
};

/// "size: n", "order:" followed by n rows of n 0/1 entries, optional
/// "box: b0 ... b(n-1)". Box entries refer to the file's numbering and are
/// carried over to the canonical one.
inline AlgebraFile read_algebra(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string raw;
  for (std::size_t no = 1; std::getline(in, raw); ++no) {
    const std::string_view t = detail::trim(raw);
    if (t.empty() || t.front() == '#') continue;
    lines.emplace_back(no, std::string(t));
  }
  auto numbers = [](std::string_view text, std::size_t line) {
    std::vector<std::size_t> out;
    for (std::string_view tok : detail::split_ws(text)) {
      std::size_t v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("expected a number, got '" + std::string(tok) + "'", line, 1);
      out.push_back(v);
    }
    return out;
  };
  std::size_t at = 0;
  auto expect = [&](std::string_view key) {
    if (at >= lines.size()) throw ParseError("missing '" + std::string(key) + "'", lines.empty() ? 1 : lines.back().first, 1);
    if (!detail::starts_with(lines[at].second, key))
      throw ParseError("expected '" + std::string(key) + "'", lines[at].first, 1);
    return std::string_view(lines[at].second).substr(key.size());
  };
  const std::size_t size_line = at < lines.size() ? lines[at].first : 1;
  const auto sz = numbers(expect("size:"), size_line);
  if (sz.size() != 1 || sz[0] == 0) throw ParseError("size must be one positive number", size_line, 1);
  const std::size_t n = sz[0];
  ++at;
  if (!detail::trim(expect("order:")).empty()) throw ParseError("order rows start on the next line", lines[at].first, 1);
  ++at;
  OrderMatrix order(n, std::vector<bool>(n, false));
  for (std::size_t r = 0; r < n; ++r, ++at) {
    if (at >= lines.size()) throw ParseError("missing order rows", lines.back().first, 1);
    const auto row = numbers(lines[at].second, lines[at].first);
    if (row.size() != n) throw ParseError("order row needs " + std::to_string(n) + " entries", lines[at].first, 1);
    for (std::size_t c = 0; c < n; ++c) {
      if (row[c] > 1) throw ParseError("order entries are 0 or 1", lines[at].first, 1);
      order[r][c] = row[c] == 1;
    }
  }
  std::optional<BoxTable> file_box;
  if (at < lines.size()) {
    const std::size_t line = lines[at].first;
    const auto b = numbers(expect("box:"), line);
    if (b.size() != n) throw ParseError("box row needs " + std::to_string(n) + " entries", line, 1);
    for (std::size_t e : b)
      if (e >= n) throw ParseError("box entry out of range", line, 1);
    file_box = b;
    ++at;
  }
  if (at < lines.size()) throw ParseError("unexpected content", lines[at].first, 1);

  std::vector<Element> renumber;
  HeytingAlgebra alg = [&] {
    try {
      return HeytingAlgebra::from_order(order, &renumber);
    } catch (const PreconditionError& e) {
      throw ParseError(e.what(), size_line, 1);
    }
  }();
  AlgebraFile out{std::move(alg), std::nullopt};
  if (file_box) {
    BoxTable b(n);
    for (std::size_t x = 0; x < n; ++x) b[renumber[x]] = renumber[(*file_box)[x]];
    out.box = std::move(b);
  }
  return out;
}

inline AlgebraFile read_algebra_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_algebra(in);
}

inline AlgebraFile read_algebra_string(const std::string& text) {
  std::istringstream in(text);
  return read_algebra(in);
}

inline void write_algebra(std::ostream& out, const HeytingAlgebra& a, const BoxTable* box = nullptr) {
  out << "size: " << a.size() << "\norder:\n";
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a.size(); ++c) out << (c ? " " : "") << (a.leq(r, c) ? 1 : 0);
    out << '\n';
  }
  if (box) {
    out << "box:";
    for (Element e : *box) out << ' ' << e;
    out << '\n';
  }
}

inline std::string format_algebra(const HeytingAlgebra& a, const BoxTable* box = nullptr) {
  std::ostringstream out;
  write_algebra(out, a, box);
  return out.str();
}

inline std::string print(const Valuation& v) {
  std::string out;
  for (const auto& [k, e] : v) out += (out.empty() ? "p" : ", p") + std::to_string(k) + "=" + std::to_string(e);
  return out;
}

}  // namespace km
