#pragma once

#include <functional>
#include <optional>
#include <unordered_map>
#include <variant>
#include <vector>

#include "km/calculus.hpp"

namespace km {

// ---------------------------------------------------------------------------
// Derivations from hypotheses (no substitution rule)

struct Hypothesis {
  std::size_t index;
};

using HypJustification = std::variant<AxiomInst, Hypothesis, ModusPonens>;

struct HypStep {
  Formula formula;
  HypJustification just;
};

/// Hypothesis steps reproduce hypotheses verbatim.
struct HypotheticalDerivation {
  std::vector<Formula> hypotheses;
  std::vector<HypStep> steps;

  const Formula& conclusion() const {
    if (steps.empty()) throw PreconditionError("empty derivation has no conclusion");
    return steps.back().formula;
  }
};

/// Structural check; axiom tags are not restricted.
inline std::vector<Failure> check(const HypotheticalDerivation& d) {
  std::vector<Failure> out;
  if (d.steps.empty()) out.push_back({0, "derivation has no steps"});
  for (std::size_t i = 0; i < d.steps.size(); ++i) {
    const HypStep& s = d.steps[i];
    const std::size_t n = i + 1;
    if (const auto* a = std::get_if<AxiomInst>(&s.just)) {
      if (!(substitute(base_formula(a->id), a->subst) == s.formula)) out.push_back({n, "not an axiom instance"});
    } else if (const auto* h = std::get_if<Hypothesis>(&s.just)) {
      if (h->index >= d.hypotheses.size() || !(d.hypotheses[h->index] == s.formula))
        out.push_back({n, "not the stated hypothesis"});
    } else {
      const auto& mp = std::get<ModusPonens>(s.just);
      if (mp.minor >= i || mp.major >= i) {
        out.push_back({n, "modus ponens refers to a later step"});
        continue;
      }
      const Formula& major = d.steps[mp.major].formula;
      if (!major.is(Connective::Impl) || !(major.left() == d.steps[mp.minor].formula) || !(major.right() == s.formula))
        out.push_back({n, "modus ponens does not apply"});
    }
  }
  return out;
}

class ProofBuilder;
HypotheticalDerivation deduction_theorem(const HypotheticalDerivation& d, std::size_t k);

/// Forward proof construction under a fixed list of hypotheses. Every method
/// returns the index of a step holding the named fact; a formula is derived at
/// most once.
class ProofBuilder {
 public:
  explicit ProofBuilder(std::vector<Formula> hypotheses = {}) : hyps_(std::move(hypotheses)) {}

  const std::vector<Formula>& hypotheses() const { return hyps_; }
  Formula formula(std::size_t fact) const { return steps_.at(fact).formula; }
  std::size_t size() const { return steps_.size(); }

  std::optional<std::size_t> find(const Formula& f) const {
    auto it = index_.find(f);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t axiom(AxiomId id, const Formula& instance) {
    auto s = match_axiom(id, instance);
    if (!s) throw PreconditionError(print(instance) + " is not an instance of " + std::string(axiom_name(id)));
    if (auto at = find(instance)) return *at;
    return push(instance, AxiomInst{id, s->normalized()});
  }

  std::size_t assume(std::size_t k) {
    if (k >= hyps_.size()) throw PreconditionError("no hypothesis " + std::to_string(k));
    if (auto at = find(hyps_[k])) return *at;
    return push(hyps_[k], Hypothesis{k});
  }

  std::size_t mp(std::size_t minor, std::size_t major) {
    const Formula& m = formula(major);
    if (!m.is(Connective::Impl) || !(m.left() == formula(minor)))
      throw PreconditionError("modus ponens does not apply to " + print(formula(minor)) + " and " + print(m));
    if (auto at = find(m.right())) return *at;
    return push(m.right(), ModusPonens{minor, major});
  }

  /// Adds the steps of d, whose hypotheses must be among ours.
  std::size_t import(const HypotheticalDerivation& d) {
    std::vector<std::size_t> hyp_map(d.hypotheses.size());
    for (std::size_t k = 0; k < d.hypotheses.size(); ++k) {
      auto it = std::find(hyps_.begin(), hyps_.end(), d.hypotheses[k]);
      if (it == hyps_.end()) throw PreconditionError("imported hypothesis " + print(d.hypotheses[k]) + " is unavailable");
      hyp_map[k] = static_cast<std::size_t>(it - hyps_.begin());
    }
    std::vector<std::size_t> at(d.steps.size());
    for (std::size_t i = 0; i < d.steps.size(); ++i) {
      const HypStep& s = d.steps[i];
      if (auto have = find(s.formula)) {
        at[i] = *have;
      } else if (const auto* a = std::get_if<AxiomInst>(&s.just)) {
        at[i] = push(s.formula, *a);
      } else if (const auto* h = std::get_if<Hypothesis>(&s.just)) {
        at[i] = assume(hyp_map[h->index]);
      } else {
        const auto& m = std::get<ModusPonens>(s.just);
        at[i] = push(s.formula, ModusPonens{at[m.minor], at[m.major]});
      }
    }
    return at.back();
  }

  /// Adds a refined, premise-free derivation (axioms and modus ponens only).
  std::size_t theorem(const Derivation& d) {
    if (!d.premises.empty()) throw PreconditionError("theorem import needs a premise-free derivation");
    HypotheticalDerivation h;
    for (const Step& s : d.steps) {
      if (const auto* a = std::get_if<AxiomInst>(&s.just))
        h.steps.push_back({s.formula, *a});
      else if (const auto* m = std::get_if<ModusPonens>(&s.just))
        h.steps.push_back({s.formula, *m});
      else
        throw PreconditionError("theorem import needs a refined derivation");
    }
    return import(h);
  }

  /// Copies a fact from a builder whose hypotheses are a prefix of ours.
  std::size_t copy_from(const ProofBuilder& other, std::size_t fact) {
    if (other.hyps_.size() > hyps_.size() || !std::equal(other.hyps_.begin(), other.hyps_.end(), hyps_.begin()))
      throw PreconditionError("copy_from: hypotheses are not a prefix");
    if (auto at = find(other.formula(fact))) return *at;
    const HypStep& s = other.steps_[fact];
    if (const auto* a = std::get_if<AxiomInst>(&s.just)) return push(s.formula, *a);
    if (const auto* h = std::get_if<Hypothesis>(&s.just)) return assume(h->index);
    const auto& m = std::get<ModusPonens>(s.just);
    const std::size_t minor = copy_from(other, m.minor);
    const std::size_t major = copy_from(other, m.major);
    return mp(minor, major);
  }

  // Derived rules.

  /// a -> a
  std::size_t identity(const Formula& a) {
    const Formula aa = impl(a, a);
    if (auto at = find(aa)) return *at;
    const std::size_t s1 = axiom(AxiomId::Ax0_1a, impl(a, aa));
    const std::size_t s2 = axiom(AxiomId::Ax0_1b, impl(impl(a, aa), impl(impl(a, impl(aa, a)), aa)));
    const std::size_t s3 = mp(s1, s2);
    const std::size_t s4 = axiom(AxiomId::Ax0_1a, impl(a, impl(aa, a)));
    return mp(s4, s3);
  }

  /// The constant 1.
  std::size_t one_fact() { return identity(var(0)); }

  /// From phi, x -> phi.
  std::size_t weaken(std::size_t fact, const Formula& x) {
    const Formula& f = formula(fact);
    return mp(fact, axiom(AxiomId::Ax0_1a, impl(f, impl(x, f))));
  }

  /// From a -> b and b -> c, a -> c.
  std::size_t chain(std::size_t ab, std::size_t bc) {
    const Formula& f = formula(ab);
    const Formula& g = formula(bc);
    if (!f.is(Connective::Impl) || !g.is(Connective::Impl) || !(f.right() == g.left()))
      throw PreconditionError("chain: implications do not compose");
    const Formula& a = f.left();
    const std::size_t a_bc = weaken(bc, a);
    const std::size_t ax = axiom(AxiomId::Ax0_1b, impl(f, impl(impl(a, g), impl(a, g.right()))));
    return mp(a_bc, mp(ab, ax));
  }

  std::size_t and_intro(std::size_t a, std::size_t b) {
    const Formula& x = formula(a);
    const Formula& y = formula(b);
    const std::size_t ax = axiom(AxiomId::Ax0_3, impl(x, impl(y, conj(x, y))));
    return mp(b, mp(a, ax));
  }

  std::size_t and_left(std::size_t c) {
    const Formula& f = formula(c);
    if (!f.is(Connective::Conj)) throw PreconditionError("and_left: not a conjunction");
    return mp(c, axiom(AxiomId::Ax0_4a, impl(f, f.left())));
  }

  std::size_t and_right(std::size_t c) {
    const Formula& f = formula(c);
    if (!f.is(Connective::Conj)) throw PreconditionError("and_right: not a conjunction");
    return mp(c, axiom(AxiomId::Ax0_4b, impl(f, f.right())));
  }

  /// From a, a | b.
  std::size_t or_left(std::size_t a, const Formula& b) {
    const Formula& x = formula(a);
    return mp(a, axiom(AxiomId::Ax0_5a, impl(x, disj(x, b))));
  }

  /// From b, a | b.
  std::size_t or_right(const Formula& a, std::size_t b) {
    const Formula& y = formula(b);
    return mp(b, axiom(AxiomId::Ax0_5b, impl(y, disj(a, y))));
  }

  /// From a | b, a -> c and b -> c, c.
  std::size_t or_elim(std::size_t d, std::size_t left_case, std::size_t right_case) {
    const Formula& ac = formula(left_case);
    const Formula& bc = formula(right_case);
    const Formula& ab = formula(d);
    if (!ab.is(Connective::Disj) || !ac.is(Connective::Impl) || !bc.is(Connective::Impl) ||
        !(ac.left() == ab.left()) || !(bc.left() == ab.right()) || !(ac.right() == bc.right()))
      throw PreconditionError("or_elim: cases do not fit the disjunction");
    const std::size_t ax = axiom(AxiomId::Ax0_6, impl(ac, impl(bc, impl(ab, ac.right()))));
    return mp(d, mp(right_case, mp(left_case, ax)));
  }

  /// Proves x -> r where r is the fact returned by body(inner, hyp) in a
  /// builder extended by the hypothesis x.
  template <class Body>
  std::size_t discharge(const Formula& x, Body&& body) {
    std::vector<Formula> hyps = hyps_;
    hyps.push_back(x);
    ProofBuilder inner(std::move(hyps));
    const std::size_t h = inner.assume(hyps_.size());
    const std::size_t result = std::forward<Body>(body)(inner, h);
    return import(deduction_theorem(inner.finish(result), hyps_.size()));
  }

  /// The steps needed for `fact`, in order, ending with it.
  HypotheticalDerivation finish(std::size_t fact) const {
    std::vector<bool> needed(steps_.size(), false);
    needed.at(fact) = true;
    for (std::size_t i = fact + 1; i-- > 0;) {
      if (!needed[i]) continue;
      if (const auto* m = std::get_if<ModusPonens>(&steps_[i].just)) needed[m->minor] = needed[m->major] = true;
    }
    HypotheticalDerivation out{hyps_, {}};
    std::vector<std::size_t> at(steps_.size());
    for (std::size_t i = 0; i <= fact; ++i) {
      if (!needed[i]) continue;
      at[i] = out.steps.size();
      HypStep s = steps_[i];
      if (auto* m = std::get_if<ModusPonens>(&s.just)) *m = ModusPonens{at[m->minor], at[m->major]};
      out.steps.push_back(std::move(s));
    }
    return out;
  }

 private:
  std::size_t push(Formula f, HypJustification j) {
    const std::size_t at = steps_.size();
    index_.emplace(f, at);
    steps_.push_back({std::move(f), std::move(j)});
    return at;
  }

  std::vector<Formula> hyps_;
  std::vector<HypStep> steps_;
  std::unordered_map<Formula, std::size_t> index_;
};

/// Discharges hypothesis k: the result proves hypotheses[k] -> C from the
/// remaining hypotheses, adding only Ax0_1a/Ax0_1b instances. Steps that do
/// not depend on the discharged hypothesis are kept as they are.
inline HypotheticalDerivation deduction_theorem(const HypotheticalDerivation& d, std::size_t k) {
  if (k >= d.hypotheses.size()) throw PreconditionError("deduction_theorem: no hypothesis " + std::to_string(k));
  if (auto bad = check(d); !bad.empty())
    throw PreconditionError("deduction_theorem: invalid input at step " + std::to_string(bad.front().step) + ": " +
                            bad.front().reason);
  const Formula x = d.hypotheses[k];
  std::vector<Formula> rest;
  for (std::size_t j = 0; j < d.hypotheses.size(); ++j)
    if (j != k) rest.push_back(d.hypotheses[j]);

  ProofBuilder out(rest);
  const std::size_t n = d.steps.size();
  std::vector<std::optional<std::size_t>> plain(n), lifted(n);
  std::vector<bool> depends(n, false);

  auto lift = [&](std::size_t i) {
    if (!lifted[i]) {
      const Formula& f = d.steps[i].formula;
      lifted[i] = out.mp(*plain[i], out.axiom(AxiomId::Ax0_1a, impl(f, impl(x, f))));
    }
    return *lifted[i];
  };

  for (std::size_t i = 0; i < n; ++i) {
    const HypStep& s = d.steps[i];
    if (const auto* a = std::get_if<AxiomInst>(&s.just)) {
      plain[i] = out.axiom(a->id, s.formula);
    } else if (const auto* h = std::get_if<Hypothesis>(&s.just)) {
      if (h->index == k) {
        depends[i] = true;
        lifted[i] = out.identity(x);
      } else {
        plain[i] = out.assume(h->index < k ? h->index : h->index - 1);
      }
    } else {
      const auto& m = std::get<ModusPonens>(s.just);
      if (!depends[m.minor] && !depends[m.major]) {
        plain[i] = out.mp(*plain[m.minor], *plain[m.major]);
      } else {
        depends[i] = true;
        const Formula& u = d.steps[m.minor].formula;
        const std::size_t lu = lift(m.minor);
        const std::size_t lv = lift(m.major);
        const std::size_t ax =
            out.axiom(AxiomId::Ax0_1b, impl(impl(x, u), impl(impl(x, impl(u, s.formula)), impl(x, s.formula))));
        lifted[i] = out.mp(lv, out.mp(lu, ax));
      }
    }
  }
  return out.finish(lift(n - 1));
}

/// A premise-free Derivation with the same steps.
inline Derivation ground(const HypotheticalDerivation& d) {
  if (!d.hypotheses.empty()) throw PreconditionError("ground: hypotheses remain");
  Derivation out;
  for (const HypStep& s : d.steps) {
    if (const auto* a = std::get_if<AxiomInst>(&s.just))
      out.steps.push_back({s.formula, *a});
    else if (const auto* m = std::get_if<ModusPonens>(&s.just))
      out.steps.push_back({s.formula, *m});
    else
      throw PreconditionError("ground: hypothesis step without hypotheses");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schema derivations (Ax0 only)

/// ((a | (a -> b)) -> b) <-> b
inline Derivation lemma26(const Formula& a, const Formula& b) {
  const Formula ab = impl(a, b);
  const Formula c = disj(a, ab);
  ProofBuilder pb;
  const std::size_t forward = pb.discharge(impl(c, b), [&](ProofBuilder& in, std::size_t h) {
    const std::size_t a_to_b = in.discharge(a, [&](ProofBuilder& in2, std::size_t x) {
      return in2.mp(in2.or_left(x, ab), in2.copy_from(in, h));
    });
    return in.mp(in.or_right(a, a_to_b), h);
  });
  const std::size_t backward = pb.axiom(AxiomId::Ax0_1a, impl(b, impl(c, b)));
  return ground(pb.finish(pb.and_intro(forward, backward)));
}

namespace detail {

inline std::size_t lemma27_step(ProofBuilder& b, std::size_t h, std::span<const Formula> as, const Formula& goal,
                                std::vector<std::size_t> cases, std::size_t i) {
  if (i == as.size()) {
    std::size_t k = cases.back();
    for (std::size_t j = cases.size() - 1; j-- > 0;) k = b.and_intro(cases[j], k);
    return b.mp(k, h);
  }
  const Formula& a = as[i];
  const Formula a_goal = impl(a, goal);
  const Formula c = disj(a, a_goal);
  // c_i -> goal
  const std::size_t f = b.discharge(c, [&](ProofBuilder& in, std::size_t ci) {
    std::vector<std::size_t> inner;
    for (std::size_t fact : cases) inner.push_back(in.copy_from(b, fact));
    inner.push_back(ci);
    return lemma27_step(in, in.copy_from(b, h), as, goal, std::move(inner), i + 1);
  });
  // a_i -> goal
  const std::size_t g = b.discharge(a, [&](ProofBuilder& in, std::size_t x) {
    return in.mp(in.or_left(x, a_goal), in.copy_from(b, f));
  });
  return b.mp(b.or_right(a, g), f);
}

}  // namespace detail

/// The conjunction used by lemma27: right-nested over a_i | (a_i -> b).
inline Formula lemma27_conjunction(std::span<const Formula> as, const Formula& b) {
  std::vector<Formula> parts;
  for (const Formula& a : as) parts.push_back(disj(a, impl(a, b)));
  return big_conj(parts);
}

/// (&_i (a_i | (a_i -> b)) -> b) -> b
inline Derivation lemma27(std::span<const Formula> as, const Formula& b) {
  if (as.empty()) throw PreconditionError("lemma27 needs at least one formula");
  const Formula k = lemma27_conjunction(as, b);
  ProofBuilder pb;
  const std::size_t top = pb.discharge(impl(k, b), [&](ProofBuilder& in, std::size_t h) {
    return detail::lemma27_step(in, h, as, b, {}, 0);
  });
  return ground(pb.finish(top));
}

namespace detail {

/// Proves c <-> c' under hypothesis `eq` : a <-> b, where c' replaces the
/// positions `paths` of c by b.
inline std::size_t equivalence(ProofBuilder& pb, std::size_t eq, const Formula& c, std::vector<Path> paths,
                               const Formula& b) {
  if (paths.empty()) {
    const std::size_t id = pb.identity(c);
    return pb.and_intro(id, id);
  }
  if (paths.front().empty()) return eq;
  if (c.is_box() || c.is(Connective::Var)) throw PreconditionError("replacement position below []");

  std::vector<Path> kid_paths[2];
  for (Path& p : paths) {
    const std::uint8_t i = p.front();
    kid_paths[i].emplace_back(p.begin() + 1, p.end());
  }
  auto sub = [&](std::size_t i) {
    const Formula& kid = c.child(i);
    const std::size_t e = equivalence(pb, eq, kid, kid_paths[i], b);
    return std::pair{pb.and_left(e), pb.and_right(e)};
  };

  if (c.is(Connective::Neg)) {
    const auto [fwd, bwd] = sub(0);
    const Formula l = c.inner();
    const Formula l2 = pb.formula(fwd).right();
    // ~x -> ~y from y -> x
    auto contra = [&](std::size_t y_to_x, const Formula& x, const Formula& y) {
      return pb.discharge(neg(x), [&](ProofBuilder& in, std::size_t n) {
        const std::size_t w = in.weaken(n, y);
        const std::size_t ax = in.axiom(AxiomId::Ax0_7, impl(impl(y, x), impl(impl(y, neg(x)), neg(y))));
        return in.mp(w, in.mp(in.copy_from(pb, y_to_x), ax));
      });
    };
    const std::size_t f = contra(bwd, l, l2);
    const std::size_t g = contra(fwd, l2, l);
    return pb.and_intro(f, g);
  }

  const auto [lf, lb] = sub(0);
  const auto [rf, rb] = sub(1);
  const Formula l = c.left(), r = c.right();
  const Formula l2 = pb.formula(lf).right(), r2 = pb.formula(rf).right();

  auto direction = [&](const Formula& x, const Formula& y, const Formula& xl, const Formula& xr, const Formula& yl,
                       const Formula& yr, std::size_t lto, std::size_t lfrom, std::size_t rto) -> std::size_t {
    // x -> y, where x = xl op xr, y = yl op yr; lto: xl -> yl, lfrom: yl -> xl, rto: xr -> yr
    switch (c.op()) {
      case Connective::Conj:
        return pb.discharge(x, [&](ProofBuilder& in, std::size_t h) {
          const std::size_t a = in.mp(in.and_left(h), in.copy_from(pb, lto));
          const std::size_t b2 = in.mp(in.and_right(h), in.copy_from(pb, rto));
          return in.and_intro(a, b2);
        });
      case Connective::Disj: {
        const std::size_t into_left = pb.chain(lto, pb.axiom(AxiomId::Ax0_5a, impl(yl, y)));
        const std::size_t into_right = pb.chain(rto, pb.axiom(AxiomId::Ax0_5b, impl(yr, y)));
        const std::size_t ax = pb.axiom(AxiomId::Ax0_6, impl(impl(xl, y), impl(impl(xr, y), impl(x, y))));
        return pb.mp(into_right, pb.mp(into_left, ax));
      }
      case Connective::Impl:
        return pb.discharge(x, [&](ProofBuilder& in, std::size_t h) {
          return in.chain(in.chain(in.copy_from(pb, lfrom), h), in.copy_from(pb, rto));
        });
      default:
        throw PreconditionError("unexpected connective");
    }
  };
  const Formula c2 = c.with_children(l2, r2);
  const std::size_t f = direction(c, c2, l, r, l2, r2, lf, lb, rf);
  const std::size_t g = direction(c2, c, l2, r2, l, r, lb, lf, rb);
  return pb.and_intro(f, g);
}

}  // namespace detail

/// (a <-> b) -> (c <-> c[occ : b]) for positional occurrences of a in c that
/// do not lie inside a []-subformula of c.
inline Derivation replacement_derivation(const Formula& a, const Formula& b, const Formula& c,
                                         const OccurrenceSet& occ) {
  if (auto common = validate_occurrences(c, occ); common && !(*common == a))
    throw InvalidPathError("occurrences do not address " + print(a));
  for (const Path& p : occ.positions)
    if (under_box(c, p)) throw PreconditionError("an addressed occurrence lies inside a []-subformula");
  ProofBuilder pb;
  const std::size_t top = pb.discharge(iff(a, b), [&](ProofBuilder& in, std::size_t e) {
    return detail::equivalence(in, e, c, occ.positions, b);
  });
  return ground(pb.finish(top));
}

// ---------------------------------------------------------------------------
// Refinement and purification

/// Keeps the steps needed for `fact` (which becomes the last step).
inline Derivation prune(const Derivation& d, std::size_t fact) {
  std::vector<bool> needed(d.steps.size(), false);
  needed.at(fact) = true;
  for (std::size_t i = fact + 1; i-- > 0;) {
    if (!needed[i]) continue;
    if (const auto* m = std::get_if<ModusPonens>(&d.steps[i].just)) needed[m->minor] = needed[m->major] = true;
    if (const auto* s = std::get_if<SubstStep>(&d.steps[i].just)) needed[s->source] = true;
  }
  Derivation out{d.premises, {}};
  std::vector<std::size_t> at(d.steps.size());
  for (std::size_t i = 0; i <= fact; ++i) {
    if (!needed[i]) continue;
    at[i] = out.steps.size();
    Step s = d.steps[i];
    if (auto* m = std::get_if<ModusPonens>(&s.just)) *m = ModusPonens{at[m->minor], at[m->major]};
    if (auto* st = std::get_if<SubstStep>(&s.just)) st->source = at[st->source];
    out.steps.push_back(std::move(s));
  }
  return out;
}

namespace detail {

class PullBack {
 public:
  explicit PullBack(const Derivation& d) : in_(d) { out_.premises = d.premises; }

  std::size_t rebuild(std::size_t i, const Substitution& s) {
    const Step& step = in_.steps[i];
    Formula target = substitute(step.formula, s);
    if (auto it = index_.find(target); it != index_.end()) return it->second;
    return std::visit(
        [&](const auto& j) -> std::size_t {
          using J = std::decay_t<decltype(j)>;
          if constexpr (std::is_same_v<J, AxiomInst>) {
            const auto vars = variables(base_formula(j.id));
            return push(target, AxiomInst{j.id, compose(s, j.subst).restricted(vars).normalized()});
          } else if constexpr (std::is_same_v<J, PremiseInst>) {
            const auto vars = variables(in_.premises[j.index]);
            return push(target, PremiseInst{j.index, compose(s, j.subst).restricted(vars).normalized()});
          } else if constexpr (std::is_same_v<J, ModusPonens>) {
            const std::size_t a = rebuild(j.minor, s);
            const std::size_t b = rebuild(j.major, s);
            return push(target, ModusPonens{a, b});
          } else {
            return rebuild(j.source, compose(s, j.subst));
          }
        },
        step.just);
  }

  Derivation result(std::size_t conclusion) const { return prune(out_, conclusion); }

 private:
  std::size_t push(const Formula& f, Justification j) {
    const std::size_t at = out_.steps.size();
    index_.emplace(f, at);
    out_.steps.push_back({f, std::move(j)});
    return at;
  }

  const Derivation& in_;
  Derivation out_;
  std::unordered_map<Formula, std::size_t> index_;
};

}  // namespace detail

/// Eliminates the standalone substitution rule by composing each
/// substitution into the axiom and premise instances it reaches.
/// Sub-derivations are duplicated per substitution.
inline Derivation pull_back_substitutions(const Derivation& d) {
  if (is_refined(d)) return d;
  if (auto r = verify(d, modes::any()); !r.ok)
    throw PreconditionError("pull_back_substitutions: invalid derivation at step " +
                            std::to_string(r.failures.front().step) + ": " + r.failures.front().reason);
  detail::PullBack pb(d);
  const std::size_t last = pb.rebuild(d.steps.size() - 1, Substitution{});
  return pb.result(last);
}

/// Turns a premise-free Int[] derivation into a refined one whose maximal
/// []-subformulas are exactly those of its conclusion.
///
/// After refinement every outermost []-subformula is abstracted to a fresh
/// variable, which yields a []-free Int derivation (the Ax0 templates are
/// []-free); the variables standing for outermost []-subformulas of the
/// conclusion are then mapped back.
inline Derivation purify(const Derivation& d) {
  if (!d.premises.empty()) throw PreconditionError("purify: premise-free derivations only");
  if (auto r = verify(d, modes::int_box()); !r.ok)
    throw PreconditionError("purify: not an Int[] derivation (step " + std::to_string(r.failures.front().step) +
                            ": " + r.failures.front().reason + ")");
  Derivation refined = pull_back_substitutions(d);
  if (is_pure(refined)) return refined;

  std::uint32_t next = 0;
  for (const Step& s : refined.steps) next = std::max(next, s.formula.max_var() + 1);
  std::unordered_map<Formula, std::uint32_t> fresh;
  std::function<Formula(const Formula&)> abstract = [&](const Formula& f) -> Formula {
    if (!f.has_box()) return f;
    if (f.is_box()) {
      auto [it, inserted] = fresh.emplace(f, next);
      if (inserted) ++next;
      return var(it->second);
    }
    if (f.arity() == 1) return f.with_children(abstract(f.inner()), f.inner());
    return f.with_children(abstract(f.left()), abstract(f.right()));
  };

  const Formula& goal = refined.conclusion();
  const Formula abstract_goal = abstract(goal);
  Substitution back;
  for (std::uint32_t v : variables(abstract_goal))
    for (const auto& [boxed, idx] : fresh)
      if (idx == v) back.bind(v, boxed);

  Derivation out;
  for (const Step& s : refined.steps) {
    Formula f = back.apply(abstract(s.formula));
    if (const auto* a = std::get_if<AxiomInst>(&s.just)) {
      auto m = match_axiom(a->id, f);
      if (!m) throw std::logic_error("purify: abstraction broke an axiom instance");
      out.steps.push_back({std::move(f), AxiomInst{a->id, std::move(*m)}});
    } else {
      out.steps.push_back({std::move(f), s.just});
    }
  }
  if (!(out.conclusion() == goal)) throw std::logic_error("purify: conclusion changed");
  return out;
}

/// s applied to every formula of a refined derivation (substitutions composed
/// into the leaves).
inline Derivation instantiate(const Derivation& d, const Substitution& s) {
  if (!is_refined(d)) throw PreconditionError("instantiate: refined derivations only");
  Derivation out{d.premises, {}};
  for (const Step& st : d.steps) {
    Formula f = substitute(st.formula, s);
    if (const auto* a = std::get_if<AxiomInst>(&st.just)) {
      const auto vars = variables(base_formula(a->id));
      out.steps.push_back({std::move(f), AxiomInst{a->id, compose(s, a->subst).restricted(vars).normalized()}});
    } else if (const auto* p = std::get_if<PremiseInst>(&st.just)) {
      const auto vars = variables(d.premises[p->index]);
      out.steps.push_back({std::move(f), PremiseInst{p->index, compose(s, p->subst).restricted(vars).normalized()}});
    } else {
      out.steps.push_back({std::move(f), st.just});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// KM certificates for sublogic axioms

/// KM derivation of [](p0 -> p1) -> ([]p0 -> []p1).
///
/// From []p0 and [](p0 -> p1), Ax3 with p1 := []p1 gives []p1 | ([]p1 -> p0)
/// and []p1 | ([]p1 -> (p0 -> p1)). If neither left disjunct holds then
/// []p1 -> p1, hence p1 by Ax2 and []p1 by Ax1.
inline Derivation mhc_k_certificate() {
  const Formula p = var(0), q = var(1);
  const Formula bq = box(q);
  ProofBuilder pb;
  const std::size_t top = pb.discharge(box(impl(p, q)), [&](ProofBuilder& in, std::size_t hpq) {
    return in.discharge(box(p), [&](ProofBuilder& in2, std::size_t hp) {
      const std::size_t split_p =
          in2.mp(hp, in2.axiom(AxiomId::Ax3, impl(box(p), disj(bq, impl(bq, p)))));
      const std::size_t split_pq = in2.mp(in2.copy_from(in, hpq),
                                          in2.axiom(AxiomId::Ax3, impl(box(impl(p, q)), disj(bq, impl(bq, impl(p, q))))));
      const std::size_t id = in2.identity(bq);
      const std::size_t from_p = in2.discharge(impl(bq, p), [&](ProofBuilder& in3, std::size_t qp) {
        const std::size_t from_pq = in3.discharge(impl(bq, impl(p, q)), [&](ProofBuilder& in4, std::size_t qpq) {
          const std::size_t loop_case = in4.discharge(bq, [&](ProofBuilder& in5, std::size_t b) {
            const std::size_t pp = in5.mp(b, in5.copy_from(in3, qp));
            const std::size_t ppq = in5.mp(b, in5.copy_from(in4, qpq));
            return in5.mp(pp, ppq);
          });
          const std::size_t qf = in4.mp(loop_case, in4.axiom(AxiomId::Ax2, impl(impl(bq, q), q)));
          return in4.mp(qf, in4.axiom(AxiomId::Ax1, impl(q, bq)));
        });
        return in3.or_elim(in3.copy_from(in2, split_pq), in3.copy_from(in2, id), from_pq);
      });
      return in2.or_elim(split_p, id, from_p);
    });
  });
  return ground(pb.finish(top));
}

/// A premise-free KM derivation of base_formula(id).
inline Derivation km_certificate(AxiomId id) {
  if (id == AxiomId::MhcK) return mhc_k_certificate();
  Derivation d;
  d.steps.push_back({base_formula(id), AxiomInst{id, {}}});
  return d;
}

}  // namespace km
