#pragma once

// Hand-built derivations shared by the unit tests and the acceptance runner.

#include <random>
#include <string>
#include <vector>

#include "km/km.hpp"

namespace corpus {

using namespace km;

struct Entry {
  std::string name;
  Derivation d;
};

inline Formula p(std::uint32_t i) { return var(i); }
inline Formula f(const std::string& text) { return parse(text); }

inline Derivation single_axiom(AxiomId id, const Substitution& s = {}) {
  Derivation d;
  d.steps.push_back({substitute(base_formula(id), s), AxiomInst{id, s}});
  return d;
}

/// premise p0; p0 -> []p0; []p0; []p0 -> p1 | (p1 -> p0); p1 | (p1 -> p0)
inline Derivation d0() {
  return read_derivation_string(
      "premise: p0\n"
      "1. p0 ; premise 1\n"
      "2. p0 -> []p0 ; axiom Ax1\n"
      "3. []p0 ; mp 1 2\n"
      "4. []p0 -> p1 | (p1 -> p0) ; axiom Ax3\n"
      "5. p1 | (p1 -> p0) ; mp 3 4\n");
}

/// ((p1 | (p1 -> p0)) -> p0) -> p0 from Ax3 and Ax2.
inline Derivation ax2_ax3_theorem() {
  const Formula c = f("p1 | (p1 -> p0)");
  ProofBuilder pb;
  const auto top = pb.discharge(impl(c, p(0)), [&](ProofBuilder& in, std::size_t h) {
    const auto ax3 = in.axiom(AxiomId::Ax3, impl(box(p(0)), c));
    const auto loop = in.chain(ax3, h);
    return in.mp(loop, in.axiom(AxiomId::Ax2, f("([]p0 -> p0) -> p0")));
  });
  return ground(pb.finish(top));
}

/// (&_j (b_j | (b_j -> g)) -> g) -> g from Ax3 instances over []g and Ax2.
inline Derivation ax2_ax3_many(const std::vector<Formula>& betas, const Formula& g) {
  const Formula k = lemma27_conjunction(betas, g);
  ProofBuilder pb;
  const auto top = pb.discharge(impl(k, g), [&](ProofBuilder& in, std::size_t h) {
    const auto to_k = in.discharge(box(g), [&](ProofBuilder& in2, std::size_t b) {
      std::vector<std::size_t> parts;
      for (const Formula& beta : betas)
        parts.push_back(in2.mp(b, in2.axiom(AxiomId::Ax3, impl(box(g), disj(beta, impl(beta, g))))));
      std::size_t acc = parts.back();
      for (std::size_t j = parts.size() - 1; j-- > 0;) acc = in2.and_intro(parts[j], acc);
      return acc;
    });
    const auto loop = in.chain(to_k, h);
    return in.mp(loop, in.axiom(AxiomId::Ax2, impl(impl(box(g), g), g)));
  });
  return ground(pb.finish(top));
}

/// A hypothetical derivation over the given premises as a Derivation whose
/// hypothesis steps are premise instances.
inline Derivation with_premises(const HypotheticalDerivation& hd) {
  Derivation d{hd.hypotheses, {}};
  for (const HypStep& s : hd.steps) {
    if (const auto* a = std::get_if<AxiomInst>(&s.just))
      d.steps.push_back({s.formula, *a});
    else if (const auto* m = std::get_if<ModusPonens>(&s.just))
      d.steps.push_back({s.formula, *m});
    else
      d.steps.push_back({s.formula, PremiseInst{std::get<Hypothesis>(s.just).index, {}}});
  }
  return d;
}

/// Premise p0 with two Ax3 instances over []p0.
inline Derivation d0_twice() {
  ProofBuilder pb({p(0)});
  const auto h = pb.assume(0);
  const auto b = pb.mp(h, pb.axiom(AxiomId::Ax1, f("p0 -> []p0")));
  const auto c1 = pb.mp(b, pb.axiom(AxiomId::Ax3, f("[]p0 -> p1 | (p1 -> p0)")));
  const auto c2 = pb.mp(b, pb.axiom(AxiomId::Ax3, f("[]p0 -> p2 & p1 | (p2 & p1 -> p0)")));
  return with_premises(pb.finish(pb.and_intro(c1, c2)));
}

/// (p1 -> []p1) & ([]p0 -> [][]p0): maximal []p1 and [][]p0.
inline Derivation nested_rank2() {
  ProofBuilder pb;
  const auto a = pb.axiom(AxiomId::Ax1, f("p1 -> []p1"));
  const auto b = pb.axiom(AxiomId::Ax1, f("[]p0 -> [][]p0"));
  return ground(pb.finish(pb.and_intro(a, b)));
}

/// (p0 -> []p0) & (p1 -> []p1)
inline Derivation flat_rank2() {
  ProofBuilder pb;
  const auto a = pb.axiom(AxiomId::Ax1, f("p0 -> []p0"));
  const auto b = pb.axiom(AxiomId::Ax1, f("p1 -> []p1"));
  return ground(pb.finish(pb.and_intro(a, b)));
}

/// (p0 -> []p0) & (p1 -> []p1) & (p2 -> []p2)
inline Derivation flat_rank3() {
  ProofBuilder pb;
  const auto a = pb.axiom(AxiomId::Ax1, f("p0 -> []p0"));
  const auto b = pb.axiom(AxiomId::Ax1, f("p1 -> []p1"));
  const auto c = pb.axiom(AxiomId::Ax1, f("p2 -> []p2"));
  return ground(pb.finish(pb.and_intro(a, pb.and_intro(b, c))));
}

/// p0 -> [][]p0 (the elimination of [][]p0 leaves []p0 maximal).
inline Derivation double_box() {
  ProofBuilder pb;
  const auto a = pb.axiom(AxiomId::Ax1, f("p0 -> []p0"));
  const auto b = pb.axiom(AxiomId::Ax1, f("[]p0 -> [][]p0"));
  return ground(pb.finish(pb.chain(a, b)));
}

/// ~[]p0 -> ~p0 via Ax0_7.
inline Derivation contraposed_ax1() {
  ProofBuilder pb;
  const auto top = pb.discharge(f("~[]p0"), [&](ProofBuilder& in, std::size_t h) {
    const auto w = in.weaken(h, p(0));
    const auto ax = in.axiom(AxiomId::Ax0_7, f("(p0 -> []p0) -> (p0 -> ~[]p0) -> ~p0"));
    return in.mp(w, in.mp(in.axiom(AxiomId::Ax1, f("p0 -> []p0")), ax));
  });
  return ground(pb.finish(top));
}

/// p0 | []p0 -> []p0 via Ax0_6.
inline Derivation or_box() {
  ProofBuilder pb;
  const auto ax1 = pb.axiom(AxiomId::Ax1, f("p0 -> []p0"));
  const auto id = pb.identity(f("[]p0"));
  const auto ax = pb.axiom(AxiomId::Ax0_6, f("(p0 -> []p0) -> ([]p0 -> []p0) -> p0 | []p0 -> []p0"));
  return ground(pb.finish(pb.mp(id, pb.mp(ax1, ax))));
}

/// p0 & p1 -> []p0 & []p1
inline Derivation and_box() {
  ProofBuilder pb;
  const auto top = pb.discharge(f("p0 & p1"), [&](ProofBuilder& in, std::size_t h) {
    const auto a = in.mp(in.and_left(h), in.axiom(AxiomId::Ax1, f("p0 -> []p0")));
    const auto b = in.mp(in.and_right(h), in.axiom(AxiomId::Ax1, f("p1 -> []p1")));
    return in.and_intro(a, b);
  });
  return ground(pb.finish(top));
}

/// ~p0 -> p0 -> []p1 via Ax0_8.
inline Derivation ex_falso_box() { return single_axiom(AxiomId::Ax0_8, {{1, f("[]p1")}}); }

/// p0 -> []p0 | p1
inline Derivation box_or() {
  ProofBuilder pb;
  const auto a = pb.axiom(AxiomId::Ax1, f("p0 -> []p0"));
  const auto b = pb.axiom(AxiomId::Ax0_5a, f("[]p0 -> []p0 | p1"));
  return ground(pb.finish(pb.chain(a, b)));
}

/// p0 -> p0 in five steps.
inline Derivation identity_p0() {
  ProofBuilder pb;
  return ground(pb.finish(pb.identity(p(0))));
}

/// Premise p0 & p1, conclusion p1 | (p1 -> p0) & p1 through []p0.
inline Derivation premise_conj() {
  ProofBuilder pb({f("p0 & p1")});
  const auto h = pb.assume(0);
  const auto a = pb.and_left(h);
  const auto b = pb.mp(a, pb.axiom(AxiomId::Ax1, f("p0 -> []p0")));
  const auto c = pb.mp(b, pb.axiom(AxiomId::Ax3, f("[]p0 -> (p1 & p0) | (p1 & p0 -> p0)")));
  return with_premises(pb.finish(c));
}

/// Premise p2, conclusion via a []-formula with a nested []-free Ax0 use.
inline Derivation premise_p2() {
  ProofBuilder pb({p(2)});
  const auto h = pb.assume(0);
  const auto b = pb.mp(h, pb.axiom(AxiomId::Ax1, f("p2 -> []p2")));
  const auto c = pb.mp(b, pb.axiom(AxiomId::Ax3, f("[]p2 -> ~p1 | (~p1 -> p2)")));
  const auto d = pb.or_left(c, p(3));
  return with_premises(pb.finish(d));
}

/// Premise-free KM derivations covering every KM axiom tag.
inline std::vector<Entry> km_theorems() {
  std::vector<Entry> out;
  const Substitution mix{{0, f("[]p1 & p2")}, {1, f("~p0")}, {2, f("p1 | []p2")}};
  for (AxiomId id : kAllAxioms) {
    if (id == AxiomId::MhcK) continue;
    out.push_back({"axiom " + std::string(axiom_name(id)), single_axiom(id, mix)});
  }
  out.push_back({"identity", identity_p0()});
  out.push_back({"ax2-ax3 theorem", ax2_ax3_theorem()});
  out.push_back({"ax2-ax3 two conjuncts", ax2_ax3_many({p(1), p(2)}, p(0))});
  out.push_back({"mhc-k certificate", mhc_k_certificate()});
  out.push_back({"double box", double_box()});
  out.push_back({"contraposed Ax1", contraposed_ax1()});
  out.push_back({"or box", or_box()});
  out.push_back({"and box", and_box()});
  out.push_back({"ex falso box", ex_falso_box()});
  out.push_back({"box or", box_or()});
  out.push_back({"nested rank 2", nested_rank2()});
  out.push_back({"flat rank 3", flat_rank3()});
  return out;
}

/// Refined KM derivations of rank 1 to 3 on which one elimination step with
/// the canonical box lowers the rank.
inline std::vector<Entry> elimination_corpus() {
  return {
      {"D0", d0()},
      {"ax2-ax3 theorem", ax2_ax3_theorem()},
      {"nested rank 2", nested_rank2()},
      {"D0 with two Ax3 instances", d0_twice()},
      {"mhc-k certificate", mhc_k_certificate()},
      {"ax2-ax3 two conjuncts", ax2_ax3_many({p(1), p(2)}, p(0))},
      {"ax2-ax3 three conjuncts", ax2_ax3_many({p(1), f("p1 -> p2"), p(1)}, p(0))},
      {"contraposed Ax1", contraposed_ax1()},
      {"or box", or_box()},
      {"and box", and_box()},
      {"flat rank 2", flat_rank2()},
      {"flat rank 3", flat_rank3()},
      {"premise p0 & p1", premise_conj()},
      {"premise p2", premise_p2()},
  };
}

/// Members with assertoric premises and conclusion.
inline std::vector<Entry> assertoric_corpus() {
  std::vector<Entry> out;
  for (auto& e : elimination_corpus()) {
    bool ok = !e.d.conclusion().has_box();
    for (const Formula& q : e.d.premises) ok = ok && !q.has_box();
    if (ok) out.push_back(std::move(e));
  }
  for (auto& e : km_theorems())
    if (!e.d.conclusion().has_box()) out.push_back(std::move(e));
  return out;
}

/// Int[] derivations that apply the substitution rule to non-axiom steps.
inline std::vector<Entry> unrefined_corpus() {
  std::vector<Entry> out;
  auto add_subst = [](Derivation d, const Substitution& s) {
    const std::size_t last = d.steps.size() - 1;
    d.steps.push_back({substitute(d.steps[last].formula, s), SubstStep{last, s}});
    return d;
  };
  const Derivation id = identity_p0();
  out.push_back({"identity at []p0", add_subst(id, {{0, f("[]p0")}})});
  out.push_back({"identity at [](p1 & []p2)", add_subst(id, {{0, f("[](p1 & []p2)")}})});
  out.push_back({"identity twice", add_subst(add_subst(id, {{0, f("p1 -> p2")}}), {{1, f("[]p3")}})});
  out.push_back({"lemma26 at boxes", add_subst(lemma26(p(1), p(0)), {{0, f("[]p0")}, {1, f("[]p1 | p2")}})});
  out.push_back({"lemma27 at box", add_subst(lemma27(std::vector<Formula>{p(1), p(2)}, p(0)), {{2, f("[]p5")}})});
  out.push_back({"replacement at box",
                 add_subst(replacement_derivation(p(0), p(1), f("p0 & p2"), OccurrenceSet{{Path{0}}}), {{2, f("[][]p0")}})});
  {
    // Subst on an MP result, then used by a later MP.
    Derivation d = identity_p0();
    const std::size_t id_at = d.steps.size() - 1;
    d.steps.push_back({f("[]p1 -> []p1"), SubstStep{id_at, {{0, f("[]p1")}}}});
    const Formula w = f("([]p1 -> []p1) -> p2 -> []p1 -> []p1");
    d.steps.push_back({w, AxiomInst{AxiomId::Ax0_1a, {{0, f("[]p1 -> []p1")}, {1, p(2)}}}});
    d.steps.push_back({f("p2 -> []p1 -> []p1"), ModusPonens{id_at + 1, id_at + 2}});
    out.push_back({"subst feeding mp", d});
  }
  {
    // Subst of a non-last step plus a further Subst of its result.
    Derivation d = single_axiom(AxiomId::Ax0_4a);
    d.steps.push_back({f("p1 & p0 -> p1"), SubstStep{0, {{0, p(1)}, {1, p(0)}}}});
    d.steps.push_back({f("[]p0 & p0 -> []p0"), SubstStep{1, {{1, f("[]p0")}}}});
    out.push_back({"chained substs", d});
  }
  {
    ProofBuilder pb;
    const auto x = pb.discharge(f("p0 & p1"), [&](ProofBuilder& in, std::size_t h) {
      return in.and_intro(in.and_right(h), in.and_left(h));
    });
    Derivation c = ground(pb.finish(x));
    out.push_back({"conj swap at boxes", add_subst(c, {{0, f("[]p1")}, {1, f("[]~p0")}})});
  }
  {
    Derivation d = lemma26(f("p0 & p1"), p(2));
    d = add_subst(d, {{1, f("[]p0")}});
    d = add_subst(d, {{2, f("[]p2 -> p3")}});
    out.push_back({"lemma26 twice substituted", d});
  }
  return out;
}

/// Random formula of at most the given depth over p0..p(vars-1).
inline Formula random_formula(std::mt19937& rng, int depth, std::uint32_t vars, bool boxes = true) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : (boxes ? 5 : 4));
  std::uniform_int_distribution<std::uint32_t> v(0, vars - 1);
  switch (pick(rng)) {
    case 0: return var(v(rng));
    case 1: return conj(random_formula(rng, depth - 1, vars, boxes), random_formula(rng, depth - 1, vars, boxes));
    case 2: return disj(random_formula(rng, depth - 1, vars, boxes), random_formula(rng, depth - 1, vars, boxes));
    case 3: return impl(random_formula(rng, depth - 1, vars, boxes), random_formula(rng, depth - 1, vars, boxes));
    case 4: return neg(random_formula(rng, depth - 1, vars, boxes));
    default: return box(random_formula(rng, depth - 1, vars, boxes));
  }
}

struct ReplacementCase {
  Formula a, b, c;
  OccurrenceSet occ;
};

/// All positions of a in c (every occurrence, not only outermost ones).
inline std::vector<Path> all_positions(const Formula& c, const Formula& a) {
  std::vector<Path> out;
  std::vector<std::pair<Formula, Path>> stack{{c, {}}};
  while (!stack.empty()) {
    auto [g, path] = stack.back();
    stack.pop_back();
    if (g == a) out.push_back(path);
    for (std::size_t i = 0; i < g.arity(); ++i) {
      Path q = path;
      q.push_back(static_cast<std::uint8_t>(i));
      stack.push_back({g.child(i), q});
    }
  }
  return out;
}

/// Random (A, B, C, occ) with every addressed occurrence outside []-scopes.
inline std::vector<ReplacementCase> replacement_cases(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<ReplacementCase> out;
  while (out.size() < n) {
    const Formula c = random_formula(rng, 4, 3);
    const std::vector<Formula> subs = subformulas(c);
    const Formula a = subs[std::uniform_int_distribution<std::size_t>(0, subs.size() - 1)(rng)];
    std::vector<Path> usable;
    for (Path& q : all_positions(c, a))
      if (!under_box(c, q)) usable.push_back(std::move(q));
    if (usable.empty()) continue;
    OccurrenceSet occ;
    for (const Path& q : usable)
      if (std::bernoulli_distribution(0.7)(rng)) occ.positions.push_back(q);
    if (occ.positions.empty()) occ.positions.push_back(usable.front());
    out.push_back({a, random_formula(rng, 2, 3), c, occ});
  }
  return out;
}

}  // namespace corpus
