#pragma once

#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "km/builder.hpp"

namespace km {

enum class CaseTag : std::uint8_t { I, II, IIgamma, III, IIIgamma, IV, IVgamma, V };

inline std::string_view case_name(CaseTag t) {
  switch (t) {
    case CaseTag::I: return "I";
    case CaseTag::II: return "II";
    case CaseTag::IIgamma: return "IIγ";
    case CaseTag::III: return "III";
    case CaseTag::IIIgamma: return "IIIγ";
    case CaseTag::IV: return "IV";
    case CaseTag::IVgamma: return "IVγ";
    case CaseTag::V: return "V";
  }
  return "?";
}

struct EliminationTrace {
  Formula chosen_box = one();
  std::vector<Formula> ax3_instances;
  Formula delta = one();
  std::vector<CaseTag> case_tags;  // one per input step
  std::size_t input_rank = 0;
  std::size_t output_rank = 0;
};

struct EliminationResult {
  Derivation derivation;
  EliminationTrace trace;
};

inline std::string format_trace(const EliminationTrace& t) {
  std::ostringstream out;
  out << "chosen box: " << print(t.chosen_box) << '\n';
  out << "ax3 instances: " << t.ax3_instances.size() << '\n';
  for (const Formula& f : t.ax3_instances) out << "  " << print(f) << '\n';
  out << "delta: " << print(t.delta) << '\n';
  out << "cases:";
  for (std::size_t i = 0; i < t.case_tags.size(); ++i) out << ' ' << (i + 1) << ':' << case_name(t.case_tags[i]);
  out << '\n';
  out << "rank: " << t.input_rank << " -> " << t.output_rank << '\n';
  return out.str();
}

/// Step formulas justified as Ax3 instances whose antecedent is box_gamma, in
/// step order.
inline std::vector<Formula> collect_ax3(const Derivation& d, const Formula& box_gamma) {
  std::vector<Formula> out;
  for (const Step& s : d.steps) {
    const auto* a = std::get_if<AxiomInst>(&s.just);
    if (a && a->id == AxiomId::Ax3 && s.formula.is(Connective::Impl) && s.formula.left() == box_gamma)
      out.push_back(s.formula);
  }
  return out;
}

/// Right-nested conjunction of the Ax3 consequents with []gamma replaced by
/// the constant 1; the constant itself for an empty list.
inline Formula compute_delta(std::span<const Formula> ax3, const Formula& gamma) {
  const Formula bg = box(gamma);
  std::vector<Formula> parts;
  for (const Formula& f : ax3) {
    if (!f.is(Connective::Impl) || !(f.left() == bg)) throw PreconditionError("malformed Ax3 instance " + print(f));
    const Formula& c = f.right();
    if (!c.is(Connective::Disj) || !c.right().is(Connective::Impl) || !(c.right().left() == c.left()) ||
        !(c.right().right() == gamma))
      throw PreconditionError("malformed Ax3 instance " + print(f));
    parts.push_back(replace_all(c, bg, one()));
  }
  if (parts.empty()) return one();
  return big_conj(parts);
}

namespace detail {

/// Flat derivation under construction; each formula is derived once.
class DerivationWriter {
 public:
  explicit DerivationWriter(std::vector<Formula> premises) { d_.premises = std::move(premises); }

  std::size_t push(const Formula& f, Justification j) {
    if (auto it = index_.find(f); it != index_.end()) return it->second;
    const std::size_t at = d_.steps.size();
    index_.emplace(f, at);
    d_.steps.push_back({f, std::move(j)});
    return at;
  }

  /// Appends a refined premise-free derivation.
  std::size_t append(const Derivation& block) {
    std::vector<std::size_t> at(block.steps.size());
    for (std::size_t i = 0; i < block.steps.size(); ++i) {
      const Step& s = block.steps[i];
      if (const auto* m = std::get_if<ModusPonens>(&s.just))
        at[i] = push(s.formula, ModusPonens{at[m->minor], at[m->major]});
      else if (std::holds_alternative<AxiomInst>(s.just))
        at[i] = push(s.formula, s.just);
      else
        throw std::logic_error("append: unexpected justification");
    }
    return at.back();
  }

  Derivation finish(std::size_t conclusion) const { return prune(d_, conclusion); }

 private:
  Derivation d_;
  std::unordered_map<Formula, std::size_t> index_;
};

/// Index of the conjunct `part` in a right-nested conjunction of n parts,
/// as a fact of pb.
inline std::size_t conjunct(ProofBuilder& pb, std::size_t fact, std::size_t j, std::size_t n) {
  for (std::size_t i = 0; i < j; ++i) fact = pb.and_right(fact);
  return j + 1 < n ? pb.and_left(fact) : fact;
}

}  // namespace detail

/// One rank-reducing step: eliminates the maximal []-subformula box_gamma,
/// replacing it by delta throughout.
inline EliminationResult eliminate_step(const Derivation& d, const Formula& box_gamma) {
  if (!is_refined(d)) throw PreconditionError("eliminate_step: input must be refined");
  if (auto r = verify(d, modes::km()); !r.ok)
    throw PreconditionError("eliminate_step: not a KM derivation (step " + std::to_string(r.failures.front().step) +
                            ": " + r.failures.front().reason + ")");
  const std::vector<Formula> formulas = d.formulas();
  const std::vector<Formula> maximal = maximal_subformulas(formulas);
  if (maximal.empty()) throw PreconditionError("eliminate_step: derivation has rank 0");
  if (!box_gamma.is_box() || std::find(maximal.begin(), maximal.end(), box_gamma) == maximal.end())
    throw PreconditionError("eliminate_step: " + print(box_gamma) + " is not a maximal []-subformula");
  for (const Formula& p : d.premises)
    if (occurs_in(box_gamma, p)) throw PreconditionError("eliminate_step: " + print(box_gamma) + " occurs in a premise");

  const Formula gamma = box_gamma.inner();
  EliminationTrace trace;
  trace.chosen_box = box_gamma;
  trace.ax3_instances = collect_ax3(d, box_gamma);
  trace.delta = compute_delta(trace.ax3_instances, gamma);
  trace.input_rank = maximal.size();
  const Formula& delta = trace.delta;
  const bool trivial = trace.ax3_instances.empty();
  const std::size_t k = trace.ax3_instances.size();

  std::vector<Formula> betas;  // beta_j with []gamma replaced by 1
  for (const Formula& f : trace.ax3_instances) betas.push_back(replace_all(f.right().left(), box_gamma, one()));

  auto star = [&](const Formula& f) { return replace_all(f, box_gamma, delta); };
  auto star_subst = [&](const Substitution& s) {
    Substitution out;
    for (const auto& [v, f] : s) out.bind(v, star(f));
    return out;
  };

  detail::DerivationWriter w(d.premises);
  std::vector<std::size_t> block(d.steps.size());

  for (std::size_t i = 0; i < d.steps.size(); ++i) {
    const Step& s = d.steps[i];
    const Formula f = star(s.formula);
    CaseTag tag = CaseTag::V;

    if (const auto* m = std::get_if<ModusPonens>(&s.just)) {
      block[i] = w.push(f, ModusPonens{block[m->minor], block[m->major]});
    } else if (const auto* p = std::get_if<PremiseInst>(&s.just)) {
      tag = CaseTag::I;
      Substitution t = star_subst(p->subst);
      if (!(substitute(d.premises[p->index], t) == f)) {
        auto m = match(d.premises[p->index], f);
        if (!m) throw PreconditionError("eliminate_step: premise instance at step " + std::to_string(i + 1) +
                                        " does not survive the replacement");
        t = std::move(*m);
      }
      block[i] = w.push(f, PremiseInst{p->index, std::move(t)});
    } else {
      const auto& a = std::get<AxiomInst>(s.just);
      ProofBuilder pb;
      std::optional<std::size_t> fact;
      if (a.id == AxiomId::Ax1 && s.formula == impl(gamma, box_gamma)) {
        tag = CaseTag::IIgamma;
        // gamma -> delta
        if (trivial) {
          fact = pb.weaken(pb.one_fact(), gamma);
        } else {
          fact = pb.discharge(gamma, [&](ProofBuilder& in, std::size_t h) {
            std::vector<std::size_t> parts;
            for (const Formula& b : betas) parts.push_back(in.or_right(b, in.weaken(h, b)));
            std::size_t acc = parts.back();
            for (std::size_t j = parts.size() - 1; j-- > 0;) acc = in.and_intro(parts[j], acc);
            return acc;
          });
        }
      } else if (a.id == AxiomId::Ax2 && s.formula == impl(impl(box_gamma, gamma), gamma)) {
        tag = CaseTag::IIIgamma;
        // (delta -> gamma) -> gamma
        if (trivial) {
          fact = pb.discharge(impl(one(), gamma),
                              [&](ProofBuilder& in, std::size_t h) { return in.mp(in.one_fact(), h); });
        } else {
          fact = pb.theorem(lemma27(betas, gamma));
        }
      } else if (a.id == AxiomId::Ax3 && s.formula.left() == box_gamma) {
        tag = CaseTag::IVgamma;
        // delta -> c_j*, from delta -> c_j and (1 <-> delta) -> (c_j <-> c_j*)
        const Formula body = s.formula.right();
        const Formula cj = replace_all(body, box_gamma, one());
        const OccurrenceSet occ = occurrences(body, box_gamma);
        std::size_t j = 0;
        while (!(trace.ax3_instances[j] == s.formula)) ++j;
        const Derivation repl = replacement_derivation(one(), delta, cj, occ);
        fact = pb.discharge(delta, [&](ProofBuilder& in, std::size_t h) {
          const std::size_t c = detail::conjunct(in, h, j, k);
          const std::size_t to = in.weaken(h, one());
          const std::size_t from = in.weaken(in.one_fact(), delta);
          const std::size_t eq = in.mp(in.and_intro(to, from), in.theorem(repl));
          return in.mp(c, in.and_left(eq));
        });
      } else {
        tag = is_int_axiom(a.id) ? CaseTag::I
              : a.id == AxiomId::Ax1 ? CaseTag::II
              : a.id == AxiomId::Ax2 ? CaseTag::III
                                     : CaseTag::IV;
        Substitution t = star_subst(a.subst);
        if (!(substitute(base_formula(a.id), t) == f)) {
          auto m = match_axiom(a.id, f);
          if (!m) throw PreconditionError("eliminate_step: axiom instance at step " + std::to_string(i + 1) +
                                          " does not survive the replacement");
          t = std::move(*m);
        }
        block[i] = w.push(f, AxiomInst{a.id, t.normalized()});
      }
      if (fact) {
        const Derivation b = ground(pb.finish(*fact));
        if (!(b.conclusion() == f)) throw std::logic_error("eliminate_step: block proves the wrong formula");
        block[i] = w.append(b);
      }
    }
    trace.case_tags.push_back(tag);
  }

  EliminationResult out{w.finish(block.back()), std::move(trace)};
  if (auto r = verify(out.derivation, modes::km()); !r.ok)
    throw std::logic_error("eliminate_step: output fails at step " + std::to_string(r.failures.front().step) + ": " +
                           r.failures.front().reason);
  out.trace.output_rank = derivation_rank(out.derivation);
  return out;
}

/// First maximal []-subformula in step order.
inline Formula canonical_box(const Derivation& d) {
  const std::vector<Formula> m = maximal_subformulas(d.formulas());
  if (m.empty()) throw PreconditionError("derivation has rank 0");
  return m.front();
}

struct ExtractionResult {
  Derivation derivation;
  std::vector<EliminationTrace> traces;
};

/// Repeated elimination down to a []-free Int derivation with the same
/// premises and conclusion.
inline ExtractionResult extract_assertoric_traced(const Derivation& d, std::size_t max_iterations = 10000) {
  for (const Formula& p : d.premises)
    if (p.has_box()) throw PreconditionError("extract: premise " + print(p) + " is not assertoric");
  if (d.conclusion().has_box()) throw PreconditionError("extract: conclusion is not assertoric");
  if (auto r = verify(d, modes::km()); !r.ok)
    throw PreconditionError("extract: not a KM derivation (step " + std::to_string(r.failures.front().step) + ": " +
                            r.failures.front().reason + ")");
  ExtractionResult out{pull_back_substitutions(d), {}};
  while (derivation_rank(out.derivation) > 0) {
    if (out.traces.size() == max_iterations) throw SearchLimitError("extract: iteration limit reached");
    EliminationResult step = eliminate_step(out.derivation, canonical_box(out.derivation));
    out.derivation = std::move(step.derivation);
    out.traces.push_back(std::move(step.trace));
  }
  if (auto r = verify(out.derivation, modes::intuitionistic()); !r.ok)
    throw std::logic_error("extract: result is not an Int derivation");
  return out;
}

inline Derivation extract_assertoric(const Derivation& d) { return extract_assertoric_traced(d).derivation; }

// ---------------------------------------------------------------------------
// Sublogic equipollence

/// Replaces axioms outside KM by instances of their KM certificates.
inline Derivation splice_certificates(const Derivation& d) {
  const CalculusMode target = modes::km();
  const Derivation refined = pull_back_substitutions(d);
  detail::DerivationWriter w(refined.premises);
  std::vector<std::size_t> at(refined.steps.size());
  for (std::size_t i = 0; i < refined.steps.size(); ++i) {
    const Step& s = refined.steps[i];
    if (const auto* m = std::get_if<ModusPonens>(&s.just)) {
      at[i] = w.push(s.formula, ModusPonens{at[m->minor], at[m->major]});
    } else if (const auto* a = std::get_if<AxiomInst>(&s.just); a && !target.admits(a->id)) {
      at[i] = w.append(instantiate(km_certificate(a->id), a->subst));
    } else {
      at[i] = w.push(s.formula, s.just);
    }
  }
  return w.finish(at.back());
}

enum class Relation : std::uint8_t { Int, Sublogic, KM };

struct Witness {
  Relation relation;
  Derivation derivation;
};

struct EquipollenceReport {
  Derivation int_witness;
  Derivation sublogic_witness;
  Derivation km_witness;
  VerificationReport int_report;
  VerificationReport sublogic_report;
  VerificationReport km_report;
  bool ok = false;
};

/// From a witness of one of Int+G |- A, S+G |- A, KM+G |- A, produces and
/// verifies witnesses of the other two.
inline EquipollenceReport check_sublogic_equipollence(const CalculusMode& mode, const std::vector<Formula>& gamma,
                                                      const Formula& a, const Witness& witness) {
  for (const Formula& g : gamma)
    if (g.has_box()) throw PreconditionError("equipollence: premise " + print(g) + " is not assertoric");
  if (a.has_box()) throw PreconditionError("equipollence: goal is not assertoric");
  const CalculusMode km_mode = modes::km();
  for (AxiomId id : mode.axioms)
    if (!km_mode.admits(id) && id != AxiomId::MhcK)
      throw PreconditionError("equipollence: no KM certificate for " + std::string(axiom_name(id)));

  const Derivation& w = witness.derivation;
  if (w.premises != gamma || !(w.conclusion() == a)) throw PreconditionError("equipollence: witness proves something else");
  const CalculusMode stated = witness.relation == Relation::Int ? modes::intuitionistic()
                              : witness.relation == Relation::KM ? km_mode
                                                                 : mode;
  if (auto r = verify(w, stated); !r.ok)
    throw PreconditionError("equipollence: witness fails at step " + std::to_string(r.failures.front().step) + ": " +
                            r.failures.front().reason);

  EquipollenceReport out;
  switch (witness.relation) {
    case Relation::Int:
      out.int_witness = out.sublogic_witness = out.km_witness = w;
      break;
    case Relation::KM:
      out.km_witness = w;
      out.int_witness = extract_assertoric(w);
      out.sublogic_witness = out.int_witness;
      break;
    case Relation::Sublogic:
      out.sublogic_witness = w;
      out.km_witness = splice_certificates(w);
      out.int_witness = extract_assertoric(out.km_witness);
      break;
  }
  out.int_report = verify(out.int_witness, modes::intuitionistic());
  out.sublogic_report = verify(out.sublogic_witness, mode);
  out.km_report = verify(out.km_witness, km_mode);
  auto same_ends = [&](const Derivation& x) { return x.premises == gamma && x.conclusion() == a; };
  out.ok = out.int_report.ok && out.sublogic_report.ok && out.km_report.ok && same_ends(out.int_witness) &&
           same_ends(out.sublogic_witness) && same_ends(out.km_witness);
  return out;
}

}  // namespace km
