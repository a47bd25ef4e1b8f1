#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "km/formula.hpp"

namespace km {

/// Axiom tags. The Ax0 family is the intuitionistic base (Kleene's schemata
/// 1a-8 at p0, p1, p2); Ax1-Ax3 are the KM axioms; MhcK is the K axiom of mHC.
enum class AxiomId : std::uint8_t {
  Ax0_1a,
  Ax0_1b,
  Ax0_3,
  Ax0_4a,
  Ax0_4b,
  Ax0_5a,
  Ax0_5b,
  Ax0_6,
  Ax0_7,
  Ax0_8,
  Ax1,
  Ax2,
  Ax3,
  MhcK,
};

inline constexpr std::array<AxiomId, 10> kIntAxioms = {
    AxiomId::Ax0_1a, AxiomId::Ax0_1b, AxiomId::Ax0_3, AxiomId::Ax0_4a, AxiomId::Ax0_4b,
    AxiomId::Ax0_5a, AxiomId::Ax0_5b, AxiomId::Ax0_6, AxiomId::Ax0_7,  AxiomId::Ax0_8,
};

inline constexpr std::array<AxiomId, 14> kAllAxioms = {
    AxiomId::Ax0_1a, AxiomId::Ax0_1b, AxiomId::Ax0_3, AxiomId::Ax0_4a, AxiomId::Ax0_4b,
    AxiomId::Ax0_5a, AxiomId::Ax0_5b, AxiomId::Ax0_6, AxiomId::Ax0_7,  AxiomId::Ax0_8,
    AxiomId::Ax1,    AxiomId::Ax2,    AxiomId::Ax3,   AxiomId::MhcK,
};

inline bool is_int_axiom(AxiomId id) { return static_cast<std::uint8_t>(id) <= static_cast<std::uint8_t>(AxiomId::Ax0_8); }

inline std::string_view axiom_name(AxiomId id) {
  switch (id) {
    case AxiomId::Ax0_1a: return "Ax0_1a";
    case AxiomId::Ax0_1b: return "Ax0_1b";
    case AxiomId::Ax0_3: return "Ax0_3";
    case AxiomId::Ax0_4a: return "Ax0_4a";
    case AxiomId::Ax0_4b: return "Ax0_4b";
    case AxiomId::Ax0_5a: return "Ax0_5a";
    case AxiomId::Ax0_5b: return "Ax0_5b";
    case AxiomId::Ax0_6: return "Ax0_6";
    case AxiomId::Ax0_7: return "Ax0_7";
    case AxiomId::Ax0_8: return "Ax0_8";
    case AxiomId::Ax1: return "Ax1";
    case AxiomId::Ax2: return "Ax2";
    case AxiomId::Ax3: return "Ax3";
    case AxiomId::MhcK: return "MHC_K";
  }
  return "?";
}

inline std::optional<AxiomId> axiom_from_name(std::string_view name) {
  for (AxiomId id : kAllAxioms)
    if (axiom_name(id) == name) return id;
  return std::nullopt;
}

inline const Formula& base_formula(AxiomId id) {
  static const std::array<Formula, kAllAxioms.size()> table = [] {
    const Formula p0 = var(0), p1 = var(1), p2 = var(2);
    return std::array<Formula, kAllAxioms.size()>{
        impl(p0, impl(p1, p0)),
        impl(impl(p0, p1), impl(impl(p0, impl(p1, p2)), impl(p0, p2))),
        impl(p0, impl(p1, conj(p0, p1))),
        impl(conj(p0, p1), p0),
        impl(conj(p0, p1), p1),
        impl(p0, disj(p0, p1)),
        impl(p1, disj(p0, p1)),
        impl(impl(p0, p2), impl(impl(p1, p2), impl(disj(p0, p1), p2))),
        impl(impl(p0, p1), impl(impl(p0, neg(p1)), neg(p0))),
        impl(neg(p0), impl(p0, p1)),
        impl(p0, box(p0)),
        impl(impl(box(p0), p0), p0),
        impl(box(p0), disj(p1, impl(p1, p0))),
        impl(box(impl(p0, p1)), impl(box(p0), box(p1))),
    };
  }();
  return table[static_cast<std::size_t>(id)];
}

/// The substitution s over the base formula's variables with s(base(id)) = f.
inline std::optional<Substitution> match_axiom(AxiomId id, const Formula& f) { return match(base_formula(id), f); }

// ---------------------------------------------------------------------------
// Derivations

struct AxiomInst {
  AxiomId id;
  Substitution subst;
};
struct PremiseInst {
  std::size_t index;  // into Derivation::premises
  Substitution subst;
};
struct ModusPonens {
  std::size_t minor;  // step holding A
  std::size_t major;  // step holding A -> B
};
struct SubstStep {
  std::size_t source;
  Substitution subst;
};

using Justification = std::variant<AxiomInst, PremiseInst, ModusPonens, SubstStep>;

struct Step {
  Formula formula;
  Justification just;
};

/// Hilbert-style derivation. Step indices are 0-based in memory and 1-based
/// in files; the conclusion is the last step.
struct Derivation {
  std::vector<Formula> premises;
  std::vector<Step> steps;

  const Formula& conclusion() const {
    if (steps.empty()) throw PreconditionError("empty derivation has no conclusion");
    return steps.back().formula;
  }
  std::vector<Formula> formulas() const {
    std::vector<Formula> out;
    out.reserve(steps.size());
    for (const Step& s : steps) out.push_back(s.formula);
    return out;
  }
};

enum class Restriction : std::uint8_t { Unrestricted, BoxFreeOnly };

/// Selects a deducibility relation: axiom tags plus restrictions on
/// substitution images and on the language of step formulas.
struct CalculusMode {
  std::string name;
  std::set<AxiomId> axioms;
  Restriction substitution = Restriction::Unrestricted;
  Restriction language = Restriction::Unrestricted;

  bool admits(AxiomId id) const { return axioms.contains(id); }
  friend bool operator==(const CalculusMode& a, const CalculusMode& b) {
    return a.axioms == b.axioms && a.substitution == b.substitution && a.language == b.language;
  }
};

namespace modes {

inline CalculusMode with_int_axioms(std::string name, std::initializer_list<AxiomId> extra, Restriction subst,
                                    Restriction lang) {
  CalculusMode m{std::move(name), {kIntAxioms.begin(), kIntAxioms.end()}, subst, lang};
  m.axioms.insert(extra.begin(), extra.end());
  return m;
}

inline CalculusMode intuitionistic() {
  return with_int_axioms("int", {}, Restriction::BoxFreeOnly, Restriction::BoxFreeOnly);
}
inline CalculusMode int_box() { return with_int_axioms("intbox", {}, Restriction::Unrestricted, Restriction::Unrestricted); }
inline CalculusMode km() {
  return with_int_axioms("km", {AxiomId::Ax1, AxiomId::Ax2, AxiomId::Ax3}, Restriction::Unrestricted,
                         Restriction::Unrestricted);
}
inline CalculusMode mhc() {
  return with_int_axioms("mhc", {AxiomId::MhcK, AxiomId::Ax1, AxiomId::Ax3}, Restriction::Unrestricted,
                         Restriction::Unrestricted);
}

/// Every known tag, unrestricted; used for structural checks.
inline CalculusMode any() {
  return with_int_axioms("any", {AxiomId::Ax1, AxiomId::Ax2, AxiomId::Ax3, AxiomId::MhcK},
                         Restriction::Unrestricted, Restriction::Unrestricted);
}

inline std::optional<CalculusMode> by_name(std::string_view name) {
  if (name == "int") return intuitionistic();
  if (name == "intbox") return int_box();
  if (name == "km") return km();
  if (name == "mhc") return mhc();
  return std::nullopt;
}

}  // namespace modes

struct Failure {
  std::size_t step;  // 1-based; 0 for header-level problems
  std::string reason;
};

struct VerificationReport {
  bool ok = false;
  CalculusMode mode;
  std::vector<Failure> failures;
  bool refined = false;
  bool pure = false;
  std::size_t derivation_rank = 0;
};

inline bool is_refined(const Derivation& d) {
  for (const Step& s : d.steps)
    if (std::holds_alternative<SubstStep>(s.just)) return false;
  return true;
}

/// Purity is measured against <premises..., conclusion>.
inline bool is_pure(const Derivation& d) {
  if (!is_refined(d)) throw PreconditionError("purity is defined for refined derivations only");
  const std::vector<Formula> steps = d.formulas();
  std::vector<Formula> ends = d.premises;
  ends.push_back(d.conclusion());
  const std::vector<Formula> outer = maximal_subformulas(ends);
  const FormulaSet allowed(outer.begin(), outer.end());
  for (const Formula& m : maximal_subformulas(steps))
    if (!allowed.contains(m)) return false;
  return true;
}

inline std::size_t derivation_rank(const Derivation& d) {
  if (!is_refined(d)) throw PreconditionError("rank is defined for refined derivations only");
  return rank(d.formulas());
}

namespace detail {

inline void check_subst(const Substitution& s, const CalculusMode& mode, std::size_t step,
                        std::vector<Failure>& out) {
  if (mode.substitution != Restriction::BoxFreeOnly) return;
  for (const auto& [v, f] : s)
    if (f.has_box()) out.push_back({step, "substitution image for p" + std::to_string(v) + " contains []"});
}

}  // namespace detail

/// Checks every step under `mode` and reports all failures.
inline VerificationReport verify(const Derivation& d, const CalculusMode& mode) {
  VerificationReport r;
  r.mode = mode;
  auto fail = [&](std::size_t step, std::string why) { r.failures.push_back({step, std::move(why)}); };

  if (d.steps.empty()) fail(0, "derivation has no steps");
  if (mode.language == Restriction::BoxFreeOnly)
    for (std::size_t k = 0; k < d.premises.size(); ++k)
      if (d.premises[k].has_box()) fail(0, "premise " + std::to_string(k + 1) + " contains []");

  for (std::size_t i = 0; i < d.steps.size(); ++i) {
    const std::size_t n = i + 1;
    const Step& step = d.steps[i];
    if (mode.language == Restriction::BoxFreeOnly && step.formula.has_box()) fail(n, "formula contains []");

    std::visit(
        [&](const auto& j) {
          using J = std::decay_t<decltype(j)>;
          if constexpr (std::is_same_v<J, AxiomInst>) {
            if (!mode.admits(j.id)) fail(n, std::string(axiom_name(j.id)) + " is not an axiom of mode " + mode.name);
            detail::check_subst(j.subst, mode, n, r.failures);
            if (!(substitute(base_formula(j.id), j.subst) == step.formula))
              fail(n, "not the stated instance of " + std::string(axiom_name(j.id)));
          } else if constexpr (std::is_same_v<J, PremiseInst>) {
            if (j.index >= d.premises.size()) {
              fail(n, "no premise " + std::to_string(j.index + 1));
              return;
            }
            detail::check_subst(j.subst, mode, n, r.failures);
            if (!(substitute(d.premises[j.index], j.subst) == step.formula))
              fail(n, "not the stated instance of premise " + std::to_string(j.index + 1));
          } else if constexpr (std::is_same_v<J, ModusPonens>) {
            if (j.minor >= i || j.major >= i) {
              fail(n, "modus ponens refers to a later step");
              return;
            }
            const Formula& major = d.steps[j.major].formula;
            if (!major.is(Connective::Impl) || !(major.left() == d.steps[j.minor].formula) ||
                !(major.right() == step.formula))
              fail(n, "modus ponens does not apply");
          } else {
            if (j.source >= i) {
              fail(n, "substitution refers to a later step");
              return;
            }
            detail::check_subst(j.subst, mode, n, r.failures);
            if (!(substitute(d.steps[j.source].formula, j.subst) == step.formula))
              fail(n, "not the stated substitution instance of step " + std::to_string(j.source + 1));
          }
        },
        step.just);
  }

  r.ok = r.failures.empty();
  r.refined = is_refined(d);
  if (!d.steps.empty()) {
    r.derivation_rank = rank(d.formulas());
    r.pure = r.refined && is_pure(d);
  }
  return r;
}

}  // namespace km
