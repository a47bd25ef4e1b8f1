#include <gtest/gtest.h>

#include "corpus.hpp"

using namespace km;
using corpus::f;
using corpus::p;

namespace {

bool ok_in(const Derivation& d, const CalculusMode& m) { return verify(d, m).ok; }

std::vector<std::string> tags(const EliminationTrace& t) {
  std::vector<std::string> out;
  for (CaseTag c : t.case_tags) out.emplace_back(case_name(c));
  return out;
}

bool only_ax0_added(const Derivation& in, const Derivation& out) {
  std::set<AxiomId> before;
  for (const Step& s : in.steps)
    if (const auto* a = std::get_if<AxiomInst>(&s.just)) before.insert(a->id);
  for (const Step& s : out.steps)
    if (const auto* a = std::get_if<AxiomInst>(&s.just))
      if (!is_int_axiom(a->id) && !before.contains(a->id)) return false;
  return true;
}

/// Premises p0 and p0 -> p1; uses MHC_K to reach []p1.
Derivation mhc_witness() {
  return read_derivation_string(
      "premise: p0\n"
      "premise: p0 -> p1\n"
      "1. p0 ; premise 1\n"
      "2. p0 -> []p0 ; axiom Ax1\n"
      "3. []p0 ; mp 1 2\n"
      "4. p0 -> p1 ; premise 2\n"
      "5. (p0 -> p1) -> [](p0 -> p1) ; axiom Ax1 [p0:=p0 -> p1]\n"
      "6. [](p0 -> p1) ; mp 4 5\n"
      "7. [](p0 -> p1) -> []p0 -> []p1 ; axiom MHC_K\n"
      "8. []p0 -> []p1 ; mp 6 7\n"
      "9. []p1 ; mp 3 8\n"
      "10. []p1 -> p2 | (p2 -> p1) ; axiom Ax3 [p0:=p1; p1:=p2]\n"
      "11. p2 | (p2 -> p1) ; mp 9 10\n");
}

}  // namespace

TEST(CollectAx3, Examples) {
  const auto d0 = collect_ax3(corpus::d0(), f("[]p0"));
  ASSERT_EQ(d0.size(), 1u);
  EXPECT_EQ(d0[0], f("[]p0 -> p1 | (p1 -> p0)"));
  EXPECT_TRUE(collect_ax3(corpus::identity_p0(), f("[]p0")).empty());
  EXPECT_TRUE(collect_ax3(corpus::d0(), f("[]p1")).empty());
  const auto two = collect_ax3(corpus::d0_twice(), f("[]p0"));
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0], f("[]p0 -> p1 | (p1 -> p0)"));
  EXPECT_EQ(two[1], f("[]p0 -> p2 & p1 | (p2 & p1 -> p0)"));
}

TEST(ComputeDelta, Examples) {
  const std::vector<Formula> one_inst{f("[]p0 -> p1 | (p1 -> p0)")};
  EXPECT_EQ(compute_delta(one_inst, p(0)), f("p1 | (p1 -> p0)"));
  EXPECT_EQ(compute_delta(std::vector<Formula>{}, p(0)), one());
  const std::vector<Formula> boxed{f("[]p0 -> []p0 & p2 | ([]p0 & p2 -> p0)")};
  EXPECT_EQ(compute_delta(boxed, p(0)), f("(p0 -> p0) & p2 | ((p0 -> p0) & p2 -> p0)"));
  const std::vector<Formula> three{f("[]p0 -> p1 | (p1 -> p0)"), f("[]p0 -> p2 | (p2 -> p0)"),
                                   f("[]p0 -> p3 | (p3 -> p0)")};
  EXPECT_EQ(compute_delta(three, p(0)), f("(p1 | (p1 -> p0)) & ((p2 | (p2 -> p0)) & (p3 | (p3 -> p0)))"));
  const std::vector<Formula> bad{f("[]p1 -> p1 | (p1 -> p1)")};
  EXPECT_THROW(compute_delta(bad, p(0)), PreconditionError);
}

TEST(EliminateStep, D0) {
  const Derivation d = corpus::d0();
  const EliminationResult r = eliminate_step(d, f("[]p0"));
  EXPECT_EQ(tags(r.trace), (std::vector<std::string>{"I", "IIγ", "V", "IVγ", "V"}));
  EXPECT_EQ(r.trace.delta, f("p1 | (p1 -> p0)"));
  EXPECT_EQ(r.trace.input_rank, 1u);
  EXPECT_EQ(r.trace.output_rank, 0u);
  EXPECT_EQ(r.derivation.premises, d.premises);
  EXPECT_EQ(r.derivation.conclusion(), f("p1 | (p1 -> p0)"));
  EXPECT_TRUE(ok_in(r.derivation, modes::km()));
  EXPECT_TRUE(ok_in(r.derivation, modes::intuitionistic()));
  EXPECT_TRUE(only_ax0_added(d, r.derivation));
}

TEST(EliminateStep, Ax2Ax3Theorem) {
  const Derivation d = corpus::ax2_ax3_theorem();
  ASSERT_TRUE(ok_in(d, modes::km()));
  const EliminationResult r = eliminate_step(d, f("[]p0"));
  const auto t = tags(r.trace);
  EXPECT_NE(std::find(t.begin(), t.end(), "IIIγ"), t.end());
  EXPECT_NE(std::find(t.begin(), t.end(), "IVγ"), t.end());
  EXPECT_EQ(r.derivation.conclusion(), f("((p1 | (p1 -> p0)) -> p0) -> p0"));
  EXPECT_EQ(derivation_rank(r.derivation), 0u);
  EXPECT_TRUE(ok_in(r.derivation, modes::intuitionistic()));
}

TEST(EliminateStep, RankTwoKeepsOtherBox) {
  const Derivation d = corpus::flat_rank2();
  const EliminationResult r = eliminate_step(d, f("[]p1"));
  EXPECT_EQ(r.trace.input_rank, 2u);
  EXPECT_EQ(r.trace.output_rank, 1u);
  const auto m = maximal_subformulas(r.derivation.formulas());
  EXPECT_EQ(m, std::vector<Formula>{f("[]p0")});
  EXPECT_TRUE(ok_in(r.derivation, modes::km()));
  EXPECT_EQ(r.derivation.conclusion(), replace_all(d.conclusion(), f("[]p1"), r.trace.delta));
}

TEST(EliminateStep, CorpusLowersRankWithCanonicalBox) {
  for (const auto& e : corpus::elimination_corpus()) {
    const Formula b = canonical_box(e.d);
    const EliminationResult r = eliminate_step(e.d, b);
    EXPECT_TRUE(ok_in(r.derivation, modes::km())) << e.name;
    EXPECT_EQ(r.derivation.premises, e.d.premises) << e.name;
    EXPECT_EQ(r.derivation.conclusion(), replace_all(e.d.conclusion(), b, r.trace.delta)) << e.name;
    EXPECT_LT(r.trace.output_rank, r.trace.input_rank) << e.name;
    EXPECT_TRUE(is_refined(r.derivation)) << e.name;
    EXPECT_TRUE(only_ax0_added(e.d, r.derivation)) << e.name;
    EXPECT_EQ(r.trace.case_tags.size(), e.d.steps.size()) << e.name;
    for (const Formula& m : maximal_subformulas(r.derivation.formulas())) EXPECT_FALSE(m == b) << e.name;
  }
}

// When gamma itself contains a box, the boxes of gamma can become maximal
// after elimination, so the rank need not drop: eliminating [][]p0 from a
// derivation that also needs []p0 on its own leaves []p0 maximal.
TEST(EliminateStep, NestedGammaMayKeepRank) {
  ProofBuilder pb;
  const auto a = pb.axiom(AxiomId::Ax1, f("p0 -> []p0"));
  const auto b = pb.chain(a, pb.axiom(AxiomId::Ax1, f("[]p0 -> [][]p0")));
  const Derivation d = ground(pb.finish(pb.and_intro(a, b)));
  ASSERT_EQ(maximal_subformulas(d.formulas()), std::vector<Formula>{f("[][]p0")});
  const EliminationResult r = eliminate_step(d, f("[][]p0"));
  EXPECT_TRUE(ok_in(r.derivation, modes::km()));
  EXPECT_EQ(r.derivation.conclusion(), f("(p0 -> []p0) & (p0 -> p0 -> p0)"));
  EXPECT_EQ(r.trace.input_rank, 1u);
  EXPECT_EQ(r.trace.output_rank, 1u);
  EXPECT_EQ(maximal_subformulas(r.derivation.formulas()), std::vector<Formula>{f("[]p0")});
  // The measure that does fall is the box depth of the maximal formulas.
  const EliminationResult next = eliminate_step(r.derivation, f("[]p0"));
  EXPECT_EQ(next.trace.output_rank, 0u);
  EXPECT_TRUE(ok_in(next.derivation, modes::intuitionistic()));
}

TEST(EliminateStep, Errors) {
  EXPECT_THROW(eliminate_step(corpus::d0(), f("[]p1")), PreconditionError);
  EXPECT_THROW(eliminate_step(corpus::d0(), f("p0")), PreconditionError);
  EXPECT_THROW(eliminate_step(corpus::nested_rank2(), f("[]p0")), PreconditionError);
  Derivation unrefined = corpus::identity_p0();
  unrefined.steps.push_back({f("[]p1 -> []p1"), SubstStep{4, {{0, f("[]p1")}}}});
  EXPECT_THROW(eliminate_step(unrefined, f("[]p1")), PreconditionError);
  Derivation premise_box = corpus::d0();
  premise_box.premises[0] = f("[]p0");
  premise_box.steps[0].formula = f("[]p0");
  EXPECT_THROW(eliminate_step(premise_box, f("[]p0")), PreconditionError);
  EXPECT_THROW(canonical_box(corpus::identity_p0()), PreconditionError);
}

TEST(CanonicalBox, FirstMaximalInStepOrder) {
  EXPECT_EQ(canonical_box(corpus::d0()), f("[]p0"));
  EXPECT_EQ(canonical_box(corpus::nested_rank2()), f("[]p1"));
}

TEST(Extract, D0) {
  const ExtractionResult r = extract_assertoric_traced(corpus::d0());
  EXPECT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.derivation.premises, std::vector<Formula>{p(0)});
  EXPECT_EQ(r.derivation.conclusion(), f("p1 | (p1 -> p0)"));
  EXPECT_TRUE(ok_in(r.derivation, modes::intuitionistic()));
}

TEST(Extract, AssertoricInputUnchanged) {
  const Derivation d = corpus::identity_p0();
  const ExtractionResult r = extract_assertoric_traced(d);
  EXPECT_TRUE(r.traces.empty());
  EXPECT_EQ(format_derivation(r.derivation), format_derivation(d));
}

TEST(Extract, Ax2Ax3TheoremGivesIntProofValidOnSmallAlgebras) {
  const Derivation r = extract_assertoric(corpus::ax2_ax3_theorem());
  EXPECT_EQ(r.conclusion(), f("((p1 | (p1 -> p0)) -> p0) -> p0"));
  EXPECT_TRUE(ok_in(r, modes::intuitionistic()));
  for (std::size_t n = 1; n <= 3; ++n)
    for (const Poset& q : posets_up_to_iso(n)) EXPECT_TRUE(validates(r.conclusion(), upset_algebra(q)));
}

TEST(Extract, WholeAssertoricCorpus) {
  for (const auto& e : corpus::assertoric_corpus()) {
    const ExtractionResult r = extract_assertoric_traced(e.d);
    EXPECT_TRUE(ok_in(r.derivation, modes::intuitionistic())) << e.name;
    EXPECT_EQ(r.derivation.premises, e.d.premises) << e.name;
    EXPECT_EQ(r.derivation.conclusion(), e.d.conclusion()) << e.name;
  }
}

TEST(Extract, Errors) {
  EXPECT_THROW(extract_assertoric(corpus::double_box()), PreconditionError);
  Derivation bad = corpus::d0();
  bad.steps[3].formula = f("[]p0 -> p1");
  EXPECT_THROW(extract_assertoric(bad), PreconditionError);
  EXPECT_THROW(extract_assertoric(mhc_witness()), PreconditionError);
}

TEST(Equipollence, KmWitnessD0) {
  const EquipollenceReport r =
      check_sublogic_equipollence(modes::mhc(), {p(0)}, f("p1 | (p1 -> p0)"), {Relation::KM, corpus::d0()});
  EXPECT_TRUE(r.ok);
  EXPECT_TRUE(r.int_report.ok);
  EXPECT_TRUE(r.sublogic_report.ok);
  EXPECT_TRUE(r.km_report.ok);
}

TEST(Equipollence, IntWitnessIsReused) {
  const Derivation d = corpus::identity_p0();
  const EquipollenceReport r = check_sublogic_equipollence(modes::mhc(), {}, f("p0 -> p0"), {Relation::Int, d});
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(format_derivation(r.km_witness), format_derivation(d));
}

TEST(Equipollence, MhcWitnessThroughCertificate) {
  const Derivation w = mhc_witness();
  ASSERT_TRUE(ok_in(w, modes::mhc()));
  ASSERT_FALSE(ok_in(w, modes::km()));
  const EquipollenceReport r =
      check_sublogic_equipollence(modes::mhc(), w.premises, w.conclusion(), {Relation::Sublogic, w});
  EXPECT_TRUE(r.ok);
  EXPECT_TRUE(r.km_report.ok);
  EXPECT_TRUE(r.int_report.ok);
  bool has_k = false;
  for (const Step& s : r.km_witness.steps)
    if (const auto* a = std::get_if<AxiomInst>(&s.just)) has_k = has_k || a->id == AxiomId::MhcK;
  EXPECT_FALSE(has_k);
}

TEST(Equipollence, Errors) {
  EXPECT_THROW(check_sublogic_equipollence(modes::mhc(), {p(0)}, f("p1"), {Relation::KM, corpus::d0()}),
               PreconditionError);
  EXPECT_THROW(check_sublogic_equipollence(modes::mhc(), {p(0)}, f("p1 | (p1 -> p0)"), {Relation::Int, corpus::d0()}),
               PreconditionError);
  EXPECT_THROW(check_sublogic_equipollence(modes::mhc(), {f("[]p0")}, f("p0"), {Relation::KM, corpus::d0()}),
               PreconditionError);
}

TEST(Trace, Format) {
  const std::string text = format_trace(eliminate_step(corpus::d0(), f("[]p0")).trace);
  EXPECT_NE(text.find("chosen box: []p0"), std::string::npos);
  EXPECT_NE(text.find("cases: 1:I 2:IIγ 3:V 4:IVγ 5:V"), std::string::npos);
  EXPECT_NE(text.find("rank: 1 -> 0"), std::string::npos);
}
