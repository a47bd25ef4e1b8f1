#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "km/algebra.hpp"
#include "km/derivation_io.hpp"
#include "km/eliminate.hpp"

namespace km::cli {

inline constexpr const char* kToolVersion = "km-tool 1.0";

enum Exit : int { kOk = 0, kFailed = 1, kUsage = 2 };

namespace detail {

/// The first of int, intbox, km, mhc accepting d.
inline std::optional<CalculusMode> smallest_mode(const Derivation& d) {
  for (const CalculusMode& m : {modes::intuitionistic(), modes::int_box(), modes::km(), modes::mhc()})
    if (verify(d, m).ok) return m;
  return std::nullopt;
}

inline void emit(const Derivation& d, const std::string& mode, const std::vector<std::string>& notes,
                 const std::string& path, std::ostream& out) {
  std::vector<std::string> header{kToolVersion, "mode: " + mode};
  header.insert(header.end(), notes.begin(), notes.end());
  if (path.empty()) {
    write_derivation(out, d, header);
    return;
  }
  std::ofstream file(path);
  if (!file) throw Error("cannot write " + path);
  write_derivation(file, d, header);
}

inline std::string trace_summary(const EliminationTrace& t) {
  return "eliminated " + print(t.chosen_box) + " with delta " + print(t.delta) + ", rank " +
         std::to_string(t.input_rank) + " -> " + std::to_string(t.output_rank);
}

/// "." is the root; otherwise child indices separated by dots, e.g. "0.1".
inline Path parse_path(const std::string& text) {
  Path p;
  if (text == ".") return p;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, '.')) {
    if (part != "0" && part != "1") throw ParseError("bad path component '" + part + "'", 1, 1);
    p.push_back(static_cast<std::uint8_t>(part[0] - '0'));
  }
  return p;
}

inline void print_refutation(const Refutation& r, std::ostream& out) {
  out << "countermodel: upset algebra of a " << r.poset.size() << "-point poset, " << r.algebra.size()
      << " elements\n";
  write_algebra(out, r.algebra, r.box ? &*r.box : nullptr);
  out << "valuation: " << print(r.valuation) << '\n';
}

}  // namespace detail

/// Runs one command; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Proof toolkit for Int, Int[], KM and mHC derivations", "km"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string file, mode_name = "km", output, box_text, name, goal, identities = "i,ii,iii,iv";
  std::vector<std::string> args, premises;
  std::size_t max_size = 3;
  std::optional<std::size_t> max_results;

  auto* check = app.add_subcommand("check", "verify a derivation file");
  check->add_option("file", file)->required();
  check->add_option("--mode", mode_name, "int, intbox, km or mhc")->check(CLI::IsMember({"int", "intbox", "km", "mhc"}));

  auto* refine = app.add_subcommand("refine", "eliminate the substitution rule");
  refine->add_option("file", file)->required();
  refine->add_option("-o,--output", output);

  auto* purify_cmd = app.add_subcommand("purify", "purify a premise-free Int[] derivation");
  purify_cmd->add_option("file", file)->required();
  purify_cmd->add_option("-o,--output", output);

  auto* maximal = app.add_subcommand("maximal", "maximal []-subformulas of a derivation or of formulas");
  maximal->add_option("input", args, "derivation file, or one or more formulas")->required();

  auto* rank_cmd = app.add_subcommand("rank", "rank of a refined derivation");
  rank_cmd->add_option("file", file)->required();

  auto* eliminate = app.add_subcommand("eliminate", "one rank-reducing step");
  eliminate->add_option("file", file)->required();
  eliminate->add_option("--box", box_text, "the maximal []-subformula to eliminate")->required();
  eliminate->add_option("-o,--output", output);

  auto* extract = app.add_subcommand("extract", "turn a KM derivation with assertoric ends into an Int derivation");
  extract->add_option("file", file)->required();
  extract->add_option("-o,--output", output);

  auto* schema = app.add_subcommand(
      "schema", "emit a schema derivation: lemma26 A B | lemma27 B A1 .. An | replacement A B C PATH.. | mhc-k");
  schema->add_option("name", name)->required()->check(CLI::IsMember({"lemma26", "lemma27", "replacement", "mhc-k"}));
  schema->add_option("args", args);
  schema->add_option("-o,--output", output);

  auto* alg_check = app.add_subcommand("algebra-check", "classify an algebra file and its box");
  alg_check->add_option("file", file)->required();

  auto* alg_search = app.add_subcommand("algebra-search", "list the box tables satisfying identities");
  alg_search->add_option("file", file)->required();
  alg_search->add_option("--identities", identities, "comma-separated subset of i,ii,iii,iv, or none");
  alg_search->add_option("--max-results", max_results);

  auto* refute = app.add_subcommand("refute", "search upset algebras for a countermodel");
  refute->add_option("goal", goal)->required();
  refute->add_option("--premise", premises);
  refute->add_option("--max-size", max_size, "largest poset size")->check(CLI::Range(1, 5));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (check->parsed()) {
      const Derivation d = read_derivation_file(file);
      const CalculusMode mode = *modes::by_name(mode_name);
      const VerificationReport r = verify(d, mode);
      if (!r.ok) {
        out << "fail\n";
        for (const Failure& f : r.failures) out << "step " << f.step << ": " << f.reason << '\n';
        return kFailed;
      }
      out << "ok " << (r.refined ? "refined" : "unrefined");
      if (r.refined) out << " rank=" << r.derivation_rank << (r.pure ? " pure" : "");
      out << '\n';
      return kOk;
    }
    if (refine->parsed()) {
      const Derivation d = read_derivation_file(file);
      const auto mode = detail::smallest_mode(d);
      if (!mode) {
        err << "input does not verify in any mode\n";
        return kFailed;
      }
      const Derivation r = pull_back_substitutions(d);
      detail::emit(r, mode->name, {"refined: " + std::to_string(r.steps.size()) + " steps"}, output, out);
      return kOk;
    }
    if (purify_cmd->parsed()) {
      const Derivation r = purify(read_derivation_file(file));
      detail::emit(r, verify(r, modes::intuitionistic()).ok ? "int" : "intbox",
                   {"purified: rank " + std::to_string(derivation_rank(r))}, output, out);
      return kOk;
    }
    if (maximal->parsed()) {
      std::vector<Formula> list;
      if (args.size() == 1 && std::filesystem::is_regular_file(args[0])) {
        list = read_derivation_file(args[0]).formulas();
      } else {
        for (const std::string& a : args) list.push_back(parse(a));
      }
      for (const Formula& m : maximal_subformulas(list)) out << print(m) << '\n';
      return kOk;
    }
    if (rank_cmd->parsed()) {
      out << derivation_rank(read_derivation_file(file)) << '\n';
      return kOk;
    }
    if (eliminate->parsed()) {
      const EliminationResult r = eliminate_step(read_derivation_file(file), parse(box_text));
      out << format_trace(r.trace);
      detail::emit(r.derivation, "km", {detail::trace_summary(r.trace)}, output, out);
      return kOk;
    }
    if (extract->parsed()) {
      const ExtractionResult r = extract_assertoric_traced(read_derivation_file(file));
      std::vector<std::string> notes;
      for (const EliminationTrace& t : r.traces) {
        notes.push_back(detail::trace_summary(t));
        if (!output.empty()) out << detail::trace_summary(t) << '\n';
      }
      detail::emit(r.derivation, "int", notes, output, out);
      return kOk;
    }
    if (schema->parsed()) {
      Derivation d;
      std::string mode = "int";
      auto need = [&](std::size_t lo) {
        if (args.size() < lo) throw ParseError("schema " + name + " needs at least " + std::to_string(lo) + " arguments", 1, 1);
      };
      if (name == "lemma26") {
        need(2);
        if (args.size() != 2) throw ParseError("lemma26 takes A and B", 1, 1);
        d = lemma26(parse(args[0]), parse(args[1]));
      } else if (name == "lemma27") {
        need(2);
        std::vector<Formula> as;
        for (std::size_t i = 1; i < args.size(); ++i) as.push_back(parse(args[i]));
        d = lemma27(as, parse(args[0]));
      } else if (name == "replacement") {
        need(3);
        OccurrenceSet occ;
        for (std::size_t i = 3; i < args.size(); ++i) occ.positions.push_back(detail::parse_path(args[i]));
        d = replacement_derivation(parse(args[0]), parse(args[1]), parse(args[2]), occ);
      } else {
        d = mhc_k_certificate();
        mode = "km";
      }
      if (mode == "int" && !verify(d, modes::intuitionistic()).ok) mode = "intbox";
      detail::emit(d, mode, {"schema: " + name}, output, out);
      return kOk;
    }
    if (alg_check->parsed()) {
      const AlgebraFile a = read_algebra_file(file);
      out << "heyting algebra: " << a.algebra.size() << " elements\n";
      if (a.box) out << "box identities: " << print(check_box_identities(a.algebra, *a.box)) << '\n';
      const BoxTable c = canonical_box(a.algebra);
      out << "canonical box:";
      for (Element e : c) out << ' ' << e;
      out << "\ncanonical box identities: " << print(check_box_identities(a.algebra, c)) << '\n';
      return kOk;
    }
    if (alg_search->parsed()) {
      const AlgebraFile a = read_algebra_file(file);
      SearchOptions opt;
      opt.max_results = max_results;
      const auto tables = search_box(a.algebra, parse_identities(identities), opt);
      for (const BoxTable& t : tables) {
        out << "box:";
        for (Element e : t) out << ' ' << e;
        out << '\n';
      }
      out << "found " << tables.size() << '\n';
      return kOk;
    }
    if (refute->parsed()) {
      std::vector<Formula> gamma;
      for (const std::string& p : premises) gamma.push_back(parse(p));
      if (auto r = refutes(gamma, parse(goal), max_size)) {
        detail::print_refutation(*r, out);
        return kFailed;
      }
      out << "no countermodel up to poset size " << max_size << '\n';
      return kOk;
    }
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const SearchLimitError& e) {
    err << "error: " << e.what() << '\n';
    return kFailed;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace km::cli
