#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "km/calculus.hpp"

namespace km {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

inline std::size_t parse_index(std::string_view tok, std::size_t line, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0)
    throw ParseError("expected a positive " + std::string(what) + ", got '" + std::string(tok) + "'", line, 1);
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

/// "[p0:=f; p1:=g]" (brackets included)
inline Substitution parse_substitution(std::string_view text, std::size_t line) {
  text = trim(text);
  if (text.size() < 2 || text.front() != '[' || text.back() != ']')
    throw ParseError("substitution must be enclosed in brackets", line, 1);
  text = text.substr(1, text.size() - 2);
  Substitution s;
  if (trim(text).empty()) return s;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(';', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view entry = trim(text.substr(start, end - start));
    const std::size_t eq = entry.find(":=");
    if (eq == std::string_view::npos) throw ParseError("substitution entry needs ':='", line, 1);
    const Formula lhs = parse(trim(entry.substr(0, eq)), line);
    if (!lhs.is(Connective::Var)) throw ParseError("substitution binds variables only", line, 1);
    if (s.find(lhs.index())) throw ParseError("variable bound twice in substitution", line, 1);
    s.bind(lhs.index(), parse(entry.substr(eq + 2), line));
    start = end + 1;
  }
  return s;
}

/// Splits "<head> [<subst>]" into head and optional substitution.
inline std::pair<std::string_view, Substitution> split_subst(std::string_view just, std::size_t line) {
  const std::size_t open = just.find('[');
  if (open == std::string_view::npos) return {trim(just), Substitution{}};
  return {trim(just.substr(0, open)), parse_substitution(just.substr(open), line)};
}

}  // namespace detail

/// Reads the line-oriented derivation format. Lines starting with '#' are
/// comments; premise headers precede the steps; step numbers are 1-based and
/// consecutive.
inline Derivation read_derivation(std::istream& in) {
  using namespace detail;
  Derivation d;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim(raw);
    if (text.empty() || text.front() == '#') continue;

    if (starts_with(text, "premise:")) {
      if (!d.steps.empty()) throw ParseError("premise header after the first step", line, 1);
      d.premises.push_back(parse(text.substr(8), line));
      continue;
    }

    const std::size_t dot = text.find('.');
    if (dot == std::string_view::npos) throw ParseError("expected '<n>. <formula> ; <justification>'", line, 1);
    const std::size_t number = parse_index(trim(text.substr(0, dot)), line, "step number");
    if (number != d.steps.size() + 1)
      throw ParseError("step numbers must be consecutive; expected " + std::to_string(d.steps.size() + 1), line, 1);
    const std::string_view rest = text.substr(dot + 1);
    const std::size_t semi = rest.find(';');
    if (semi == std::string_view::npos) throw ParseError("missing ';' before the justification", line, 1);
    Formula f = parse(rest.substr(0, semi), line);
    const std::string_view just = trim(rest.substr(semi + 1));

    auto [head, subst] = split_subst(just, line);
    const std::vector<std::string_view> words = split_ws(head);
    if (words.empty()) throw ParseError("missing justification", line, 1);
    const std::string_view kind = words[0];
    auto expect_words = [&](std::size_t n) {
      if (words.size() != n) throw ParseError("wrong number of arguments for '" + std::string(kind) + "'", line, 1);
    };
    auto step_ref = [&](std::string_view tok) {
      const std::size_t k = parse_index(tok, line, "step reference");
      if (k > d.steps.size()) throw ParseError("reference to step " + std::to_string(k) + " is not earlier", line, 1);
      return k - 1;
    };

    Justification j;
    if (kind == "axiom") {
      expect_words(2);
      auto id = axiom_from_name(words[1]);
      if (!id) throw ParseError("unknown axiom '" + std::string(words[1]) + "'", line, 1);
      j = AxiomInst{*id, std::move(subst)};
    } else if (kind == "premise") {
      expect_words(2);
      const std::size_t k = parse_index(words[1], line, "premise number");
      if (k > d.premises.size()) throw ParseError("no premise " + std::to_string(k), line, 1);
      j = PremiseInst{k - 1, std::move(subst)};
    } else if (kind == "mp") {
      expect_words(3);
      if (!subst.empty()) throw ParseError("mp takes no substitution", line, 1);
      j = ModusPonens{step_ref(words[1]), step_ref(words[2])};
    } else if (kind == "subst") {
      expect_words(2);
      j = SubstStep{step_ref(words[1]), std::move(subst)};
    } else {
      throw ParseError("unknown justification '" + std::string(kind) + "'", line, 1);
    }
    d.steps.push_back({std::move(f), std::move(j)});
  }
  if (d.steps.empty()) throw ParseError("derivation has no steps", line, 1);
  return d;
}

inline Derivation read_derivation_string(const std::string& text) {
  std::istringstream in(text);
  return read_derivation(in);
}

inline Derivation read_derivation_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_derivation(in);
}

inline std::string format_justification(const Justification& j) {
  return std::visit(
      [](const auto& x) -> std::string {
        using J = std::decay_t<decltype(x)>;
        auto with_subst = [](std::string head, const Substitution& s) {
          return s.empty() ? head : head + " " + print(s);
        };
        if constexpr (std::is_same_v<J, AxiomInst>)
          return with_subst("axiom " + std::string(axiom_name(x.id)), x.subst);
        else if constexpr (std::is_same_v<J, PremiseInst>)
          return with_subst("premise " + std::to_string(x.index + 1), x.subst);
        else if constexpr (std::is_same_v<J, ModusPonens>)
          return "mp " + std::to_string(x.minor + 1) + " " + std::to_string(x.major + 1);
        else
          return with_subst("subst " + std::to_string(x.source + 1), x.subst);
      },
      j);
}

/// Canonical text. Each header line is written as a '#' comment.
inline void write_derivation(std::ostream& out, const Derivation& d, const std::vector<std::string>& header = {}) {
  for (const std::string& h : header) out << "# " << h << '\n';
  for (const Formula& p : d.premises) out << "premise: " << print(p) << '\n';
  for (std::size_t i = 0; i < d.steps.size(); ++i)
    out << (i + 1) << ". " << print(d.steps[i].formula) << " ; " << format_justification(d.steps[i].just) << '\n';
}

inline std::string format_derivation(const Derivation& d, const std::vector<std::string>& header = {}) {
  std::ostringstream out;
  write_derivation(out, d, header);
  return out.str();
}

}  // namespace km
