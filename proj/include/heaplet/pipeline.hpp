#pragma once

// From definition text to a checked environment and its grammar tables.

#include <string>
#include <string_view>

#include "heaplet/grammar.hpp"
#include "heaplet/normalize.hpp"
#include "heaplet/partition.hpp"
#include "heaplet/syntax.hpp"

namespace heaplet {

struct Prepared {
  PredicateEnv env;
  AttributedGrammar grammar;
  FirstFollowTables tables;
};

/// Desugars, decanonises heads, rejects undefined calls, then translates
/// and analyses.
inline Outcome<Prepared> prepare(const Program& p) {
  auto sugar_free = desugar(p);
  if (!sugar_free) return sugar_free.diagnostics();
  Prepared out;
  out.env = build_env(decanonise_heads(*sugar_free));
  auto missing = undefined_calls(out.env);
  if (!missing.empty()) return missing;
  out.grammar = translate(out.env);
  out.tables = analyze(out.grammar);
  return out;
}

/// Accepts either Prolog-subset clauses or the textual grammar format.
inline Outcome<Program> read_definitions(std::string_view text, const std::string& file = {}) {
  if (!looks_like_grammar(text)) return parse_program(text, file);
  auto g = read_grammar(text, file);
  if (!g) return g.diagnostics();
  return to_program(untranslate(*g));
}

}  // namespace heaplet
