#pragma once

// Translation between predicate rule sets and attributed context-free
// grammars, first/follow analysis, and the textual grammar format.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "heaplet/model.hpp"
#include "heaplet/normalize.hpp"
#include "heaplet/partition.hpp"
#include "heaplet/syntax.hpp"

namespace heaplet {

/// Terminal identity for first/follow sets: each component is either a
/// ground term or a wildcard (nullopt) when the pattern mentions variables.
struct TerminalShape {
  std::optional<Term> location;
  std::optional<Term> value;

  static TerminalShape of(const PointsTo& pt) {
    TerminalShape s;
    if (pt.location.is_ground()) s.location = pt.location;
    if (pt.value.is_ground()) s.value = pt.value;
    return s;
  }

  /// True if some instance of this shape can be an instance of `other`.
  bool compatible(const TerminalShape& other) const {
    auto ok = [](const std::optional<Term>& a, const std::optional<Term>& b) {
      return !a || !b || *a == *b;
    };
    return ok(location, other.location) && ok(value, other.value);
  }

  /// True if the (possibly non-ground) terminal is an instance of this shape.
  bool covers(const PointsTo& pt) const {
    return (!location || *location == pt.location) && (!value || *value == pt.value);
  }

  std::string to_string() const {
    return "pointsto(" + (location ? location->to_string() : "_") + "," +
           (value ? value->to_string() : "_") + ")";
  }

  friend bool operator==(const TerminalShape&, const TerminalShape&) = default;
  friend auto operator<=>(const TerminalShape&, const TerminalShape&) = default;
};

using ShapeSet = std::set<TerminalShape>;

struct GrammarSymbol;

struct TerminalSym {
  PointsTo pattern;
  std::string token() const { return mangle(pattern).name; }
  friend bool operator==(const TerminalSym&, const TerminalSym&) = default;
};

struct NonTerminalSym {
  std::string name;
  std::vector<Term> attributes;
  PredKey key() const { return {name, attributes.size()}; }
  friend bool operator==(const NonTerminalSym&, const NonTerminalSym&) = default;
};

struct GuardSym {
  Relation relation;
  friend bool operator==(const GuardSym&, const GuardSym&) = default;
};

struct NegGuardSym {
  std::vector<GrammarSymbol> body;
  friend bool operator==(const NegGuardSym& a, const NegGuardSym& b);
};

struct GrammarSymbol {
  std::variant<TerminalSym, NonTerminalSym, GuardSym, NegGuardSym> node;
  friend bool operator==(const GrammarSymbol&, const GrammarSymbol&) = default;
};

inline bool operator==(const NegGuardSym& a, const NegGuardSym& b) { return a.body == b.body; }

/// lhs[attributes] -> rhs; an empty rhs is an epsilon production.
struct Production {
  std::string name;
  std::vector<Term> attributes;
  std::vector<GrammarSymbol> rhs;
  SourcePos origin;

  PredKey key() const { return {name, attributes.size()}; }
  friend bool operator==(const Production& a, const Production& b) {
    return a.name == b.name && a.attributes == b.attributes && a.rhs == b.rhs;
  }
};

struct AttributedGrammar {
  std::vector<Production> productions;  // one per clause, clause order
  std::vector<PredKey> start_symbols;   // entry points of every partition

  friend bool operator==(const AttributedGrammar& a, const AttributedGrammar& b) {
    return a.productions == b.productions;
  }
};

namespace detail {

inline std::vector<GrammarSymbol> symbols_of(const std::vector<Subgoal>& body) {
  std::vector<GrammarSymbol> out;
  for (const auto& g : body) {
    if (g.is_terminal()) {
      out.push_back({TerminalSym{g.terminal()}});
    } else if (g.is_call()) {
      out.push_back({NonTerminalSym{g.call().name, g.call().args}});
    } else if (g.is_relation()) {
      out.push_back({GuardSym{g.relation()}});
    } else if (g.is_negation()) {
      out.push_back({NegGuardSym{symbols_of(g.negation().body)}});
    } else {
      throw std::invalid_argument("translate needs a desugared program; found " + render(g));
    }
  }
  return out;
}

inline std::vector<Subgoal> subgoals_of(const std::vector<GrammarSymbol>& rhs) {
  std::vector<Subgoal> out;
  for (const auto& s : rhs) {
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, TerminalSym>) {
            out.push_back(Subgoal(n.pattern));
          } else if constexpr (std::is_same_v<N, NonTerminalSym>) {
            out.push_back(Subgoal(PredCall{n.name, n.attributes}));
          } else if constexpr (std::is_same_v<N, GuardSym>) {
            out.push_back(Subgoal(n.relation));
          } else {
            out.push_back(Subgoal(Negation{subgoals_of(n.body)}));
          }
        },
        s.node);
  }
  return out;
}

inline void nonterminals_in(const std::vector<GrammarSymbol>& rhs, std::set<PredKey>& out) {
  for (const auto& s : rhs) {
    if (auto* nt = std::get_if<NonTerminalSym>(&s.node)) out.insert(nt->key());
    if (auto* neg = std::get_if<NegGuardSym>(&s.node)) nonterminals_in(neg->body, out);
  }
}

}  // namespace detail

/// Entry points of every partition of the grammar's productions.
inline std::vector<PredKey> start_symbols_of(const std::vector<Production>& prods) {
  std::vector<PredKey> nodes;
  std::map<PredKey, std::set<PredKey>> edges;
  for (const auto& p : prods) {
    if (!edges.count(p.key())) nodes.push_back(p.key());
    detail::nonterminals_in(p.rhs, edges[p.key()]);
  }
  std::vector<PredKey> out;
  for (const auto& part : dependency_components(nodes, edges))
    out.insert(out.end(), part.entry_points.begin(), part.entry_points.end());
  return out;
}

/// Clause a(x) :- q0, ..., qn becomes production a[x] -> q0 ... qn.
inline AttributedGrammar translate(const PredicateEnv& env) {
  AttributedGrammar g;
  for (const auto& c : env.clauses())
    g.productions.push_back({c.head_name, c.head_args, detail::symbols_of(c.body), c.origin});
  g.start_symbols = start_symbols_of(g.productions);
  return g;
}

/// Production a[x] -> q0 ... qn becomes clause a(x) :- q0, ..., qn.
inline PredicateEnv untranslate(const AttributedGrammar& g) {
  PredicateEnv env;
  for (const auto& p : g.productions)
    env.add(Clause{p.name, p.attributes, detail::subgoals_of(p.rhs), p.origin});
  return env;
}

// ---------------------------------------------------------------------------
// Attribute direction

enum class AttrDirection { Inherited, Synthesized };

/// A head variable whose first binding occurrence in the body is a terminal
/// is synthesized; otherwise it is inherited. '=' guards alias variables, so
/// X1 = X followed by pointsto(l, X) synthesizes X1.
inline std::vector<AttrDirection> attribute_directions(const Production& p) {
  std::vector<AttrDirection> out;
  for (const auto& attr : p.attributes) {
    if (!attr.is_var()) {
      out.push_back(AttrDirection::Inherited);
      continue;
    }
    std::set<std::string> aliases{attr.name()};
    AttrDirection dir = AttrDirection::Inherited;
    for (const auto& sym : p.rhs) {
      auto mentions = [&](const Term& t) {
        for (const auto& v : free_vars(t))
          if (aliases.count(v)) return true;
        return false;
      };
      if (auto* g = std::get_if<GuardSym>(&sym.node)) {
        if (g->relation.op == RelOp::Eq) {
          if (mentions(g->relation.lhs) || mentions(g->relation.rhs)) {
            aliases.merge(free_vars(g->relation.lhs));
            aliases.merge(free_vars(g->relation.rhs));
          }
        }
        continue;
      }
      if (auto* t = std::get_if<TerminalSym>(&sym.node)) {
        if (mentions(t->pattern.location) || mentions(t->pattern.value)) {
          dir = AttrDirection::Synthesized;
          break;
        }
        continue;
      }
      if (auto* nt = std::get_if<NonTerminalSym>(&sym.node)) {
        bool hit = false;
        for (const auto& a : nt->attributes) hit = hit || mentions(a);
        if (hit) break;
      }
    }
    out.push_back(dir);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nullable, first and follow

struct FirstFollowTables {
  std::set<PredKey> nullable;
  std::map<PredKey, ShapeSet> first;
  std::map<PredKey, ShapeSet> follow;
  std::map<TerminalShape, ShapeSet> terminal_follow;
  std::set<PredKey> left_recursive;

  /// First set of a symbol: {shape} for a terminal, empty for guards.
  ShapeSet first_of(const GrammarSymbol& s) const {
    if (auto* t = std::get_if<TerminalSym>(&s.node)) return {TerminalShape::of(t->pattern)};
    if (auto* nt = std::get_if<NonTerminalSym>(&s.node)) {
      auto it = first.find(nt->key());
      return it == first.end() ? ShapeSet{} : it->second;
    }
    return {};
  }
  ShapeSet first_of(const PredKey& k) const {
    auto it = first.find(k);
    return it == first.end() ? ShapeSet{} : it->second;
  }
  ShapeSet follow_of(const PredKey& k) const {
    auto it = follow.find(k);
    return it == follow.end() ? ShapeSet{} : it->second;
  }
  ShapeSet follow_of(const TerminalShape& t) const {
    auto it = terminal_follow.find(t);
    return it == terminal_follow.end() ? ShapeSet{} : it->second;
  }

  friend bool operator==(const FirstFollowTables&, const FirstFollowTables&) = default;
};

/// Computes nullable, left recursion, first (pi) and follow (sigma).
///
/// Guards and negated guards are transparent. First-set propagation skips
/// nullable symbols except left-recursive non-terminals, which stop the scan:
/// in q2 -> q3 b with q3 -> eps | q3 a the first set of q2 does not see b,
/// and q3 contributes only what its non-left-recursive alternatives start
/// with.
inline FirstFollowTables analyze(const AttributedGrammar& g) {
  FirstFollowTables t;
  std::vector<PredKey> nts;
  for (const auto& p : g.productions)
    if (std::find(nts.begin(), nts.end(), p.key()) == nts.end()) nts.push_back(p.key());

  auto is_nullable_sym = [&](const GrammarSymbol& s, const std::set<PredKey>& nullable) {
    if (std::holds_alternative<TerminalSym>(s.node)) return false;
    if (auto* nt = std::get_if<NonTerminalSym>(&s.node)) return nullable.count(nt->key()) != 0;
    return true;
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& p : g.productions) {
      if (t.nullable.count(p.key())) continue;
      bool all = std::all_of(p.rhs.begin(), p.rhs.end(),
                             [&](const GrammarSymbol& s) { return is_nullable_sym(s, t.nullable); });
      if (all) changed = t.nullable.insert(p.key()).second || changed;
    }
  }

  // Left-corner graph: A -> B when B can appear leftmost after a nullable prefix.
  std::map<PredKey, std::set<PredKey>> corner;
  for (const auto& p : g.productions) {
    auto& out = corner[p.key()];
    for (const auto& s : p.rhs) {
      if (auto* nt = std::get_if<NonTerminalSym>(&s.node)) out.insert(nt->key());
      if (!is_nullable_sym(s, t.nullable)) break;
    }
  }
  for (const auto& a : nts) {
    std::set<PredKey> seen;
    std::vector<PredKey> stack(corner[a].begin(), corner[a].end());
    while (!stack.empty()) {
      PredKey k = stack.back();
      stack.pop_back();
      if (k == a) {
        t.left_recursive.insert(a);
        break;
      }
      if (!seen.insert(k).second) continue;
      for (const auto& n : corner[k]) stack.push_back(n);
    }
  }

  auto propagates = [&](const GrammarSymbol& s) {
    if (auto* nt = std::get_if<NonTerminalSym>(&s.node))
      return t.nullable.count(nt->key()) && !t.left_recursive.count(nt->key());
    return is_nullable_sym(s, t.nullable);
  };

  for (const auto& k : nts) t.first[k];
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& p : g.productions) {
      auto& dst = t.first[p.key()];
      for (const auto& s : p.rhs) {
        for (const auto& sh : t.first_of(s)) changed = dst.insert(sh).second || changed;
        if (!propagates(s)) break;
      }
    }
  }

  // first of rhs[i+1..] and whether that suffix propagates entirely
  auto suffix_first = [&](const std::vector<GrammarSymbol>& rhs, std::size_t from) {
    ShapeSet out;
    for (std::size_t j = from; j < rhs.size(); ++j) {
      auto f = t.first_of(rhs[j]);
      out.insert(f.begin(), f.end());
      if (!propagates(rhs[j])) return std::pair{out, false};
    }
    return std::pair{out, true};
  };

  for (const auto& k : nts) t.follow[k];
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& p : g.productions) {
      for (std::size_t i = 0; i < p.rhs.size(); ++i) {
        ShapeSet* dst = nullptr;
        if (auto* nt = std::get_if<NonTerminalSym>(&p.rhs[i].node)) {
          dst = &t.follow[nt->key()];
        } else if (auto* ts = std::get_if<TerminalSym>(&p.rhs[i].node)) {
          dst = &t.terminal_follow[TerminalShape::of(ts->pattern)];
        } else {
          continue;
        }
        auto [fs, reaches_end] = suffix_first(p.rhs, i + 1);
        for (const auto& sh : fs) changed = dst->insert(sh).second || changed;
        if (reaches_end) {
          ShapeSet inherited = t.follow[p.key()];
          for (const auto& sh : inherited) changed = dst->insert(sh).second || changed;
        }
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Textual format
//
//   heaplet-grammar v1
//   p1[X,Y] -> pt_4loc1_4val1() p2[X,Y] ;
//   p2[X,Y] -> pt_4loc2_2VX(X) pt_4loc3_2VY(Y) ;
//   a[] -> eps ;
//   q[X] -> { X = a } ~( pt_1x_1a() ) ;

inline constexpr std::string_view kGrammarHeader = "heaplet-grammar v1";

namespace detail {

inline std::string join_terms(std::span<const Term> ts) {
  std::string out;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i) out += ",";
    out += ts[i].to_string();
  }
  return out;
}

inline std::string emit_symbols(const std::vector<GrammarSymbol>& rhs) {
  std::string out;
  for (const auto& s : rhs) {
    if (!out.empty()) out += " ";
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, TerminalSym>) {
            std::vector<Term> slots;
            for (const auto& v : vars_in_order(std::vector<Term>{n.pattern.location, n.pattern.value}))
              slots.push_back(Term::var(v));
            out += n.token() + "(" + join_terms(slots) + ")";
          } else if constexpr (std::is_same_v<N, NonTerminalSym>) {
            out += n.name + "[" + join_terms(n.attributes) + "]";
          } else if constexpr (std::is_same_v<N, GuardSym>) {
            out += "{ " + n.relation.to_string() + " }";
          } else {
            out += "~( " + emit_symbols(n.body) + " )";
          }
        },
        s.node);
  }
  return out;
}

}  // namespace detail

inline std::string emit(const AttributedGrammar& g) {
  std::string out = std::string(kGrammarHeader) + "\n";
  for (const auto& p : g.productions) {
    out += p.name + "[" + detail::join_terms(p.attributes) + "] -> ";
    out += p.rhs.empty() ? std::string("eps") : detail::emit_symbols(p.rhs);
    out += " ;\n";
  }
  return out;
}

namespace detail {

class GrammarReader {
 public:
  explicit GrammarReader(syntax::Parser& p) : p_(p) {}

  AttributedGrammar grammar() {
    AttributedGrammar g;
    while (!p_.at_end()) g.productions.push_back(production());
    g.start_symbols = start_symbols_of(g.productions);
    return g;
  }

 private:
  using Tok = syntax::Tok;

  std::vector<Term> bracket_list() {
    p_.expect(Tok::LBracket, "'[' opening an attribute list");
    std::vector<Term> out;
    if (!p_.at(Tok::RBracket)) out = p_.arguments();
    p_.expect(Tok::RBracket, "']' closing the attribute list");
    return out;
  }

  Production production() {
    Production prod;
    const auto& head = p_.peek();
    prod.origin = head.pos;
    if (head.kind != Tok::Atom) p_.fail("expected a non-terminal name" + syntax::Parser::describe(head));
    prod.name = p_.take().text;
    prod.attributes = bracket_list();
    p_.expect(Tok::Arrow, "'->'");
    if (p_.at(Tok::Atom) && p_.peek().text == "eps" && p_.peek(1).kind == Tok::Semi) {
      p_.take();
    } else {
      prod.rhs = symbols(Tok::Semi);
      if (prod.rhs.empty()) p_.fail("empty right-hand side must be written 'eps'");
    }
    p_.expect(Tok::Semi, "';' ending the production");
    return prod;
  }

  std::vector<GrammarSymbol> symbols(Tok stop) {
    std::vector<GrammarSymbol> out;
    while (!p_.at(stop) && !p_.at_end()) out.push_back(symbol());
    return out;
  }

  GrammarSymbol symbol() {
    const auto& t = p_.peek();
    SourcePos pos = t.pos;
    if (p_.accept(Tok::LBrace)) {
      Term lhs = p_.term();
      if (!p_.at(Tok::Rel)) p_.fail("expected a relation operator" + syntax::Parser::describe(p_.peek()));
      RelOp op = *rel_op_from_text(p_.take().text);
      Term rhs = p_.term();
      p_.expect(Tok::RBrace, "'}' closing the guard");
      return {GuardSym{Relation{std::move(lhs), op, std::move(rhs)}}};
    }
    if (p_.accept(Tok::Tilde)) {
      p_.expect(Tok::LParen, "'(' after '~'");
      auto body = symbols(Tok::RParen);
      p_.expect(Tok::RParen, "')' closing the negated guard");
      return {NegGuardSym{std::move(body)}};
    }
    if (t.kind != Tok::Atom) p_.fail("expected a grammar symbol" + syntax::Parser::describe(t));
    std::string name = p_.take().text;
    if (p_.at(Tok::LBracket)) return {NonTerminalSym{name, bracket_list()}};
    if (!p_.at(Tok::LParen)) p_.fail_at("terminal " + name + " needs an attribute slot list", pos);
    auto pt = demangle(name);
    if (!pt) p_.fail_at(pt.diagnostics().front().message, pos);
    p_.take();
    std::vector<Term> slots;
    if (!p_.at(Tok::RParen)) slots = p_.arguments();
    p_.expect(Tok::RParen, "')' closing the attribute slots");
    std::vector<Term> expected;
    for (const auto& v : vars_in_order(std::vector<Term>{pt->location, pt->value}))
      expected.push_back(Term::var(v));
    if (slots != expected)
      p_.fail_at("attribute slots of " + name + " must be (" + join_terms(expected) + ")", pos);
    return {TerminalSym{*pt}};
  }

  syntax::Parser& p_;
};

}  // namespace detail

inline Outcome<AttributedGrammar> read_grammar(std::string_view text, const std::string& file = {}) {
  std::size_t start = text.find_first_not_of(" \t\r\n");
  if (start == std::string_view::npos || text.substr(start, kGrammarHeader.size()) != kGrammarHeader)
    return Diagnostic{"missing header '" + std::string(kGrammarHeader) + "'", {file, 1, 1}};
  // Blank out the header so that line numbers stay intact.
  std::string body(text);
  for (std::size_t i = start; i < start + kGrammarHeader.size(); ++i) body[i] = ' ';
  return syntax::run(body, {file, true},
                     [](syntax::Parser& p) { return detail::GrammarReader(p).grammar(); });
}

inline bool looks_like_grammar(std::string_view text) {
  std::size_t start = text.find_first_not_of(" \t\r\n");
  return start != std::string_view::npos && text.substr(start, kGrammarHeader.size()) == kGrammarHeader;
}

/// '#'-comment lines describing nullable, first, follow, left recursion and
/// attribute directions.
inline std::string emit_tables(const AttributedGrammar& g, const FirstFollowTables& t) {
  auto set_text = [](const ShapeSet& s) {
    std::string out = "{";
    bool first = true;
    for (const auto& sh : s) {
      out += first ? " " : ", ";
      first = false;
      out += sh.to_string();
    }
    return out + (first ? "}" : " }");
  };
  std::string out;
  std::vector<PredKey> nts;
  for (const auto& p : g.productions)
    if (std::find(nts.begin(), nts.end(), p.key()) == nts.end()) nts.push_back(p.key());
  out += "# start:";
  for (const auto& k : g.start_symbols) out += " " + k.to_string();
  out += "\n";
  for (const auto& k : nts) {
    out += "# first " + k.to_string() + " = " + set_text(t.first_of(k)) + "\n";
    out += "# follow " + k.to_string() + " = " + set_text(t.follow_of(k)) + "\n";
  }
  for (const auto& [sh, f] : t.terminal_follow) out += "# follow " + sh.to_string() + " = " + set_text(f) + "\n";
  out += "# nullable:";
  for (const auto& k : nts)
    if (t.nullable.count(k)) out += " " + k.to_string();
  out += "\n# left-recursive:";
  for (const auto& k : nts)
    if (t.left_recursive.count(k)) out += " " + k.to_string();
  out += "\n";
  for (const auto& p : g.productions) {
    auto dirs = attribute_directions(p);
    if (dirs.empty()) continue;
    out += "# attributes " + p.name + "[";
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      if (i) out += ",";
      out += p.attributes[i].to_string() + (dirs[i] == AttrDirection::Synthesized ? ":syn" : ":inh");
    }
    out += "] at " + p.origin.to_string() + "\n";
  }
  return out;
}

}  // namespace heaplet
