#pragma once

// Desugaring and canonisation of programs and sentences, and the points-to
// token mangling scheme.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "heaplet/model.hpp"
#include "heaplet/syntax.hpp"
#include "heaplet/unify.hpp"

namespace heaplet {

/// Generates variable names not used in a clause: Base1, Base2, ...
class FreshNames {
 public:
  explicit FreshNames(std::set<std::string> used, std::string base = "X")
      : used_(std::move(used)), base_(std::move(base)) {}

  std::string next() {
    for (;;) {
      std::string name = base_ + std::to_string(++counter_);
      if (used_.insert(name).second) return name;
    }
  }

 private:
  std::set<std::string> used_;
  std::string base_;
  unsigned counter_ = 0;
};

namespace detail {

using Alternatives = std::vector<std::vector<Subgoal>>;

inline Alternatives cross(const Alternatives& a, const Alternatives& b) {
  Alternatives out;
  for (const auto& x : a)
    for (const auto& y : b) {
      auto z = x;
      z.insert(z.end(), y.begin(), y.end());
      out.push_back(std::move(z));
    }
  return out;
}

/// Expands a body into its clause alternatives, left alternative first.
inline Alternatives expand_body(const std::vector<Subgoal>& body, std::vector<Diagnostic>& diags);

/// ~(A ; B) is lowered to ~(A), ~(B).
inline std::vector<Subgoal> lower_negation(const Negation& n, const SourcePos& pos,
                                           std::vector<Diagnostic>& diags) {
  std::vector<Subgoal> out;
  for (auto& alt : expand_body(n.body, diags)) out.push_back(Subgoal(Negation{std::move(alt)}, pos));
  return out;
}

inline Alternatives expand_body(const std::vector<Subgoal>& body, std::vector<Diagnostic>& diags) {
  Alternatives acc{{}};
  for (const auto& g : body) {
    if (std::holds_alternative<Cut>(g.node)) {
      diags.push_back({"cut requires left-factoring, unsupported", g.pos});
      continue;
    }
    if (std::holds_alternative<Fail>(g.node)) {
      diags.push_back({"'fail' cannot be translated into a grammar", g.pos});
      continue;
    }
    if (auto* k = std::get_if<HeapConst>(&g.node)) {
      if (*k != HeapConst::Emp) diags.push_back({"partial heap constants out of scope", g.pos});
      continue;
    }
    if (auto* d = std::get_if<Disjunction>(&g.node)) {
      Alternatives options;
      for (const auto& alt : d->alternatives)
        for (auto& x : expand_body(alt, diags)) options.push_back(std::move(x));
      acc = cross(acc, options);
      continue;
    }
    if (auto* n = std::get_if<Negation>(&g.node)) {
      acc = cross(acc, {lower_negation(*n, g.pos, diags)});
      continue;
    }
    for (auto& a : acc) a.push_back(g);
  }
  return acc;
}

}  // namespace detail

/// Splits ';' alternatives into separate clauses (left alternative first,
/// split clauses adjacent), drops emp, and rejects cut, fail and the partial
/// heap constants.
inline Outcome<Program> desugar(const Program& p) {
  std::vector<Diagnostic> diags;
  Program out;
  for (const auto& c : p.clauses) {
    for (auto& body : detail::expand_body(c.body, diags)) {
      Clause nc = c;
      nc.body = std::move(body);
      out.clauses.push_back(std::move(nc));
    }
  }
  if (!diags.empty()) return diags;
  return out;
}

/// Lowers a heap assertion into subgoal alternatives. Star and conjunction
/// both become subgoal sequences, disjunction becomes alternatives, each
/// existential gets a fresh variable.
inline Outcome<std::vector<std::vector<Subgoal>>> lower_assertion(const HeapAssertion& h,
                                                                  FreshNames& fresh) {
  using K = HeapAssertion::Kind;
  using Alts = detail::Alternatives;
  std::vector<Diagnostic> diags;
  std::function<Alts(const HeapAssertion&, const Substitution&)> go =
      [&](const HeapAssertion& a, const Substitution& ren) -> Alts {
    switch (a.kind) {
      case K::Emp:
        return {{}};
      case K::TrueH:
      case K::FalseH:
        diags.push_back({"partial heap constants out of scope", {}});
        return {};
      case K::Points:
        return {{Subgoal(apply(ren, a.points))}};
      case K::Star:
      case K::And:
        return detail::cross(go(a.children[0], ren), go(a.children[1], ren));
      case K::Or: {
        Alts l = go(a.children[0], ren);
        for (auto& x : go(a.children[1], ren)) l.push_back(std::move(x));
        return l;
      }
      case K::Not: {
        std::vector<Subgoal> negs;
        for (auto& alt : go(a.children[0], ren)) negs.push_back(Subgoal(Negation{std::move(alt)}));
        return {negs};
      }
      case K::Exists: {
        std::map<std::string, Term> b = ren.bindings();
        b[a.name] = Term::var(fresh.next());
        return go(a.children[0], Substitution::from(std::move(b)));
      }
      case K::Call: {
        PredCall c{a.name, {}};
        for (const auto& t : a.args) c.args.push_back(apply(ren, t));
        return {{Subgoal(std::move(c))}};
      }
    }
    return {};
  };
  Alts result = go(h, Substitution{});
  if (!diags.empty()) return diags;
  return result;
}

/// Defines predicate `name(args)` by a heap assertion, one clause per
/// alternative.
inline Outcome<std::vector<Clause>> clauses_from_assertion(const std::string& name,
                                                           const std::vector<Term>& args,
                                                           const HeapAssertion& h) {
  std::set<std::string> used;
  for (const auto& a : args) used.merge(free_vars(a));
  FreshNames fresh(std::move(used), "E");
  auto alts = lower_assertion(h, fresh);
  if (!alts) return alts.diagnostics();
  std::vector<Clause> out;
  for (const auto& body : *alts) out.push_back(Clause{name, args, body, {}});
  return out;
}

/// Moves head terms into leading '=' relations so that every head argument is
/// a distinct variable: p1(X,[X|Y]) :- B becomes p1(X1,X2) :- X1=X, X2=[X|Y], B.
/// Clauses whose heads already are distinct variables are left untouched.
inline Clause decanonise_head(const Clause& c) {
  std::set<std::string> seen;
  bool canonical = std::all_of(c.head_args.begin(), c.head_args.end(), [&](const Term& t) {
    return t.is_var() && seen.insert(t.name()).second;
  });
  if (canonical) return c;
  FreshNames fresh(clause_vars(c), "X");
  Clause out;
  out.head_name = c.head_name;
  out.origin = c.origin;
  for (const auto& arg : c.head_args) {
    Term v = Term::var(fresh.next());
    out.head_args.push_back(v);
    out.body.push_back(Subgoal(Relation{v, RelOp::Eq, arg}, c.origin));
  }
  out.body.insert(out.body.end(), c.body.begin(), c.body.end());
  return out;
}

inline Program decanonise_heads(const Program& p) {
  Program out;
  for (const auto& c : p.clauses) out.clauses.push_back(decanonise_head(c));
  return out;
}

/// Terminals first, stably sorted by the printed location; all other items
/// keep their relative order after the terminals.
inline AbstractSentence order_conjuncts(const AbstractSentence& s) {
  AbstractSentence out;
  std::vector<std::pair<std::string, const Subgoal*>> terminals;
  for (const auto& g : s.items)
    if (g.is_terminal()) terminals.emplace_back(g.terminal().location.to_string(), &g);
  std::stable_sort(terminals.begin(), terminals.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [_, g] : terminals) out.items.push_back(*g);
  for (const auto& g : s.items)
    if (!g.is_terminal()) out.items.push_back(g);
  return out;
}

// ---------------------------------------------------------------------------
// Mangling
//
// Token = "pt_" seg(location) "_" seg(value), where seg(t) is the decimal
// length of enc(t) followed by enc(t):
//   atom a           -> a
//   variable X       -> VX
//   number -1.5      -> Nm1d5
//   f(t1..tn)        -> C<n>_ seg(f) seg(t1) .. seg(tn)
//   [t1..tn | T]     -> L<n>_ seg(t1) .. seg(tn) [seg(T)]
// so bar |-> foo is pt_3bar_3foo.

struct MangledToken {
  std::string name;
  PointsTo source;
};

namespace detail {

inline std::string mangle_enc(const Term& t);

inline std::string mangle_seg(const Term& t) {
  std::string e = mangle_enc(t);
  return std::to_string(e.size()) + e;
}

inline std::string mangle_enc(const Term& t) {
  switch (t.kind()) {
    case Term::Kind::Atom:
      return t.name();
    case Term::Kind::Variable:
      return "V" + t.name();
    case Term::Kind::Number: {
      std::string out = "N";
      for (char c : t.name()) out += c == '-' ? 'm' : c == '.' ? 'd' : c;
      return out;
    }
    case Term::Kind::Compound: {
      std::string out = "C" + std::to_string(t.arity()) + "_" + mangle_seg(Term::atom(t.name()));
      for (const auto& a : t.args()) out += mangle_seg(a);
      return out;
    }
    case Term::Kind::List: {
      std::string out = "L" + std::to_string(t.arity()) + "_";
      for (const auto& a : t.args()) out += mangle_seg(a);
      if (t.tail()) out += mangle_seg(*t.tail());
      return out;
    }
  }
  return {};
}

struct DemangleError {
  std::string message;
};

class Demangler {
 public:
  explicit Demangler(std::string_view s) : s_(s) {}

  Term seg() {
    std::size_t len = count();
    if (len == 0 || i_ + len > s_.size()) throw DemangleError{"segment length out of range"};
    Demangler inner(s_.substr(i_, len));
    i_ += len;
    return inner.whole();
  }

  void expect(char c) {
    if (i_ >= s_.size() || s_[i_] != c) throw DemangleError{std::string("expected '") + c + "'"};
    ++i_;
  }
  bool done() const { return i_ == s_.size(); }

  Term whole() {
    if (s_.empty()) throw DemangleError{"empty segment"};
    char head = s_[0];
    if (detail::is_lower(head)) {
      std::string name(s_);
      if (!std::all_of(name.begin(), name.end(), detail::is_ident_char))
        throw DemangleError{"bad atom " + name};
      return Term::atom(name);
    }
    if (head == 'V') return Term::var(std::string(s_.substr(1)));
    if (head == 'N') {
      std::string text;
      for (char c : s_.substr(1)) text += c == 'm' ? '-' : c == 'd' ? '.' : c;
      if (!valid_number_text(text)) throw DemangleError{"bad number " + text};
      return Term::number(text);
    }
    if (head == 'C' || head == 'L') {
      i_ = 1;
      std::size_t n = count();
      expect('_');
      if (head == 'C') {
        Term f = seg();
        if (!f.is_atom()) throw DemangleError{"functor must be an atom"};
        std::vector<Term> args;
        for (std::size_t k = 0; k < n; ++k) args.push_back(seg());
        if (!done()) throw DemangleError{"trailing characters in compound"};
        return Term::compound(f.name(), std::move(args));
      }
      std::vector<Term> items;
      for (std::size_t k = 0; k < n; ++k) items.push_back(seg());
      std::optional<Term> tail;
      if (!done()) tail = seg();
      if (!done()) throw DemangleError{"trailing characters in list"};
      if (tail && tail->is_list()) throw DemangleError{"list tail must not be a list"};
      if (n == 0 && tail) throw DemangleError{"non-canonical list"};
      return Term::list(std::move(items), std::move(tail));
    }
    throw DemangleError{std::string("unknown segment tag '") + head + "'"};
  }

 private:
  std::size_t count() {
    std::size_t start = i_;
    std::size_t n = 0;
    while (i_ < s_.size() && detail::is_digit(s_[i_])) {
      n = n * 10 + static_cast<std::size_t>(s_[i_] - '0');
      if (n > s_.size()) throw DemangleError{"length prefix too large"};
      ++i_;
    }
    if (i_ == start) throw DemangleError{"missing length prefix"};
    return n;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace detail

inline MangledToken mangle(const PointsTo& pt) {
  return {"pt_" + detail::mangle_seg(pt.location) + "_" + detail::mangle_seg(pt.value), pt};
}

inline Outcome<PointsTo> demangle(std::string_view token) {
  if (token.substr(0, 3) != "pt_") return Diagnostic{"malformed token: missing 'pt_' prefix", {}};
  try {
    detail::Demangler d(token.substr(3));
    Term loc = d.seg();
    d.expect('_');
    Term val = d.seg();
    if (!d.done()) return Diagnostic{"malformed token: trailing characters", {}};
    return PointsTo(std::move(loc), std::move(val));
  } catch (const detail::DemangleError& e) {
    return Diagnostic{"malformed token: " + e.message, {}};
  } catch (const std::invalid_argument& e) {
    return Diagnostic{std::string("malformed token: ") + e.what(), {}};
  }
}

// ---------------------------------------------------------------------------
// Name qualification across definition files

/// Merges programs loaded from several files. Predicates defined in more than
/// one file are renamed to <stem>_<name> within their defining file; a call
/// to a clashing name from a file that does not define it is ambiguous.
inline Outcome<Program> merge_programs(const std::vector<std::pair<std::string, Program>>& files) {
  std::map<PredKey, std::set<std::size_t>> defined_in;
  for (std::size_t f = 0; f < files.size(); ++f)
    for (const auto& c : files[f].second.clauses) defined_in[key_of(c)].insert(f);

  auto stem_prefix = [](std::string stem) {
    for (auto& ch : stem)
      if (!detail::is_ident_char(ch)) ch = '_';
    if (stem.empty() || !detail::is_lower(stem[0])) stem = "m" + stem;
    return stem;
  };

  std::vector<Diagnostic> diags;
  Program out;
  for (std::size_t f = 0; f < files.size(); ++f) {
    std::string prefix = stem_prefix(files[f].first);
    auto rename = [&](const std::string& name, std::size_t arity, const SourcePos& pos) {
      auto it = defined_in.find({name, arity});
      if (it == defined_in.end() || it->second.size() < 2) return name;
      if (!it->second.count(f)) {
        diags.push_back({"ambiguous call to " + name + "/" + std::to_string(arity) +
                             ", defined in several files",
                         pos});
        return name;
      }
      return prefix + "_" + name;
    };
    std::function<std::vector<Subgoal>(const std::vector<Subgoal>&)> body_of =
        [&](const std::vector<Subgoal>& body) {
          std::vector<Subgoal> nb;
          for (const auto& g : body) {
            Subgoal ng = g;
            if (auto* call = std::get_if<PredCall>(&ng.node)) {
              call->name = rename(call->name, call->args.size(), g.pos);
            } else if (auto* neg = std::get_if<Negation>(&ng.node)) {
              neg->body = body_of(neg->body);
            } else if (auto* d = std::get_if<Disjunction>(&ng.node)) {
              for (auto& alt : d->alternatives) alt = body_of(alt);
            }
            nb.push_back(std::move(ng));
          }
          return nb;
        };
    for (const auto& c : files[f].second.clauses) {
      Clause nc = c;
      nc.head_name = rename(c.head_name, c.head_args.size(), c.origin);
      nc.body = body_of(c.body);
      out.clauses.push_back(std::move(nc));
    }
  }
  if (!diags.empty()) return diags;
  return out;
}

}  // namespace heaplet
