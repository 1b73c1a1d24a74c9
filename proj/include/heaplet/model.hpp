#pragma once

// Core immutable values: terms, points-to heaplets, heap assertions,
// subgoals, clauses, programs and abstract sentences.

#include <algorithm>
#include <atomic>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace heaplet {

struct SourcePos {
  std::string file;
  int line = 0;
  int column = 0;

  bool known() const { return line > 0; }
  std::string to_string() const {
    std::string out = file.empty() ? std::string{} : file + ":";
    return out + std::to_string(line) + ":" + std::to_string(column);
  }
};

struct Diagnostic {
  enum class Severity { Error, Warning };

  std::string message;
  SourcePos pos;
  Severity severity = Severity::Error;

  std::string to_string() const {
    std::string out = pos.known() ? pos.to_string() + ": " : std::string{};
    out += severity == Severity::Error ? "error: " : "warning: ";
    return out + message;
  }
};

class HeapletError : public std::runtime_error {
 public:
  explicit HeapletError(std::vector<Diagnostic> diags)
      : std::runtime_error(join(diags)), diags_(std::move(diags)) {}
  explicit HeapletError(const std::string& message)
      : HeapletError(std::vector<Diagnostic>{Diagnostic{message, {}}}) {}

  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  static std::string join(const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
      if (!out.empty()) out += "\n";
      out += d.to_string();
    }
    return out;
  }

  std::vector<Diagnostic> diags_;
};

/// Either a value or the diagnostics explaining why there is none.
template <typename T>
class Outcome {
 public:
  Outcome(T value) : state_(std::move(value)) {}
  Outcome(std::vector<Diagnostic> diags) : state_(std::move(diags)) {}
  Outcome(Diagnostic diag) : state_(std::vector<Diagnostic>{std::move(diag)}) {}

  bool ok() const { return state_.index() == 0; }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw HeapletError(diagnostics());
    return std::get<0>(state_);
  }
  T&& value() && {
    if (!ok()) throw HeapletError(diagnostics());
    return std::get<0>(std::move(state_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  const std::vector<Diagnostic>& diagnostics() const {
    static const std::vector<Diagnostic> none;
    return ok() ? none : std::get<1>(state_);
  }

 private:
  std::variant<T, std::vector<Diagnostic>> state_;
};

// ---------------------------------------------------------------------------
// Terms

namespace detail {

inline bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ident_char(char c) {
  return is_lower(c) || is_upper(c) || is_digit(c) || c == '_';
}

inline bool valid_number_text(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '-') ++i;
  std::size_t digits = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++digits;
  if (digits == 0) return false;
  if (i == s.size()) return true;
  if (s[i] != '.') return false;
  ++i;
  std::size_t frac = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++frac;
  return frac > 0 && i == s.size();
}

}  // namespace detail

class Term;

struct TermNode;

/// Prolog-style first-order term. Immutable; copies share structure.
class Term {
 public:
  enum class Kind : std::uint8_t { Variable, Atom, Number, List, Compound };

  /// The empty list.
  Term();

  static Term var(std::string name);
  static Term atom(std::string name);
  static Term number(std::string text);
  static Term number(long long value) { return number(std::to_string(value)); }
  /// Lists are kept flat: a list tail is never itself a list, and a list with
  /// no prefix collapses to its tail. Non-list tails give improper lists.
  static Term list(std::vector<Term> prefix, std::optional<Term> tail = {});
  static Term compound(std::string functor, std::vector<Term> args);

  Kind kind() const;
  bool is_var() const { return kind() == Kind::Variable; }
  bool is_atom() const { return kind() == Kind::Atom; }
  bool is_number() const { return kind() == Kind::Number; }
  bool is_list() const { return kind() == Kind::List; }
  bool is_compound() const { return kind() == Kind::Compound; }
  bool is_nil() const;

  /// Variable or atom name, functor, or number text.
  const std::string& name() const;
  /// Compound arguments or list prefix.
  std::span<const Term> args() const;
  std::size_t arity() const { return args().size(); }
  /// List tail (never itself a list) if present.
  const Term* tail() const;

  bool is_ground() const;
  std::string to_string() const;

  friend bool operator==(const Term& a, const Term& b);
  friend std::strong_ordering operator<=>(const Term& a, const Term& b);

  std::size_t hash() const;

 private:
  explicit Term(std::shared_ptr<const TermNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const TermNode> node_;
};

struct TermNode {
  Term::Kind kind = Term::Kind::List;
  std::string text;
  std::vector<Term> args;
  std::optional<Term> tail;
  bool ground = true;
};

inline Term::Term() : node_(std::make_shared<const TermNode>()) {}

inline Term Term::var(std::string name) {
  if (name.empty() || !(detail::is_upper(name[0]) || name[0] == '_'))
    throw std::invalid_argument("variable name must start uppercase or with '_': " + name);
  auto n = std::make_shared<TermNode>();
  n->kind = Kind::Variable;
  n->text = std::move(name);
  n->ground = false;
  return Term(std::move(n));
}

inline Term Term::atom(std::string name) {
  if (name.empty() || !detail::is_lower(name[0]))
    throw std::invalid_argument("atom name must start lowercase: " + name);
  auto n = std::make_shared<TermNode>();
  n->kind = Kind::Atom;
  n->text = std::move(name);
  return Term(std::move(n));
}

inline Term Term::number(std::string text) {
  if (!detail::valid_number_text(text))
    throw std::invalid_argument("malformed number: " + text);
  auto n = std::make_shared<TermNode>();
  n->kind = Kind::Number;
  n->text = std::move(text);
  return Term(std::move(n));
}

inline Term Term::list(std::vector<Term> prefix, std::optional<Term> tail) {
  if (tail) {
    if (tail->is_list()) {
      for (const auto& t : tail->args()) prefix.push_back(t);
      std::optional<Term> rest;
      if (tail->tail()) rest = *tail->tail();
      tail = std::move(rest);
    }
  }
  if (prefix.empty() && tail) return *tail;
  auto n = std::make_shared<TermNode>();
  n->kind = Kind::List;
  n->ground = (!tail || tail->is_ground()) && std::all_of(prefix.begin(), prefix.end(),
                                   [](const Term& t) { return t.is_ground(); });
  n->args = std::move(prefix);
  n->tail = std::move(tail);
  return Term(std::move(n));
}

inline Term Term::compound(std::string functor, std::vector<Term> args) {
  if (functor.empty() || !detail::is_lower(functor[0]))
    throw std::invalid_argument("functor must start lowercase: " + functor);
  if (args.empty()) throw std::invalid_argument("compound arity must be at least 1: " + functor);
  auto n = std::make_shared<TermNode>();
  n->kind = Kind::Compound;
  n->text = std::move(functor);
  n->ground = std::all_of(args.begin(), args.end(), [](const Term& t) { return t.is_ground(); });
  n->args = std::move(args);
  return Term(std::move(n));
}

inline Term::Kind Term::kind() const { return node_->kind; }
inline bool Term::is_nil() const { return is_list() && node_->args.empty() && !node_->tail; }
inline const std::string& Term::name() const { return node_->text; }
inline std::span<const Term> Term::args() const { return node_->args; }
inline const Term* Term::tail() const { return node_->tail ? &*node_->tail : nullptr; }
inline bool Term::is_ground() const { return node_->ground; }

inline std::string Term::to_string() const {
  switch (kind()) {
    case Kind::Variable:
    case Kind::Atom:
    case Kind::Number:
      return name();
    case Kind::List: {
      std::string out = "[";
      for (std::size_t i = 0; i < node_->args.size(); ++i) {
        if (i) out += ",";
        out += node_->args[i].to_string();
      }
      if (node_->tail) out += "|" + node_->tail->to_string();
      return out + "]";
    }
    case Kind::Compound: {
      std::string out = name() + "(";
      for (std::size_t i = 0; i < node_->args.size(); ++i) {
        if (i) out += ",";
        out += node_->args[i].to_string();
      }
      return out + ")";
    }
  }
  return {};
}

inline bool operator==(const Term& a, const Term& b) { return (a <=> b) == 0; }

inline std::strong_ordering operator<=>(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return std::strong_ordering::equal;
  if (auto c = a.kind() <=> b.kind(); c != 0) return c;
  if (auto c = a.name() <=> b.name(); c != 0) return c;
  const auto& xa = a.node_->args;
  const auto& xb = b.node_->args;
  if (auto c = xa.size() <=> xb.size(); c != 0) return c;
  for (std::size_t i = 0; i < xa.size(); ++i)
    if (auto c = xa[i] <=> xb[i]; c != 0) return c;
  const auto& ta = a.node_->tail;
  const auto& tb = b.node_->tail;
  if (auto c = ta.has_value() <=> tb.has_value(); c != 0) return c;
  if (ta) return *ta <=> *tb;
  return std::strong_ordering::equal;
}

inline std::size_t Term::hash() const {
  std::size_t h = std::hash<std::string>{}(name()) ^ (static_cast<std::size_t>(kind()) << 1);
  for (const auto& a : args()) h = h * 1000003u ^ a.hash();
  if (tail()) h = h * 31u ^ tail()->hash();
  return h;
}

/// Exact comparison of two number literals by numeric value.
inline std::strong_ordering compare_numbers(const std::string& a, const std::string& b) {
  auto split = [](const std::string& s) {
    bool neg = !s.empty() && s[0] == '-';
    std::string body = neg ? s.substr(1) : s;
    auto dot = body.find('.');
    std::string ip = body.substr(0, dot);
    std::string fp = dot == std::string::npos ? std::string{} : body.substr(dot + 1);
    ip.erase(0, std::min(ip.find_first_not_of('0'), ip.size()));
    while (!fp.empty() && fp.back() == '0') fp.pop_back();
    if (ip.empty() && fp.empty()) neg = false;
    return std::tuple{neg, ip, fp};
  };
  auto [na, ia, fa] = split(a);
  auto [nb, ib, fb] = split(b);
  if (na != nb) return na ? std::strong_ordering::less : std::strong_ordering::greater;
  auto magnitude = [&]() {
    if (auto c = ia.size() <=> ib.size(); c != 0) return c;
    if (auto c = ia <=> ib; c != 0) return c;
    return fa <=> fb;
  }();
  if (na) return 0 <=> magnitude;
  return magnitude;
}

namespace detail {

inline void collect_vars(const Term& t, std::vector<std::string>& out, std::set<std::string>& seen) {
  if (t.is_ground()) return;
  if (t.is_var()) {
    if (seen.insert(t.name()).second) out.push_back(t.name());
    return;
  }
  for (const auto& a : t.args()) collect_vars(a, out, seen);
  if (t.tail()) collect_vars(*t.tail(), out, seen);
}

}  // namespace detail

inline std::set<std::string> free_vars(const Term& t) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  detail::collect_vars(t, order, seen);
  return seen;
}

/// Variables in order of first occurrence.
inline std::vector<std::string> vars_in_order(std::span<const Term> terms) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const auto& t : terms) detail::collect_vars(t, order, seen);
  return order;
}

namespace detail {

inline bool alpha_walk(const Term& a, const Term& b, std::map<std::string, std::string>& fwd,
                       std::map<std::string, std::string>& bwd) {
  if (a.kind() != b.kind()) return false;
  if (a.is_var()) {
    auto [fi, fnew] = fwd.emplace(a.name(), b.name());
    auto [bi, bnew] = bwd.emplace(b.name(), a.name());
    return fi->second == b.name() && bi->second == a.name();
  }
  if (a.name() != b.name() || a.arity() != b.arity()) return false;
  if ((a.tail() == nullptr) != (b.tail() == nullptr)) return false;
  for (std::size_t i = 0; i < a.arity(); ++i)
    if (!alpha_walk(a.args()[i], b.args()[i], fwd, bwd)) return false;
  return !a.tail() || alpha_walk(*a.tail(), *b.tail(), fwd, bwd);
}

}  // namespace detail

/// True iff a bijective variable renaming maps t1 onto t2.
inline bool alpha_equal(const Term& t1, const Term& t2) {
  std::map<std::string, std::string> fwd, bwd;
  return detail::alpha_walk(t1, t2, fwd, bwd);
}

inline bool alpha_equal(std::span<const Term> t1, std::span<const Term> t2) {
  if (t1.size() != t2.size()) return false;
  std::map<std::string, std::string> fwd, bwd;
  for (std::size_t i = 0; i < t1.size(); ++i)
    if (!detail::alpha_walk(t1[i], t2[i], fwd, bwd)) return false;
  return true;
}

/// Renames variables through `f`; names `f` maps to nullopt stay.
template <typename F>
Term rename_vars(const Term& t, F&& f) {
  if (t.is_ground()) return t;
  if (t.is_var()) {
    std::optional<std::string> n = f(t.name());
    return n ? Term::var(*n) : t;
  }
  std::vector<Term> args;
  args.reserve(t.arity());
  for (const auto& a : t.args()) args.push_back(rename_vars(a, f));
  if (t.is_compound()) return Term::compound(t.name(), std::move(args));
  std::optional<Term> tail;
  if (t.tail()) tail = rename_vars(*t.tail(), f);
  return Term::list(std::move(args), std::move(tail));
}

/// Fresh name for the anonymous variable `_`; unique per process.
inline std::string fresh_anonymous_name() {
  static std::atomic<unsigned long> counter{0};
  return "_G" + std::to_string(++counter);
}

// ---------------------------------------------------------------------------
// Heap assertions

struct PointsTo {
  Term location;
  Term value;

  PointsTo() = default;
  PointsTo(Term loc, Term val) : location(std::move(loc)), value(std::move(val)) {
    if (location.is_number())
      throw std::invalid_argument("points-to location must not be a number: " + location.to_string());
  }

  /// Skips the location check. Substitution may bind a location variable to
  /// a number; such a heaplet is unsatisfiable and rejected by the search.
  static PointsTo unchecked(Term loc, Term val) {
    PointsTo pt;
    pt.location = std::move(loc);
    pt.value = std::move(val);
    return pt;
  }

  std::string to_string() const {
    return "pointsto(" + location.to_string() + "," + value.to_string() + ")";
  }
  friend bool operator==(const PointsTo&, const PointsTo&) = default;
  friend auto operator<=>(const PointsTo&, const PointsTo&) = default;
};

enum class RelOp { Eq, Neq, Lt, Le, Gt, Ge };

inline std::string_view rel_op_text(RelOp op) {
  switch (op) {
    case RelOp::Eq: return "=";
    case RelOp::Neq: return "\\=";
    case RelOp::Lt: return "<";
    case RelOp::Le: return "<=";
    case RelOp::Gt: return ">";
    case RelOp::Ge: return ">=";
  }
  return "?";
}

inline std::optional<RelOp> rel_op_from_text(std::string_view s) {
  if (s == "=") return RelOp::Eq;
  if (s == "\\=") return RelOp::Neq;
  if (s == "<") return RelOp::Lt;
  if (s == "<=" || s == "=<") return RelOp::Le;
  if (s == ">") return RelOp::Gt;
  if (s == ">=") return RelOp::Ge;
  return std::nullopt;
}

struct Relation {
  Term lhs;
  RelOp op = RelOp::Eq;
  Term rhs;

  std::string to_string() const {
    return lhs.to_string() + " " + std::string(rel_op_text(op)) + " " + rhs.to_string();
  }
  friend bool operator==(const Relation&, const Relation&) = default;
};

struct PredCall {
  std::string name;
  std::vector<Term> args;

  friend bool operator==(const PredCall&, const PredCall&) = default;
};

struct Subgoal;

struct Negation {
  std::vector<Subgoal> body;
  friend bool operator==(const Negation& a, const Negation& b);
};

struct Disjunction {
  std::vector<std::vector<Subgoal>> alternatives;
  friend bool operator==(const Disjunction& a, const Disjunction& b);
};

struct Cut {
  friend bool operator==(const Cut&, const Cut&) = default;
};
struct Fail {
  friend bool operator==(const Fail&, const Fail&) = default;
};

enum class HeapConst { Emp, True, False };

/// One body element. Equality ignores source coordinates.
struct Subgoal {
  using Node = std::variant<PointsTo, PredCall, Relation, Negation, Cut, Fail, Disjunction, HeapConst>;

  Node node;
  SourcePos pos;

  Subgoal() = default;
  Subgoal(Node n, SourcePos p = {}) : node(std::move(n)), pos(std::move(p)) {}

  bool is_terminal() const { return std::holds_alternative<PointsTo>(node); }
  bool is_call() const { return std::holds_alternative<PredCall>(node); }
  bool is_relation() const { return std::holds_alternative<Relation>(node); }
  bool is_negation() const { return std::holds_alternative<Negation>(node); }

  const PointsTo& terminal() const { return std::get<PointsTo>(node); }
  const PredCall& call() const { return std::get<PredCall>(node); }
  const Relation& relation() const { return std::get<Relation>(node); }
  const Negation& negation() const { return std::get<Negation>(node); }

  friend bool operator==(const Subgoal& a, const Subgoal& b) { return a.node == b.node; }
};

inline bool operator==(const Negation& a, const Negation& b) { return a.body == b.body; }
inline bool operator==(const Disjunction& a, const Disjunction& b) {
  return a.alternatives == b.alternatives;
}

struct Clause {
  std::string head_name;
  std::vector<Term> head_args;
  std::vector<Subgoal> body;
  SourcePos origin;

  bool is_fact() const { return body.empty(); }
  friend bool operator==(const Clause& a, const Clause& b) {
    return a.head_name == b.head_name && a.head_args == b.head_args && a.body == b.body;
  }
};

/// Clause order is significant: later clauses of a predicate take precedence.
struct Program {
  std::vector<Clause> clauses;
  friend bool operator==(const Program&, const Program&) = default;
};

/// A star-conjunction of terminals, predicate calls, relations and negated
/// fragments.
struct AbstractSentence {
  std::vector<Subgoal> items;
  friend bool operator==(const AbstractSentence&, const AbstractSentence&) = default;
};

/// Checks the sentence invariants: only terminal, call, relation and negated
/// items, and no two terminals at the same ground location.
inline std::vector<Diagnostic> validate_sentence(const AbstractSentence& s) {
  std::vector<Diagnostic> out;
  std::map<Term, const Subgoal*> seen;
  for (const auto& item : s.items) {
    if (std::holds_alternative<Cut>(item.node) || std::holds_alternative<Fail>(item.node)) {
      out.push_back({"cut and fail are not allowed in a sentence", item.pos});
      continue;
    }
    if (std::holds_alternative<Disjunction>(item.node) || std::holds_alternative<HeapConst>(item.node)) {
      out.push_back({"sentence items must be terminals, calls, relations or negations", item.pos});
      continue;
    }
    if (!item.is_terminal()) continue;
    const Term& loc = item.terminal().location;
    if (!loc.is_ground()) continue;
    auto [it, inserted] = seen.emplace(loc, &item);
    if (!inserted) {
      out.push_back({"duplicate location " + loc.to_string() + " (first at " +
                         it->second->pos.to_string() + ", again at " + item.pos.to_string() + ")",
                     item.pos});
    }
  }
  return out;
}

/// Heap assertion tree as written with connectives; lowered to subgoal form
/// by the normalizer.
struct HeapAssertion {
  enum class Kind { Emp, TrueH, FalseH, Points, Star, And, Or, Not, Exists, Call };

  Kind kind = Kind::Emp;
  PointsTo points;
  std::vector<HeapAssertion> children;
  std::string name;  // bound variable for Exists, predicate for Call
  std::vector<Term> args;

  static HeapAssertion emp() { return {}; }
  static HeapAssertion true_heap() { return make(Kind::TrueH); }
  static HeapAssertion false_heap() { return make(Kind::FalseH); }
  static HeapAssertion pt(Term loc, Term val) {
    HeapAssertion h = make(Kind::Points);
    h.points = PointsTo(std::move(loc), std::move(val));
    return h;
  }
  static HeapAssertion star(HeapAssertion a, HeapAssertion b) { return binary(Kind::Star, std::move(a), std::move(b)); }
  static HeapAssertion conj(HeapAssertion a, HeapAssertion b) { return binary(Kind::And, std::move(a), std::move(b)); }
  static HeapAssertion disj(HeapAssertion a, HeapAssertion b) { return binary(Kind::Or, std::move(a), std::move(b)); }
  static HeapAssertion negate(HeapAssertion a) {
    HeapAssertion h = make(Kind::Not);
    h.children.push_back(std::move(a));
    return h;
  }
  static HeapAssertion exists(std::string var, HeapAssertion body) {
    HeapAssertion h = make(Kind::Exists);
    h.name = std::move(var);
    h.children.push_back(std::move(body));
    return h;
  }
  static HeapAssertion call(std::string pred, std::vector<Term> args) {
    HeapAssertion h = make(Kind::Call);
    h.name = std::move(pred);
    h.args = std::move(args);
    return h;
  }

 private:
  static HeapAssertion make(Kind k) {
    HeapAssertion h;
    h.kind = k;
    return h;
  }
  static HeapAssertion binary(Kind k, HeapAssertion a, HeapAssertion b) {
    HeapAssertion h = make(k);
    h.children.push_back(std::move(a));
    h.children.push_back(std::move(b));
    return h;
  }
};

/// Name/arity pair identifying a predicate.
struct PredKey {
  std::string name;
  std::size_t arity = 0;

  std::string to_string() const { return name + "/" + std::to_string(arity); }
  friend bool operator==(const PredKey&, const PredKey&) = default;
  friend auto operator<=>(const PredKey&, const PredKey&) = default;
};

inline PredKey key_of(const PredCall& c) { return {c.name, c.args.size()}; }
inline PredKey key_of(const Clause& c) { return {c.head_name, c.head_args.size()}; }

/// Calls `f` on every term inside a subgoal (recursing into nested bodies).
template <typename F>
void for_each_term(const Subgoal& g, F&& f) {
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, PointsTo>) {
          f(n.location);
          f(n.value);
        } else if constexpr (std::is_same_v<N, PredCall>) {
          for (const auto& a : n.args) f(a);
        } else if constexpr (std::is_same_v<N, Relation>) {
          f(n.lhs);
          f(n.rhs);
        } else if constexpr (std::is_same_v<N, Negation>) {
          for (const auto& s : n.body) for_each_term(s, f);
        } else if constexpr (std::is_same_v<N, Disjunction>) {
          for (const auto& alt : n.alternatives)
            for (const auto& s : alt) for_each_term(s, f);
        }
      },
      g.node);
}

/// Rebuilds a subgoal with every term mapped through `f`.
template <typename F>
Subgoal map_terms(const Subgoal& g, F&& f) {
  Subgoal::Node node = std::visit(
      [&](const auto& n) -> Subgoal::Node {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, PointsTo>) {
          return PointsTo::unchecked(f(n.location), f(n.value));
        } else if constexpr (std::is_same_v<N, PredCall>) {
          PredCall c{n.name, {}};
          for (const auto& a : n.args) c.args.push_back(f(a));
          return c;
        } else if constexpr (std::is_same_v<N, Relation>) {
          return Relation{f(n.lhs), n.op, f(n.rhs)};
        } else if constexpr (std::is_same_v<N, Negation>) {
          Negation neg;
          for (const auto& s : n.body) neg.body.push_back(map_terms(s, f));
          return neg;
        } else if constexpr (std::is_same_v<N, Disjunction>) {
          Disjunction d;
          for (const auto& alt : n.alternatives) {
            std::vector<Subgoal> out;
            for (const auto& s : alt) out.push_back(map_terms(s, f));
            d.alternatives.push_back(std::move(out));
          }
          return d;
        } else {
          return n;
        }
      },
      g.node);
  return Subgoal(std::move(node), g.pos);
}

inline std::set<std::string> clause_vars(const Clause& c) {
  std::set<std::string> out;
  for (const auto& a : c.head_args) out.merge(free_vars(a));
  for (const auto& g : c.body) for_each_term(g, [&](const Term& t) { out.merge(free_vars(t)); });
  return out;
}

}  // namespace heaplet

template <>
struct std::hash<heaplet::Term> {
  std::size_t operator()(const heaplet::Term& t) const noexcept { return t.hash(); }
};
