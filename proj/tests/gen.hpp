#pragma once

// Hand-rolled random generators shared by the property and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "heaplet/heaplet.hpp"
#include "heaplet/oracle.hpp"

namespace gen {

using namespace heaplet;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  int below(int n) { return std::uniform_int_distribution<int>(0, n - 1)(eng_); }
  int between(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(eng_); }
  template <typename T>
  const T& pick(const std::vector<T>& xs) {
    return xs[static_cast<std::size_t>(below(static_cast<int>(xs.size())))];
  }
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    std::shuffle(xs.begin(), xs.end(), eng_);
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

struct Functor {
  std::string name;
  int arity;
};

struct TermPool {
  std::vector<std::string> vars{"X", "Y", "Z", "W"};
  std::vector<std::string> atoms{"a", "b", "nil", "loc1", "val1"};
  std::vector<Functor> functors{{"f", 1}, {"g", 2}, {"oa", 2}};
  bool numbers = true;
  bool lists = true;
};

inline Term number(Rng& r) {
  switch (r.below(4)) {
    case 0: return Term::number(std::to_string(r.between(0, 20)));
    case 1: return Term::number("-" + std::to_string(r.between(1, 9)));
    case 2: return Term::number(std::to_string(r.between(0, 9)) + "." + std::to_string(r.between(0, 99)));
    default: return Term::number(std::to_string(r.between(100, 999)));
  }
}

/// A term with at most `size` nodes.
inline Term term(Rng& r, int size, const TermPool& pool) {
  int choice = r.below(size <= 1 ? 3 : 5);
  if (choice == 2 && !pool.numbers) choice = r.below(2);
  if (choice == 4 && !pool.lists) choice = 3;
  if (choice == 0 && pool.vars.empty()) choice = 1;
  switch (choice) {
    case 0: return Term::var(r.pick(pool.vars));
    case 1: return Term::atom(r.pick(pool.atoms));
    case 2: return number(r);
    case 3: {
      const Functor& f = r.pick(pool.functors);
      std::vector<Term> args;
      int budget = std::max(1, (size - 1) / f.arity);
      for (int i = 0; i < f.arity; ++i) args.push_back(term(r, budget, pool));
      return Term::compound(f.name, std::move(args));
    }
    default: {
      int n = r.below(3);
      if (n == 0) return Term::list({});
      std::vector<Term> items;
      int budget = std::max(1, (size - 1) / n);
      for (int i = 0; i < n; ++i) items.push_back(term(r, budget, pool));
      std::optional<Term> tail;
      if (r.chance(0.3) && !pool.vars.empty()) tail = Term::var(r.pick(pool.vars));
      return Term::list(std::move(items), std::move(tail));
    }
  }
}

inline Term location(Rng& r, int size, const TermPool& pool) {
  Term t = term(r, size, pool);
  while (t.is_number()) t = term(r, size, pool);
  return t;
}

inline PointsTo points_to(Rng& r, int size, const TermPool& pool) {
  return PointsTo(location(r, size, pool), term(r, size, pool));
}

inline Relation relation(Rng& r, const TermPool& pool) {
  static const std::vector<RelOp> ops{RelOp::Eq, RelOp::Neq, RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge};
  return Relation{term(r, 3, pool), r.pick(ops), term(r, 3, pool)};
}

inline const std::vector<std::string>& pred_names() {
  static const std::vector<std::string> names{"p", "q", "r", "member", "ls", "node"};
  return names;
}

inline PredCall call(Rng& r, const TermPool& pool) {
  PredCall c{r.pick(pred_names()), {}};
  int n = r.below(3);
  for (int i = 0; i < n; ++i) c.args.push_back(term(r, 3, pool));
  return c;
}

/// Subgoals in the full clause syntax: terminals, calls, relations,
/// negations, disjunctions, cut and fail.
inline Subgoal full_subgoal(Rng& r, const TermPool& pool, int nesting) {
  int k = r.below(nesting > 0 ? 7 : 5);
  switch (k) {
    case 0: return Subgoal(points_to(r, 4, pool));
    case 1: return Subgoal(call(r, pool));
    case 2: return Subgoal(relation(r, pool));
    case 3: return r.chance(0.5) ? Subgoal(Cut{}) : Subgoal(Fail{});
    case 4: return Subgoal(points_to(r, 2, pool));
    case 5: {
      Negation n;
      int len = r.between(1, 2);
      for (int i = 0; i < len; ++i) n.body.push_back(full_subgoal(r, pool, nesting - 1));
      return Subgoal(std::move(n));
    }
    default: {
      Disjunction d;
      int alts = r.between(2, 3);
      for (int a = 0; a < alts; ++a) {
        std::vector<Subgoal> alt;
        int len = r.between(1, 2);
        for (int i = 0; i < len; ++i) alt.push_back(full_subgoal(r, pool, nesting - 1));
        d.alternatives.push_back(std::move(alt));
      }
      return Subgoal(std::move(d));
    }
  }
}

inline Program full_program(Rng& r) {
  TermPool pool;
  Program p;
  int n = r.below(7);
  for (int i = 0; i < n; ++i) {
    Clause c;
    c.head_name = r.pick(pred_names());
    int arity = r.below(4);
    for (int k = 0; k < arity; ++k) c.head_args.push_back(term(r, 4, pool));
    int len = r.below(5);
    for (int k = 0; k < len; ++k) c.body.push_back(full_subgoal(r, pool, 2));
    p.clauses.push_back(std::move(c));
  }
  return p;
}

/// Desugared environments: at most `preds` predicates with up to `clauses`
/// clauses each, bodies of at most `body` subgoals calling only defined
/// predicates.
struct EnvShape {
  int preds = 5;
  int clauses = 3;
  int body = 4;
  bool guards = true;
  bool negations = true;
  bool ground_heads = true;
};

inline Program desugared_program(Rng& r, const EnvShape& shape) {
  TermPool pool;
  int np = r.between(1, shape.preds);
  std::vector<PredKey> keys;
  for (int i = 0; i < np; ++i) keys.push_back({"p" + std::to_string(i), static_cast<std::size_t>(r.below(3))});
  auto body_goal = [&](auto&& self, int nesting) -> Subgoal {
    int k = r.below(2 + (shape.guards ? 1 : 0) + (shape.negations && nesting > 0 ? 1 : 0));
    if (k == 0) return Subgoal(points_to(r, 3, pool));
    if (k == 1) {
      const PredKey& key = r.pick(keys);
      PredCall c{key.name, {}};
      for (std::size_t a = 0; a < key.arity; ++a) c.args.push_back(term(r, 3, pool));
      return Subgoal(std::move(c));
    }
    if (k == 2 && shape.guards) return Subgoal(relation(r, pool));
    Negation n;
    int len = r.between(1, 2);
    for (int i = 0; i < len; ++i) n.body.push_back(self(self, nesting - 1));
    return Subgoal(std::move(n));
  };
  Program p;
  std::vector<Clause> clauses;
  for (const auto& key : keys) {
    int nc = r.between(1, shape.clauses);
    for (int c = 0; c < nc; ++c) {
      Clause cl;
      cl.head_name = key.name;
      for (std::size_t a = 0; a < key.arity; ++a)
        cl.head_args.push_back(shape.ground_heads ? term(r, 3, pool) : Term::var("H" + std::to_string(a)));
      int len = r.below(shape.body + 1);
      for (int i = 0; i < len; ++i) cl.body.push_back(body_goal(body_goal, 1));
      clauses.push_back(std::move(cl));
    }
  }
  // Interleave predicates; relative order within a predicate is kept.
  std::vector<std::size_t> order(clauses.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  r.shuffle(order);
  std::map<std::string, std::vector<std::size_t>> by_pred;
  for (std::size_t i = 0; i < clauses.size(); ++i) by_pred[clauses[i].head_name].push_back(i);
  std::map<std::string, std::size_t> taken;
  std::vector<std::string> slots;
  for (auto idx : order) slots.push_back(clauses[idx].head_name);
  for (const auto& name : slots) p.clauses.push_back(clauses[by_pred[name][taken[name]++]]);
  return p;
}

inline GrammarSymbol grammar_symbol(Rng& r, const TermPool& pool, int nesting) {
  int k = r.below(nesting > 0 ? 4 : 3);
  if (k == 0) return {TerminalSym{points_to(r, 4, pool)}};
  if (k == 1) {
    NonTerminalSym nt{"q" + std::to_string(r.below(4)), {}};
    int n = r.below(3);
    for (int i = 0; i < n; ++i) nt.attributes.push_back(term(r, 3, pool));
    return {nt};
  }
  if (k == 2) return {GuardSym{relation(r, pool)}};
  NegGuardSym neg;
  int len = r.between(1, 2);
  for (int i = 0; i < len; ++i) neg.body.push_back(grammar_symbol(r, pool, nesting - 1));
  return {neg};
}

inline AttributedGrammar grammar(Rng& r) {
  TermPool pool;
  AttributedGrammar g;
  int n = r.below(7);
  for (int i = 0; i < n; ++i) {
    Production p;
    p.name = "q" + std::to_string(r.below(4));
    int arity = r.below(3);
    for (int k = 0; k < arity; ++k) p.attributes.push_back(term(r, 3, pool));
    int len = r.below(5);
    for (int k = 0; k < len; ++k) p.rhs.push_back(grammar_symbol(r, pool, 1));
    g.productions.push_back(std::move(p));
  }
  g.start_symbols = start_symbols_of(g.productions);
  return g;
}

// ---------------------------------------------------------------------------
// Entailment instances

struct Instance {
  PredicateEnv env;
  FirstFollowTables tables;
  AbstractSentence left;
  AbstractSentence right;
};

inline const std::vector<std::string>& heap_atoms() {
  static const std::vector<std::string> a{"a", "b", "c", "d"};
  return a;
}

/// Small environments over locations a..d in the shape of list and tree
/// predicates: heads are distinct variables, bodies mix terminals and calls,
/// no guards.
inline PredicateEnv heap_env(Rng& r, int max_preds = 4, int max_clauses = 3, int max_body = 3) {
  int np = r.between(1, max_preds);
  std::vector<PredKey> keys;
  for (int i = 0; i < np; ++i) keys.push_back({"p" + std::to_string(i), static_cast<std::size_t>(r.between(1, 2))});
  Program prog;
  for (const auto& key : keys) {
    int nc = r.between(1, max_clauses);
    for (int c = 0; c < nc; ++c) {
      Clause cl;
      cl.head_name = key.name;
      std::vector<Term> vocab;
      for (std::size_t a = 0; a < key.arity; ++a) {
        cl.head_args.push_back(Term::var("H" + std::to_string(a)));
        vocab.push_back(cl.head_args.back());
      }
      vocab.push_back(Term::var("Z"));
      auto value = [&]() {
        if (r.chance(0.5)) return r.pick(vocab);
        if (r.chance(0.2)) return Term::number(r.between(0, 2));
        return Term::atom(r.pick(heap_atoms()));
      };
      auto loc = [&]() {
        if (r.chance(0.7)) return Term::var("H" + std::to_string(r.below(static_cast<int>(key.arity))));
        return Term::atom(r.pick(heap_atoms()));
      };
      int len = r.below(max_body + 1);
      for (int i = 0; i < len; ++i) {
        if (r.chance(0.6)) {
          cl.body.push_back(Subgoal(PointsTo(loc(), value())));
        } else {
          const PredKey& callee = r.pick(keys);
          PredCall pc{callee.name, {}};
          for (std::size_t a = 0; a < callee.arity; ++a) pc.args.push_back(value());
          cl.body.push_back(Subgoal(std::move(pc)));
        }
      }
      prog.clauses.push_back(std::move(cl));
    }
  }
  return build_env(decanonise_heads(prog));
}

inline Term ground_value(Rng& r) {
  if (r.chance(0.2)) return Term::number(r.between(0, 2));
  if (r.chance(0.1)) return Term::atom("nil");
  return Term::atom(r.pick(heap_atoms()));
}

inline AbstractSentence ground_sentence(Rng& r, const PredicateEnv& env, int max_items = 4) {
  AbstractSentence s;
  std::vector<std::string> locs = heap_atoms();
  r.shuffle(locs);
  std::size_t next_loc = 0;
  int n = r.between(1, max_items);
  for (int i = 0; i < n; ++i) {
    if ((r.chance(0.5) || env.predicates().empty()) && next_loc < locs.size()) {
      s.items.push_back(Subgoal(PointsTo(Term::atom(locs[next_loc++]), ground_value(r))));
    } else if (!env.predicates().empty()) {
      const PredKey& k = r.pick(env.predicates());
      PredCall c{k.name, {}};
      for (std::size_t a = 0; a < k.arity; ++a) c.args.push_back(ground_value(r));
      s.items.push_back(Subgoal(std::move(c)));
    }
  }
  return s;
}

/// Replaces every variable by a random ground value; nullopt when that puts
/// a number in location position.
inline std::optional<PointsTo> grounded(Rng& r, const PointsTo& pt, std::map<std::string, Term>& fill) {
  auto g = [&](const Term& t) {
    std::map<std::string, Term> b;
    for (const auto& v : free_vars(t)) {
      if (!fill.count(v)) fill.emplace(v, ground_value(r));
      b.emplace(v, fill.at(v));
    }
    return apply(Substitution::from(b), t);
  };
  Term loc = g(pt.location);
  if (loc.is_number()) return std::nullopt;
  return PointsTo(loc, g(pt.value));
}

/// A random instance. The right sentence is either independent, a derived
/// heap of the left one, or such a heap with one value changed or one
/// heaplet dropped, so that both verdicts occur often.
inline Instance instance(Rng& r) {
  Instance in;
  in.env = heap_env(r);
  in.tables = analyze(translate(in.env));
  in.left = ground_sentence(r, in.env);
  int mode = r.below(4);
  if (mode == 0) {
    in.right = ground_sentence(r, in.env);
    return in;
  }
  oracle::Options o;
  o.max_forms = 200;
  o.max_nodes = 5000;
  auto ds = oracle::derivations(in.env, in.left, 3, o);
  if (ds.normal_forms.empty()) {
    in.right = ground_sentence(r, in.env);
    return in;
  }
  const auto& nf = ds.normal_forms[static_cast<std::size_t>(r.below(static_cast<int>(ds.normal_forms.size())))];
  std::map<std::string, Term> fill;
  std::vector<PointsTo> heap;
  for (const auto& pt : nf.terminals) {
    auto g = grounded(r, pt, fill);
    if (!g) {
      in.right = ground_sentence(r, in.env);
      return in;
    }
    heap.push_back(*g);
  }
  if (mode == 2 && !heap.empty()) {
    auto& victim = heap[static_cast<std::size_t>(r.below(static_cast<int>(heap.size())))];
    victim = PointsTo(victim.location, ground_value(r));
  } else if (mode == 3 && !heap.empty()) {
    heap.erase(heap.begin() + r.below(static_cast<int>(heap.size())));
  }
  r.shuffle(heap);
  for (const auto& pt : heap) in.right.items.push_back(Subgoal(pt));
  if (!validate_sentence(in.right).empty()) {
    in.right = ground_sentence(r, in.env);
  }
  return in;
}

inline AbstractSentence permuted(Rng& r, const AbstractSentence& s) {
  AbstractSentence out = s;
  r.shuffle(out.items);
  return out;
}

}  // namespace gen
