#pragma once

// Brute-force bounded derivation enumerator. Deliberately naive and built
// only on the term and unification layers, so that it can serve as ground
// truth for the analyses and the entailment engine.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "heaplet/model.hpp"
#include "heaplet/partition.hpp"
#include "heaplet/unify.hpp"

namespace heaplet::oracle {

struct Occurrence {
  PredKey key;
  std::size_t begin = 0;  // span over the terminal sequence
  std::size_t end = 0;
};

struct NormalForm {
  std::vector<PointsTo> terminals;   // in derivation order, substitution applied
  Substitution subst;                // restricted to the sentence's variables
  std::vector<Relation> pending;     // guards not decidable inside the derivation
  std::vector<Negation> negations;

  // Filled only in annotated mode.
  std::vector<PointsTo> patterns;    // clause-level pattern of each terminal
  std::vector<Occurrence> calls;
};

struct DerivationSet {
  std::vector<NormalForm> normal_forms;
  bool truncated = false;
};

struct Options {
  std::string tag = "L";          // keeps renamed variables of two runs apart
  std::size_t max_forms = 20000;
  std::size_t max_nodes = 400000;
  std::size_t max_matches = 2000000;  // oracle_equal: unification attempts while matching heaps
  bool annotate = false;
};

namespace detail {

enum class GuardState { Holds, Fails, Open };

inline GuardState guard(const Relation& r, Substitution& s) {
  Term a = apply(s, r.lhs), b = apply(s, r.rhs);
  switch (r.op) {
    case RelOp::Eq: {
      auto u = unify(a, b, s);
      if (!succeeded(u)) return GuardState::Fails;
      s = std::get<Substitution>(std::move(u));
      return GuardState::Holds;
    }
    case RelOp::Neq: {
      auto u = unify(a, b);
      if (!succeeded(u)) return GuardState::Holds;
      return std::get<Substitution>(u).empty() ? GuardState::Fails : GuardState::Open;
    }
    default: {
      if (!a.is_ground() || !b.is_ground()) return GuardState::Open;
      if (!a.is_number() || !b.is_number()) return GuardState::Fails;
      auto c = compare_numbers(a.name(), b.name());
      bool ok = r.op == RelOp::Lt   ? c < 0
                : r.op == RelOp::Le ? c <= 0
                : r.op == RelOp::Gt ? c > 0
                                    : c >= 0;
      return ok ? GuardState::Holds : GuardState::Fails;
    }
  }
}

struct Work {
  enum class Kind { Goal, Close } kind = Kind::Goal;
  Subgoal goal;
  int level = 0;
  std::size_t occurrence = 0;  // for Close
};

class Enumerator {
 public:
  Enumerator(const PredicateEnv& env, int depth, const Options& opts, std::set<std::string> keep)
      : env_(env), depth_(depth), opts_(opts), keep_(std::move(keep)) {}

  DerivationSet run(const std::vector<Subgoal>& items) {
    Branch b;
    for (const auto& g : items) b.work.push_back({Work::Kind::Goal, g, 0, 0});
    walk(std::move(b));
    return std::move(out_);
  }

 private:
  struct Branch {
    std::vector<Work> work;  // processed front to back
    std::size_t next = 0;
    std::vector<PointsTo> terms;
    std::vector<PointsTo> patterns;
    std::vector<Occurrence> calls;
    Substitution s;
    std::vector<Relation> open;
    std::vector<Negation> negs;
    int renames = 0;
  };

  bool stop() {
    if (out_.normal_forms.size() >= opts_.max_forms || nodes_ >= opts_.max_nodes) {
      out_.truncated = true;
      return true;
    }
    return false;
  }

  void walk(Branch b) {
    ++nodes_;
    if (stop()) return;
    while (b.next < b.work.size()) {
      Work w = b.work[b.next++];
      if (w.kind == Work::Kind::Close) {
        b.calls[w.occurrence].end = b.terms.size();
        continue;
      }
      const Subgoal& g = w.goal;
      if (g.is_terminal()) {
        b.terms.push_back(g.terminal());
        if (opts_.annotate) b.patterns.push_back(pattern_of(g.terminal()));
        continue;
      }
      if (g.is_relation()) {
        auto st = guard(g.relation(), b.s);
        if (st == GuardState::Fails) return;
        if (st == GuardState::Open) b.open.push_back(g.relation());
        continue;
      }
      if (g.is_negation()) {
        b.negs.push_back(g.negation());
        continue;
      }
      if (auto* d = std::get_if<Disjunction>(&g.node)) {
        for (const auto& alt : d->alternatives) {
          Branch nb = b;
          std::vector<Work> body;
          for (const auto& sg : alt) body.push_back({Work::Kind::Goal, sg, w.level, 0});
          nb.work.insert(nb.work.begin() + static_cast<std::ptrdiff_t>(nb.next), body.begin(), body.end());
          walk(std::move(nb));
          if (stop()) return;
        }
        return;
      }
      if (auto* k = std::get_if<HeapConst>(&g.node); k && *k == HeapConst::Emp) continue;
      if (!g.is_call()) return;  // cut, fail and the partial heap constants never derive anything
      const PredCall& call = g.call();
      if (w.level >= depth_) {
        out_.truncated = true;
        return;
      }
      for (const Clause* c : env_.rules(key_of(call))) {
        Branch nb = b;
        std::string suffix = "@" + opts_.tag + std::to_string(++nb.renames);
        auto rn = [&](const Term& t) {
          return rename_vars(t, [&](const std::string& v) -> std::optional<std::string> { return v + suffix; });
        };
        std::vector<Term> head;
        for (const auto& a : c->head_args) head.push_back(rn(a));
        auto u = unify_all(head, call.args, nb.s);
        if (!succeeded(u)) continue;
        nb.s = std::get<Substitution>(std::move(u));
        std::vector<Work> body;
        for (const auto& sg : c->body) body.push_back({Work::Kind::Goal, map_terms(sg, rn), w.level + 1, 0});
        if (opts_.annotate) {
          nb.calls.push_back({key_of(call), nb.terms.size(), nb.terms.size()});
          body.push_back({Work::Kind::Close, {}, 0, nb.calls.size() - 1});
        }
        nb.work.insert(nb.work.begin() + static_cast<std::ptrdiff_t>(nb.next), body.begin(), body.end());
        walk(std::move(nb));
        if (stop()) return;
      }
      return;
    }
    emit(std::move(b));
  }

  // Clause-level pattern: the terminal before any renaming suffix was added.
  static PointsTo pattern_of(const PointsTo& pt) {
    auto strip = [](const Term& t) {
      return rename_vars(t, [](const std::string& v) -> std::optional<std::string> {
        auto at = v.find('@');
        if (at == std::string::npos) return std::nullopt;
        return v.substr(0, at);
      });
    };
    return PointsTo(strip(pt.location), strip(pt.value));
  }

  void emit(Branch b) {
    NormalForm nf;
    for (const auto& t : b.terms) nf.terminals.push_back(apply(b.s, t));
    for (const auto& r : b.open) nf.pending.push_back(Relation{apply(b.s, r.lhs), r.op, apply(b.s, r.rhs)});
    for (const auto& n : b.negs) {
      Negation applied;
      for (const auto& g : n.body) applied.body.push_back(apply(b.s, g));
      nf.negations.push_back(std::move(applied));
    }
    nf.subst = b.s.restricted(keep_);
    if (opts_.annotate) {
      nf.patterns = std::move(b.patterns);
      nf.calls = std::move(b.calls);
      out_.normal_forms.push_back(std::move(nf));
      return;
    }
    std::string key = fingerprint(nf);
    if (seen_.insert(key).second) out_.normal_forms.push_back(std::move(nf));
  }

  static std::string fingerprint(const NormalForm& nf) {
    std::vector<std::string> ts;
    for (const auto& t : nf.terminals) ts.push_back(t.to_string());
    std::sort(ts.begin(), ts.end());
    std::string key;
    for (const auto& t : ts) key += t + ";";
    key += "|" + nf.subst.to_string() + "|";
    for (const auto& r : nf.pending) key += r.to_string() + ";";
    key += "|" + std::to_string(nf.negations.size());
    for (const auto& n : nf.negations)
      for (const auto& g : n.body)
        for_each_term(g, [&](const Term& t) { key += t.to_string() + ","; });
    return key;
  }

  const PredicateEnv& env_;
  int depth_;
  Options opts_;
  std::set<std::string> keep_;
  DerivationSet out_;
  std::set<std::string> seen_;
  std::size_t nodes_ = 0;
};

inline std::set<std::string> sentence_vars(const std::vector<Subgoal>& items) {
  std::set<std::string> out;
  for (const auto& g : items) for_each_term(g, [&](const Term& t) { out.merge(free_vars(t)); });
  return out;
}

}  // namespace detail

/// Every terminal-only form reachable from `s` where calls are unfolded at
/// most `depth` levels deep (a call introduced by an unfolding at level k
/// sits at level k + 1; only calls below `depth` are unfolded).
inline DerivationSet derivations(const PredicateEnv& env, const AbstractSentence& s, int depth,
                                 const Options& opts = {}) {
  detail::Enumerator e(env, depth, opts, detail::sentence_vars(s.items));
  return e.run(s.items);
}

enum class Answer { True, False, Inconclusive };

inline std::string to_string(Answer a) {
  switch (a) {
    case Answer::True: return "true";
    case Answer::False: return "false";
    case Answer::Inconclusive: return "inconclusive";
  }
  return "";
}

namespace detail {

/// Enumerates every bijection between `xs` and `ys` that unifies pairwise;
/// `leaf` returns true to stop. Each unification attempt spends one unit of
/// `budget` when given; at zero the enumeration gives up.
inline bool match_all(const std::vector<PointsTo>& xs, const std::vector<PointsTo>& ys, bool allow_extra,
                      const Substitution& s, const std::function<bool(const Substitution&)>& leaf,
                      std::size_t* budget = nullptr) {
  if (allow_extra ? xs.size() > ys.size() : xs.size() != ys.size()) return false;
  std::vector<bool> used(ys.size(), false);
  std::function<bool(std::size_t, const Substitution&)> go = [&](std::size_t i, const Substitution& cur) {
    if (i == xs.size()) return leaf(cur);
    for (std::size_t j = 0; j < ys.size(); ++j) {
      if (used[j]) continue;
      if (budget) {
        if (*budget == 0) return false;
        --*budget;
      }
      auto u = unify(xs[i], ys[j], cur);
      if (!succeeded(u)) continue;
      used[j] = true;
      bool done = go(i + 1, std::get<Substitution>(u));
      used[j] = false;
      if (done) return true;
    }
    return false;
  };
  return go(0, s);
}

inline bool distinct_locations(const std::vector<PointsTo>& heap) {
  std::set<Term> locs;
  for (const auto& pt : heap)
    if (pt.location.is_number() || !locs.insert(pt.location).second) return false;
  return true;
}

inline bool guards_hold(const std::vector<Relation>& rs, Substitution& s) {
  for (const auto& r : rs)
    if (guard(r, s) != GuardState::Holds) return false;
  return true;
}

struct Verdict {
  bool accepted = false;
  bool unsure = false;
};

inline Verdict accepts(const PredicateEnv& env, int depth, const std::vector<PointsTo>& heap,
                       const Substitution& s, const std::vector<Relation>& pending,
                       const std::vector<Negation>& negs, const std::set<std::string>& outer_vars);

/// True if some derivation of the negated body fits inside `heap` without
/// binding outer variables.
inline Verdict blocks(const PredicateEnv& env, int depth, const Negation& neg, const std::vector<PointsTo>& heap,
                      const std::set<std::string>& outer) {
  // Outer variables become constants: each is replaced by a reserved atom.
  std::map<std::string, Term> consts;
  for (const auto& v : outer) consts.emplace(v, Term::atom("sk#" + v));
  Substitution sk = Substitution::from(consts);
  AbstractSentence body;
  for (const auto& g : neg.body) body.items.push_back(apply(sk, g));
  std::vector<PointsTo> fixed;
  for (const auto& pt : heap) fixed.push_back(apply(sk, pt));

  Options o;
  o.tag = "N";
  auto ds = derivations(env, body, depth, o);
  Verdict v;
  for (const auto& nf : ds.normal_forms) {
    bool hit = match_all(nf.terminals, fixed, true, nf.subst, [&](const Substitution& m) {
      Substitution cur = m;
      if (!guards_hold(nf.pending, cur)) return false;
      for (const auto& inner : nf.negations) {
        auto b = blocks(env, depth, inner, fixed, {});
        if (b.unsure) v.unsure = true;
        if (b.accepted) return false;
      }
      return true;
    });
    if (hit) {
      v.accepted = true;
      return v;
    }
  }
  if (ds.truncated) v.unsure = true;
  return v;
}

inline Verdict accepts(const PredicateEnv& env, int depth, const std::vector<PointsTo>& heap,
                       const Substitution& s, const std::vector<Relation>& pending,
                       const std::vector<Negation>& negs, const std::set<std::string>& sentence) {
  Verdict v;
  std::vector<PointsTo> final_heap;
  for (const auto& pt : heap) final_heap.push_back(apply(s, pt));
  if (!distinct_locations(final_heap)) return v;
  Substitution cur = s;
  if (!guards_hold(pending, cur)) return v;
  std::set<std::string> outer;
  for (const auto& pt : final_heap) {
    outer.merge(free_vars(pt.location));
    outer.merge(free_vars(pt.value));
  }
  for (const auto& name : sentence) outer.merge(free_vars(apply(cur, Term::var(name))));
  for (const auto& n : negs) {
    Negation applied;
    for (const auto& g : n.body) applied.body.push_back(apply(cur, g));
    auto b = blocks(env, depth, applied, final_heap, outer);
    if (b.unsure) v.unsure = true;
    if (b.accepted) return v;
  }
  v.accepted = true;
  return v;
}

}  // namespace detail

/// True iff some normal form of a1 and some normal form of a2 unify as
/// terminal multisets (with guards holding, no negated fragment fitting the
/// common heap and no location used twice).
inline Answer oracle_equal(const PredicateEnv& env, const AbstractSentence& a1, const AbstractSentence& a2,
                           int depth, const Options& opts = {}) {
  Options o1 = opts, o2 = opts;
  o1.tag = "L";
  o2.tag = "R";
  o1.annotate = o2.annotate = false;
  auto d1 = derivations(env, a1, depth, o1);
  auto d2 = derivations(env, a2, depth, o2);
  auto sentence = detail::sentence_vars(a1.items);
  sentence.merge(detail::sentence_vars(a2.items));
  bool unsure = false;
  // only forms with equally many terminals can match
  std::map<std::size_t, std::vector<const NormalForm*>> by_size;
  for (const auto& n2 : d2.normal_forms) by_size[n2.terminals.size()].push_back(&n2);
  std::size_t budget = opts.max_matches;
  for (const auto& n1 : d1.normal_forms) {
    auto bucket = by_size.find(n1.terminals.size());
    if (bucket == by_size.end()) continue;
    for (const NormalForm* p2 : bucket->second) {
      const NormalForm& n2 = *p2;
      if (budget == 0) return Answer::Inconclusive;
      --budget;
      Unifier u(n1.subst);
      bool ok = true;
      for (const auto& [v, t] : n2.subst.bindings())
        if (u.unify(Term::var(v), t)) {
          ok = false;
          break;
        }
      if (!ok) continue;
      Substitution merged = std::move(u).substitution();
      std::vector<PointsTo> xs, ys;
      for (const auto& pt : n1.terminals) xs.push_back(apply(merged, pt));
      for (const auto& pt : n2.terminals) ys.push_back(apply(merged, pt));
      std::vector<Relation> pending = n1.pending;
      pending.insert(pending.end(), n2.pending.begin(), n2.pending.end());
      std::vector<Negation> negs = n1.negations;
      negs.insert(negs.end(), n2.negations.begin(), n2.negations.end());
      bool hit = detail::match_all(xs, ys, false, merged, [&](const Substitution& m) {
        auto v = detail::accepts(env, depth, xs, m, pending, negs, sentence);
        if (v.unsure) unsure = true;
        return v.accepted;
      }, &budget);
      if (hit) return Answer::True;
    }
  }
  if (d1.truncated || d2.truncated || unsure || budget == 0) return Answer::Inconclusive;
  return Answer::False;
}

}  // namespace heaplet::oracle
