#pragma once

// Entailment between abstract sentences as a recognition problem: both
// sentences are unfolded through the predicate rules until their terminal
// multisets coincide under one substitution.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "heaplet/grammar.hpp"
#include "heaplet/model.hpp"
#include "heaplet/partition.hpp"
#include "heaplet/syntax.hpp"
#include "heaplet/unify.hpp"

namespace heaplet {

struct EntailConfig {
  int max_depth = 64;             // unfolding levels per branch
  std::size_t max_steps = 1'000'000;
  bool order_conjuncts = true;

  void validate() const {
    if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
    if (max_steps < static_cast<std::size_t>(max_depth))
      throw std::invalid_argument("max_steps must be at least max_depth");
  }
};

// ---------------------------------------------------------------------------
// Guards

struct GuardFailed {
  Relation relation;
};
struct UnresolvedGuard {
  Relation relation;
};

using GuardResult = std::variant<Substitution, GuardFailed, UnresolvedGuard>;

/// '=' unifies. '\=' holds once the sides cannot unify and fails once they
/// are identical; anything in between is unresolved. Arithmetic comparisons
/// need ground numbers.
inline GuardResult evaluate_guard(const Relation& r, const Substitution& under = {}) {
  Term a = apply(under, r.lhs), b = apply(under, r.rhs);
  if (r.op == RelOp::Eq) {
    auto u = unify(a, b, under);
    if (!succeeded(u)) return GuardFailed{r};
    return std::get<Substitution>(std::move(u));
  }
  if (r.op == RelOp::Neq) {
    auto u = unify(a, b);
    if (!succeeded(u)) return under;
    if (std::get<Substitution>(u).empty()) return GuardFailed{r};
    return UnresolvedGuard{r};
  }
  if (!a.is_ground() || !b.is_ground()) return UnresolvedGuard{r};
  if (!a.is_number() || !b.is_number()) return GuardFailed{r};
  auto c = compare_numbers(a.name(), b.name());
  bool holds = false;
  switch (r.op) {
    case RelOp::Lt: holds = c < 0; break;
    case RelOp::Le: holds = c <= 0; break;
    case RelOp::Gt: holds = c > 0; break;
    case RelOp::Ge: holds = c >= 0; break;
    default: break;
  }
  if (!holds) return GuardFailed{r};
  return under;
}

// ---------------------------------------------------------------------------
// Unfolding and shifting

/// Clause with every variable suffixed, e.g. X becomes X#7.
inline Clause rename_clause(const Clause& c, const std::string& suffix) {
  auto rn = [&](const Term& t) {
    return rename_vars(t, [&](const std::string& v) -> std::optional<std::string> { return v + suffix; });
  };
  Clause out{c.head_name, {}, {}, c.origin};
  for (const auto& a : c.head_args) out.head_args.push_back(rn(a));
  for (const auto& g : c.body) out.body.push_back(map_terms(g, rn));
  return out;
}

struct Expansion {
  std::vector<Subgoal> body;
  Substitution subst;
};

/// Unfolds `call` with an already renamed clause: head and call arguments
/// are unified pairwise and the body is returned instantiated.
inline std::variant<Expansion, UnifyFailure> expand(const PredCall& call, const Clause& clause,
                                                     const Substitution& under = {}) {
  if (key_of(call) != key_of(clause))
    return UnifyFailure{UnifyFailure::Reason::Clash, Term::atom("call"), Term::atom("clause")};
  auto u = unify_all(clause.head_args, call.args, under);
  if (!succeeded(u)) return std::get<UnifyFailure>(u);
  Expansion e{{}, std::get<Substitution>(std::move(u))};
  for (const auto& g : clause.body) e.body.push_back(apply(e.subst, g));
  return e;
}

struct ShiftResult {
  AbstractSentence left;
  AbstractSentence right;
  Substitution subst;
};

/// Every maximal matching between the terminals of `a1` and `a2` that unifies
/// under `under`, with matched pairs removed. Order: a1 terminals left to
/// right, candidates in a2 in sentence order, "leave unmatched" last.
inline std::vector<ShiftResult> shift_terms(const AbstractSentence& a1, const AbstractSentence& a2,
                                            const Substitution& under = {}) {
  std::vector<std::size_t> left_terms;
  for (std::size_t i = 0; i < a1.items.size(); ++i)
    if (a1.items[i].is_terminal()) left_terms.push_back(i);
  std::vector<bool> used_left(a1.items.size(), false), used_right(a2.items.size(), false);
  std::vector<ShiftResult> out;
  std::set<std::string> seen;

  auto maximal = [&](const Substitution& s) {
    for (auto i : left_terms) {
      if (used_left[i]) continue;
      for (std::size_t j = 0; j < a2.items.size(); ++j)
        if (!used_right[j] && a2.items[j].is_terminal() &&
            succeeded(unify(a1.items[i].terminal(), a2.items[j].terminal(), s)))
          return false;
    }
    return true;
  };
  std::function<void(std::size_t, const Substitution&)> go = [&](std::size_t k, const Substitution& s) {
    if (k == left_terms.size()) {
      if (!maximal(s)) return;
      ShiftResult r{{}, {}, s};
      for (std::size_t i = 0; i < a1.items.size(); ++i)
        if (!used_left[i]) r.left.items.push_back(apply(s, a1.items[i]));
      for (std::size_t j = 0; j < a2.items.size(); ++j)
        if (!used_right[j]) r.right.items.push_back(apply(s, a2.items[j]));
      std::string key = render_sentence(r.left) + render_sentence(r.right) + s.to_string();
      if (seen.insert(key).second) out.push_back(std::move(r));
      return;
    }
    std::size_t i = left_terms[k];
    for (std::size_t j = 0; j < a2.items.size(); ++j) {
      if (used_right[j] || !a2.items[j].is_terminal()) continue;
      auto u = unify(a1.items[i].terminal(), a2.items[j].terminal(), s);
      if (!succeeded(u)) continue;
      used_left[i] = used_right[j] = true;
      go(k + 1, std::get<Substitution>(u));
      used_left[i] = used_right[j] = false;
    }
    go(k + 1, s);
  };
  go(0, under);
  return out;
}

// ---------------------------------------------------------------------------
// Verdicts

enum class Side { Left, Right, Both };

inline std::string_view side_text(Side s) {
  switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Both: return "both";
  }
  return "";
}

struct TraceEvent {
  enum class Move { Shift, Expand, MatchPair };

  Move move = Move::Shift;
  Side side = Side::Left;
  std::size_t item = 0;       // id of the item acted on
  std::size_t partner = 0;    // Shift, MatchPair: id of the other side's item
  std::size_t clause = 0;     // Expand: index into the environment's clauses
  std::size_t first_id = 0;   // Expand: id given to the first body item
  std::string suffix;         // Expand: variable renaming suffix
  SourcePos origin;           // Expand: clause coordinates
  std::vector<std::pair<std::string, Term>> delta;  // new bindings

  std::string to_string() const {
    std::string out;
    switch (move) {
      case Move::Shift: out = "shift #" + std::to_string(item) + " ~ #" + std::to_string(partner); break;
      case Move::MatchPair: out = "fold #" + std::to_string(item) + " = #" + std::to_string(partner); break;
      case Move::Expand:
        out = "unfold " + std::string(side_text(side)) + " #" + std::to_string(item) + " by clause " +
              std::to_string(clause) + (origin.known() ? " (" + origin.to_string() + ")" : "");
        break;
    }
    if (!delta.empty()) {
      out += " {";
      for (std::size_t i = 0; i < delta.size(); ++i)
        out += (i ? ", " : "") + delta[i].first + "->" + delta[i].second.to_string();
      out += "}";
    }
    return out;
  }
};

/// Index into a sentence (== size for "end of sentence") plus coordinates.
struct ItemPosition {
  std::size_t index = 0;
  SourcePos pos;
};

struct RefutationReport {
  ItemPosition left;
  ItemPosition right;
  Side found_side = Side::Left;
  std::string found;                 // the item that could not be accounted for
  std::string reason;
  ShapeSet expected;                 // first sets of the other side's remaining items
  std::vector<Subgoal> context;      // those remaining items
  std::size_t exhausted_alternatives = 0;
};

struct Verdict {
  enum class Kind { Entailed, Refuted, DepthExceeded };

  Kind kind = Kind::Refuted;
  Substitution witness;              // restricted to the sentences' variables
  std::vector<TraceEvent> trace;     // full for Entailed, deepest partial otherwise
  std::optional<RefutationReport> refutation;
  std::size_t steps = 0;
  int depth = 0;                     // last unfolding bound tried

  bool entailed() const { return kind == Kind::Entailed; }
};

inline std::string_view verdict_text(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Entailed: return "entailed";
    case Verdict::Kind::Refuted: return "refuted";
    case Verdict::Kind::DepthExceeded: return "depth-exceeded";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Search

namespace detail {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

inline std::size_t sat_add(std::size_t a, std::size_t b) {
  return (a == kUnbounded || b == kUnbounded || a > kUnbounded - b) ? kUnbounded : a + b;
}

/// Per predicate: fewest and most terminals any complete derivation yields,
/// and every terminal shape that can appear in one.
struct PredStats {
  std::size_t min = kUnbounded;  // kUnbounded: no finite derivation at all
  std::size_t max = 0;           // kUnbounded: no bound
  ShapeSet reachable;
  // Locations a derivation can use: these ground terms, the call's own
  // arguments at these positions, or anything at all.
  std::set<Term> ground_locs;
  std::set<std::size_t> arg_locs;
  bool any_loc = false;
};

/// Where a location term of clause c comes from: a ground term, a head
/// argument position, or unknown.
struct LocSource {
  enum class Kind { Ground, Arg, Any } kind = Kind::Any;
  Term ground;
  std::size_t arg = 0;
};

inline LocSource loc_source(const Clause& c, const Term& t) {
  if (t.is_ground()) return {LocSource::Kind::Ground, t, 0};
  if (t.is_var())
    for (std::size_t i = 0; i < c.head_args.size(); ++i)
      if (c.head_args[i] == t) return {LocSource::Kind::Arg, {}, i};
  return {};
}

/// A clause that can never complete: two of its terminals share a location
/// term, or a location is a number.
inline bool dead_clause(const Clause& c) {
  std::set<Term> locs;
  for (const auto& g : c.body) {
    if (!g.is_terminal()) continue;
    const Term& loc = g.terminal().location;
    if (loc.is_number() || !locs.insert(loc).second) return true;
  }
  return false;
}

inline std::map<PredKey, PredStats> predicate_stats(const PredicateEnv& env) {
  std::map<PredKey, PredStats> st;
  for (const auto& k : env.predicates()) st[k];
  auto count = [](const Clause& c) {
    std::size_t n = 0;
    for (const auto& g : c.body) n += g.is_terminal();
    return n;
  };
  auto calls = [](const Clause& c) {
    std::vector<PredKey> out;
    for (const auto& g : c.body)
      if (g.is_call()) out.push_back(key_of(g.call()));
    return out;
  };
  auto stat = [&](const PredKey& k) -> PredStats& { return st[k]; };

  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& c : env.clauses()) {
      if (dead_clause(c)) continue;
      std::size_t sum = count(c);
      for (const auto& k : calls(c)) sum = sat_add(sum, stat(k).min);
      auto& mine = stat(key_of(c));
      if (sum < mine.min) {
        mine.min = sum;
        changed = true;
      }
      for (const auto& g : c.body)
        if (g.is_terminal()) changed = mine.reachable.insert(TerminalShape::of(g.terminal())).second || changed;
      for (const auto& k : calls(c)) {
        if (k == key_of(c)) continue;
        for (const auto& sh : ShapeSet(stat(k).reachable)) changed = mine.reachable.insert(sh).second || changed;
      }
    }
  }

  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& c : env.clauses()) {
      if (dead_clause(c)) continue;
      auto& mine = stat(key_of(c));
      auto add = [&](const LocSource& src) {
        switch (src.kind) {
          case LocSource::Kind::Ground: changed = mine.ground_locs.insert(src.ground).second || changed; break;
          case LocSource::Kind::Arg: changed = mine.arg_locs.insert(src.arg).second || changed; break;
          case LocSource::Kind::Any:
            changed = changed || !mine.any_loc;
            mine.any_loc = true;
            break;
        }
      };
      for (const auto& g : c.body) {
        if (g.is_terminal()) add(loc_source(c, g.terminal().location));
        if (!g.is_call()) continue;
        const auto& callee = stat(key_of(g.call()));
        if (callee.any_loc) add({});
        for (const auto& t : std::set<Term>(callee.ground_locs)) add({LocSource::Kind::Ground, t, 0});
        for (auto j : std::set<std::size_t>(callee.arg_locs)) add(loc_source(c, g.call().args[j]));
      }
    }
  }

  // Upper bounds: unbounded on any cycle among clauses that can complete.
  std::map<PredKey, int> mark;  // 0 new, 1 on stack, 2 done
  std::function<std::size_t(const PredKey&)> upper = [&](const PredKey& k) -> std::size_t {
    auto& m = mark[k];
    if (m == 1) return kUnbounded;
    if (m == 2) return stat(k).max;
    m = 1;
    std::size_t best = 0;
    for (const Clause* c : env.rules(k)) {
      if (dead_clause(*c)) continue;
      std::size_t sum = count(*c);
      bool viable = true;
      for (const auto& callee : calls(*c)) viable = viable && stat(callee).min != kUnbounded;
      if (!viable) continue;
      for (const auto& callee : calls(*c)) sum = sat_add(sum, upper(callee));
      best = std::max(best, sum);
    }
    mark[k] = 2;
    stat(k).max = best;
    return best;
  };
  for (const auto& k : env.predicates()) upper(k);
  // A predicate that reaches a cycle is unbounded even when visited first.
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& c : env.clauses()) {
      if (dead_clause(c)) continue;
      auto& mine = stat(key_of(c));
      if (mine.max == kUnbounded) continue;
      for (const auto& k : calls(c))
        if (stat(k).max == kUnbounded && stat(k).min != kUnbounded) {
          mine.max = kUnbounded;
          changed = true;
        }
    }
  }
  return st;
}

enum Lane : std::size_t { kLeft = 0, kRight = 1, kShared = 2 };

struct Item {
  Subgoal goal;
  std::size_t id = 0;
  std::size_t origin = 0;  // index of the sentence item this descends from
  Lane home = kLeft;       // sentence the origin index refers to
  int level = 0;
};

struct State {
  std::array<std::vector<Item>, 3> lanes;  // unconsumed terminals and calls
  std::vector<PointsTo> heap;              // matched or shared terminals
  std::vector<Item> guards;                // unresolved relations
  std::vector<Item> negations;
  Substitution s;
  std::size_t next_id = 0;
};

struct Failure {
  std::size_t matched = 0;
  Item item;
  Lane lane = kLeft;
  std::string reason;
  std::vector<Item> context;
  Substitution s;
  std::vector<TraceEvent> trace;
};

struct SearchResult {
  Verdict::Kind kind = Verdict::Kind::Refuted;
  Substitution s;
  std::vector<TraceEvent> trace;
  std::optional<Failure> failure;
  std::size_t steps = 0;
  std::size_t failures = 0;
  int depth = 0;
};

class Search {
 public:
  Search(const PredicateEnv& env, const std::map<PredKey, PredStats>& stats, const FirstFollowTables& tables,
         const EntailConfig& cfg, std::set<std::string> outer, bool sub_multiset, std::size_t budget)
      : env_(env),
        stats_(stats),
        tables_(tables),
        cfg_(cfg),
        outer_(std::move(outer)),
        sub_(sub_multiset),
        budget_(budget) {
    auto rn = [](const Term& t) {
      return rename_vars(t, [](const std::string& v) -> std::optional<std::string> { return v + "#?"; });
    };
    for (const auto& c : env_.clauses()) {
      Probe p;
      p.dead = dead_clause(c);
      for (const auto& a : c.head_args) p.head.push_back(rn(a));
      for (const auto& g : c.body) {
        if (!g.is_relation() || g.relation().op != RelOp::Eq) break;
        p.eqs.emplace_back(rn(g.relation().lhs), rn(g.relation().rhs));
      }
      probes_.push_back(std::move(p));
    }
  }

  SearchResult run(const State& root) {
    SearchResult out;
    for (int limit = 1;; limit = std::min(limit * 2, cfg_.max_depth)) {
      limit_ = limit;
      cuts_ = 0;
      State st = root;
      bool ok = dfs(st);
      out.depth = limit;
      if (ok) {
        out.kind = Verdict::Kind::Entailed;
        out.s = success_s_;
        out.trace = success_trace_;
        break;
      }
      if (exhausted_) {
        out.kind = Verdict::Kind::DepthExceeded;
        break;
      }
      if (cuts_ == 0) {
        out.kind = Verdict::Kind::Refuted;
        break;
      }
      if (limit >= cfg_.max_depth) {
        out.kind = Verdict::Kind::DepthExceeded;
        break;
      }
    }
    out.steps = steps_;
    out.failures = failures_;
    out.failure = best_;
    return out;
  }

  const std::optional<Failure>& failure() const { return best_; }

  /// Places a new item; false if an eager guard fails.
  bool place(State& st, Lane lane, Item item, std::size_t pos) {
    const Subgoal& g = item.goal;
    if (g.is_terminal()) {
      if (lane == kShared) {
        st.heap.push_back(g.terminal());
        return true;
      }
      auto& l = st.lanes[lane];
      l.insert(l.begin() + static_cast<std::ptrdiff_t>(std::min(pos, l.size())), std::move(item));
      return true;
    }
    if (g.is_call()) {
      auto& l = st.lanes[lane];
      l.insert(l.begin() + static_cast<std::ptrdiff_t>(std::min(pos, l.size())), std::move(item));
      return true;
    }
    if (g.is_relation()) {
      auto r = evaluate_guard(g.relation(), st.s);
      if (auto* s = std::get_if<Substitution>(&r)) {
        st.s = std::move(*s);
        return true;
      }
      if (std::holds_alternative<GuardFailed>(r)) {
        fail(st, item, lane, "guard " + render(apply(st.s, g)) + " does not hold");
        return false;
      }
      st.guards.push_back(std::move(item));
      return true;
    }
    if (g.is_negation()) {
      st.negations.push_back(std::move(item));
      return true;
    }
    throw HeapletError({Diagnostic{"cannot check " + render(g) + "; desugar the rules first", g.pos}});
  }

 private:
  bool budget_hit() {
    if (steps_ >= budget_) exhausted_ = true;
    if (!exhausted_) ++steps_;
    return exhausted_;
  }

  bool dfs(State& st) {
    if (budget_hit()) return false;
    settle(st);
    if (!viable(st)) return false;
    std::string key = fingerprint(st);
    // A failure without depth cuts holds at every limit; one with cuts only
    // at the limit it was seen under, and a hit on it counts as a cut again.
    if (auto it = memo_.find(key); it != memo_.end() && it->second >= limit_) {
      if (it->second != kAnyLimit) ++cuts_;
      return false;
    }
    std::size_t cuts_before = cuts_;
    bool ok = step(st);
    if (!ok && !exhausted_) memo_[std::move(key)] = cuts_ == cuts_before ? kAnyLimit : limit_;
    return ok;
  }

  // -- pruning ---------------------------------------------------------------

  bool viable(State& st) {
    for (std::size_t i = 0; i < st.guards.size();) {
      auto r = evaluate_guard(st.guards[i].goal.relation(), st.s);
      if (std::holds_alternative<GuardFailed>(r)) {
        fail(st, st.guards[i], st.guards[i].home, "guard " + render(apply(st.s, st.guards[i].goal)) +
                                                      " does not hold");
        return false;
      }
      if (std::holds_alternative<Substitution>(r)) {
        st.guards.erase(st.guards.begin() + static_cast<std::ptrdiff_t>(i));
        continue;
      }
      ++i;
    }
    for (Lane lane : {kLeft, kRight, kShared}) {
      for (const auto& it : st.lanes[lane]) {
        if (it.goal.is_terminal() && apply(st.s, it.goal.terminal().location).is_number()) {
          fail(st, it, lane, "number " + apply(st.s, it.goal.terminal().location).to_string() + " used as a location");
          return false;
        }
      }
    }
    for (const auto& pt : st.heap)
      if (apply(st.s, pt.location).is_number()) return false;
    for (Lane lane : {kLeft, kRight}) {
      if (sub_ && lane == kRight) continue;
      std::set<Term> locs;
      for (const auto& pt : st.heap) locs.insert(apply(st.s, pt.location));
      for (const auto& it : st.lanes[lane]) {
        if (!it.goal.is_terminal()) continue;
        if (!locs.insert(apply(st.s, it.goal.terminal().location)).second) {
          fail(st, it, lane, "location " + apply(st.s, it.goal.terminal().location).to_string() + " used twice");
          return false;
        }
      }
    }
    // Locations are distinct on each side, so a terminal at a ground
    // location meets the other side's terminal there or else some call
    // there must be able to produce that location.
    for (Lane lane : {kLeft, kRight}) {
      if (sub_ && lane == kRight) continue;
      Lane other = lane == kLeft ? kRight : kLeft;
      for (const auto& it : st.lanes[lane]) {
        if (!it.goal.is_terminal()) continue;
        PointsTo t = apply(st.s, it.goal.terminal());
        if (!t.location.is_ground()) continue;
        const Item* same = nullptr;
        for (const auto& u : st.lanes[other])
          if (u.goal.is_terminal() && apply(st.s, u.goal.terminal().location) == t.location) same = &u;
        if (same) {
          if (!succeeded(unify(t, apply(st.s, same->goal.terminal())))) {
            fail(st, it, lane, "location " + t.location.to_string() + " holds " +
                                   apply(st.s, same->goal.terminal().value).to_string() + " on the other side");
            return false;
          }
          continue;
        }
        bool reachable = false;
        for (const auto& u : st.lanes[other])
          if (u.goal.is_call() ? can_produce(st, u.goal.call(), t.location)
                               : succeeded(unify(apply(st.s, u.goal.terminal().location), t.location))) {
            reachable = true;
            break;
          }
        if (!reachable) {
          fail(st, it, lane, "no heaplet at " + t.location.to_string() + " on the other side");
          return false;
        }
      }
    }
    std::array<std::size_t, 2> lo{0, 0}, hi{0, 0};
    for (Lane lane : {kLeft, kRight, kShared}) {
      for (const auto& it : st.lanes[lane]) {
        if (it.goal.is_terminal()) {
          if (lane != kShared) {
            lo[lane] = sat_add(lo[lane], 1);
            hi[lane] = sat_add(hi[lane], 1);
          }
          continue;
        }
        const auto& ps = stats_.at(key_of(it.goal.call()));
        if (ps.min == kUnbounded) {
          fail(st, it, lane, "predicate " + key_of(it.goal.call()).to_string() + " has no finite unfolding");
          return false;
        }
        if (lane == kShared) continue;
        lo[lane] = sat_add(lo[lane], ps.min);
        hi[lane] = sat_add(hi[lane], ps.max);
      }
    }
    if (sub_) {
      if (lo[kLeft] > hi[kRight]) {
        fail(st, surplus_item(st, kLeft), kLeft, "more heaplets required than available");
        return false;
      }
      return true;
    }
    for (Lane lane : {kLeft, kRight}) {
      Lane other = lane == kLeft ? kRight : kLeft;
      if (lo[lane] > hi[other]) {
        fail(st, surplus_item(st, lane), lane,
             "this side needs at least " + std::to_string(lo[lane]) + " heaplets but the other side has at most " +
                 std::to_string(hi[other]));
        return false;
      }
    }
    return true;
  }

  bool can_produce(const State& st, const PredCall& call, const Term& loc) const {
    const auto& ps = stats_.at(key_of(call));
    if (ps.any_loc || ps.ground_locs.count(loc)) return true;
    for (auto j : ps.arg_locs)
      if (succeeded(unify(apply(st.s, call.args[j]), loc))) return true;
    return false;
  }

  // The call forcing the most heaplets, or else the first terminal.
  Item surplus_item(const State& st, Lane lane) const {
    const Item* best = nullptr;
    std::size_t most = 0;
    for (const auto& it : st.lanes[lane]) {
      if (!it.goal.is_call()) continue;
      auto m = stats_.at(key_of(it.goal.call())).min;
      if (m > most) {
        most = m;
        best = &it;
      }
    }
    if (best) return *best;
    for (const auto& it : st.lanes[lane])
      if (it.goal.is_terminal()) return it;
    return st.lanes[lane].empty() ? Item{} : st.lanes[lane].front();
  }

  // -- moves -----------------------------------------------------------------

  bool step(State& st) {
    // A call with at most one applicable clause has no alternatives to
    // explore, so it goes before everything else.
    for (Lane lane : {kLeft, kRight, kShared}) {
      const auto& l = st.lanes[lane];
      for (std::size_t i = 0; i < l.size(); ++i) {
        if (!l[i].goal.is_call() || l[i].level >= limit_) continue;
        std::size_t n = applicable(st, l[i].goal.call());
        if (n == 0) {
          fail(st, l[i], lane, "no clause of " + key_of(l[i].goal.call()).to_string() + " applies");
          return false;
        }
        if (n == 1) return unfold_each(st, lane, i);
      }
    }
    for (Lane lane : {kLeft, kRight}) {
      if (sub_ && lane == kRight) break;
      auto& l = st.lanes[lane];
      for (std::size_t i = 0; i < l.size(); ++i)
        if (l[i].goal.is_terminal()) return resolve(st, lane, i);
    }
    auto has_call = [&](Lane lane) {
      return std::any_of(st.lanes[lane].begin(), st.lanes[lane].end(),
                         [](const Item& it) { return it.goal.is_call(); });
    };
    if (!has_call(kLeft) && !has_call(kRight) && !has_call(kShared)) return accept(st);

    if (!sub_) {
      for (std::size_t i = 0; i < st.lanes[kLeft].size(); ++i)
        for (std::size_t j = 0; j < st.lanes[kRight].size(); ++j)
          if (fold_pair(st, i, j)) return true;
      if (exhausted_) return false;
    }
    // First-fail: every call must be unfolded eventually, so the one with
    // the fewest applicable clauses goes first.
    Lane pick_lane = kLeft;
    std::size_t pick = kUnbounded, fewest = kUnbounded;
    for (Lane lane : {kLeft, kRight, kShared}) {
      const auto& l = st.lanes[lane];
      for (std::size_t i = 0; i < l.size() && fewest > 0; ++i) {
        if (!l[i].goal.is_call()) continue;
        std::size_t n = applicable(st, l[i].goal.call());
        if (n < fewest) {
          fewest = n;
          pick = i;
          pick_lane = lane;
        }
      }
    }
    if (pick == kUnbounded) return false;
    if (fewest == 0) {
      const Item& c = st.lanes[pick_lane][pick];
      fail(st, c, pick_lane, "no clause of " + key_of(c.goal.call()).to_string() + " applies");
      return false;
    }
    return unfold_each(st, pick_lane, pick);
  }

  // st.s is idempotent, so unifying applied terms under the empty
  // substitution decides the same question without copying st.s.
  std::size_t applicable(const State& st, const PredCall& call) const {
    std::vector<Term> args;
    for (const auto& a : call.args) args.push_back(apply(st.s, a));
    std::size_t n = 0;
    for (const Clause* c : env_.rules(key_of(call))) {
      const Probe& p = probes_[static_cast<std::size_t>(c - env_.clauses().data())];
      if (p.dead) continue;
      Unifier u{Substitution{}};
      bool ok = true;
      for (std::size_t i = 0; ok && i < args.size(); ++i) ok = !u.unify(p.head[i], args[i]);
      // leading '=' guards carry the head terms of a decanonised clause
      for (std::size_t i = 0; ok && i < p.eqs.size(); ++i) ok = !u.unify(p.eqs[i].first, p.eqs[i].second);
      n += ok;
    }
    return n;
  }

  bool unifiable(const State& st, const Term& a, const Term& b) const {
    return succeeded(unify(apply(st.s, a), apply(st.s, b)));
  }

  /// The terminal at lanes[lane][idx] must meet a partner on the other side:
  /// an existing terminal, or one produced by unfolding a call there.
  bool resolve(State& st, Lane lane, std::size_t idx) {
    Lane other = lane == kLeft ? kRight : kLeft;
    const Item t = st.lanes[lane][idx];
    PointsTo tp = apply(st.s, t.goal.terminal());
    bool any = false;
    for (std::size_t j = 0; j < st.lanes[other].size(); ++j) {
      const Item& u = st.lanes[other][j];
      if (!u.goal.is_terminal()) continue;
      PointsTo up = apply(st.s, u.goal.terminal());
      if (!succeeded(unify(tp, up))) continue;
      auto r = unify(tp, u.goal.terminal(), st.s);
      if (!succeeded(r)) continue;
      any = true;
      State child = st;
      child.s = std::get<Substitution>(std::move(r));
      Item partner = u;
      child.heap.push_back(t.goal.terminal());
      erase(child.lanes[other], j);
      erase(child.lanes[lane], idx);
      TraceEvent ev;
      ev.move = TraceEvent::Move::Shift;
      ev.side = lane == kLeft ? Side::Left : Side::Right;
      ev.item = t.id;
      ev.partner = partner.id;
      ev.delta = delta(st.s, child.s);
      trace_.push_back(std::move(ev));
      if (dfs(child)) return true;
      trace_.pop_back();
      if (exhausted_) return false;
    }
    if (sub_) {
      if (!any) fail(st, t, lane, "no heaplet matches");
      return false;
    }
    TerminalShape shape = TerminalShape::of(tp);
    std::vector<std::size_t> candidates, later;
    for (std::size_t j = 0; j < st.lanes[other].size(); ++j) {
      const Item& c = st.lanes[other][j];
      if (!c.goal.is_call()) continue;
      PredKey k = key_of(c.goal.call());
      const auto& reach = stats_.at(k).reachable;
      if (std::none_of(reach.begin(), reach.end(), [&](const TerminalShape& r) { return r.compatible(shape); }))
        continue;
      auto first = tables_.first_of(k);
      bool guided = std::any_of(first.begin(), first.end(), [&](const TerminalShape& r) { return r.compatible(shape); });
      (guided ? candidates : later).push_back(j);
    }
    candidates.insert(candidates.end(), later.begin(), later.end());
    if (!any && candidates.empty()) {
      fail(st, t, lane, "no heaplet or predicate on the other side can match");
      return false;
    }
    for (auto j : candidates) {
      if (unfold_each(st, other, j)) return true;
      if (exhausted_) return false;
    }
    return false;
  }

  /// Same predicate on both sides with unifiable arguments: one shared call
  /// whose heaplets count for both sides.
  bool fold_pair(State& st, std::size_t i, std::size_t j) {
    const Item& a = st.lanes[kLeft][i];
    const Item& b = st.lanes[kRight][j];
    if (!a.goal.is_call() || !b.goal.is_call() || key_of(a.goal.call()) != key_of(b.goal.call())) return false;
    for (std::size_t k = 0; k < a.goal.call().args.size(); ++k)
      if (!unifiable(st, a.goal.call().args[k], b.goal.call().args[k])) return false;
    auto r = unify_all(a.goal.call().args, b.goal.call().args, st.s);
    if (!succeeded(r)) return false;
    State child = st;
    child.s = std::get<Substitution>(std::move(r));
    Item shared = a;
    erase(child.lanes[kLeft], i);
    erase(child.lanes[kRight], j);
    child.lanes[kShared].push_back(shared);
    TraceEvent ev;
    ev.move = TraceEvent::Move::MatchPair;
    ev.side = Side::Both;
    ev.item = a.id;
    ev.partner = b.id;
    ev.delta = delta(st.s, child.s);
    trace_.push_back(std::move(ev));
    if (dfs(child)) return true;
    trace_.pop_back();
    return false;
  }

  /// Tries every clause of the call, later definitions first.
  bool unfold_each(State& st, Lane lane, std::size_t idx) {
    const Item c = st.lanes[lane][idx];
    if (c.level >= limit_) {
      ++cuts_;
      return false;
    }
    auto rules = env_.rules(key_of(c.goal.call()));
    std::vector<Term> args;
    for (const auto& a : c.goal.call().args) args.push_back(apply(st.s, a));
    for (auto it = rules.rbegin(); it != rules.rend(); ++it) {
      const Clause* clause = *it;
      const Probe& probe = probes_[static_cast<std::size_t>(clause - env_.clauses().data())];
      if (probe.dead) continue;
      {
        Unifier quick{Substitution{}};
        bool ok = true;
        for (std::size_t k = 0; ok && k < args.size(); ++k) ok = !quick.unify(probe.head[k], args[k]);
        if (!ok) continue;
      }
      std::string suffix = "#" + std::to_string(st.next_id);
      Clause renamed = rename_clause(*clause, suffix);
      auto r = unify_all(renamed.head_args, c.goal.call().args, st.s);
      if (!succeeded(r)) continue;
      State child = st;
      child.s = std::get<Substitution>(std::move(r));
      erase(child.lanes[lane], idx);
      ++child.next_id;  // the suffix is spent even when the body is empty
      std::size_t first_id = child.next_id;
      bool ok = true;
      std::size_t pos = idx;
      for (auto& g : renamed.body) {
        Item body{std::move(g), child.next_id++, c.origin, c.home, c.level + 1};
        bool queued = body.goal.is_call() || (body.goal.is_terminal() && lane != kShared);
        if (!place(child, lane, std::move(body), pos)) {
          ok = false;
          break;
        }
        if (queued) ++pos;
      }
      if (!ok) continue;
      TraceEvent ev;
      ev.move = TraceEvent::Move::Expand;
      ev.side = lane == kLeft ? Side::Left : lane == kRight ? Side::Right : Side::Both;
      ev.item = c.id;
      ev.clause = static_cast<std::size_t>(clause - env_.clauses().data());
      ev.first_id = first_id;
      ev.suffix = suffix;
      ev.origin = clause->origin;
      ev.delta = delta(st.s, child.s);
      trace_.push_back(std::move(ev));
      if (dfs(child)) return true;
      trace_.pop_back();
      if (exhausted_) return false;
    }
    if (!exhausted_ && applicable(st, c.goal.call()) == 0)
      fail(st, c, lane, "no clause of " + key_of(c.goal.call()).to_string() + " applies");
    return false;
  }

  bool accept(State& st) {
    for (const auto& g : st.guards) {
      auto r = evaluate_guard(g.goal.relation(), st.s);
      if (std::holds_alternative<GuardFailed>(r)) {
        fail(st, g, g.home, "guard " + render(apply(st.s, g.goal)) + " does not hold");
        return false;
      }
      if (std::holds_alternative<UnresolvedGuard>(r))
        throw HeapletError({Diagnostic{"unresolved guard " + render(apply(st.s, g.goal)), g.goal.pos}});
    }
    for (const auto& n : st.negations) {
      if (blocked(st, n)) {
        fail(st, n, n.home, "negated fragment " + render(apply(st.s, n.goal)) + " is present");
        return false;
      }
      if (exhausted_) return false;
    }
    success_s_ = st.s;
    success_trace_ = trace_;
    return true;
  }

  /// A negated fragment blocks if some unfolding of it fits inside the final
  /// heap without binding variables visible outside it.
  bool blocked(const State& st, const Item& neg) {
    std::set<std::string> outer = outer_;
    std::vector<PointsTo> heap;
    for (const auto& pt : st.heap) heap.push_back(apply(st.s, pt));
    for (const auto& pt : heap) {
      outer.merge(free_vars(pt.location));
      outer.merge(free_vars(pt.value));
    }
    for (const auto& v : outer_) outer.merge(free_vars(apply(st.s, Term::var(v))));
    std::map<std::string, Term> consts;
    for (const auto& v : outer) consts.emplace(v, Term::atom("sk#" + v));
    Substitution sk = Substitution::from(consts);

    State root;
    root.next_id = st.next_id;
    Search sub(env_, stats_, tables_, cfg_, {}, true, budget_ > steps_ ? budget_ - steps_ : 0);
    for (const auto& g : neg.goal.negation().body) {
      Item it{apply(sk, apply(st.s, g)), root.next_id++, neg.origin, neg.home, 0};
      if (!sub.place(root, kLeft, std::move(it), kUnbounded)) return false;
    }
    for (const auto& pt : heap) {
      Item it{Subgoal(apply(sk, pt)), root.next_id++, 0, kRight, 0};
      root.lanes[kRight].push_back(std::move(it));
    }
    auto res = sub.run(root);
    steps_ += res.steps;
    if (res.kind == Verdict::Kind::DepthExceeded) {
      ++cuts_;
      if (steps_ >= budget_) exhausted_ = true;
      return true;
    }
    return res.kind == Verdict::Kind::Entailed;
  }

  // -- bookkeeping -----------------------------------------------------------

  // Applies the substitution throughout the state and drops the bindings of
  // clause-local variables, which then occur nowhere. Keeps copies cheap.
  static void settle(State& st) {
    bool local = false;
    for (const auto& [k, v] : st.s.bindings()) local = local || k.find('#') != std::string::npos;
    if (!local) return;
    for (auto& lane : st.lanes)
      for (auto& it : lane) it.goal = apply(st.s, it.goal);
    for (auto& it : st.guards) it.goal = apply(st.s, it.goal);
    for (auto& it : st.negations) it.goal = apply(st.s, it.goal);
    for (auto& pt : st.heap) pt = apply(st.s, pt);
    std::map<std::string, Term> keep;
    for (const auto& [k, v] : st.s.bindings())
      if (k.find('#') == std::string::npos) keep.emplace(k, v);
    st.s = Substitution::from(std::move(keep));
  }

  static void erase(std::vector<Item>& v, std::size_t i) { v.erase(v.begin() + static_cast<std::ptrdiff_t>(i)); }

  static std::vector<std::pair<std::string, Term>> delta(const Substitution& before, const Substitution& after) {
    std::vector<std::pair<std::string, Term>> out;
    for (const auto& [k, v] : after.bindings())
      if (!before.binds(k)) out.emplace_back(k, v);
    return out;
  }

  void fail(const State& st, const Item& item, Lane lane, std::string reason) {
    ++failures_;
    std::size_t matched = st.heap.size();
    if (best_ && best_->matched >= matched) return;
    Failure f;
    f.matched = matched;
    f.item = item;
    f.lane = lane;
    f.reason = std::move(reason);
    Lane other = lane == kRight ? kLeft : kRight;
    f.context = st.lanes[other];
    f.s = st.s;
    f.trace = trace_;
    best_ = std::move(f);
  }

  /// State up to renaming of clause-local variables (those carrying '#').
  std::string fingerprint(const State& st) const {
    std::map<std::string, std::string> names;
    auto rn = [&](const Term& t) {
      return rename_vars(apply(st.s, t), [&](const std::string& v) -> std::optional<std::string> {
        if (v.find('#') == std::string::npos) return std::nullopt;
        auto [it, fresh] = names.emplace(v, "_#" + std::to_string(names.size()));
        return it->second;
      });
    };
    auto text = [&](const Subgoal& g) { return render(map_terms(g, rn)); };
    auto block = [&](std::vector<std::string> parts) {
      std::sort(parts.begin(), parts.end());
      std::string out;
      for (auto& p : parts) out += p + ";";
      return out;
    };
    std::string key;
    for (Lane lane : {kLeft, kRight, kShared}) {
      std::vector<std::string> parts;
      for (const auto& it : st.lanes[lane])
        parts.push_back(it.goal.is_call() ? text(it.goal) + "@" + std::to_string(it.level) : text(it.goal));
      key += block(std::move(parts)) + "|";
    }
    std::vector<std::string> heap, guards, negs;
    for (const auto& pt : st.heap) heap.push_back(text(Subgoal(pt)));
    for (const auto& g : st.guards) guards.push_back(text(g.goal));
    for (const auto& n : st.negations) negs.push_back(text(n.goal));
    key += block(std::move(heap)) + "|" + block(std::move(guards)) + "|" + block(std::move(negs));
    for (const auto& v : outer_) key += "," + v + "=" + rn(Term::var(v)).to_string();
    return key;
  }

  const PredicateEnv& env_;
  const std::map<PredKey, PredStats>& stats_;
  const FirstFollowTables& tables_;
  EntailConfig cfg_;
  std::set<std::string> outer_;
  bool sub_;
  std::size_t budget_;
  // Per clause, variables renamed apart: head and leading '=' guards.
  struct Probe {
    bool dead = false;
    std::vector<Term> head;
    std::vector<std::pair<Term, Term>> eqs;
  };
  std::vector<Probe> probes_;  // by clause index

  int limit_ = 1;
  std::size_t cuts_ = 0;
  std::size_t steps_ = 0;
  std::size_t failures_ = 0;
  bool exhausted_ = false;
  static constexpr int kAnyLimit = std::numeric_limits<int>::max();
  std::unordered_map<std::string, int> memo_;
  std::vector<TraceEvent> trace_;
  Substitution success_s_;
  std::vector<TraceEvent> success_trace_;
  std::optional<Failure> best_;
};

/// Deterministic order used when conjunct ordering is on: terminals first by
/// location text, then everything else by its rendering.
inline std::vector<std::size_t> canonical_order(const AbstractSentence& s) {
  std::vector<std::size_t> idx(s.items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto key = [&](std::size_t i) {
    const auto& g = s.items[i];
    if (g.is_terminal()) return std::tuple{0, g.terminal().location.to_string(), render(g)};
    return std::tuple{1, std::string{}, render(g)};
  };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  return idx;
}

}  // namespace detail

/// Prepared engine for one environment; check() may be called concurrently.
class Checker {
 public:
  Checker(const PredicateEnv& env, const FirstFollowTables& tables, EntailConfig cfg = {})
      : env_(env), tables_(tables), cfg_(cfg), stats_(detail::predicate_stats(env)) {
    cfg_.validate();
  }

  Verdict check(const AbstractSentence& a1, const AbstractSentence& a2) const {
    using namespace detail;
    auto missing = undefined_calls(env_, a1.items);
    for (auto& d : undefined_calls(env_, a2.items)) missing.push_back(std::move(d));
    if (!missing.empty()) throw HeapletError(missing);

    std::set<std::string> outer;
    for (const auto* s : {&a1, &a2})
      for (const auto& g : s->items) for_each_term(g, [&](const Term& t) { outer.merge(free_vars(t)); });

    // Entailment is symmetric; orient the pair canonically so that the
    // search, and hence any budget cut-off, does not depend on argument order.
    bool swap = false;
    if (cfg_.order_conjuncts) {
      std::string l, r;
      for (auto i : canonical_order(a1)) l += render(a1.items[i]) + ";";
      for (auto i : canonical_order(a2)) r += render(a2.items[i]) + ";";
      swap = r < l;
    }
    const AbstractSentence& first = swap ? a2 : a1;
    const AbstractSentence& second = swap ? a1 : a2;
    // ids follow the caller's argument order: a1 items first, then a2 items
    std::size_t first_base = swap ? a1.items.size() : 0;
    std::size_t second_base = swap ? 0 : a1.items.size();

    Search search(env_, stats_, tables_, cfg_, outer, false, cfg_.max_steps);
    State root;
    root.next_id = a1.items.size() + a2.items.size();
    std::optional<Failure> early;
    auto load = [&](const AbstractSentence& s, Lane lane, std::size_t base) {
      std::vector<std::size_t> order(s.items.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      if (cfg_.order_conjuncts) order = canonical_order(s);
      for (auto i : order) {
        Item it{s.items[i], base + i, i, lane, 0};
        if (!search.place(root, lane, std::move(it), kUnbounded)) return false;
      }
      return true;
    };
    SearchResult res;
    if (load(first, kLeft, first_base) && load(second, kRight, second_base)) {
      res = search.run(root);
    } else {
      res.kind = Verdict::Kind::Refuted;
      res.failure = search.failure();
      res.failures = 1;
    }

    Verdict v;
    v.kind = res.kind;
    v.steps = res.steps;
    v.depth = res.depth;
    auto flip = [&](Side s) {
      if (!swap || s == Side::Both) return s;
      return s == Side::Left ? Side::Right : Side::Left;
    };
    if (res.kind == Verdict::Kind::Entailed) {
      v.witness = res.s.normalized().restricted(outer);
      v.trace = std::move(res.trace);
      for (auto& ev : v.trace) ev.side = flip(ev.side);
      return v;
    }
    if (res.failure) {
      v.trace = res.failure->trace;
      for (auto& ev : v.trace) ev.side = flip(ev.side);
    }
    if (res.kind == Verdict::Kind::Refuted && res.failure) {
      const Failure& f = *res.failure;
      RefutationReport rep;
      Lane lane = f.lane == kShared ? kLeft : f.lane;
      const AbstractSentence& mine = lane == kLeft ? first : second;
      const AbstractSentence& theirs = lane == kLeft ? second : first;
      auto position = [](const AbstractSentence& s, std::size_t idx) {
        ItemPosition p;
        p.index = std::min(idx, s.items.size());
        if (p.index < s.items.size()) p.pos = s.items[p.index].pos;
        return p;
      };
      ItemPosition here = position(mine, f.item.origin);
      std::size_t other_idx = theirs.items.size();
      for (const auto& it : f.context) other_idx = std::min(other_idx, it.origin);
      ItemPosition there = position(theirs, other_idx);
      Side found_side = lane == kLeft ? Side::Left : Side::Right;
      rep.found_side = flip(found_side);
      if (rep.found_side == Side::Left) {
        rep.left = here;
        rep.right = there;
      } else {
        rep.left = there;
        rep.right = here;
      }
      rep.found = render(apply(f.s, f.item.goal));
      rep.reason = f.reason;
      for (const auto& it : f.context) {
        Subgoal g = apply(f.s, it.goal);
        if (g.is_terminal()) {
          rep.expected.insert(TerminalShape::of(g.terminal()));
        } else if (g.is_call()) {
          auto fs = tables_.first_of(key_of(g.call()));
          rep.expected.insert(fs.begin(), fs.end());
        }
        rep.context.push_back(std::move(g));
      }
      rep.exhausted_alternatives = res.failures;
      v.refutation = std::move(rep);
    }
    return v;
  }

  const EntailConfig& config() const { return cfg_; }

 private:
  const PredicateEnv& env_;
  const FirstFollowTables& tables_;
  EntailConfig cfg_;
  std::map<PredKey, detail::PredStats> stats_;
};

inline Verdict check(const PredicateEnv& env, const FirstFollowTables& tables, const AbstractSentence& a1,
                     const AbstractSentence& a2, const EntailConfig& cfg = {}) {
  return Checker(env, tables, cfg).check(a1, a2);
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayResult {
  bool ok = false;
  std::string message;
  std::vector<std::string> left;   // final terminal multisets, sorted
  std::vector<std::string> right;
  Substitution subst;
};

/// Re-executes an Entailed verdict's trace from scratch and checks that both
/// sides end in the same terminal multiset and agree with the witness.
inline ReplayResult replay(const PredicateEnv& env, const AbstractSentence& a1, const AbstractSentence& a2,
                           const Verdict& v) {
  ReplayResult out;
  enum class Home { Left, Right, Shared, Gone };
  struct Entry {
    Subgoal goal;
    Home home;
  };
  std::map<std::size_t, Entry> items;
  std::size_t id = 0;
  for (const auto& g : a1.items) items[id++] = {g, Home::Left};
  for (const auto& g : a2.items) items[id++] = {g, Home::Right};
  std::vector<Relation> guards;
  Substitution s;
  for (const auto& [_, e] : items) {
    if (!e.goal.is_relation()) continue;
    guards.push_back(e.goal.relation());
    if (e.goal.relation().op != RelOp::Eq) continue;
    auto u = unify(e.goal.relation().lhs, e.goal.relation().rhs, s);
    if (succeeded(u)) s = std::get<Substitution>(std::move(u));
  }

  auto bail = [&](std::string m) {
    out.message = std::move(m);
    return out;
  };
  for (const auto& ev : v.trace) {
    auto it = items.find(ev.item);
    if (it == items.end()) return bail("unknown item #" + std::to_string(ev.item));
    switch (ev.move) {
      case TraceEvent::Move::Shift: {
        auto jt = items.find(ev.partner);
        if (jt == items.end() || !it->second.goal.is_terminal() || !jt->second.goal.is_terminal())
          return bail("shift of non-terminals");
        auto u = unify(it->second.goal.terminal(), jt->second.goal.terminal(), s);
        if (!succeeded(u)) return bail("shift does not unify: " + std::get<UnifyFailure>(u).to_string());
        s = std::get<Substitution>(std::move(u));
        break;
      }
      case TraceEvent::Move::MatchPair: {
        auto jt = items.find(ev.partner);
        if (jt == items.end() || !it->second.goal.is_call() || !jt->second.goal.is_call())
          return bail("fold of non-calls");
        auto u = unify_all(it->second.goal.call().args, jt->second.goal.call().args, s);
        if (!succeeded(u)) return bail("fold does not unify");
        s = std::get<Substitution>(std::move(u));
        it->second.home = Home::Shared;
        jt->second.home = Home::Gone;
        break;
      }
      case TraceEvent::Move::Expand: {
        if (!it->second.goal.is_call() || ev.clause >= env.clauses().size()) return bail("bad unfold");
        Clause c = rename_clause(env.clauses()[ev.clause], ev.suffix);
        auto e = expand(it->second.goal.call(), c, s);
        if (auto* f = std::get_if<UnifyFailure>(&e)) return bail("unfold does not unify: " + f->to_string());
        s = std::get<Expansion>(e).subst;
        Home home = it->second.home;
        std::size_t nid = ev.first_id;
        for (const auto& g : c.body) {
          if (g.is_relation()) {
            guards.push_back(g.relation());
            if (g.relation().op == RelOp::Eq) {
              auto u = unify(g.relation().lhs, g.relation().rhs, s);
              if (!succeeded(u)) return bail("guard fails in replay");
              s = std::get<Substitution>(std::move(u));
            }
          }
          items[nid++] = {g, home};
        }
        it->second.home = Home::Gone;
        break;
      }
    }
  }
  for (const auto& r : guards)
    if (!std::holds_alternative<Substitution>(evaluate_guard(r, s))) return bail("guard " + r.to_string() + " fails");
  for (const auto& [k, e] : items) {
    if (e.home == Home::Gone || !e.goal.is_call()) continue;
    return bail("call left unexpanded: " + render(e.goal));
  }
  for (const auto& [k, e] : items) {
    if (e.home == Home::Gone || !e.goal.is_terminal()) continue;
    std::string t = apply(s, e.goal.terminal()).to_string();
    if (e.home != Home::Right) out.left.push_back(t);
    if (e.home != Home::Left) out.right.push_back(t);
  }
  std::sort(out.left.begin(), out.left.end());
  std::sort(out.right.begin(), out.right.end());
  if (out.left != out.right) return bail("terminal multisets differ");
  Substitution norm = s.normalized();
  for (const auto& [var, t] : v.witness.bindings())
    if (apply(norm, Term::var(var)) != apply(norm, t)) return bail("witness disagrees at " + var);
  out.subst = norm;
  out.ok = true;
  return out;
}

}  // namespace heaplet
