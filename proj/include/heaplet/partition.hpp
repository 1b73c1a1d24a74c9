#pragma once

// Predicate environment, call-dependency partitions and heap graphs.

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "heaplet/model.hpp"

namespace heaplet {

/// The rule set of a program grouped by predicate. `clauses` keeps source
/// order; `rules` indexes into it per predicate.
class PredicateEnv {
 public:
  PredicateEnv() = default;

  void add(Clause c) {
    PredKey k = key_of(c);
    if (!rules_.count(k)) order_.push_back(k);
    rules_[k].push_back(clauses_.size());
    clauses_.push_back(std::move(c));
  }

  const std::vector<Clause>& clauses() const { return clauses_; }
  const std::vector<PredKey>& predicates() const { return order_; }
  bool defines(const PredKey& k) const { return rules_.count(k) != 0; }
  bool empty() const { return clauses_.empty(); }

  /// Clauses of one predicate in definition order.
  std::vector<const Clause*> rules(const PredKey& k) const {
    std::vector<const Clause*> out;
    auto it = rules_.find(k);
    if (it == rules_.end()) return out;
    for (auto idx : it->second) out.push_back(&clauses_[idx]);
    return out;
  }

  friend bool operator==(const PredicateEnv& a, const PredicateEnv& b) {
    return a.clauses_ == b.clauses_;
  }

 private:
  std::vector<Clause> clauses_;
  std::vector<PredKey> order_;
  std::map<PredKey, std::vector<std::size_t>> rules_;
};

inline PredicateEnv build_env(const Program& p) {
  PredicateEnv env;
  for (const auto& c : p.clauses) env.add(c);
  return env;
}

inline Program to_program(const PredicateEnv& env) { return Program{env.clauses()}; }

namespace detail {

inline void collect_calls(const std::vector<Subgoal>& body,
                          std::vector<std::pair<PredKey, SourcePos>>& out) {
  for (const auto& g : body) {
    if (g.is_call()) {
      out.emplace_back(key_of(g.call()), g.pos);
    } else if (g.is_negation()) {
      collect_calls(g.negation().body, out);
    } else if (auto* d = std::get_if<Disjunction>(&g.node)) {
      for (const auto& alt : d->alternatives) collect_calls(alt, out);
    }
  }
}

}  // namespace detail

/// Every predicate called from a body (negated calls included).
inline std::vector<std::pair<PredKey, SourcePos>> calls_in(const std::vector<Subgoal>& body) {
  std::vector<std::pair<PredKey, SourcePos>> out;
  detail::collect_calls(body, out);
  return out;
}

struct Partition {
  std::vector<PredKey> members;       // definition order
  std::vector<PredKey> entry_points;  // members no other member calls

  bool contains(const PredKey& k) const {
    return std::find(members.begin(), members.end(), k) != members.end();
  }
};

/// Connected components of the undirected closure of `edges` over `nodes`,
/// in order of first node. Entry points are members not called by another
/// member; a component without one lists all members.
inline std::vector<Partition> dependency_components(
    const std::vector<PredKey>& nodes, const std::map<PredKey, std::set<PredKey>>& edges) {
  std::map<PredKey, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index.emplace(nodes[i], i);
  std::vector<std::size_t> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [from, tos] : edges)
    for (const auto& to : tos) {
      auto a = index.find(from), b = index.find(to);
      if (a == index.end() || b == index.end()) continue;
      parent[find(a->second)] = find(b->second);
    }
  std::map<std::size_t, std::size_t> slot;
  std::vector<Partition> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto [it, fresh] = slot.emplace(find(i), out.size());
    if (fresh) out.emplace_back();
    out[it->second].members.push_back(nodes[i]);
  }
  for (auto& part : out) {
    for (const auto& m : part.members) {
      bool called = false;
      for (const auto& other : part.members) {
        if (other == m) continue;
        auto e = edges.find(other);
        if (e != edges.end() && e->second.count(m)) called = true;
      }
      if (!called) part.entry_points.push_back(m);
    }
    if (part.entry_points.empty()) part.entry_points = part.members;
  }
  return out;
}

inline std::map<PredKey, std::set<PredKey>> call_graph(const PredicateEnv& env) {
  std::map<PredKey, std::set<PredKey>> edges;
  for (const auto& c : env.clauses()) {
    auto& out = edges[key_of(c)];
    for (const auto& [k, _] : calls_in(c.body)) out.insert(k);
  }
  return edges;
}

/// Diagnostics for every call to a predicate the environment does not define.
inline std::vector<Diagnostic> undefined_calls(const PredicateEnv& env,
                                               const std::vector<Subgoal>& extra = {}) {
  std::map<PredKey, std::vector<SourcePos>> missing;
  auto scan = [&](const std::vector<Subgoal>& body) {
    for (const auto& [k, pos] : calls_in(body))
      if (!env.defines(k)) missing[k].push_back(pos);
  };
  for (const auto& c : env.clauses()) scan(c.body);
  scan(extra);
  std::vector<Diagnostic> out;
  for (const auto& [k, sites] : missing) {
    std::string where;
    for (const auto& s : sites) where += (where.empty() ? "" : ", ") + s.to_string();
    out.push_back({"undefined predicate " + k.to_string() + " called at " + where,
                   sites.front()});
  }
  return out;
}

inline Outcome<std::vector<Partition>> partitions(const PredicateEnv& env) {
  auto missing = undefined_calls(env);
  if (!missing.empty()) return missing;
  return dependency_components(env.predicates(), call_graph(env));
}

// ---------------------------------------------------------------------------
// Heap graphs

struct AliasPair {
  Term target;
  Term first;   // predecessor locations pointing at target
  Term second;
};

/// Vertices are objects: a field location oa(Obj,Field) belongs to vertex
/// Obj, any other location is its own vertex. A value that names a vertex or
/// a non-nil atom gives an edge; other values become sink vertices.
struct HeapGraph {
  std::set<Term> vertices;
  std::set<Term> sinks;
  std::vector<std::pair<Term, Term>> edges;
  std::vector<AliasPair> aliases;
  bool connected = true;
};

inline Term object_of(const Term& location) {
  if (location.is_compound() && location.name() == "oa" && location.arity() == 2)
    return object_of(location.args()[0]);
  return location;
}

inline Outcome<HeapGraph> build_heap_graph(const AbstractSentence& s) {
  HeapGraph g;
  std::vector<const PointsTo*> pts;
  for (const auto& item : s.items) {
    if (!item.is_terminal()) continue;
    const auto& pt = item.terminal();
    if (!pt.location.is_ground() || !pt.value.is_ground())
      return Diagnostic{"heap graph needs ground terminals: " + pt.to_string(), item.pos};
    pts.push_back(&pt);
    g.vertices.insert(object_of(pt.location));
  }
  std::map<Term, std::vector<Term>> preds;
  for (const auto* pt : pts) {
    const Term& v = pt->value;
    std::optional<Term> target;
    if (g.vertices.count(object_of(v))) {
      target = object_of(v);
    } else if (v.is_atom() && v.name() != "nil") {
      target = v;
    }
    if (target) {
      g.edges.emplace_back(object_of(pt->location), *target);
      preds[*target].push_back(pt->location);
    }
    if (!g.vertices.count(object_of(v))) g.sinks.insert(v);
  }
  for (const auto& [target, from] : preds)
    for (std::size_t i = 0; i + 1 < from.size(); ++i)
      for (std::size_t j = i + 1; j < from.size(); ++j) g.aliases.push_back({target, from[i], from[j]});

  // Weak connectivity over vertices and sinks that carry an edge.
  std::set<Term> nodes = g.vertices;
  for (const auto& [a, b] : g.edges) nodes.insert(b);
  if (!nodes.empty()) {
    std::map<Term, std::set<Term>> adj;
    for (const auto& [a, b] : g.edges) {
      adj[a].insert(b);
      adj[b].insert(a);
    }
    std::set<Term> seen{*nodes.begin()};
    std::vector<Term> stack{*nodes.begin()};
    while (!stack.empty()) {
      Term cur = stack.back();
      stack.pop_back();
      for (const auto& n : adj[cur])
        if (seen.insert(n).second) stack.push_back(n);
    }
    g.connected = seen.size() == nodes.size();
  }
  return g;
}

}  // namespace heaplet
