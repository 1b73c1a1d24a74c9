#pragma once

// First-order unification with occurs-check, and substitution algebra.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "heaplet/model.hpp"

namespace heaplet {

/// Finite map from variable names to terms. No variable maps to itself.
///
/// `apply` replaces bound variables simultaneously in a single pass.
/// Substitutions built by `unify` are idempotent; `normalized()` brings an
/// arbitrary acyclic substitution into that form.
class Substitution {
 public:
  Substitution() = default;

  /// Builds a substitution from raw bindings; identity bindings are dropped.
  static Substitution from(std::map<std::string, Term> bindings) {
    Substitution s;
    for (auto& [k, v] : bindings)
      if (!(v.is_var() && v.name() == k)) s.map_.emplace(k, std::move(v));
    return s;
  }

  const Term* lookup(const std::string& var) const {
    auto it = map_.find(var);
    return it == map_.end() ? nullptr : &it->second;
  }
  bool binds(const std::string& var) const { return map_.count(var) != 0; }
  bool empty() const { return map_.empty(); }
  std::size_t size() const { return map_.size(); }
  const std::map<std::string, Term>& bindings() const { return map_; }

  /// Repeated application until fixpoint. Throws on cyclic bindings.
  Substitution normalized() const;

  /// Restricts the domain to `vars`.
  Substitution restricted(const std::set<std::string>& vars) const {
    Substitution s;
    for (const auto& [k, v] : map_)
      if (vars.count(k)) s.map_.emplace(k, v);
    return s;
  }

  std::string to_string() const {
    std::string out = "{";
    bool first = true;
    for (const auto& [k, v] : map_) {
      if (!first) out += ", ";
      first = false;
      out += k + "->" + v.to_string();
    }
    return out + "}";
  }

  friend bool operator==(const Substitution&, const Substitution&) = default;

 private:
  friend class Unifier;
  std::map<std::string, Term> map_;
};

/// True if some variable of t is bound in s.
inline bool touches(const Substitution& s, const Term& t) {
  if (t.is_ground() || s.empty()) return false;
  if (t.is_var()) return s.binds(t.name());
  for (const auto& a : t.args())
    if (touches(s, a)) return true;
  return t.tail() && touches(s, *t.tail());
}

/// Simultaneous replacement of bound variables. Untouched subterms are
/// shared with the input.
inline Term apply(const Substitution& s, const Term& t) {
  if (!touches(s, t)) return t;
  if (t.is_var()) return *s.lookup(t.name());
  std::vector<Term> args;
  args.reserve(t.arity());
  for (const auto& a : t.args()) args.push_back(apply(s, a));
  if (t.is_compound()) return Term::compound(t.name(), std::move(args));
  std::optional<Term> tail;
  if (t.tail()) tail = apply(s, *t.tail());
  return Term::list(std::move(args), std::move(tail));
}

inline PointsTo apply(const Substitution& s, const PointsTo& p) {
  if (!touches(s, p.location) && !touches(s, p.value)) return p;
  return PointsTo::unchecked(apply(s, p.location), apply(s, p.value));
}

inline Subgoal apply(const Substitution& s, const Subgoal& g) {
  bool any = false;
  for_each_term(g, [&](const Term& t) { any = any || touches(s, t); });
  if (!any) return g;
  return map_terms(g, [&](const Term& t) { return apply(s, t); });
}

inline bool occurs_in(const std::string& var, const Term& t) {
  if (t.is_ground()) return false;
  if (t.is_var()) return t.name() == var;
  for (const auto& a : t.args())
    if (occurs_in(var, a)) return true;
  return t.tail() && occurs_in(var, *t.tail());
}

inline Substitution Substitution::normalized() const {
  Substitution cur = *this;
  for (std::size_t round = 0; round <= map_.size() + 1; ++round) {
    Substitution next;
    bool changed = false;
    for (const auto& [k, v] : cur.map_) {
      Term nv = apply(cur, v);
      if (nv != v) changed = true;
      if (occurs_in(k, nv) && !(nv.is_var() && nv.name() == k))
        throw std::invalid_argument("cyclic substitution at " + k);
      if (!(nv.is_var() && nv.name() == k)) next.map_.emplace(k, std::move(nv));
    }
    cur = std::move(next);
    if (!changed) return cur;
  }
  throw std::invalid_argument("substitution does not normalize");
}

/// apply(compose(s1, s2), t) == apply(s1, apply(s2, t)).
inline Substitution compose(const Substitution& s1, const Substitution& s2) {
  std::map<std::string, Term> out;
  for (const auto& [k, v] : s2.bindings()) out.emplace(k, apply(s1, v));
  for (const auto& [k, v] : s1.bindings()) out.emplace(k, v);
  return Substitution::from(std::move(out));
}

struct UnifyFailure {
  enum class Reason { Clash, OccursCheck };

  Reason reason = Reason::Clash;
  Term left;
  Term right;

  std::string to_string() const {
    return std::string(reason == Reason::Clash ? "clash" : "occurs-check") + ": " +
           left.to_string() + " vs " + right.to_string();
  }
};

using UnifyResult = std::variant<Substitution, UnifyFailure>;

inline bool succeeded(const UnifyResult& r) { return r.index() == 0; }

class Unifier {
 public:
  explicit Unifier(Substitution under) : s_(std::move(under)) {}

  /// Unifies under the current substitution; on failure the substitution is
  /// left in an unspecified (but valid) state.
  std::optional<UnifyFailure> unify(const Term& a, const Term& b) {
    std::vector<std::pair<Term, Term>> work{{a, b}};
    while (!work.empty()) {
      auto [x, y] = std::move(work.back());
      work.pop_back();
      x = walk(x);
      y = walk(y);
      if (x == y) continue;
      if (x.is_var() || y.is_var()) {
        if (!x.is_var()) std::swap(x, y);
        Term value = apply(s_, y);
        if (occurs_in(x.name(), value))
          return UnifyFailure{UnifyFailure::Reason::OccursCheck, x, value};
        bind(x.name(), value);
        continue;
      }
      if (x.kind() != y.kind()) return UnifyFailure{UnifyFailure::Reason::Clash, x, y};
      switch (x.kind()) {
        case Term::Kind::Atom:
        case Term::Kind::Number:
          return UnifyFailure{UnifyFailure::Reason::Clash, x, y};
        case Term::Kind::Compound:
          if (x.name() != y.name() || x.arity() != y.arity())
            return UnifyFailure{UnifyFailure::Reason::Clash, x, y};
          for (std::size_t i = 0; i < x.arity(); ++i) work.emplace_back(x.args()[i], y.args()[i]);
          break;
        case Term::Kind::List: {
          auto hx = uncons(x);
          auto hy = uncons(y);
          if (!hx || !hy) return UnifyFailure{UnifyFailure::Reason::Clash, x, y};
          work.emplace_back(hx->second, hy->second);
          work.emplace_back(hx->first, hy->first);
          break;
        }
        case Term::Kind::Variable:
          break;
      }
    }
    return std::nullopt;
  }

  const Substitution& substitution() const& { return s_; }
  Substitution&& substitution() && { return std::move(s_); }

 private:
  Term walk(const Term& t) const {
    if (t.is_var()) {
      if (const Term* b = s_.lookup(t.name())) return *b;
    }
    return t;
  }

  static std::optional<std::pair<Term, Term>> uncons(const Term& list) {
    if (list.args().empty()) return std::nullopt;
    std::vector<Term> rest(list.args().begin() + 1, list.args().end());
    std::optional<Term> tail;
    if (list.tail()) tail = *list.tail();
    return std::pair{list.args()[0], Term::list(std::move(rest), std::move(tail))};
  }

  void bind(const std::string& var, const Term& value) {
    Substitution single;
    single.map_.emplace(var, value);
    for (auto& [k, v] : s_.map_) v = apply(single, v);
    s_.map_.emplace(var, value);
  }

  Substitution s_;
};

/// Most general unifier of t1 and t2 extending `under` (assumed idempotent).
inline UnifyResult unify(const Term& t1, const Term& t2, const Substitution& under = {}) {
  Unifier u(under);
  if (auto fail = u.unify(t1, t2)) return *fail;
  return std::move(u).substitution();
}

/// Pairwise unification of two argument vectors of equal length.
inline UnifyResult unify_all(std::span<const Term> xs, std::span<const Term> ys,
                             const Substitution& under = {}) {
  if (xs.size() != ys.size())
    return UnifyFailure{UnifyFailure::Reason::Clash, Term::number(static_cast<long long>(xs.size())),
                        Term::number(static_cast<long long>(ys.size()))};
  Unifier u(under);
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (auto fail = u.unify(xs[i], ys[i])) return *fail;
  return std::move(u).substitution();
}

inline UnifyResult unify(const PointsTo& a, const PointsTo& b, const Substitution& under = {}) {
  Unifier u(under);
  if (auto fail = u.unify(a.location, b.location)) return *fail;
  if (auto fail = u.unify(a.value, b.value)) return *fail;
  return std::move(u).substitution();
}

}  // namespace heaplet
