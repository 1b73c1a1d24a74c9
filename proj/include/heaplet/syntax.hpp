#pragma once

// Lexer and recursive-descent parser for the Prolog clause subset and for
// bracketed heap sentences, plus the matching printers.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "heaplet/model.hpp"

namespace heaplet {

using ParseDiagnostic = Diagnostic;

namespace syntax {

enum class Tok {
  Atom,
  Var,
  Number,
  LParen,
  RParen,
  LBracket,
  RBracket,
  LBrace,
  RBrace,
  Comma,
  Bar,
  Dot,
  Neck,    // :-
  Semi,
  Bang,
  Tilde,
  Rel,     // = \= < <= =< > >=
  Univ,    // =..
  Arrow,   // ->
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourcePos pos;
};

struct LexOptions {
  std::string file;
  /// '#' starts a comment and '->', '{', '}' are tokens (grammar files).
  bool grammar_mode = false;
};

inline Outcome<std::vector<Token>> lex(std::string_view src, const LexOptions& opts = {}) {
  std::vector<Token> out;
  std::vector<Diagnostic> diags;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  auto here = [&]() { return SourcePos{opts.file, line, col}; };
  auto starts = [&](std::string_view s) { return src.substr(i, s.size()) == s; };

  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '%' || (opts.grammar_mode && c == '#')) {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (starts("/*")) {
      SourcePos p = here();
      advance(2);
      while (i < src.size() && !starts("*/")) advance(1);
      if (i >= src.size()) {
        diags.push_back({"unterminated block comment", p});
        break;
      }
      advance(2);
      continue;
    }
    SourcePos p = here();
    if (detail::is_lower(c) || detail::is_upper(c) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && detail::is_ident_char(src[j])) ++j;
      std::string word(src.substr(i, j - i));
      out.push_back({detail::is_lower(c) ? Tok::Atom : Tok::Var, word, p});
      advance(j - i);
      continue;
    }
    bool neg_number = c == '-' && i + 1 < src.size() && detail::is_digit(src[i + 1]);
    if (detail::is_digit(c) || neg_number) {
      std::size_t j = i + (neg_number ? 1 : 0);
      while (j < src.size() && detail::is_digit(src[j])) ++j;
      if (j + 1 < src.size() && src[j] == '.' && detail::is_digit(src[j + 1])) {
        ++j;
        while (j < src.size() && detail::is_digit(src[j])) ++j;
      }
      out.push_back({Tok::Number, std::string(src.substr(i, j - i)), p});
      advance(j - i);
      continue;
    }
    auto punct = [&](Tok k, std::size_t n) {
      out.push_back({k, std::string(src.substr(i, n)), p});
      advance(n);
    };
    if (opts.grammar_mode && starts("->")) { punct(Tok::Arrow, 2); continue; }
    if (starts(":-")) { punct(Tok::Neck, 2); continue; }
    if (starts("=..")) { punct(Tok::Univ, 3); continue; }
    if (starts("\\=") || starts("<=") || starts("=<") || starts(">=")) { punct(Tok::Rel, 2); continue; }
    switch (c) {
      case '(': punct(Tok::LParen, 1); continue;
      case ')': punct(Tok::RParen, 1); continue;
      case '[': punct(Tok::LBracket, 1); continue;
      case ']': punct(Tok::RBracket, 1); continue;
      case ',': punct(Tok::Comma, 1); continue;
      case '|': punct(Tok::Bar, 1); continue;
      case '.': punct(Tok::Dot, 1); continue;
      case ';': punct(Tok::Semi, 1); continue;
      case '!': punct(Tok::Bang, 1); continue;
      case '~': punct(Tok::Tilde, 1); continue;
      case '=':
      case '<':
      case '>': punct(Tok::Rel, 1); continue;
      default: break;
    }
    if (opts.grammar_mode && c == '{') { punct(Tok::LBrace, 1); continue; }
    if (opts.grammar_mode && c == '}') { punct(Tok::RBrace, 1); continue; }
    diags.push_back({std::string("unexpected character '") + c + "'", p});
    advance(1);
  }
  out.push_back({Tok::End, "", here()});
  if (!diags.empty()) return diags;
  return out;
}

struct ParseAbort {};

/// Token-stream parser shared by the program, sentence and grammar readers.
class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at(Tok k) const { return peek().kind == k; }
  bool at_end() const { return at(Tok::End); }
  const Token& take() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool accept(Tok k) {
    if (!at(k)) return false;
    take();
    return true;
  }
  const Token& expect(Tok k, std::string_view what) {
    if (!at(k)) fail(std::string("expected ") + std::string(what) + describe(peek()));
    return take();
  }

  [[noreturn]] void fail(std::string message) { fail_at(std::move(message), peek().pos); }
  [[noreturn]] void fail_at(std::string message, SourcePos pos) {
    diags_.push_back({std::move(message), std::move(pos)});
    throw ParseAbort{};
  }
  std::vector<Diagnostic>& diagnostics() { return diags_; }

  static std::string describe(const Token& t) {
    if (t.kind == Tok::End) return ", found end of input";
    return ", found '" + t.text + "'";
  }

  Term term() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Var: {
        take();
        return Term::var(t.text == "_" ? fresh_anonymous_name() : t.text);
      }
      case Tok::Number: {
        take();
        return Term::number(t.text);
      }
      case Tok::Atom: {
        std::string name = take().text;
        if (!at(Tok::LParen)) return Term::atom(name);
        take();
        if (at(Tok::RParen)) fail("functor term needs at least one argument");
        std::vector<Term> args = arguments();
        expect(Tok::RParen, "')'");
        return Term::compound(name, std::move(args));
      }
      case Tok::LBracket:
        return list();
      default:
        fail("expected a term" + describe(t));
    }
  }

  std::vector<Term> arguments() {
    std::vector<Term> args{term()};
    while (accept(Tok::Comma)) args.push_back(term());
    return args;
  }

  Term list() {
    expect(Tok::LBracket, "'['");
    if (accept(Tok::RBracket)) return Term::list({});
    std::vector<Term> items = arguments();
    std::optional<Term> tail;
    if (accept(Tok::Bar)) {
      tail = term();
    }
    expect(Tok::RBracket, "']'");
    return Term::list(std::move(items), std::move(tail));
  }

  /// body := conj (';' conj)*
  std::vector<Subgoal> disjunction() {
    SourcePos p = peek().pos;
    std::vector<std::vector<Subgoal>> alts{conjunction()};
    while (accept(Tok::Semi)) alts.push_back(conjunction());
    if (alts.size() == 1) return std::move(alts.front());
    return {Subgoal(Disjunction{std::move(alts)}, p)};
  }

  std::vector<Subgoal> conjunction() {
    std::vector<Subgoal> out;
    do {
      for (auto& g : subgoal()) out.push_back(std::move(g));
    } while (accept(Tok::Comma));
    return out;
  }

  /// One subgoal; a parenthesised conjunction flattens into several.
  std::vector<Subgoal> subgoal() {
    const Token& t = peek();
    SourcePos p = t.pos;
    if (t.kind == Tok::Bang) {
      take();
      return {Subgoal(Cut{}, p)};
    }
    if (t.kind == Tok::Atom && t.text == "fail" && peek(1).kind != Tok::LParen) {
      take();
      return {Subgoal(Fail{}, p)};
    }
    if (t.kind == Tok::Tilde ||
        (t.kind == Tok::Atom && t.text == "not" && peek(1).kind == Tok::LParen)) {
      take();
      expect(Tok::LParen, "'(' after negation");
      std::vector<Subgoal> body = disjunction();
      expect(Tok::RParen, "')'");
      return {Subgoal(Negation{std::move(body)}, p)};
    }
    if (t.kind == Tok::LParen) {
      take();
      std::vector<Subgoal> inner = disjunction();
      expect(Tok::RParen, "')'");
      return inner;
    }
    Term lhs = term();
    if (at(Tok::Rel)) {
      RelOp op = *rel_op_from_text(take().text);
      Term rhs = term();
      return {Subgoal(Relation{std::move(lhs), op, std::move(rhs)}, p)};
    }
    if (accept(Tok::Univ)) {
      Term rhs = term();
      return {Subgoal(PredCall{"=..", {std::move(lhs), std::move(rhs)}}, p)};
    }
    if (lhs.is_atom()) {
      if (lhs.name() == "emp") return {Subgoal(HeapConst::Emp, p)};
      if (lhs.name() == "true") return {Subgoal(HeapConst::True, p)};
      if (lhs.name() == "false") return {Subgoal(HeapConst::False, p)};
      return {Subgoal(PredCall{lhs.name(), {}}, p)};
    }
    if (lhs.is_compound()) {
      std::vector<Term> args(lhs.args().begin(), lhs.args().end());
      if (lhs.name() == "pointsto" && args.size() == 2) {
        if (args[0].is_number()) fail_at("points-to location must not be a number", p);
        return {Subgoal(PointsTo(args[0], args[1]), p)};
      }
      return {Subgoal(PredCall{lhs.name(), std::move(args)}, p)};
    }
    fail_at("expected a subgoal, found term " + lhs.to_string(), p);
  }

  Clause clause() {
    Clause c;
    const Token& head = peek();
    c.origin = head.pos;
    if (head.kind != Tok::Atom) fail("expected a clause head" + describe(head));
    c.head_name = take().text;
    if (accept(Tok::LParen)) {
      if (at(Tok::RParen)) fail("clause head needs at least one argument inside parentheses");
      c.head_args = arguments();
      expect(Tok::RParen, "')'");
    }
    if (accept(Tok::Neck)) c.body = disjunction();
    expect(Tok::Dot, "'.' at end of clause");
    return c;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Diagnostic> diags_;
};

template <typename F>
auto run(std::string_view src, const LexOptions& opts, F&& body)
    -> Outcome<decltype(body(std::declval<Parser&>()))> {
  auto toks = lex(src, opts);
  if (!toks) return toks.diagnostics();
  Parser p(std::move(toks).value());
  try {
    return body(p);
  } catch (const ParseAbort&) {
    return p.diagnostics();
  } catch (const std::invalid_argument& e) {
    return Diagnostic{e.what(), p.peek().pos};
  }
}

}  // namespace syntax

inline Outcome<Program> parse_program(std::string_view src, const std::string& file = {}) {
  return syntax::run(src, {file, false}, [](syntax::Parser& p) {
    Program prog;
    while (!p.at_end()) prog.clauses.push_back(p.clause());
    return prog;
  });
}

inline Outcome<Term> parse_term(std::string_view src) {
  return syntax::run(src, {}, [](syntax::Parser& p) {
    Term t = p.term();
    if (!p.at_end()) p.fail("trailing input after term" + syntax::Parser::describe(p.peek()));
    return t;
  });
}

namespace syntax {

/// Negated fragments in sentences may contain alternatives; ~(A;B) becomes
/// ~(A), ~(B).
inline void append_sentence_item(Subgoal g, std::vector<Subgoal>& out, Parser& p) {
  if (auto* neg = std::get_if<Negation>(&g.node)) {
    std::vector<Subgoal> body;
    for (auto& inner : neg->body) {
      if (auto* d = std::get_if<Disjunction>(&inner.node)) {
        for (auto& alt : d->alternatives) {
          std::vector<Subgoal> sub;
          for (auto& x : alt) append_sentence_item(std::move(x), sub, p);
          out.push_back(Subgoal(Negation{std::move(sub)}, g.pos));
        }
        continue;
      }
      append_sentence_item(std::move(inner), body, p);
    }
    if (!body.empty()) out.push_back(Subgoal(Negation{std::move(body)}, g.pos));
    return;
  }
  if (auto* k = std::get_if<HeapConst>(&g.node)) {
    if (*k == HeapConst::Emp) return;
    p.fail_at("partial heap constants true/false are not supported in sentences", g.pos);
  }
  if (std::holds_alternative<Cut>(g.node) || std::holds_alternative<Fail>(g.node))
    p.fail_at("cut and fail are not allowed in a sentence", g.pos);
  if (std::holds_alternative<Disjunction>(g.node))
    p.fail_at("alternatives ';' are not allowed in a sentence", g.pos);
  out.push_back(std::move(g));
}

}  // namespace syntax

/// Parses "[item, item, ...]" where commas stand for the separating
/// conjunction.
inline Outcome<AbstractSentence> parse_sentence(std::string_view src, const std::string& file = {}) {
  auto parsed = syntax::run(src, {file, false}, [](syntax::Parser& p) {
    AbstractSentence s;
    p.expect(syntax::Tok::LBracket, "'[' opening a sentence");
    if (!p.accept(syntax::Tok::RBracket)) {
      do {
        for (auto& g : p.subgoal()) syntax::append_sentence_item(std::move(g), s.items, p);
      } while (p.accept(syntax::Tok::Comma));
      p.expect(syntax::Tok::RBracket, "']' closing the sentence");
    }
    if (!p.at_end()) p.fail("trailing input after sentence" + syntax::Parser::describe(p.peek()));
    return s;
  });
  if (!parsed) return parsed;
  auto problems = validate_sentence(*parsed);
  if (!problems.empty()) return problems;
  return parsed;
}

// ---------------------------------------------------------------------------
// Printing

inline std::string render(const Subgoal& g);

inline std::string render_conjunction(const std::vector<Subgoal>& gs) {
  std::string out;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (i) out += ", ";
    out += render(gs[i]);
  }
  return out;
}

inline std::string render(const PredCall& c) {
  if (c.name == "=.." && c.args.size() == 2)
    return c.args[0].to_string() + " =.. " + c.args[1].to_string();
  if (c.args.empty()) return c.name;
  std::string out = c.name + "(";
  for (std::size_t i = 0; i < c.args.size(); ++i) {
    if (i) out += ",";
    out += c.args[i].to_string();
  }
  return out + ")";
}

inline std::string render(const Subgoal& g) {
  return std::visit(
      [](const auto& n) -> std::string {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, PointsTo>) {
          return n.to_string();
        } else if constexpr (std::is_same_v<N, PredCall>) {
          return render(n);
        } else if constexpr (std::is_same_v<N, Relation>) {
          return n.to_string();
        } else if constexpr (std::is_same_v<N, Negation>) {
          return "~(" + render_conjunction(n.body) + ")";
        } else if constexpr (std::is_same_v<N, Cut>) {
          return "!";
        } else if constexpr (std::is_same_v<N, Fail>) {
          return "fail";
        } else if constexpr (std::is_same_v<N, Disjunction>) {
          std::string out = "(";
          for (std::size_t i = 0; i < n.alternatives.size(); ++i) {
            if (i) out += " ; ";
            out += render_conjunction(n.alternatives[i]);
          }
          return out + ")";
        } else {
          switch (n) {
            case HeapConst::Emp: return "emp";
            case HeapConst::True: return "true";
            case HeapConst::False: return "false";
          }
          return "";
        }
      },
      g.node);
}

inline std::string render_clause(const Clause& c) {
  std::string out = render(PredCall{c.head_name, c.head_args});
  if (!c.body.empty()) out += " :- " + render_conjunction(c.body);
  return out + ".";
}

inline std::string render_program(const Program& p) {
  std::string out;
  for (const auto& c : p.clauses) out += render_clause(c) + "\n";
  return out;
}

inline std::string render_sentence(const AbstractSentence& s) {
  return "[" + render_conjunction(s.items) + "]";
}

}  // namespace heaplet
