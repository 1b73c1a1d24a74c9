#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "heaplet/heaplet.hpp"

using namespace heaplet;

namespace {

Program P(std::string_view s) { return parse_program(s).value(); }
Term T(std::string_view s) { return parse_term(s).value(); }

const char* kTwoRules =
    "p1(X,Y) :- pointsto(loc1,val1), p2(X,Y).\n"
    "p2(X,Y) :- pointsto(loc2,X), pointsto(loc3,Y).\n";

const char* kLeftRecursive =
    "heaplet-grammar v1\n"
    "q1[] -> pt_1a_1v() ;\n"
    "q2[] -> pt_1a_1v() q2[] ;\n"
    "q2[] -> q3[] pt_1b_1v() ;\n"
    "q3[] -> eps ;\n"
    "q3[] -> q3[] pt_1a_1v() ;\n";

TerminalShape shape(const char* loc, const char* val) { return TerminalShape::of(PointsTo(T(loc), T(val))); }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Translate, TerminalsThenNonTerminal) {
  auto g = translate(build_env(P(kTwoRules)));
  ASSERT_EQ(g.productions.size(), 2u);
  const auto& p1 = g.productions[0];
  EXPECT_EQ(p1.name, "p1");
  EXPECT_EQ(p1.attributes, (std::vector<Term>{T("X"), T("Y")}));
  ASSERT_EQ(p1.rhs.size(), 2u);
  EXPECT_EQ(std::get<TerminalSym>(p1.rhs[0].node).token(), "pt_4loc1_4val1");
  EXPECT_EQ(std::get<NonTerminalSym>(p1.rhs[1].node), (NonTerminalSym{"p2", {T("X"), T("Y")}}));
  const auto& p2 = g.productions[1];
  EXPECT_EQ(std::get<TerminalSym>(p2.rhs[0].node).pattern, PointsTo(T("loc2"), T("X")));
  EXPECT_EQ(std::get<TerminalSym>(p2.rhs[1].node).pattern, PointsTo(T("loc3"), T("Y")));
  EXPECT_EQ(g.start_symbols, (std::vector<PredKey>{{"p1", 2}}));
}

TEST(Translate, EmptyEnv) { EXPECT_TRUE(translate(PredicateEnv{}).productions.empty()); }

TEST(Translate, FactIsEpsilon) {
  auto g = translate(build_env(P("a.")));
  ASSERT_EQ(g.productions.size(), 1u);
  EXPECT_TRUE(g.productions[0].rhs.empty());
}

TEST(Translate, GuardsAndNegations) {
  auto g = translate(build_env(P("a(X) :- X \\= b, ~(pointsto(X,1), c).  c.")));
  const auto& rhs = g.productions[0].rhs;
  ASSERT_EQ(rhs.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<GuardSym>(rhs[0].node));
  const auto& neg = std::get<NegGuardSym>(rhs[1].node);
  EXPECT_EQ(neg.body.size(), 2u);
}

TEST(Untranslate, InvertsTranslate) {
  auto env = build_env(P(kTwoRules));
  EXPECT_EQ(untranslate(translate(env)), env);
  EXPECT_TRUE(untranslate(AttributedGrammar{}).empty());
}

TEST(Untranslate, ThreeWayLaw) {
  auto env = build_env(P("member(X,[X|_]). member(X,[_|T]) :- member(X,T). q(X) :- ~(member(X,[a])), X = b."));
  auto g = translate(env);
  EXPECT_EQ(translate(untranslate(g)), g);
  EXPECT_EQ(untranslate(translate(untranslate(g))), untranslate(g));
}

TEST(Analyze, LeftRecursiveFirstSet) {
  auto g = read_grammar(kLeftRecursive).value();
  auto t = analyze(g);
  EXPECT_EQ(t.first_of(PredKey{"q2", 0}), (ShapeSet{shape("a", "v")}));
  EXPECT_EQ(t.first_of(PredKey{"q1", 0}), (ShapeSet{shape("a", "v")}));
  EXPECT_TRUE(t.nullable.count({"q3", 0}));
  EXPECT_TRUE(t.left_recursive.count({"q3", 0}));
  EXPECT_FALSE(t.left_recursive.count({"q2", 0}));
  EXPECT_EQ(t.follow_of(PredKey{"q3", 0}), (ShapeSet{shape("a", "v"), shape("b", "v")}));
}

TEST(Analyze, FactIsNullableWithEmptyFirst) {
  auto t = analyze(translate(build_env(P("a."))));
  EXPECT_TRUE(t.nullable.count({"a", 0}));
  EXPECT_TRUE(t.first_of(PredKey{"a", 0}).empty());
}

TEST(Analyze, TwoRulesSets) {
  auto t = analyze(translate(build_env(P(kTwoRules))));
  EXPECT_EQ(t.first_of(PredKey{"p1", 2}), (ShapeSet{shape("loc1", "val1")}));
  EXPECT_EQ(t.first_of(PredKey{"p2", 2}), (ShapeSet{shape("loc2", "X")}));
  EXPECT_EQ(t.follow_of(shape("loc1", "val1")), (ShapeSet{shape("loc2", "X")}));
  EXPECT_EQ(t.follow_of(shape("loc2", "X")), (ShapeSet{shape("loc3", "X")}));
  EXPECT_TRUE(t.follow_of(PredKey{"p2", 2}).empty());
  EXPECT_TRUE(t.nullable.empty());
}

TEST(Analyze, NullablePrefixAndGuardsAreTransparent) {
  auto t = analyze(translate(build_env(P("a :- e, X = 1, pointsto(x,1), b. e. b :- pointsto(y,2). c :- a, e, b."))));
  EXPECT_EQ(t.first_of(PredKey{"a", 0}), (ShapeSet{shape("x", "1")}));
  EXPECT_EQ(t.follow_of(PredKey{"e", 0}), (ShapeSet{shape("x", "1"), shape("y", "2")}));
  EXPECT_EQ(t.follow_of(PredKey{"a", 0}), (ShapeSet{shape("y", "2")}));
  EXPECT_EQ(t.follow_of(PredKey{"b", 0}), (ShapeSet{shape("y", "2")}));  // b ends a
}

TEST(Analyze, RightmostInheritsFollow) {
  auto t = analyze(translate(build_env(P("a :- b, pointsto(z,0). b :- pointsto(x,1), c. c :- pointsto(y,2).")))); 
  EXPECT_EQ(t.follow_of(PredKey{"c", 0}), (ShapeSet{shape("z", "0")}));
  EXPECT_EQ(t.follow_of(shape("y", "2")), (ShapeSet{shape("z", "0")}));
}

TEST(Analyze, IndirectLeftRecursion) {
  auto t = analyze(translate(build_env(P("a :- e, b. b :- a, pointsto(x,1). b :- pointsto(y,1). e."))));
  EXPECT_TRUE(t.left_recursive.count({"a", 0}));
  EXPECT_TRUE(t.left_recursive.count({"b", 0}));
  EXPECT_FALSE(t.left_recursive.count({"e", 0}));
}

TEST(Analyze, StableOnRerun) {
  auto g = read_grammar(kLeftRecursive).value();
  EXPECT_EQ(analyze(g), analyze(g));
}

TEST(AttributeDirections, TerminalBindsSynthesized) {
  auto g = translate(build_env(decanonise_heads(P("p(X,Y,Z) :- pointsto(loc,X), q(Y), W = Z. q(A)."))));
  auto dirs = attribute_directions(g.productions[0]);
  EXPECT_EQ(dirs, (std::vector<AttrDirection>{AttrDirection::Synthesized, AttrDirection::Inherited,
                                              AttrDirection::Inherited}));
}

TEST(AttributeDirections, AliasedThroughEquality) {
  auto g = translate(build_env(decanonise_heads(P("p(a) :- pointsto(x,a)."))));
  // p(X1) :- X1 = a, pointsto(x,a): X1 is bound to a constant first
  EXPECT_EQ(attribute_directions(g.productions[0]), (std::vector<AttrDirection>{AttrDirection::Inherited}));
  auto h = translate(build_env(P("p(X) :- Y = X, pointsto(l,Y).")));
  EXPECT_EQ(attribute_directions(h.productions[0]), (std::vector<AttrDirection>{AttrDirection::Synthesized}));
}

TEST(Emit, TwoRulesText) {
  EXPECT_EQ(emit(translate(build_env(P(kTwoRules)))),
            "heaplet-grammar v1\n"
            "p1[X,Y] -> pt_4loc1_4val1() p2[X,Y] ;\n"
            "p2[X,Y] -> pt_4loc2_2VX(X) pt_4loc3_2VY(Y) ;\n");
}

TEST(Emit, EmptyGrammarIsHeaderOnly) { EXPECT_EQ(emit(AttributedGrammar{}), "heaplet-grammar v1\n"); }

TEST(Emit, GuardsNegationsEpsilon) {
  EXPECT_EQ(emit(translate(build_env(P("a(X) :- X \\= b, ~(pointsto(X,1)). e.")))),
            "heaplet-grammar v1\n"
            "a[X] -> { X \\= b } ~( pt_2VX_2N1(X) ) ;\n"
            "e[] -> eps ;\n");
}

TEST(Read, RoundtripsEmit) {
  auto g = translate(build_env(P("a(X) :- X \\= b, ~(pointsto(X,1)), e(f(X,[Y|Z])). e(Q). e(_).")));
  auto back = read_grammar(emit(g)).value();
  EXPECT_EQ(back, g);
  EXPECT_EQ(emit(back), emit(g));
}

TEST(Read, SampleFileMatchesInline) {
  auto g = read_grammar(slurp(std::string(HEAPLET_SAMPLES) + "/left_recursion.grammar")).value();
  EXPECT_EQ(g, read_grammar(kLeftRecursive).value());
}

TEST(Read, ErrorsCarryCoordinates) {
  auto bad = read_grammar("heaplet-grammar v1\nq[] -> pt_1a_1v(X) ;\n");
  ASSERT_FALSE(bad.ok());
  EXPECT_EQ(bad.diagnostics().front().pos.line, 2);
  EXPECT_EQ(bad.diagnostics().front().pos.column, 8);
  EXPECT_FALSE(read_grammar("heaplet-grammar v1\nq[] -> ;\n").ok());
  EXPECT_FALSE(read_grammar("heaplet-grammar v1\nq[X -> eps ;\n").ok());
  EXPECT_FALSE(read_grammar("q[] -> eps ;\n").ok());
  EXPECT_FALSE(read_grammar("heaplet-grammar v1\nq[] -> pt_9zz() ;\n").ok());
}

TEST(EmitTables, CommentsOnly) {
  auto g = read_grammar(kLeftRecursive).value();
  std::string text = emit_tables(g, analyze(g));
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) EXPECT_EQ(line.rfind("#", 0), 0u) << line;
  EXPECT_NE(text.find("# first q2/0 = { pointsto(a,v) }"), std::string::npos) << text;
  EXPECT_NE(text.find("# nullable: q3/0"), std::string::npos);
  EXPECT_NE(text.find("# left-recursive: q3/0"), std::string::npos);
  // the tables are comments, so emitted grammar plus tables still reads back
  EXPECT_EQ(read_grammar(emit(g) + text).value(), g);
}
