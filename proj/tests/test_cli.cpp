#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  std::string cmd = std::string(HEAPLET_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string sample(const char* name) { return std::string(HEAPLET_SAMPLES) + "/" + name; }
std::string at(const char* name) { return "@" + sample(name); }

}  // namespace

TEST(Cli, FaceEntailed) {
  auto r = run("check " + sample("face.pl") + " " + at("face_left.txt") + " " + at("face_right.txt"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("verdict: entailed"), std::string::npos);
}

TEST(Cli, FaceShortRefuted) {
  auto r = run("check " + sample("face.pl") + " " + at("face_left.txt") + " " + at("face_right_short.txt"));
  EXPECT_EQ(r.code, 1) << r.out;
}

TEST(Cli, NonEmptyPredicateJsonReport) {
  auto r = run("check --json " + sample("nonempty_pred.pl") + " " + at("empty_pred_left.txt") + " " +
               at("empty_pred_right.txt"));
  EXPECT_EQ(r.code, 1);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["verdict"], "refuted");
  for (const char* k : {"verdict", "witness", "refutation", "steps", "depth", "ms", "budgets"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["refutation"]["left_pos"]["index"], 1);
  EXPECT_EQ(j["refutation"]["found"], "p1(loc1,loc2)");
  EXPECT_TRUE(j["refutation"]["expected"].is_array());
}

TEST(Cli, EmptyPredicateEntailed) {
  auto r = run("check " + sample("empty_pred.pl") + " " + at("empty_pred_left.txt") + " " + at("empty_pred_right.txt"));
  EXPECT_EQ(r.code, 0);
}

TEST(Cli, InlineSentencesAndWitness) {
  auto r = run("check --json " + sample("member.pl") + " '[pointsto(Y,1), member(X,[Y|_]), pointsto(X,_)]' " +
               "'[pointsto(x,nil), pointsto(y,1), member(x,[x])]'");
  ASSERT_EQ(r.code, 0) << r.out;
  auto j = nlohmann::json::parse(r.out);
  bool saw_x = false;
  for (const auto& b : j["witness"])
    if (b["var"] == "X") saw_x = b["term"] == "x";
  EXPECT_TRUE(saw_x);
  EXPECT_TRUE(j["refutation"].is_null());
}

TEST(Cli, MissingDefsIsUsageError) {
  EXPECT_EQ(run("check /nonexistent/defs.pl '[]' '[]'").code, 3);
}

TEST(Cli, ParseErrorIsUsageError) {
  EXPECT_EQ(run("check " + sample("face.pl") + " '[pointsto(x,1),pointsto(x,2)]' '[]'").code, 3);
  EXPECT_EQ(run("check " + sample("face.pl") + " '[q(a)]' '[]'").code, 3);
  EXPECT_EQ(run("check").code, 3);
}

TEST(Cli, DepthExceededExitCode) {
  auto r = run("check --max-depth 2 --max-steps 40 " + sample("lseg.pl") +
               " '[ls(a,nil)]' '[pointsto(a,b), pointsto(b,c), pointsto(c,d), pointsto(d,e), pointsto(e,nil)]'");
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, EachLineKeepsOrderAndMaxCode) {
  auto r = run("check --each-line " + sample("lseg.pl") + " " + at("lseg_left.txt") + " " + at("lseg_right.txt"));
  EXPECT_EQ(r.code, 1);
  auto first = r.out.find("verdict: entailed");
  auto second = r.out.find("verdict: entailed", first + 1);
  auto third = r.out.find("verdict: refuted");
  EXPECT_LT(first, second);
  EXPECT_LT(second, third);
  EXPECT_NE(third, std::string::npos);
}

TEST(Cli, ReportsAreDeterministicApartFromTiming) {
  std::string cmd = "check --json " + sample("lseg.pl") + " '[ls(a,c), ls(c,nil)]' '[ls(a,nil)]'";
  auto a = nlohmann::json::parse(run(cmd).out);
  auto b = nlohmann::json::parse(run(cmd).out);
  a.erase("ms");
  b.erase("ms");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Cli, GrammarCommand) {
  auto r = run("grammar " + sample("two_rules.pl"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out,
            "heaplet-grammar v1\n"
            "p1[X,Y] -> pt_4loc1_4val1() p2[X,Y] ;\n"
            "p2[X,Y] -> pt_4loc2_2VX(X) pt_4loc3_2VY(Y) ;\n");
}

TEST(Cli, GrammarFirstFollowFromGrammarInput) {
  auto r = run("grammar --first-follow " + sample("left_recursion.grammar"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("# first q2/0 = { pointsto(a,v) }"), std::string::npos) << r.out;
}

TEST(Cli, GrammarOfEmptyDefs) {
  auto r = run("grammar /dev/null");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "heaplet-grammar v1\n");
}

TEST(Cli, Partitions) {
  auto r = run("partitions " + sample("two_rules.pl"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("partition 1: p1/2 p2/2"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("entry: p1/2"), std::string::npos);
}

TEST(Cli, PartitionsHeapGraph) {
  auto r = run("partitions --json " + sample("two_rules.pl") + " --heap " + at("alias_heap.txt"));
  ASSERT_EQ(r.code, 0);
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["heap"]["aliases"].size(), 1u);
}

TEST(Cli, Mangle) {
  EXPECT_EQ(run("mangle bar foo").out, "pt_3bar_3foo\n");
  EXPECT_EQ(run("mangle --demangle pt_1x_3nil").out, "x \xE2\x86\xA6 nil\n");
  EXPECT_EQ(run("mangle --demangle pt_").code, 3);
  EXPECT_EQ(run("mangle 3 foo").code, 3);
}

TEST(Cli, Oracle) {
  auto r = run("oracle --oracle-depth 2 " + sample("empty_pred.pl") + " " + at("empty_pred_left.txt") + " " +
               at("empty_pred_right.txt"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "true\n");
}
