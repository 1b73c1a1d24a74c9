#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "heaplet/heaplet.hpp"
#include "heaplet/oracle.hpp"

namespace {

using namespace heaplet;
using json = nlohmann::ordered_json;

enum Exit { kEntailed = 0, kRefuted = 1, kDepth = 2, kUsage = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_diagnostics(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << d.to_string() << "\n";
}

Prepared load_defs(const std::vector<std::string>& paths) {
  std::vector<std::pair<std::string, Program>> files;
  for (const auto& path : paths) {
    auto prog = read_definitions(slurp(path), path);
    if (!prog) throw HeapletError(prog.diagnostics());
    files.emplace_back(std::filesystem::path(path).stem().string(), *prog);
  }
  Program merged;
  if (files.size() == 1) {
    merged = files.front().second;
  } else {
    auto m = merge_programs(files);
    if (!m) throw HeapletError(m.diagnostics());
    merged = *m;
  }
  return prepare(merged).value();
}

/// "@path" reads the sentence from a file; anything else is the sentence.
std::string sentence_text(const std::string& arg) { return arg.rfind('@', 0) == 0 ? slurp(arg.substr(1)) : arg; }

std::string file_of(const std::string& arg) { return arg.rfind('@', 0) == 0 ? arg.substr(1) : "<inline>"; }

AbstractSentence sentence(const std::string& text, const std::string& file) {
  auto s = parse_sentence(text, file);
  if (!s) throw HeapletError(s.diagnostics());
  return *s;
}

int exit_of(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Entailed: return kEntailed;
    case Verdict::Kind::Refuted: return kRefuted;
    case Verdict::Kind::DepthExceeded: return kDepth;
  }
  return kUsage;
}

json position_json(const ItemPosition& p) {
  return {{"index", p.index}, {"line", p.pos.line}, {"column", p.pos.column}};
}

json report_json(const Verdict& v, double ms, const EntailConfig& cfg) {
  json out;
  out["verdict"] = std::string(verdict_text(v.kind));
  json witness = json::array();
  for (const auto& [var, t] : v.witness.bindings()) witness.push_back({{"var", var}, {"term", t.to_string()}});
  out["witness"] = witness;
  if (v.refutation) {
    const auto& r = *v.refutation;
    json expected = json::array();
    for (const auto& sh : r.expected) expected.push_back(sh.to_string());
    out["refutation"] = {{"left_pos", position_json(r.left)},
                         {"right_pos", position_json(r.right)},
                         {"expected", expected},
                         {"found", r.found},
                         {"side", std::string(side_text(r.found_side))},
                         {"reason", r.reason},
                         {"exhausted_alternatives", r.exhausted_alternatives}};
  } else {
    out["refutation"] = nullptr;
  }
  out["steps"] = v.steps;
  out["depth"] = v.depth;
  out["ms"] = ms;
  out["budgets"] = {{"max_depth", cfg.max_depth}, {"max_steps", cfg.max_steps}};
  return out;
}

std::string position_text(const ItemPosition& p, std::size_t size) {
  std::string out = p.index >= size ? std::string("end") : "item " + std::to_string(p.index);
  if (p.pos.known()) out += " (" + p.pos.to_string() + ")";
  return out;
}

std::string report_text(const Verdict& v, double ms, std::size_t left_size, std::size_t right_size) {
  std::ostringstream out;
  out << "verdict: " << verdict_text(v.kind) << "\n";
  if (v.entailed()) {
    out << "witness:";
    if (v.witness.empty()) out << " (none)";
    for (const auto& [var, t] : v.witness.bindings()) out << " " << var << "=" << t.to_string();
    out << "\n";
  }
  if (v.refutation) {
    const auto& r = *v.refutation;
    out << "refutation: left " << position_text(r.left, left_size) << ", right "
        << position_text(r.right, right_size) << "\n";
    out << "  found " << r.found << " on the " << side_text(r.found_side) << "\n";
    out << "  expected";
    if (r.expected.empty()) out << " nothing";
    bool first = true;
    for (const auto& sh : r.expected) {
      out << (first ? " " : ", ") << sh.to_string();
      first = false;
    }
    out << "\n  " << r.reason << "\n";
  }
  out << "steps: " << v.steps << ", depth: " << v.depth << ", time: " << ms << " ms\n";
  if (!v.trace.empty()) {
    out << (v.entailed() ? "trace:\n" : "partial trace:\n");
    for (const auto& e : v.trace) out << "  " << e.to_string() << "\n";
  }
  return out.str();
}

struct CheckJob {
  std::string left, right, left_file, right_file;
};

struct CheckDone {
  int code = kUsage;
  std::string out;
  std::string err;
};

CheckDone run_check(const Checker& checker, const PredicateEnv& env, const CheckJob& job, bool as_json,
                    int oracle_depth) {
  CheckDone done;
  try {
    auto a1 = sentence(job.left, job.left_file);
    auto a2 = sentence(job.right, job.right_file);
    auto t0 = std::chrono::steady_clock::now();
    Verdict v = checker.check(a1, a2);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    done.code = exit_of(v.kind);
    if (as_json) {
      json report = report_json(v, ms, checker.config());
      if (oracle_depth > 0) report["oracle"] = oracle::to_string(oracle::oracle_equal(env, a1, a2, oracle_depth));
      done.out = report.dump(2) + "\n";
    } else {
      done.out = report_text(v, ms, a1.items.size(), a2.items.size());
      if (oracle_depth > 0)
        done.out += "oracle (depth " + std::to_string(oracle_depth) +
                    "): " + std::string(oracle::to_string(oracle::oracle_equal(env, a1, a2, oracle_depth))) + "\n";
    }
  } catch (const HeapletError& e) {
    for (const auto& d : e.diagnostics()) done.err += d.to_string() + "\n";
    done.code = kUsage;
  }
  return done;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entailment of points-to heap sentences via grammar recognition"};
  app.require_subcommand(1);

  std::string defs_main;
  std::vector<std::string> defs_more;
  std::string left, right;
  bool as_json = false, first_follow = false, no_order = false, each_line = false;
  int max_depth = EntailConfig{}.max_depth;
  std::size_t max_steps = EntailConfig{}.max_steps;
  int oracle_depth = 4;
  int check_oracle_depth = 0;

  auto* check = app.add_subcommand("check", "decide whether two sentences derive the same heap");
  check->add_option("defs", defs_main, "predicate definitions (clauses or grammar format)")->required();
  check->add_option("left", left, "left sentence, inline or @file")->required();
  check->add_option("right", right, "right sentence, inline or @file")->required();
  check->add_option("--also", defs_more, "further definition files, merged with name qualification");
  check->add_flag("--json", as_json, "machine-readable report");
  check->add_option("--max-depth", max_depth, "unfolding levels per branch")->check(CLI::PositiveNumber);
  check->add_option("--max-steps", max_steps, "global step budget")->check(CLI::PositiveNumber);
  check->add_flag("--no-order", no_order, "keep conjuncts in source order");
  check->add_flag("--each-line", each_line, "one sentence per line; pairs checked line by line");
  check->add_option("--oracle-depth", check_oracle_depth, "also run the brute-force oracle to this depth")
      ->check(CLI::Range(1, 8));

  auto* grammar = app.add_subcommand("grammar", "emit the attributed grammar");
  std::string grammar_defs;
  grammar->add_option("defs", grammar_defs, "predicate definitions or grammar file")->required();
  grammar->add_flag("--first-follow", first_follow, "append first/follow tables as comments");

  auto* parts = app.add_subcommand("partitions", "list predicate partitions");
  std::string parts_defs, heap;
  parts->add_option("defs", parts_defs, "predicate definitions")->required();
  parts->add_option("--heap", heap, "also report the heap graph of a ground sentence");
  parts->add_flag("--json", as_json, "machine-readable report");

  auto* mangle_cmd = app.add_subcommand("mangle", "mangle a points-to pair into a terminal token");
  std::string loc, val, token;
  mangle_cmd->add_option("loc", loc, "location term");
  mangle_cmd->add_option("val", val, "value term");
  mangle_cmd->add_option("--demangle", token, "token to decode");

  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force comparison of two sentences");
  std::string oracle_defs;
  oracle_cmd->add_option("defs", oracle_defs, "predicate definitions")->required();
  oracle_cmd->add_option("left", left, "left sentence, inline or @file")->required();
  oracle_cmd->add_option("right", right, "right sentence, inline or @file")->required();
  oracle_cmd->add_option("--oracle-depth", oracle_depth, "unfolding levels")->check(CLI::Range(1, 8));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*check) {
      EntailConfig cfg;
      cfg.max_depth = max_depth;
      cfg.max_steps = max_steps;
      cfg.order_conjuncts = !no_order;
      cfg.validate();
      std::vector<std::string> defs{defs_main};
      defs.insert(defs.end(), defs_more.begin(), defs_more.end());
      Prepared prep = load_defs(defs);
      Checker checker(prep.env, prep.tables, cfg);

      std::vector<CheckJob> jobs;
      if (each_line) {
        auto ls = lines_of(sentence_text(left));
        auto rs = lines_of(sentence_text(right));
        if (ls.size() != rs.size())
          throw UsageError("--each-line needs as many left as right sentences (" + std::to_string(ls.size()) +
                           " vs " + std::to_string(rs.size()) + ")");
        for (std::size_t i = 0; i < ls.size(); ++i)
          jobs.push_back({ls[i], rs[i], file_of(left), file_of(right)});
      } else {
        jobs.push_back({sentence_text(left), sentence_text(right), file_of(left), file_of(right)});
      }
      std::vector<std::future<CheckDone>> running;
      for (const auto& job : jobs)
        running.push_back(std::async(std::launch::async, run_check, std::cref(checker), std::cref(prep.env),
                                     std::cref(job), as_json, check_oracle_depth));
      int code = 0;
      for (auto& f : running) {
        CheckDone d = f.get();
        std::cout << d.out;
        std::cerr << d.err;
        code = std::max(code, d.code);
      }
      return code;
    }

    if (*grammar) {
      std::string text = slurp(grammar_defs);
      AttributedGrammar g;
      if (looks_like_grammar(text)) {
        g = read_grammar(text, grammar_defs).value();
        auto missing = undefined_calls(untranslate(g));
        if (!missing.empty()) throw HeapletError(missing);
      } else {
        g = load_defs({grammar_defs}).grammar;
      }
      std::cout << emit(g);
      if (first_follow) std::cout << emit_tables(g, analyze(g));
      return 0;
    }

    if (*parts) {
      Prepared prep = load_defs({parts_defs});
      auto ps = partitions(prep.env).value();
      json j = json::array();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        json members = json::array(), entries = json::array();
        for (const auto& k : ps[i].members) members.push_back(k.to_string());
        for (const auto& k : ps[i].entry_points) entries.push_back(k.to_string());
        j.push_back({{"members", members}, {"entry_points", entries}});
        if (!as_json) {
          std::cout << "partition " << i + 1 << ":";
          for (const auto& k : ps[i].members) std::cout << " " << k.to_string();
          std::cout << "\n  entry:";
          for (const auto& k : ps[i].entry_points) std::cout << " " << k.to_string();
          std::cout << "\n";
        }
      }
      json report = {{"partitions", j}};
      if (!heap.empty()) {
        auto g = build_heap_graph(sentence(sentence_text(heap), file_of(heap))).value();
        json vs = json::array(), sinks = json::array(), es = json::array(), as = json::array();
        for (const auto& v : g.vertices) vs.push_back(v.to_string());
        for (const auto& v : g.sinks) sinks.push_back(v.to_string());
        for (const auto& [a, b] : g.edges) es.push_back({a.to_string(), b.to_string()});
        for (const auto& a : g.aliases)
          as.push_back({{"target", a.target.to_string()}, {"first", a.first.to_string()}, {"second", a.second.to_string()}});
        report["heap"] = {{"vertices", vs}, {"sinks", sinks}, {"edges", es}, {"aliases", as}, {"connected", g.connected}};
        if (!as_json) {
          std::cout << "heap graph: " << g.vertices.size() << " vertices, " << g.edges.size() << " edges, "
                    << (g.connected ? "connected" : "not connected") << "\n";
          for (const auto& [a, b] : g.edges) std::cout << "  " << a.to_string() << " -> " << b.to_string() << "\n";
          for (const auto& a : g.aliases)
            std::cout << "  alias: " << a.first.to_string() << " and " << a.second.to_string() << " both reach "
                      << a.target.to_string() << "\n";
        }
      }
      if (as_json) std::cout << report.dump(2) << "\n";
      return 0;
    }

    if (*mangle_cmd) {
      if (!token.empty()) {
        auto pt = demangle(token);
        if (!pt) throw HeapletError(pt.diagnostics());
        std::cout << pt->location.to_string() << " ↦ " << pt->value.to_string() << "\n";
        return 0;
      }
      if (loc.empty() || val.empty()) throw UsageError("mangle needs a location and a value, or --demangle");
      auto l = parse_term(loc), v = parse_term(val);
      if (!l) throw HeapletError(l.diagnostics());
      if (!v) throw HeapletError(v.diagnostics());
      if (l->is_number()) throw UsageError("a location must not be a number");
      std::cout << mangle(PointsTo(*l, *v)).name << "\n";
      return 0;
    }

    if (*oracle_cmd) {
      Prepared prep = load_defs({oracle_defs});
      auto a1 = sentence(sentence_text(left), file_of(left));
      auto a2 = sentence(sentence_text(right), file_of(right));
      auto answer = oracle::oracle_equal(prep.env, a1, a2, oracle_depth);
      std::cout << oracle::to_string(answer) << "\n";
      return answer == oracle::Answer::True ? 0 : answer == oracle::Answer::False ? 1 : 2;
    }
  } catch (const HeapletError& e) {
    print_diagnostics(e.diagnostics());
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
