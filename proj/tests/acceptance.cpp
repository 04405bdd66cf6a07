// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <csignal>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "declhier/gateway.hpp"
#include "support.hpp"

using namespace declhier;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::shared_ptr<const CompiledDocument> compiled(const std::string& name) {
  return CompiledDocument::compile(support::fixture(name));
}

Trace trace_file(const std::string& name) {
  return parse_trace(SourceDocument::from_file(support::kFixtures / name));
}

bool has_enabled(const ProcessInstance& p, const std::string& path_label) {
  for (const auto& e : p.enabled_activities()) {
    if (p.scope_path(e.scope) + e.label == path_label) return true;
  }
  return false;
}

// Constraint blockers only, ignoring "running activity" entries.
bool constraint_blocked(const ProcessInstance& p) {
  for (const auto& b : p.may_terminate(p.state().root).blockers) {
    if (b.rfind("running activity", 0) != 0) return true;
  }
  return false;
}

bool anything_running(const ProcessInstance& p) {
  for (const auto& [id, s] : p.state().scopes) {
    if (!s.running_activities.empty()) return true;
  }
  return false;
}

// Drives `trace` step by step, calling `check(event_number, instance)` after
// instantiation (0) and after every event.
std::string walk(std::shared_ptr<const CompiledDocument> doc, const Trace& trace,
                 const std::function<std::string(std::size_t, const ProcessInstance&)>& check) {
  ProcessInstance p(doc);
  std::map<std::string, ActivityInstanceId> tags;
  if (auto e = check(0, p); !e.empty()) return "at instantiation: " + e;
  std::size_t i = 0;
  while (i < trace.events.size()) {
    std::size_t j = i;
    while (j < trace.events.size() && trace.events[j].step == trace.events[i].step) ++j;
    const std::size_t before = p.log().size();
    apply_trace_step(p, std::span(trace.events).subspan(i, j - i), tags);
    for (std::size_t n = before + 1; n <= p.log().size(); ++n) {
      if (auto e = check(n, p); !e.empty()) return "after e" + std::to_string(n) + ": " + e;
    }
    i = j;
  }
  return "";
}

Outcome golden(const std::string& model, const std::string& trace, const std::string& golden_name) {
  auto doc = compiled(model);
  const Trace t = trace_file(trace);
  const std::string rendered = render_timeline(doc, t);
  const std::string expected = read_file(fs::path(DECLHIER_GOLDEN_DIR) / golden_name);
  if (rendered != expected) return {false, "transcript differs from " + golden_name};
  if (render_timeline(doc, t) != rendered) return {false, "transcript is not stable across runs"};
  if (!replay(doc, t).accepted()) return {false, "final terminate not accepted"};
  return {true, "transcript matches " + golden_name};
}

Outcome basic_golden() {
  Outcome g = golden("basic.dpm", "basic_full.dpt", "basic.txt");
  if (!g.pass) return g;
  const std::string problem = walk(compiled("basic.dpm"), trace_file("basic_full.dpt"),
                                   [](std::size_t n, const ProcessInstance& p) -> std::string {
    if (p.terminated()) return "";
    if (n == 0 && p.may_terminate(p.state().root).allowed) return "termination allowed";
    if ((n < 4) != constraint_blocked(p)) return "termination constraint status wrong";
    if (n >= 4 && !anything_running(p) && !p.may_terminate(p.state().root).allowed) {
      return "termination refused with nothing running";
    }
    if ((n >= 6) != has_enabled(p, "E")) return "E enablement wrong";
    return "";
  });
  if (!problem.empty()) return {false, problem};
  return {true, g.detail + "; E enabled from e6, termination unconstrained from e4"};
}

Outcome subprocess_golden() {
  Outcome g = golden("subprocess.dpm", "subprocess.dpt", "subprocess.txt");
  if (!g.pass) return g;
  const std::string problem = walk(compiled("subprocess.dpm"), trace_file("subprocess.dpt"),
                                   [](std::size_t n, const ProcessInstance& p) -> std::string {
    if (p.terminated()) return "";
    const bool c = has_enabled(p, "B/C");
    const bool d = has_enabled(p, "B/D");
    if (n < 3 && (c || d)) return "C or D enabled before B started";
    if (n >= 3 && n < 8 && !c) return "C not enabled inside B";
    if ((n >= 5 && n < 8) != d) return "D enablement wrong";
    if (n >= 8 && (c || d || !has_enabled(p, "A") || !has_enabled(p, "B"))) {
      return "wrong enablement after B completed";
    }
    return "";
  });
  if (!problem.empty()) return {false, problem};
  return {true, g.detail + "; C from e3, D from e5, both gone after e8"};
}

Outcome oracle_suite() {
  const auto tally = oracle::run_oracle_suite(6);
  std::string detail = std::to_string(tally.checked) + " verdicts, " +
                       std::to_string(tally.disagreements) + " disagreements over " +
                       std::to_string(oracle::catalogue().size()) + " constraints";
  std::size_t templates = 0;
  for (Template t : all_templates()) {
    for (const auto& c : oracle::catalogue()) {
      if (c.tmpl == t) {
        ++templates;
        break;
      }
    }
  }
  if (templates != template_count) return {false, "catalogue misses a template"};
  if (tally.disagreements) detail += "; first: " + tally.first_disagreement;
  return {tally.disagreements == 0, detail};
}

Outcome classification() {
  const std::vector<std::pair<std::vector<Template>, TemplateClassification>> table = {
      {{Template::existence, Template::responded_existence, Template::response}, {false, true}},
      {{Template::absence, Template::precedence, Template::chain_precedence, Template::neg_response,
        Template::init},
       {true, false}},
      {{Template::exactly, Template::succession, Template::chain_response}, {true, true}},
  };
  std::size_t matched = 0;
  std::string mismatches;
  for (const auto& [templates, expected] : table) {
    for (Template t : templates) {
      ConstraintInstance c{t, has_cardinality(t) ? 1u : 0u, {"A"}};
      if (!is_unary(t)) c.operands.push_back("B");
      if (classify_template(compile_constraint(c, {"A", "B", "C"})) == expected) {
        ++matched;
      } else {
        mismatches += " " + std::string(template_name(t));
      }
    }
  }
  return {matched == template_count,
          std::to_string(matched) + "/" + std::to_string(template_count) + " templates match" +
              (mismatches.empty() ? "" : "; mismatched:" + mismatches)};
}

Outcome aggregation() {
  const Document flat = support::fixture("writing_flat.dpm");
  const std::vector<std::string> members = {"Read reviews for revising paper", "Write response letter",
                                            "Work on revision"};
  const auto report = check_extraction(flat, members);
  if (!report.feasible) return {false, "extraction reported infeasible"};
  if (report.aggregated_constraints.size() != 1) return {false, "expected one aggregated group"};
  const auto& agg = report.aggregated_constraints[0];
  if (agg.tmpl != Template::neg_response || agg.sources.size() != 3) {
    return {false, "aggregated group is not 3 neg_response constraints"};
  }
  const Document hier = extract_subprocess(flat, members, "Revise paper");
  std::size_t on_complex = 0;
  for (const auto& c : hier.root()->constraints) {
    if (c == agg.aggregate("Revise paper")) ++on_complex;
  }
  if (on_complex != 1) return {false, "aggregate constraint not attached to the complex activity"};
  if (!structurally_equal(inline_rewrite(hier, "Revise paper"), flat)) {
    return {false, "inline(extract(m)) differs from m"};
  }
  return {true, "3 neg_response -> " + to_string(agg.aggregate("Revise paper")) + "; round-trip identical"};
}

Outcome witness() {
  const Document hier = support::fixture("chained.dpm");
  EnumerationLimits limits;
  limits.max_leaf_len = 4;
  limits.max_activations = 2;
  const InlineResult r = inline_subprocess(hier, "C", limits);
  if (r.verification.equivalent_up_to_k) return {false, "inlining reported equivalent"};
  const LeafTrace& cx = *r.verification.counterexample;
  if (cx.size() > 4) return {false, "counterexample longer than 4"};
  if (!r.verification.accepted_by_first) return {false, "counterexample accepted by the flat model"};
  auto h = CompiledDocument::compile(hier);
  auto f = CompiledDocument::compile(r.flat);
  auto schedule = find_schedule(h, cx, limits.max_activations);
  if (!schedule || !replay(h, *schedule).accepted()) return {false, "hierarchical replay rejects witness"};
  if (accepts_leaf_trace(f, cx, limits.max_activations)) return {false, "flat replay accepts witness"};
  std::string shown = "<";
  for (std::size_t i = 0; i < cx.size(); ++i) shown += (i ? " " : "") + cx[i];
  shown += ">";
  return {true, "inequivalent; counterexample " + shown + " (length " + std::to_string(cx.size()) +
                    ") replays on the hierarchical model only"};
}

Outcome enumeration_consistency() {
  std::size_t members = 0, non_members = 0, files = 0;
  unsigned seed = 7;
  std::string problems;
  for (const auto& path : support::well_formed_fixtures()) {
    ++files;
    const auto tally = support::check_enumeration(support::load_document(path), {}, 100, seed++);
    members += tally.members;
    non_members += tally.non_members;
    if (!tally.ok()) problems += " " + path.filename().string() + ": " + tally.first_problem;
    if (tally.non_members < 100) {
      // Fewer than 100 non-members exist within the bound; all were checked.
      std::size_t universe = 0;
      oracle::for_each_sequence(leaf_alphabet(support::load_document(path)), 4,
                                [&](const oracle::Seq&) { ++universe; });
      if (tally.members + tally.non_members != universe) {
        problems += " " + path.filename().string() + ": too few non-members sampled";
      }
    }
  }
  return {problems.empty(), std::to_string(files) + " fixtures, " + std::to_string(members) +
                                " members replayed, " + std::to_string(non_members) +
                                " non-members rejected" + problems};
}

Outcome dsl_round_trip() {
  std::size_t files = 0;
  for (const auto& path : support::well_formed_fixtures()) {
    ++files;
    const auto source = SourceDocument::from_file(path);
    const Document doc = parse_model(source).document;
    const std::string text = serialize_model(doc);
    const auto again = parse_model(SourceDocument{text});
    if (!again.ok() || again.document != doc) return {false, path.filename().string() + ": parse(serialize) differs"};
    if (serialize_model(again.document) != text) return {false, path.filename().string() + ": not idempotent"};
    if (text != source.text) return {false, path.filename().string() + ": committed text is not canonical"};
  }
  return {true, std::to_string(files) + " fixtures"};
}

// Runs the first `cut` commands in a child process that is then killed
// with SIGKILL, restores a fresh store from the snapshot and compares every
// later enablement response with an uninterrupted run.
Outcome gateway_restore() {
  const std::string model = read_file(support::kFixtures / "subprocess.dpm");
  auto start = [](const std::string& a) { return json{{"kind", "start"}, {"activity", a}}; };
  auto complete = [](int id) { return json{{"kind", "complete"}, {"activity_instance", id}}; };
  const std::vector<json> script = {start("A"),  complete(1), start("B"), start("C"), complete(3),
                                    start("D"),  complete(4), complete(2), json{{"kind", "terminate"}}};
  std::vector<json> reference;
  {
    SessionStore live;
    live.add_model(model);
    live.create_instance("m1");
    for (const auto& cmd : script) {
      if (live.apply_command("i1", cmd).status != 200) return {false, "reference run rejected a command"};
      reference.push_back(live.get_enabled("i1").body);
    }
  }
  const fs::path snap = fs::temp_directory_path() / ("declhier_acceptance_" + std::to_string(::getpid()) + ".json");
  std::size_t compared = 0;
  for (std::size_t cut = 1; cut < script.size(); ++cut) {
    fs::remove(snap);
    std::cout.flush();
    const pid_t child = ::fork();
    if (child == 0) {
      SessionStore doomed(snap);
      doomed.add_model(model);
      doomed.create_instance("m1");
      for (std::size_t i = 0; i < cut; ++i) doomed.apply_command("i1", script[i]);
      ::raise(SIGKILL);
      ::_exit(3);
    }
    int status = 0;
    ::waitpid(child, &status, 0);
    if (!WIFSIGNALED(status) || WTERMSIG(status) != SIGKILL) return {false, "child was not killed"};
    SessionStore restored(snap);
    if (restored.get_enabled("i1").body != reference[cut - 1]) {
      return {false, "restored enablement differs after " + std::to_string(cut) + " commands"};
    }
    for (std::size_t i = cut; i < script.size(); ++i) {
      if (restored.apply_command("i1", script[i]).status != 200 ||
          restored.get_enabled("i1").body != reference[i]) {
        return {false, "diverged at command " + std::to_string(i + 1) + " after restore at " +
                           std::to_string(cut)};
      }
      ++compared;
    }
  }
  fs::remove(snap);
  return {true, std::to_string(script.size() - 1) + " kill points, " + std::to_string(compared) +
                    " subsequent enablement responses identical"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"Flat model golden replay", 1.0, basic_golden},
      {"Sub-process golden replay", 1.0, subprocess_golden},
      {"Template oracle suite", 30.0, oracle_suite},
      {"Classification table", 0.0, classification},
      {"Aggregation fixture", 0.0, aggregation},
      {"Expressiveness witness", 10.0, witness},
      {"Enumeration consistency", 0.0, enumeration_consistency},
      {"DSL round-trip", 0.0, dsl_round_trip},
      {"Gateway determinism", 0.0, gateway_restore},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && seconds >= c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the time budget";
    }
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(3);
    line << (o.pass ? "PASS" : "FAIL") << "  " << c.name << "  (" << seconds << " s";
    if (c.budget_seconds > 0) line << ", budget " << c.budget_seconds << " s";
    line << ")  " << o.detail;
    std::cout << line.str() << "\n";
    if (!o.pass) ++failures;
  }
  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criterion/criteria failed"
                         : std::string("acceptance: all criteria passed"))
            << "\n";
  return failures ? 1 : 0;
}
