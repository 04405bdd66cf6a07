#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "declhier/analysis.hpp"
#include "declhier/dsl.hpp"
#include "declhier/gateway.hpp"

namespace declhier {

namespace {

constexpr int exit_ok = 0;
constexpr int exit_negative = 1;
constexpr int exit_usage = 2;

struct Loaded {
  Document doc;
  int status = exit_ok;
};

// Syntax errors and unreadable files map to exit 2; well-formedness
// violations to `violation_status`.
Loaded load_model(const std::string& path, std::ostream& err, int violation_status = exit_usage) {
  Loaded out;
  SourceDocument src;
  try {
    src = SourceDocument::from_file(path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    out.status = exit_usage;
    return out;
  }
  ModelParseResult parsed = parse_model(src);
  for (const auto& d : parsed.diagnostics) {
    err << format_diagnostic(d, src.origin) << "\n";
  }
  if (!parsed.syntax_ok) {
    out.status = exit_usage;
  } else if (!parsed.ok()) {
    out.status = violation_status;
  }
  out.doc = std::move(parsed.document);
  return out;
}

std::string join_trace(const LeafTrace& t) {
  if (t.empty()) return "<>";
  std::string out;
  for (const auto& label : t) {
    if (!out.empty()) out += ' ';
    out += format_label(label);
  }
  return out;
}

void print_status(const ProcessInstance& inst, std::ostream& out) {
  out << "enabled:";
  for (const auto& e : inst.enabled_activities()) {
    out << " " << inst.scope_path(e.scope) << format_label(e.label) << "@" << e.scope;
  }
  out << "\n";
  for (const auto& [id, s] : inst.state().scopes) {
    for (const auto& [aid, label] : s.running_activities) {
      out << "running: #" << aid << " " << inst.scope_path(id) << format_label(label) << "\n";
    }
  }
  if (inst.terminated()) {
    out << "terminated\n";
    return;
  }
  TerminationCheck check = inst.may_terminate(inst.state().root);
  out << "terminate: " << (check.allowed ? "allowed" : "blocked");
  for (const auto& b : check.blockers) out << " [" << b << "]";
  out << "\n";
}

std::string unquote(std::string s) {
  auto first = s.find_first_not_of(" \t\r");
  auto last = s.find_last_not_of(" \t\r");
  s = first == std::string::npos ? "" : s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

int simulate(const Document& doc, std::ostream& out, std::istream& in) {
  ProcessInstance inst(CompiledDocument::compile(doc));
  print_status(inst, out);
  std::string line;
  while (out << "> " << std::flush, std::getline(in, line)) {
    std::istringstream words(line);
    std::string cmd;
    words >> cmd;
    std::string rest;
    std::getline(words, rest);
    rest = unquote(rest);
    try {
      if (cmd.empty()) {
        continue;
      } else if (cmd == "quit" || cmd == "exit") {
        break;
      } else if (cmd == "start") {
        Event e = inst.start_activity(inst.resolve_scope(rest), rest);
        out << "started #" << e.activity_instance << " " << format_label(e.activity) << "\n";
      } else if (cmd == "complete") {
        Event e = inst.complete_activity(std::stoull(rest));
        out << "completed #" << e.activity_instance << " " << format_label(e.activity) << "\n";
      } else if (cmd == "do") {
        Event e = inst.start_activity(inst.resolve_scope(rest), rest);
        try {
          inst.complete_activity(e.activity_instance);
        } catch (const rejection&) {
          out << "started #" << e.activity_instance << " (completion refused, still running)\n";
          throw;
        }
        out << "executed " << format_label(e.activity) << "\n";
      } else if (cmd == "terminate") {
        inst.terminate();
        out << "instance terminated\n";
      } else if (cmd == "explain") {
        for (const auto& x : inst.explain(inst.resolve_scope(rest), rest)) {
          out << "  " << to_string(x.constraint) << ": " << status_name(x.status)
              << (x.blocking ? " (blocking)" : "") << "\n";
        }
        continue;
      } else if (cmd == "state") {
        out << instance_json(inst, "local", "local").dump(2) << "\n";
        continue;
      } else if (cmd == "help") {
        out << "commands: start LABEL | complete ID | do LABEL | terminate | explain LABEL | state | quit\n";
        continue;
      } else {
        out << "unknown command '" << cmd << "' (try help)\n";
        continue;
      }
    } catch (const rejection& r) {
      out << "rejected: " << r.what();
      for (const auto& b : r.blockers()) out << " [" << b << "]";
      out << "\n";
    } catch (const std::invalid_argument&) {
      out << "expected an activity instance number\n";
    }
    print_status(inst, out);
    if (inst.terminated()) break;
  }
  return inst.terminated() ? exit_ok : exit_negative;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::istream& in) {
  CLI::App app{"Hierarchical declarative process models: execution and analysis"};
  app.require_subcommand(1);

  std::string model_path, trace_path, second_path, members_name, complex_label, snapshot;
  std::vector<std::string> members;
  bool transcript = false;
  std::size_t max_leaf = 4, max_activations = 2, max_states = 2'000'000;
  int port = 0;

  auto* validate = app.add_subcommand("validate", "check a model for well-formedness");
  validate->add_option("MODEL", model_path)->required();

  auto* format = app.add_subcommand("format", "print a model in canonical form");
  format->add_option("MODEL", model_path)->required();

  auto* replay_cmd = app.add_subcommand("replay", "replay a trace against a model");
  replay_cmd->add_option("MODEL", model_path)->required();
  replay_cmd->add_option("TRACE", trace_path)->required();
  replay_cmd->add_flag("--transcript", transcript, "print enablement after every event");

  auto add_bounds = [&](CLI::App* sub) {
    sub->add_option("--max-leaf", max_leaf, "bound on leaf trace length")->capture_default_str();
    sub->add_option("--max-activations", max_activations, "bound on complex activations per run")
        ->capture_default_str();
    sub->add_option("--max-states", max_states, "explored configuration cap")->capture_default_str();
  };

  auto* enumerate = app.add_subcommand("enumerate", "list the bounded leaf language");
  enumerate->add_option("MODEL", model_path)->required();
  add_bounds(enumerate);

  auto* equiv = app.add_subcommand("equiv", "compare two models' bounded leaf languages");
  equiv->add_option("MODEL1", model_path)->required();
  equiv->add_option("MODEL2", second_path)->required();
  add_bounds(equiv);

  auto* extract = app.add_subcommand("extract", "move activities into a new sub-process");
  extract->add_option("MODEL", model_path)->required();
  extract->add_option("--members", members, "comma-separated activity labels")
      ->required()
      ->delimiter(',');
  extract->add_option("--name", members_name, "name of the new complex activity")->required();

  auto* inline_cmd = app.add_subcommand("inline", "hoist a sub-process into its parent and verify");
  inline_cmd->add_option("MODEL", model_path)->required();
  inline_cmd->add_option("--complex", complex_label, "complex activity to inline")->required();
  add_bounds(inline_cmd);

  auto* simulate_cmd = app.add_subcommand("simulate", "interactive step loop on stdin");
  simulate_cmd->add_option("MODEL", model_path)->required();

  auto* serve = app.add_subcommand("serve", "run the HTTP/JSON service");
  serve->add_option("--port", port, "listen port (default: $PORT or 8080)");
  serve->add_option("--snapshot", snapshot, "snapshot file for crash recovery");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  const EnumerationLimits limits{max_leaf, max_activations, max_states, SearchOrder::breadth_first};

  try {
    if (*validate) {
      Loaded m = load_model(model_path, err, exit_negative);
      if (m.status == exit_ok) out << model_path << ": well-formed\n";
      return m.status;
    }
    if (*format) {
      Loaded m = load_model(model_path, err);
      if (m.status != exit_ok) return m.status;
      out << serialize_model(m.doc);
      return exit_ok;
    }
    if (*replay_cmd) {
      Loaded m = load_model(model_path, err);
      if (m.status != exit_ok) return m.status;
      SourceDocument src = SourceDocument::from_file(trace_path);
      Trace trace;
      try {
        trace = parse_trace(src);
      } catch (const trace_parse_error& e) {
        err << format_diagnostic(e.diagnostic(), src.origin) << "\n";
        return exit_usage;
      }
      auto doc = CompiledDocument::compile(m.doc);
      if (transcript) out << render_timeline(doc, trace);
      ReplayVerdict v = replay(doc, trace);
      if (v.accepted()) {
        out << "accepted\n";
        return exit_ok;
      }
      out << "rejected at step " << *v.failure_index << ": " << v.reason;
      for (const auto& b : v.blockers) out << " [" << b << "]";
      out << "\n";
      return exit_negative;
    }
    if (*enumerate) {
      Loaded m = load_model(model_path, err);
      if (m.status != exit_ok) return m.status;
      BoundedLanguage lang = enumerate_language(m.doc, limits);
      for (const auto& t : lang.traces) out << join_trace(t) << "\n";
      out << lang.traces.size() << " trace(s), " << lang.explored_states << " configuration(s)\n";
      return exit_ok;
    }
    if (*equiv) {
      Loaded a = load_model(model_path, err);
      if (a.status != exit_ok) return a.status;
      Loaded b = load_model(second_path, err);
      if (b.status != exit_ok) return b.status;
      EquivalenceResult r = bounded_equivalent(a.doc, b.doc, limits);
      if (r.equivalent_up_to_k) {
        out << "equivalent up to leaf length " << max_leaf << " (" << r.first_language_size
            << " trace(s))\n";
        return exit_ok;
      }
      out << "inequivalent: counterexample " << join_trace(*r.counterexample) << " accepted only by "
          << (r.accepted_by_first ? model_path : second_path) << "\n";
      return exit_negative;
    }
    if (*extract) {
      Loaded m = load_model(model_path, err);
      if (m.status != exit_ok) return m.status;
      ExtractionReport report = check_extraction(m.doc, members);
      for (const auto& a : report.aggregated_constraints) {
        err << "aggregated " << a.sources.size() << " constraint(s) into "
            << to_string(a.aggregate(members_name)) << "\n";
      }
      if (!report.feasible) {
        for (const auto& c : report.blocking_constraints) err << "blocking: " << to_string(c) << "\n";
        out << "infeasible\n";
        return exit_negative;
      }
      out << serialize_model(extract_subprocess(m.doc, members, members_name));
      return exit_ok;
    }
    if (*inline_cmd) {
      Loaded m = load_model(model_path, err);
      if (m.status != exit_ok) return m.status;
      InlineResult r = inline_subprocess(m.doc, complex_label, limits);
      for (const auto& w : r.warnings) err << "warning: " << w << "\n";
      out << serialize_model(r.flat);
      if (r.verification.equivalent_up_to_k) {
        out << "// refactorable up to leaf length " << max_leaf << "\n";
        return exit_ok;
      }
      out << "// not refactorable: counterexample " << join_trace(*r.verification.counterexample)
          << " accepted only by the " << (r.verification.accepted_by_first ? "hierarchical" : "flat")
          << " model\n";
      return exit_negative;
    }
    if (*simulate_cmd) {
      Loaded m = load_model(model_path, err);
      if (m.status != exit_ok) return m.status;
      return simulate(m.doc, out, in);
    }
    if (*serve) {
      if (port == 0) {
        const char* env = std::getenv("PORT");
        port = env ? std::atoi(env) : 8080;
      }
      SessionStore store(snapshot.empty() ? std::nullopt
                                          : std::optional<std::filesystem::path>(snapshot));
      httplib::Server server;
      register_routes(server, store);
      out << "listening on port " << port << "\n" << std::flush;
      return server.listen("0.0.0.0", port) ? exit_ok : exit_usage;
    }
  } catch (const bound_exceeded& e) {
    err << "error: " << e.what() << "\n";
    return exit_negative;
  } catch (const extraction_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_negative;
  } catch (const inline_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}

}  // namespace declhier
