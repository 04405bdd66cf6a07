#include "declhier/gateway.hpp"

#include <fstream>

#include <httplib.h>

#include "declhier/analysis.hpp"
#include "declhier/dsl.hpp"

namespace declhier {

json event_json(const Event& e) {
  json j = {{"seq", e.seq}, {"kind", event_kind_name(e.kind)}, {"scope", e.scope}};
  if (e.kind != EventKind::terminated) {
    j["activity"] = e.activity;
    j["activity_instance"] = e.activity_instance;
  }
  return j;
}

json rejection_json(const rejection& r) {
  return {{"error", "rejected"},
          {"kind", rejection_kind_name(r.kind())},
          {"reason", r.what()},
          {"blockers", r.blockers()}};
}

json scope_json(const ProcessInstance& inst, ScopeId id) {
  const ScopeInstance& s = inst.scope(id);
  const CompiledModel& m = inst.document().model(s.model);
  const bool running = s.status == ScopeStatus::running && !inst.terminated();

  json activities = json::array();
  std::vector<std::vector<std::string>> blocks(m.constraints.size());
  for (const auto& a : m.activities) {
    json blockers = json::array();
    for (std::size_t i = 0; i < m.automata.size(); ++i) {
      const auto& automaton = m.automata[i];
      if (automaton.dead(automaton.step(s.constraint_states[i], automaton.symbol_index(a.name)))) {
        blockers.push_back(to_string(m.constraints[i]));
        blocks[i].push_back(a.name);
      }
    }
    activities.push_back({{"name", a.name},
                          {"kind", a.is_complex() ? "complex" : "atomic"},
                          {"enabled", running && inst.is_enabled(id, a.name)},
                          {"running", a.is_complex() && s.child_scopes.count(a.name) > 0},
                          {"blockers", std::move(blockers)}});
  }
  json constraints = json::array();
  for (std::size_t i = 0; i < m.constraints.size(); ++i) {
    constraints.push_back({{"constraint", to_string(m.constraints[i])},
                           {"status", status_name(status_of(m.automata[i], s.constraint_states[i]))},
                           {"blocking", !blocks[i].empty()},
                           {"blocks", blocks[i]}});
  }
  json running_acts = json::array();
  for (const auto& [aid, label] : s.running_activities) {
    running_acts.push_back({{"activity_instance", aid}, {"activity", label}});
  }
  json children = json::array();
  for (const auto& [label, child] : s.child_scopes) {
    children.push_back(scope_json(inst, child));
  }
  TerminationCheck check = inst.may_terminate(id);
  return {{"id", s.id},
          {"model", m.name},
          {"path", inst.scope_path(id)},
          {"owner_activity", s.owner_activity},
          {"status", s.status == ScopeStatus::running ? "running" : "completed"},
          {"may_terminate", {{"allowed", check.allowed}, {"blockers", check.blockers}}},
          {"activities", std::move(activities)},
          {"constraints", std::move(constraints)},
          {"running", std::move(running_acts)},
          {"completions", s.local_completions},
          {"children", std::move(children)},
          {"completed_children", s.completed_children}};
}

json enabled_json(const ProcessInstance& inst) {
  json list = json::array();
  for (const auto& e : inst.enabled_activities()) {
    list.push_back({{"scope", e.scope}, {"path", inst.scope_path(e.scope)}, {"activity", e.label}});
  }
  TerminationCheck check = inst.may_terminate(inst.state().root);
  return {{"enabled", std::move(list)},
          {"may_terminate", {{"allowed", check.allowed}, {"blockers", check.blockers}}}};
}

json instance_json(const ProcessInstance& inst, const std::string& id, const std::string& model_id) {
  json j = enabled_json(inst);
  j["id"] = id;
  j["model_id"] = model_id;
  j["status"] = inst.terminated() ? "terminated" : "running";
  j["events"] = inst.log().size();
  j["root"] = scope_json(inst, inst.state().root);
  return j;
}

namespace {

ApiResponse not_found(const std::string& what) {
  return {404, {{"error", "not_found"}, {"reason", what}}};
}

ApiResponse bad_request(const std::string& what) {
  return {400, {{"error", "bad_request"}, {"reason", what}}};
}

json diagnostics_json(const std::vector<ParseDiagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags) {
    out.push_back({{"line", d.line},
                   {"column", d.column},
                   {"severity", d.severity == Severity::error ? "error" : "warning"},
                   {"message", d.message}});
  }
  return out;
}

// Parses and compiles model text, or fills `error`.
std::optional<Document> parse_document(const std::string& text, ApiResponse& error) {
  ModelParseResult parsed = parse_model(SourceDocument{text, "<request>"});
  if (!parsed.ok()) {
    error = {400, {{"error", "invalid_model"}, {"diagnostics", diagnostics_json(parsed.diagnostics)}}};
    return std::nullopt;
  }
  return parsed.document;
}

EnumerationLimits limits_from(const json& request) {
  EnumerationLimits limits;
  limits.max_leaf_len = request.value("max_leaf", limits.max_leaf_len);
  limits.max_activations = request.value("max_activations", limits.max_activations);
  limits.max_states = request.value("max_states", limits.max_states);
  return limits;
}

}  // namespace

SessionStore::SessionStore(std::optional<std::filesystem::path> snapshot)
    : snapshot_path_(std::move(snapshot)) {
  if (snapshot_path_ && std::filesystem::exists(*snapshot_path_)) {
    std::ifstream in(*snapshot_path_);
    restore(json::parse(in));
  }
}

std::string SessionStore::register_model(std::string text, std::shared_ptr<const CompiledDocument> doc) {
  std::unique_lock lock(models_mutex_);
  models_.push_back(std::make_shared<const ModelEntry>(ModelEntry{std::move(text), std::move(doc)}));
  return "m" + std::to_string(models_.size());
}

std::shared_ptr<const SessionStore::ModelEntry> SessionStore::find_model(const std::string& id) const {
  std::shared_lock lock(models_mutex_);
  if (id.size() < 2 || id[0] != 'm') return nullptr;
  std::size_t n = 0;
  try {
    n = std::stoul(id.substr(1));
  } catch (const std::exception&) {
    return nullptr;
  }
  if (n == 0 || n > models_.size()) return nullptr;
  return models_[n - 1];
}

std::shared_ptr<SessionStore::InstanceEntry> SessionStore::find_instance(const std::string& id) const {
  std::shared_lock lock(instances_mutex_);
  auto it = instances_.find(id);
  return it == instances_.end() ? nullptr : it->second;
}

ApiResponse SessionStore::add_model(const std::string& source) {
  ApiResponse error;
  auto doc = parse_document(source, error);
  if (!doc) return error;
  auto compiled = CompiledDocument::compile(*doc);
  // Stored in canonical form so snapshots are stable.
  const std::string id = register_model(serialize_model(*doc), compiled);
  save_snapshot();
  json models = json::array();
  for (const auto& m : compiled->document().models) models.push_back(m.name);
  return {201, {{"id", id}, {"root", compiled->document().root()->name}, {"models", models}}};
}

ApiResponse SessionStore::get_model(const std::string& id) const {
  auto entry = find_model(id);
  if (!entry) return not_found("unknown model '" + id + "'");
  json models = json::array();
  for (const auto& m : entry->doc->document().models) models.push_back(m.name);
  return {200, {{"id", id}, {"source", entry->text}, {"models", models}}};
}

ApiResponse SessionStore::create_instance(const std::string& model_id) {
  auto model = find_model(model_id);
  if (!model) return not_found("unknown model '" + model_id + "'");
  auto entry = std::make_shared<InstanceEntry>();
  entry->model_id = model_id;
  entry->committed = std::make_shared<const ProcessInstance>(model->doc);
  std::string id;
  {
    std::unique_lock lock(instances_mutex_);
    id = "i" + std::to_string(next_instance_++);
    instances_.emplace(id, entry);
  }
  save_snapshot();
  return {201, instance_json(*entry->current(), id, model_id)};
}

ApiResponse SessionStore::get_instance(const std::string& id) const {
  auto entry = find_instance(id);
  if (!entry) return not_found("unknown instance '" + id + "'");
  return {200, instance_json(*entry->current(), id, entry->model_id)};
}

ApiResponse SessionStore::get_enabled(const std::string& id) const {
  auto entry = find_instance(id);
  if (!entry) return not_found("unknown instance '" + id + "'");
  return {200, enabled_json(*entry->current())};
}

ApiResponse SessionStore::get_trace(const std::string& id) const {
  auto entry = find_instance(id);
  if (!entry) return not_found("unknown instance '" + id + "'");
  json events = json::array();
  for (const auto& e : entry->current()->log()) events.push_back(event_json(e));
  return {200, {{"id", id}, {"events", std::move(events)}}};
}

ApiResponse SessionStore::apply_command(const std::string& id, const json& command) {
  auto entry = find_instance(id);
  if (!entry) return not_found("unknown instance '" + id + "'");
  if (!command.is_object() || !command.contains("kind") || !command["kind"].is_string()) {
    return bad_request("command needs a string 'kind'");
  }
  const std::string kind = command["kind"];

  std::lock_guard write(entry->write);
  ProcessInstance next = *entry->current();
  Event event;
  try {
    if (kind == "start") {
      if (!command.contains("activity") || !command["activity"].is_string()) {
        return bad_request("start needs 'activity'");
      }
      const std::string label = command["activity"];
      ScopeId scope = command.contains("scope") ? command["scope"].get<ScopeId>()
                                                : next.resolve_scope(label);
      event = next.start_activity(scope, label);
    } else if (kind == "complete") {
      ActivityInstanceId aid = 0;
      if (command.contains("activity_instance")) {
        aid = command["activity_instance"].get<ActivityInstanceId>();
      } else if (command.contains("activity") && command["activity"].is_string()) {
        // Convenience: the unique running instance of that label.
        const std::string label = command["activity"];
        std::size_t hits = 0;
        for (const auto& [sid, s] : next.state().scopes) {
          for (const auto& [running, l] : s.running_activities) {
            if (l == label && s.status == ScopeStatus::running) {
              aid = running;
              ++hits;
            }
          }
        }
        if (hits != 1) {
          return bad_request("activity '" + label + "' does not have exactly one running instance");
        }
      } else {
        return bad_request("complete needs 'activity_instance'");
      }
      event = next.complete_activity(aid);
    } else if (kind == "terminate") {
      event = next.terminate();
    } else {
      return bad_request("unknown command kind '" + kind + "'");
    }
  } catch (const rejection& r) {
    return {409, rejection_json(r)};
  } catch (const json::exception& e) {
    return bad_request(e.what());
  }

  auto committed = std::make_shared<const ProcessInstance>(std::move(next));
  {
    std::lock_guard publish(entry->publish);
    entry->committed = committed;
  }
  save_snapshot();
  return {200, {{"event", event_json(event)}, {"instance", instance_json(*committed, id, entry->model_id)}}};
}

ApiResponse SessionStore::analysis_equiv(const json& request) const {
  if (!request.is_object() || !request.contains("first") || !request.contains("second") ||
      !request["first"].is_string() || !request["second"].is_string()) {
    return bad_request("equiv needs 'first' and 'second' model sources");
  }
  ApiResponse error;
  auto first = parse_document(request["first"].get<std::string>(), error);
  if (!first) return error;
  auto second = parse_document(request["second"].get<std::string>(), error);
  if (!second) return error;
  try {
    EquivalenceResult r = bounded_equivalent(*first, *second, limits_from(request));
    json body = {{"equivalent", r.equivalent_up_to_k},
                 {"first_language_size", r.first_language_size},
                 {"second_language_size", r.second_language_size}};
    if (r.counterexample) {
      body["counterexample"] = *r.counterexample;
      body["accepted_by"] = r.accepted_by_first ? "first" : "second";
    }
    return {200, body};
  } catch (const bound_exceeded& e) {
    return {422, {{"error", "bound_exceeded"}, {"reason", e.what()}}};
  } catch (const json::exception& e) {
    return bad_request(e.what());
  }
}

ApiResponse SessionStore::analysis_extract(const json& request) const {
  if (!request.is_object() || !request.contains("model") || !request["model"].is_string() ||
      !request.contains("members") || !request.contains("name") || !request["name"].is_string()) {
    return bad_request("extract needs 'model', 'members' and 'name'");
  }
  ApiResponse error;
  auto doc = parse_document(request["model"].get<std::string>(), error);
  if (!doc) return error;
  std::vector<std::string> members;
  try {
    members = request["members"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    return bad_request(e.what());
  }
  auto report_json = [](const ExtractionReport& r) {
    json aggregated = json::array();
    for (const auto& a : r.aggregated_constraints) {
      json sources = json::array();
      for (const auto& c : a.sources) sources.push_back(to_string(c));
      aggregated.push_back({{"template", template_name(a.tmpl)},
                            {"outside", a.outside},
                            {"members_first", a.members_first},
                            {"sources", sources}});
    }
    json blocking = json::array();
    for (const auto& c : r.blocking_constraints) blocking.push_back(to_string(c));
    json internal = json::array();
    for (const auto& c : r.internal_constraints) internal.push_back(to_string(c));
    return json{{"feasible", r.feasible},
                {"aggregated_constraints", aggregated},
                {"blocking_constraints", blocking},
                {"internal_constraints", internal}};
  };
  try {
    ExtractionReport report = check_extraction(*doc, members);
    json body = report_json(report);
    if (report.feasible) {
      body["model"] = serialize_model(extract_subprocess(*doc, members, request["name"]));
    }
    return {200, body};
  } catch (const extraction_error& e) {
    json body = report_json(e.report());
    body["error"] = "extraction_failed";
    body["reason"] = e.what();
    return {422, body};
  } catch (const json::exception& e) {
    return bad_request(e.what());
  }
}

json SessionStore::snapshot() const {
  json models = json::array();
  {
    std::shared_lock lock(models_mutex_);
    for (const auto& m : models_) models.push_back(m->text);
  }
  json instances = json::array();
  {
    std::shared_lock lock(instances_mutex_);
    for (const auto& [id, entry] : instances_) {
      json events = json::array();
      for (const auto& e : entry->current()->log()) events.push_back(event_json(e));
      instances.push_back({{"id", id}, {"model", entry->model_id}, {"events", std::move(events)}});
    }
  }
  return {{"models", std::move(models)}, {"instances", std::move(instances)}};
}

void SessionStore::save_snapshot() const {
  if (!snapshot_path_) return;
  std::lock_guard lock(snapshot_mutex_);
  const json snap = snapshot();
  auto tmp = *snapshot_path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << snap.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, *snapshot_path_);
}

void SessionStore::restore(const json& snap) {
  for (const auto& text : snap.at("models")) {
    ModelParseResult parsed = parse_model(SourceDocument{text.get<std::string>(), "<snapshot>"});
    if (!parsed.ok()) {
      throw std::runtime_error("snapshot contains an invalid model: " +
                               parsed.diagnostics.front().message);
    }
    register_model(text.get<std::string>(), CompiledDocument::compile(parsed.document));
  }
  for (const auto& inst : snap.at("instances")) {
    const std::string id = inst.at("id");
    const std::string model_id = inst.at("model");
    auto model = find_model(model_id);
    if (!model) {
      throw std::runtime_error("snapshot instance '" + id + "' references unknown model");
    }
    std::vector<Event> log;
    for (const auto& e : inst.at("events")) {
      Event ev;
      ev.seq = e.at("seq");
      const std::string kind = e.at("kind");
      ev.kind = kind == "started" ? EventKind::started
                : kind == "completed" ? EventKind::completed
                                      : EventKind::terminated;
      ev.scope = e.at("scope");
      ev.activity = e.value("activity", "");
      ev.activity_instance = e.value("activity_instance", ActivityInstanceId{0});
      log.push_back(std::move(ev));
    }
    auto entry = std::make_shared<InstanceEntry>();
    entry->model_id = model_id;
    entry->committed = std::make_shared<const ProcessInstance>(replay_log(model->doc, log));
    instances_.emplace(id, entry);
    if (id.size() > 1 && id[0] == 'i') {
      next_instance_ = std::max(next_instance_, std::stoul(id.substr(1)) + 1);
    }
  }
}

void register_routes(httplib::Server& server, SessionStore& store) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(2), "application/json");
  };
  auto body_json = [](const httplib::Request& req, json& out) {
    out = json::parse(req.body, nullptr, false);
    return !out.is_discarded();
  };

  server.set_exception_handler([reply](const httplib::Request&, httplib::Response& res,
                                       std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const json::exception& e) {
      reply(res, bad_request(e.what()));
    } catch (const std::exception& e) {
      reply(res, {500, {{"error", "internal"}, {"reason", e.what()}}});
    }
  });
  server.Post("/models", [&, reply, body_json](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (body_json(req, body) && body.is_object() && body.contains("source")) {
      reply(res, store.add_model(body["source"].get<std::string>()));
    } else {
      // Raw .dpm text is accepted as well.
      reply(res, store.add_model(req.body));
    }
  });
  server.Get(R"(/models/([^/]+))", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, store.get_model(req.matches[1]));
  });
  server.Post("/instances", [&, reply, body_json](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!body_json(req, body) || !body.is_object() || !body.contains("model_id")) {
      reply(res, bad_request("expected {\"model_id\": ...}"));
      return;
    }
    reply(res, store.create_instance(body["model_id"].get<std::string>()));
  });
  server.Get(R"(/instances/([^/]+))", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, store.get_instance(req.matches[1]));
  });
  server.Get(R"(/instances/([^/]+)/enabled)",
             [&, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, store.get_enabled(req.matches[1]));
             });
  server.Get(R"(/instances/([^/]+)/trace)",
             [&, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, store.get_trace(req.matches[1]));
             });
  server.Post(R"(/instances/([^/]+)/commands)",
              [&, reply, body_json](const httplib::Request& req, httplib::Response& res) {
                json body;
                if (!body_json(req, body)) {
                  reply(res, bad_request("body is not JSON"));
                  return;
                }
                reply(res, store.apply_command(req.matches[1], body));
              });
  server.Post(R"(/instances/([^/]+)/terminate)",
              [&, reply](const httplib::Request& req, httplib::Response& res) {
                reply(res, store.apply_command(req.matches[1], json{{"kind", "terminate"}}));
              });
  server.Post("/analysis/equiv", [&, reply, body_json](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!body_json(req, body)) {
      reply(res, bad_request("body is not JSON"));
      return;
    }
    reply(res, store.analysis_equiv(body));
  });
  server.Post("/analysis/extract", [&, reply, body_json](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!body_json(req, body)) {
      reply(res, bad_request("body is not JSON"));
      return;
    }
    reply(res, store.analysis_extract(body));
  });
}

}  // namespace declhier
