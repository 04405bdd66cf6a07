#include "declhier/engine.hpp"

#include <algorithm>
#include <sstream>

namespace declhier {

std::optional<std::size_t> CompiledModel::activity_index(std::string_view label) const {
  for (std::size_t i = 0; i < activities.size(); ++i) {
    if (activities[i].name == label) {
      return i;
    }
  }
  return std::nullopt;
}

std::shared_ptr<const CompiledDocument> CompiledDocument::compile(Document doc) {
  WellFormednessReport report = validate_model(doc);
  if (!report.well_formed()) {
    const std::string what = "document is not well-formed: " + report.violations.front().message;
    throw model_error(what, std::move(report));
  }
  std::shared_ptr<CompiledDocument> out(new CompiledDocument());
  out->doc_ = std::move(doc);
  for (std::size_t i = 0; i < out->doc_.models.size(); ++i) {
    const ProcessModel& m = out->doc_.models[i];
    if (m.root) {
      out->root_ = i;
    }
    CompiledModel cm;
    cm.name = m.name;
    cm.activities = m.activities;
    cm.constraints = m.constraints;
    const auto labels = alphabet(m);
    for (const auto& c : m.constraints) {
      cm.automata.push_back(compile_constraint(c, labels));
    }
    out->models_.push_back(std::move(cm));
  }
  for (auto& cm : out->models_) {
    for (const auto& a : cm.activities) {
      cm.sub_model.push_back(a.is_complex() ? *out->model_index(a.sub_model) : no_model);
    }
  }
  return out;
}

std::optional<std::size_t> CompiledDocument::model_index(std::string_view name) const {
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].name == name) {
      return i;
    }
  }
  return std::nullopt;
}

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::started: return "started";
    case EventKind::completed: return "completed";
    case EventKind::terminated: return "terminated";
  }
  return "unknown";
}

std::string_view rejection_kind_name(RejectionKind k) {
  switch (k) {
    case RejectionKind::not_enabled: return "not_enabled";
    case RejectionKind::complex_already_running: return "complex_already_running";
    case RejectionKind::scope_not_running: return "scope_not_running";
    case RejectionKind::unknown_scope: return "unknown_scope";
    case RejectionKind::unknown_activity: return "unknown_activity";
    case RejectionKind::ambiguous_scope: return "ambiguous_scope";
    case RejectionKind::unknown_activity_instance: return "unknown_activity_instance";
    case RejectionKind::sub_process_cannot_terminate: return "sub_process_cannot_terminate";
    case RejectionKind::termination_not_allowed: return "termination_not_allowed";
    case RejectionKind::instance_terminated: return "instance_terminated";
  }
  return "unknown";
}

ProcessInstance::ProcessInstance(std::shared_ptr<const CompiledDocument> doc) : doc_(std::move(doc)) {
  state_.root = create_scope(doc_->root_index(), std::nullopt, std::nullopt, "");
}

ProcessInstance::ProcessInstance(std::shared_ptr<const CompiledDocument> doc,
                                 std::string_view model_name)
    : doc_(std::move(doc)) {
  auto idx = doc_->model_index(model_name);
  if (!idx) {
    throw model_error("unknown model '" + std::string(model_name) + "'");
  }
  if (*idx != doc_->root_index()) {
    throw model_error("model '" + std::string(model_name) + "' is not the root model");
  }
  state_.root = create_scope(*idx, std::nullopt, std::nullopt, "");
}

ScopeId ProcessInstance::create_scope(std::size_t model, std::optional<ScopeId> parent,
                                      std::optional<ActivityInstanceId> owner,
                                      std::string owner_activity) {
  ScopeInstance s;
  s.id = state_.next_scope++;
  s.model = model;
  s.parent = parent;
  s.owner = owner;
  s.owner_activity = std::move(owner_activity);
  for (const auto& a : doc_->model(model).automata) {
    s.constraint_states.push_back(a.initial());
  }
  ScopeId id = s.id;
  state_.scopes.emplace(id, std::move(s));
  return id;
}

const ScopeInstance& ProcessInstance::scope(ScopeId id) const {
  auto it = state_.scopes.find(id);
  if (it == state_.scopes.end()) {
    throw rejection(RejectionKind::unknown_scope, "unknown scope " + std::to_string(id));
  }
  return it->second;
}

ScopeInstance& ProcessInstance::scope_mut(ScopeId id) {
  return const_cast<ScopeInstance&>(scope(id));
}

const ScopeInstance& ProcessInstance::running_scope(ScopeId id) const {
  const ScopeInstance& s = scope(id);
  if (s.status != ScopeStatus::running) {
    throw rejection(RejectionKind::scope_not_running,
                    "scope " + std::to_string(id) + " is no longer running");
  }
  return s;
}

std::string ProcessInstance::scope_path(ScopeId id) const {
  std::string path;
  const ScopeInstance* s = &scope(id);
  while (s->parent) {
    path = s->owner_activity + "/" + path;
    s = &scope(*s->parent);
  }
  return path;
}

void ProcessInstance::require_not_terminated() const {
  if (state_.terminated) {
    throw rejection(RejectionKind::instance_terminated, "process instance has been terminated");
  }
}

std::vector<std::string> ProcessInstance::blockers_for(const ScopeInstance& scope,
                                                        std::size_t activity) const {
  std::vector<std::string> out;
  const CompiledModel& m = doc_->model(scope.model);
  for (std::size_t i = 0; i < m.automata.size(); ++i) {
    const auto& a = m.automata[i];
    if (a.dead(a.step(scope.constraint_states[i], activity))) {
      out.push_back(to_string(m.constraints[i]));
    }
  }
  return out;
}

bool ProcessInstance::is_enabled(ScopeId scope_id, std::string_view label) const {
  if (state_.terminated) {
    return false;
  }
  auto it = state_.scopes.find(scope_id);
  if (it == state_.scopes.end() || it->second.status != ScopeStatus::running) {
    return false;
  }
  const ScopeInstance& s = it->second;
  const CompiledModel& m = doc_->model(s.model);
  auto idx = m.activity_index(label);
  if (!idx) {
    return false;
  }
  if (m.activities[*idx].is_complex() && s.child_scopes.count(std::string(label))) {
    return false;
  }
  return blockers_for(s, *idx).empty();
}

std::vector<Enablement> ProcessInstance::enabled_activities() const {
  std::vector<Enablement> out;
  if (state_.terminated) {
    return out;
  }
  for (const auto& [id, s] : state_.scopes) {
    if (s.status != ScopeStatus::running) {
      continue;
    }
    for (const auto& a : doc_->model(s.model).activities) {
      if (is_enabled(id, a.name)) {
        out.push_back(Enablement{id, a.name});
      }
    }
  }
  return out;
}

Event ProcessInstance::record(EventKind kind, ScopeId scope, std::string activity,
                              ActivityInstanceId aid) {
  Event e{state_.log.size() + 1, kind, scope, std::move(activity), aid};
  state_.log.push_back(e);
  return e;
}

Event ProcessInstance::start_activity(ScopeId scope_id, std::string_view label) {
  require_not_terminated();
  const ScopeInstance& s = running_scope(scope_id);
  const CompiledModel& m = doc_->model(s.model);
  auto idx = m.activity_index(label);
  if (!idx) {
    throw rejection(RejectionKind::unknown_activity,
                    "model '" + m.name + "' has no activity '" + std::string(label) + "'");
  }
  const ActivityDecl& decl = m.activities[*idx];
  if (decl.is_complex() && s.child_scopes.count(decl.name)) {
    throw rejection(RejectionKind::complex_already_running,
                    "complex activity '" + decl.name + "' already has a running instance");
  }
  auto blockers = blockers_for(s, *idx);
  if (!blockers.empty()) {
    throw rejection(RejectionKind::not_enabled, "activity '" + decl.name + "' is not enabled",
                    std::move(blockers));
  }

  const ActivityInstanceId aid = state_.next_activity_instance++;
  if (decl.is_complex()) {
    ScopeId child = create_scope(m.sub_model[*idx], scope_id, aid, decl.name);
    scope_mut(scope_id).child_scopes.emplace(decl.name, child);
  }
  scope_mut(scope_id).running_activities.emplace(aid, decl.name);
  return record(EventKind::started, scope_id, decl.name, aid);
}

Event ProcessInstance::complete_activity(ActivityInstanceId aid) {
  require_not_terminated();
  ScopeInstance* owner = nullptr;
  for (auto& [id, s] : state_.scopes) {
    if (s.status == ScopeStatus::running && s.running_activities.count(aid)) {
      owner = &s;
      break;
    }
  }
  if (owner == nullptr) {
    throw rejection(RejectionKind::unknown_activity_instance,
                    "no running activity instance #" + std::to_string(aid));
  }
  const std::string label = owner->running_activities.at(aid);
  const CompiledModel& m = doc_->model(owner->model);
  const std::size_t idx = *m.activity_index(label);

  std::optional<ScopeId> child;
  if (m.activities[idx].is_complex()) {
    child = owner->child_scopes.at(label);
    TerminationCheck check = may_terminate(*child);
    if (!check.allowed) {
      throw rejection(RejectionKind::sub_process_cannot_terminate,
                      "sub-process of '" + label + "' cannot terminate", std::move(check.blockers));
    }
  }
  auto blockers = blockers_for(*owner, idx);
  if (!blockers.empty()) {
    throw rejection(RejectionKind::not_enabled,
                    "completing '" + label + "' would violate a constraint", std::move(blockers));
  }

  for (std::size_t i = 0; i < m.automata.size(); ++i) {
    owner->constraint_states[i] = m.automata[i].step(owner->constraint_states[i], idx);
  }
  owner->local_completions.push_back(label);
  owner->running_activities.erase(aid);
  if (child) {
    owner->child_scopes.erase(label);
    owner->completed_children.push_back(*child);
    scope_mut(*child).status = ScopeStatus::completed;
  }
  return record(EventKind::completed, owner->id, label, aid);
}

TerminationCheck ProcessInstance::may_terminate(ScopeId scope_id) const {
  TerminationCheck out;
  const ScopeInstance& s = scope(scope_id);
  if (s.status != ScopeStatus::running || state_.terminated) {
    out.blockers.push_back("scope is not running");
    return out;
  }
  const CompiledModel& m = doc_->model(s.model);
  for (std::size_t i = 0; i < m.automata.size(); ++i) {
    if (!m.automata[i].accepting(s.constraint_states[i])) {
      out.blockers.push_back(to_string(m.constraints[i]));
    }
  }
  for (const auto& [aid, label] : s.running_activities) {
    out.blockers.push_back("running activity " + format_label(label) + "#" + std::to_string(aid));
  }
  out.allowed = out.blockers.empty();
  return out;
}

Event ProcessInstance::terminate() {
  require_not_terminated();
  TerminationCheck check = may_terminate(state_.root);
  if (!check.allowed) {
    throw rejection(RejectionKind::termination_not_allowed, "termination is not allowed",
                    std::move(check.blockers));
  }
  state_.terminated = true;
  scope_mut(state_.root).status = ScopeStatus::completed;
  return record(EventKind::terminated, state_.root, "", 0);
}

Event ProcessInstance::apply(const Command& cmd) {
  switch (cmd.kind) {
    case EventKind::started: return start_activity(cmd.scope, cmd.activity);
    case EventKind::completed: return complete_activity(cmd.activity_instance);
    case EventKind::terminated: return terminate();
  }
  throw std::logic_error("unhandled command kind");
}

std::vector<ConstraintExplanation> ProcessInstance::explain(ScopeId scope_id,
                                                            std::string_view label) const {
  const ScopeInstance& s = scope(scope_id);
  const CompiledModel& m = doc_->model(s.model);
  auto idx = m.activity_index(label);
  if (!idx) {
    throw rejection(RejectionKind::unknown_activity,
                    "model '" + m.name + "' has no activity '" + std::string(label) + "'");
  }
  std::vector<ConstraintExplanation> out;
  for (std::size_t i = 0; i < m.automata.size(); ++i) {
    const auto& a = m.automata[i];
    const StateId now = s.constraint_states[i];
    out.push_back(ConstraintExplanation{m.constraints[i], status_of(a, now),
                                        a.dead(a.step(now, *idx))});
  }
  return out;
}

ScopeId ProcessInstance::resolve_scope(std::string_view label) const {
  std::vector<ScopeId> hits;
  for (const auto& [id, s] : state_.scopes) {
    if (s.status == ScopeStatus::running && doc_->model(s.model).activity_index(label)) {
      hits.push_back(id);
    }
  }
  if (hits.size() == 1) {
    return hits.front();
  }
  if (hits.size() > 1) {
    throw rejection(RejectionKind::ambiguous_scope,
                    "activity '" + std::string(label) + "' is declared by several running scopes");
  }
  if (doc_->document().owner_of(label) == nullptr) {
    throw rejection(RejectionKind::unknown_activity,
                    "unknown activity '" + std::string(label) + "'");
  }
  throw rejection(RejectionKind::scope_not_running,
                  "no running scope contains activity '" + std::string(label) + "'");
}

ProcessInstance replay_log(std::shared_ptr<const CompiledDocument> doc, const std::vector<Event>& log) {
  ProcessInstance instance(std::move(doc));
  for (const auto& e : log) {
    Event produced = instance.apply(Command{e.kind, e.scope, e.activity, e.activity_instance});
    if (!(produced == e)) {
      throw replay_error("event log diverged at seq " + std::to_string(e.seq));
    }
  }
  return instance;
}

Trace merged_trace(const std::vector<std::string>& labels, bool terminate) {
  Trace t;
  std::size_t step = 0;
  for (const auto& label : labels) {
    const std::string tag = "m" + std::to_string(step);
    t.events.push_back(TraceEvent{TraceEventKind::started, label, tag, std::nullopt, false, step});
    t.events.push_back(TraceEvent{TraceEventKind::completed, label, tag, std::nullopt, false, step});
    ++step;
  }
  if (terminate) {
    t.events.push_back(TraceEvent{TraceEventKind::terminate, "", "", std::nullopt, false, step});
  }
  return t;
}

void apply_trace_step(ProcessInstance& instance, std::span<const TraceEvent> step,
                      std::map<std::string, ActivityInstanceId>& tags) {
  for (const auto& ev : step) {
    switch (ev.kind) {
      case TraceEventKind::started: {
        ScopeId scope_id = 0;
        if (ev.parent_tag) {
          auto it = tags.find(*ev.parent_tag);
          if (it == tags.end()) {
            throw replay_error("unknown enclosing activity tag #" + *ev.parent_tag);
          }
          std::optional<ScopeId> found;
          for (const auto& [id, s] : instance.state().scopes) {
            if (s.status == ScopeStatus::running && s.owner == it->second) {
              found = id;
            }
          }
          if (!found) {
            throw rejection(RejectionKind::scope_not_running,
                            "activity instance #" + *ev.parent_tag + " has no running sub-process");
          }
          scope_id = *found;
        } else {
          scope_id = instance.resolve_scope(ev.label);
        }
        Event e = instance.start_activity(scope_id, ev.label);
        tags[ev.tag] = e.activity_instance;
        break;
      }
      case TraceEventKind::completed: {
        auto it = tags.find(ev.tag);
        if (it == tags.end()) {
          throw replay_error("completion of unknown activity tag #" + ev.tag);
        }
        if (!ev.label.empty()) {
          bool matches = false;
          for (const auto& [id, s] : instance.state().scopes) {
            auto r = s.running_activities.find(it->second);
            if (r != s.running_activities.end()) {
              matches = r->second == ev.label;
            }
          }
          if (!matches) {
            throw replay_error("tag #" + ev.tag + " does not name a running '" + ev.label + "'");
          }
        }
        instance.complete_activity(it->second);
        break;
      }
      case TraceEventKind::terminate:
        instance.terminate();
        break;
    }
  }
}

namespace {

// Events grouped by source step, in order.
std::vector<std::span<const TraceEvent>> steps_of(const Trace& trace) {
  std::vector<std::span<const TraceEvent>> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= trace.events.size(); ++i) {
    if (i == trace.events.size() || trace.events[i].step != trace.events[begin].step) {
      out.emplace_back(trace.events.data() + begin, i - begin);
      begin = i;
    }
  }
  return out;
}

std::string describe(const TraceEvent& ev) {
  switch (ev.kind) {
    case TraceEventKind::started: return "started " + format_label(ev.label);
    case TraceEventKind::completed:
      return "completed " + (ev.label.empty() ? "#" + ev.tag : format_label(ev.label));
    case TraceEventKind::terminate: return "terminate";
  }
  return "";
}

}  // namespace

ReplayVerdict replay(std::shared_ptr<const CompiledDocument> doc, const Trace& trace) {
  ProcessInstance instance(std::move(doc));
  std::map<std::string, ActivityInstanceId> tags;
  ReplayVerdict verdict;
  for (auto step : steps_of(trace)) {
    ProcessInstance saved = instance;
    auto saved_tags = tags;
    const bool expect_rejection = step.front().expect_rejection;
    try {
      apply_trace_step(instance, step, tags);
    } catch (const rejection& r) {
      if (expect_rejection) {
        instance = std::move(saved);
        tags = std::move(saved_tags);
        continue;
      }
      verdict.failure_index = step.front().step;
      verdict.reason = r.what();
      verdict.blockers = r.blockers();
      return verdict;
    }
    if (expect_rejection) {
      verdict.failure_index = step.front().step;
      verdict.reason = "step " + describe(step.front()) + " was expected to be rejected";
      return verdict;
    }
  }
  if (!instance.terminated()) {
    verdict.failure_index = trace.step_count();
    verdict.reason = "trace ends without termination";
    verdict.blockers = instance.may_terminate(instance.state().root).blockers;
    return verdict;
  }
  verdict.outcome = ReplayOutcome::accepted;
  return verdict;
}

namespace {

std::string status_line(const ProcessInstance& instance) {
  std::ostringstream out;
  out << "enabled {";
  bool first = true;
  for (const auto& e : instance.enabled_activities()) {
    out << (first ? "" : ", ") << instance.scope_path(e.scope) << format_label(e.label);
    first = false;
  }
  out << "} | terminate ";
  if (instance.terminated()) {
    out << "done";
  } else {
    TerminationCheck check = instance.may_terminate(instance.state().root);
    if (check.allowed) {
      out << "allowed";
    } else {
      out << "blocked [";
      for (std::size_t i = 0; i < check.blockers.size(); ++i) {
        out << (i ? "; " : "") << check.blockers[i];
      }
      out << "]";
    }
  }
  return out.str();
}

}  // namespace

std::string render_timeline(std::shared_ptr<const CompiledDocument> doc, const Trace& trace) {
  ProcessInstance instance(std::move(doc));
  std::map<std::string, ActivityInstanceId> tags;
  std::ostringstream out;
  out << "instantiated | " << status_line(instance) << "\n";
  for (auto step : steps_of(trace)) {
    ProcessInstance saved = instance;
    auto saved_tags = tags;
    const bool expect_rejection = step.front().expect_rejection;
    std::size_t logged = instance.log().size();
    try {
      for (std::size_t i = 0; i < step.size(); ++i) {
        apply_trace_step(instance, step.subspan(i, 1), tags);
        for (; logged < instance.log().size(); ++logged) {
          const Event& e = instance.log()[logged];
          out << "e" << e.seq << " " << event_kind_name(e.kind);
          if (e.kind != EventKind::terminated) {
            out << " " << instance.scope_path(e.scope) << format_label(e.activity) << "#"
                << e.activity_instance;
          }
          out << " | " << status_line(instance) << "\n";
        }
      }
    } catch (const rejection& r) {
      out << "rejected " << describe(step.front()) << ": " << r.what();
      for (const auto& b : r.blockers()) {
        out << " [" << b << "]";
      }
      out << (expect_rejection ? " (expected)" : "") << "\n";
      if (!expect_rejection) {
        return out.str();
      }
      instance = std::move(saved);
      tags = std::move(saved_tags);
    }
  }
  return out.str();
}

}  // namespace declhier
