#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "declhier/automaton.hpp"
#include "declhier/model.hpp"

namespace declhier {

class model_error : public std::runtime_error {
 public:
  model_error(const std::string& what, WellFormednessReport report = {})
      : std::runtime_error(what), report_(std::move(report)) {}
  const WellFormednessReport& report() const { return report_; }

 private:
  WellFormednessReport report_;
};

inline constexpr std::size_t no_model = static_cast<std::size_t>(-1);

struct CompiledModel {
  std::string name;
  std::vector<ActivityDecl> activities;
  std::vector<ConstraintInstance> constraints;
  // One automaton per constraint, all over the model's own alphabet.
  std::vector<ConstraintAutomaton> automata;
  // Index of the referenced model per activity, or no_model for atomic ones.
  std::vector<std::size_t> sub_model;

  std::optional<std::size_t> activity_index(std::string_view label) const;
};

// A validated document with every constraint compiled. Immutable; share it
// through shared_ptr between instances and threads.
class CompiledDocument {
 public:
  static std::shared_ptr<const CompiledDocument> compile(Document doc);

  const Document& document() const { return doc_; }
  std::size_t model_count() const { return models_.size(); }
  const CompiledModel& model(std::size_t i) const { return models_[i]; }
  std::optional<std::size_t> model_index(std::string_view name) const;
  std::size_t root_index() const { return root_; }

 private:
  CompiledDocument() = default;
  Document doc_;
  std::vector<CompiledModel> models_;
  std::size_t root_ = 0;
};

using ScopeId = std::uint64_t;
using ActivityInstanceId = std::uint64_t;

enum class ScopeStatus { running, completed };

struct ScopeInstance {
  ScopeId id = 0;
  std::size_t model = 0;
  ScopeStatus status = ScopeStatus::running;
  std::optional<ScopeId> parent;
  // Activity instance (in the parent scope) whose start created this scope.
  std::optional<ActivityInstanceId> owner;
  std::string owner_activity;
  std::vector<StateId> constraint_states;
  std::map<ActivityInstanceId, std::string> running_activities;
  // Complex activity label -> running child scope.
  std::map<std::string, ScopeId> child_scopes;
  // Finished sub-scopes, kept for audit only.
  std::vector<ScopeId> completed_children;
  std::vector<std::string> local_completions;

  friend bool operator==(const ScopeInstance&, const ScopeInstance&) = default;
};

enum class EventKind { started, completed, terminated };

std::string_view event_kind_name(EventKind k);

struct Event {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::started;
  ScopeId scope = 0;
  std::string activity;
  ActivityInstanceId activity_instance = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

struct InstanceState {
  std::map<ScopeId, ScopeInstance> scopes;
  ScopeId root = 0;
  bool terminated = false;
  std::vector<Event> log;
  ScopeId next_scope = 0;
  ActivityInstanceId next_activity_instance = 1;

  friend bool operator==(const InstanceState&, const InstanceState&) = default;
};

enum class RejectionKind {
  not_enabled,
  complex_already_running,
  scope_not_running,
  unknown_scope,
  unknown_activity,
  ambiguous_scope,
  unknown_activity_instance,
  sub_process_cannot_terminate,
  termination_not_allowed,
  instance_terminated,
};

std::string_view rejection_kind_name(RejectionKind k);

// Raised by every event-producing operation that the model forbids. The
// instance is left untouched when this is thrown.
class rejection : public std::runtime_error {
 public:
  rejection(RejectionKind kind, const std::string& what, std::vector<std::string> blockers = {})
      : std::runtime_error(what), kind_(kind), blockers_(std::move(blockers)) {}
  RejectionKind kind() const { return kind_; }
  const std::vector<std::string>& blockers() const { return blockers_; }

 private:
  RejectionKind kind_;
  std::vector<std::string> blockers_;
};

struct Enablement {
  ScopeId scope = 0;
  std::string label;
  friend bool operator==(const Enablement&, const Enablement&) = default;
};

struct TerminationCheck {
  bool allowed = false;
  std::vector<std::string> blockers;
};

struct ConstraintExplanation {
  ConstraintInstance constraint;
  ConstraintStatus status = ConstraintStatus::pending;
  // Completing the queried label now would violate this constraint for good.
  bool blocking = false;
};

// Commands mirror events; a log of events can be fed back through apply().
struct Command {
  EventKind kind = EventKind::started;
  ScopeId scope = 0;
  std::string activity;
  ActivityInstanceId activity_instance = 0;
};

class ProcessInstance {
 public:
  // Instantiates the document's root model.
  explicit ProcessInstance(std::shared_ptr<const CompiledDocument> doc);
  // Throws model_error unless `model_name` is the root model.
  ProcessInstance(std::shared_ptr<const CompiledDocument> doc, std::string_view model_name);

  std::vector<Enablement> enabled_activities() const;
  bool is_enabled(ScopeId scope, std::string_view label) const;

  Event start_activity(ScopeId scope, std::string_view label);
  Event complete_activity(ActivityInstanceId id);
  TerminationCheck may_terminate(ScopeId scope) const;
  Event terminate();
  Event apply(const Command& cmd);

  std::vector<ConstraintExplanation> explain(ScopeId scope, std::string_view label) const;

  // The single running scope whose model declares `label`.
  ScopeId resolve_scope(std::string_view label) const;

  const InstanceState& state() const { return state_; }
  const std::vector<Event>& log() const { return state_.log; }
  const CompiledDocument& document() const { return *doc_; }
  const std::shared_ptr<const CompiledDocument>& document_ptr() const { return doc_; }
  const ScopeInstance& scope(ScopeId id) const;
  // "" for the root scope, otherwise the complex labels leading to it, each
  // followed by '/'.
  std::string scope_path(ScopeId id) const;
  bool terminated() const { return state_.terminated; }

  friend bool operator==(const ProcessInstance& a, const ProcessInstance& b) {
    return a.doc_ == b.doc_ && a.state_ == b.state_;
  }

 private:
  ScopeInstance& scope_mut(ScopeId id);
  const ScopeInstance& running_scope(ScopeId id) const;
  void require_not_terminated() const;
  // Constraints of `scope` that completing `activity` would drive dead.
  std::vector<std::string> blockers_for(const ScopeInstance& scope, std::size_t activity) const;
  ScopeId create_scope(std::size_t model, std::optional<ScopeId> parent,
                       std::optional<ActivityInstanceId> owner, std::string owner_activity);
  Event record(EventKind kind, ScopeId scope, std::string activity, ActivityInstanceId aid);

  std::shared_ptr<const CompiledDocument> doc_;
  InstanceState state_;
};

// Rebuilds an instance by re-applying a recorded event log.
ProcessInstance replay_log(std::shared_ptr<const CompiledDocument> doc, const std::vector<Event>& log);

enum class TraceEventKind { started, completed, terminate };

// One event of a parsed trace. `tag` is the trace-local name of an activity
// instance; merged steps expand to a started/completed pair sharing a step.
struct TraceEvent {
  TraceEventKind kind = TraceEventKind::started;
  std::string label;
  std::string tag;
  std::optional<std::string> parent_tag;
  bool expect_rejection = false;
  std::size_t step = 0;
  std::size_t line = 0;
  std::size_t column = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
  std::vector<TraceEvent> events;
  std::size_t step_count() const { return events.empty() ? 0 : events.back().step + 1; }
};

// Builds the merged-form trace `labels...` optionally followed by terminate.
Trace merged_trace(const std::vector<std::string>& labels, bool terminate = true);

enum class ReplayOutcome { accepted, rejected };

struct ReplayVerdict {
  ReplayOutcome outcome = ReplayOutcome::rejected;
  // Step index (position in the source trace) of the failing step.
  std::optional<std::size_t> failure_index;
  std::string reason;
  std::vector<std::string> blockers;

  bool accepted() const { return outcome == ReplayOutcome::accepted; }
};

class replay_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Replays a trace against a fresh instance. Steps marked expect_rejection
// must be refused (and are rolled back); acceptance requires a final,
// successful terminate.
ReplayVerdict replay(std::shared_ptr<const CompiledDocument> doc, const Trace& trace);

// Shared by replay and the timeline renderer: executes the events of one
// trace step against `instance`, resolving tags through `tags`. Throws
// rejection; the caller owns rollback.
void apply_trace_step(ProcessInstance& instance, std::span<const TraceEvent> step,
                      std::map<std::string, ActivityInstanceId>& tags);

// Human-readable, byte-stable replay transcript: enablement and termination
// status after instantiation and after every event.
std::string render_timeline(std::shared_ptr<const CompiledDocument> doc, const Trace& trace);

}  // namespace declhier
