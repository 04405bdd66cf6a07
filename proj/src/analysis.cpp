#include "declhier/analysis.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace declhier {

namespace {

// Abstract scope used by the enumerator. Only complex activities can be
// running because atomic executions are merged moves.
struct ScopeConfig {
  std::uint32_t model = 0;
  std::vector<StateId> states;
  // Sorted by activity index; children[i] belongs to child_activity[i].
  std::vector<std::uint32_t> child_activity;
  std::vector<ScopeConfig> children;
};

void append_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void encode(const ScopeConfig& c, std::string& out) {
  append_u32(out, c.model);
  append_u32(out, static_cast<std::uint32_t>(c.states.size()));
  for (StateId s : c.states) append_u32(out, s);
  append_u32(out, static_cast<std::uint32_t>(c.children.size()));
  for (std::size_t i = 0; i < c.children.size(); ++i) {
    append_u32(out, c.child_activity[i]);
    encode(c.children[i], out);
  }
}

struct Move {
  ScopeConfig next;
  std::optional<std::uint32_t> leaf;
  bool activation = false;
};

class ConfigSpace {
 public:
  explicit ConfigSpace(const CompiledDocument& doc) : doc_(doc) {
    leaves_ = leaf_alphabet(doc.document());
    for (std::size_t m = 0; m < doc.model_count(); ++m) {
      std::vector<std::uint32_t> ids;
      for (const auto& a : doc.model(m).activities) {
        auto it = std::lower_bound(leaves_.begin(), leaves_.end(), a.name);
        ids.push_back(it != leaves_.end() && *it == a.name
                          ? static_cast<std::uint32_t>(it - leaves_.begin())
                          : 0);
      }
      leaf_ids_.push_back(std::move(ids));
    }
  }

  const std::vector<std::string>& leaves() const { return leaves_; }

  ScopeConfig initial(std::size_t model) const {
    ScopeConfig c;
    c.model = static_cast<std::uint32_t>(model);
    for (const auto& a : doc_.model(model).automata) c.states.push_back(a.initial());
    return c;
  }

  bool may_terminate(const ScopeConfig& c) const {
    if (!c.children.empty()) return false;
    const auto& automata = doc_.model(c.model).automata;
    for (std::size_t i = 0; i < automata.size(); ++i) {
      if (!automata[i].accepting(c.states[i])) return false;
    }
    return true;
  }

  std::vector<Move> successors(const ScopeConfig& c) const {
    std::vector<Move> out;
    const CompiledModel& m = doc_.model(c.model);
    for (std::uint32_t a = 0; a < m.activities.size(); ++a) {
      auto running = std::lower_bound(c.child_activity.begin(), c.child_activity.end(), a);
      const bool is_running = running != c.child_activity.end() && *running == a;
      const auto pos = static_cast<std::size_t>(running - c.child_activity.begin());
      if (!m.activities[a].is_complex()) {
        if (auto next = stepped(c, a)) {
          out.push_back(Move{std::move(*next), leaf_ids_[c.model][a], false});
        }
      } else if (!is_running) {
        if (!stepped(c, a)) continue;
        ScopeConfig next = c;
        next.child_activity.insert(next.child_activity.begin() + pos, a);
        next.children.insert(next.children.begin() + pos, initial(m.sub_model[a]));
        out.push_back(Move{std::move(next), std::nullopt, true});
      } else if (may_terminate(c.children[pos])) {
        if (auto next = stepped(c, a)) {
          next->child_activity.erase(next->child_activity.begin() + pos);
          next->children.erase(next->children.begin() + pos);
          out.push_back(Move{std::move(*next), std::nullopt, false});
        }
      }
    }
    for (std::size_t i = 0; i < c.children.size(); ++i) {
      for (auto& inner : successors(c.children[i])) {
        ScopeConfig next = c;
        next.children[i] = std::move(inner.next);
        out.push_back(Move{std::move(next), inner.leaf, inner.activation});
      }
    }
    return out;
  }

 private:
  // Scope after completing activity `a`, or nullopt if that violates a
  // local constraint for good.
  std::optional<ScopeConfig> stepped(const ScopeConfig& c, std::uint32_t a) const {
    const auto& automata = doc_.model(c.model).automata;
    ScopeConfig next = c;
    for (std::size_t i = 0; i < automata.size(); ++i) {
      next.states[i] = automata[i].step(c.states[i], a);
      if (automata[i].dead(next.states[i])) return std::nullopt;
    }
    return next;
  }

  const CompiledDocument& doc_;
  std::vector<std::string> leaves_;
  std::vector<std::vector<std::uint32_t>> leaf_ids_;
};

struct SearchNode {
  ScopeConfig config;
  std::vector<std::uint32_t> trace;
  std::uint32_t activations = 0;
};

std::string node_key(const SearchNode& n) {
  std::string key;
  encode(n.config, key);
  append_u32(key, n.activations);
  for (auto t : n.trace) append_u32(key, t);
  return key;
}

}  // namespace

BoundedLanguage enumerate_language(const Document& model, const EnumerationLimits& limits) {
  auto doc = CompiledDocument::compile(model);
  ConfigSpace space(*doc);
  BoundedLanguage out;
  out.max_leaf_len = limits.max_leaf_len;
  out.max_activations = limits.max_activations;

  std::deque<SearchNode> frontier;
  std::unordered_set<std::string> visited;
  SearchNode start{space.initial(doc->root_index()), {}, 0};
  visited.insert(node_key(start));
  frontier.push_back(std::move(start));

  while (!frontier.empty()) {
    SearchNode node;
    if (limits.order == SearchOrder::breadth_first) {
      node = std::move(frontier.front());
      frontier.pop_front();
    } else {
      node = std::move(frontier.back());
      frontier.pop_back();
    }
    if (++out.explored_states > limits.max_states) {
      throw bound_exceeded(out.explored_states - 1);
    }
    if (space.may_terminate(node.config)) {
      LeafTrace labels;
      for (auto t : node.trace) labels.push_back(space.leaves()[t]);
      out.traces.insert(std::move(labels));
    }
    for (auto& move : space.successors(node.config)) {
      SearchNode next{std::move(move.next), node.trace, node.activations};
      if (move.leaf) {
        if (next.trace.size() >= limits.max_leaf_len) continue;
        next.trace.push_back(*move.leaf);
      }
      if (move.activation) {
        if (next.activations >= limits.max_activations) continue;
        ++next.activations;
      }
      if (visited.insert(node_key(next)).second) {
        frontier.push_back(std::move(next));
      }
    }
  }
  return out;
}

namespace {

void engine_key(const ProcessInstance& inst, ScopeId id, std::string& out) {
  const ScopeInstance& s = inst.scope(id);
  append_u32(out, static_cast<std::uint32_t>(s.model));
  for (StateId st : s.constraint_states) append_u32(out, st);
  append_u32(out, static_cast<std::uint32_t>(s.running_activities.size()));
  for (const auto& [label, child] : s.child_scopes) {
    out += label;
    out += '\0';
    engine_key(inst, child, out);
  }
}

class ScheduleSearch {
 public:
  ScheduleSearch(const LeafTrace& leaf, std::size_t max_activations)
      : leaf_(leaf), max_activations_(max_activations) {}

  bool run(const ProcessInstance& inst, std::size_t pos, std::size_t activations) {
    std::string key;
    engine_key(inst, inst.state().root, key);
    append_u32(key, static_cast<std::uint32_t>(pos));
    append_u32(key, static_cast<std::uint32_t>(activations));
    if (!failed_.insert(key).second) {
      return false;
    }

    if (pos == leaf_.size() && inst.may_terminate(inst.state().root).allowed) {
      events_.push_back(TraceEvent{TraceEventKind::terminate, "", "", std::nullopt, false,
                                   events_.size()});
      return true;
    }

    std::vector<ScopeId> running;
    for (const auto& [id, s] : inst.state().scopes) {
      if (s.status == ScopeStatus::running) running.push_back(id);
    }

    if (pos < leaf_.size()) {
      for (ScopeId sid : running) {
        if (try_atomic(inst, sid, pos, activations)) return true;
      }
    }
    for (ScopeId sid : running) {
      const ScopeInstance& s = inst.scope(sid);
      const CompiledModel& m = inst.document().model(s.model);
      for (const auto& a : m.activities) {
        if (!a.is_complex()) continue;
        if (s.child_scopes.count(a.name)) {
          if (try_complete_complex(inst, sid, a.name, pos, activations)) return true;
        } else if (activations < max_activations_) {
          if (try_start_complex(inst, sid, a.name, pos, activations)) return true;
        }
      }
    }
    return false;
  }

  Trace trace() const { return Trace{events_}; }

 private:
  std::optional<std::string> parent_tag(const ProcessInstance& inst, ScopeId sid) const {
    const auto& owner = inst.scope(sid).owner;
    if (!owner) return std::nullopt;
    return std::to_string(*owner);
  }

  bool try_atomic(const ProcessInstance& inst, ScopeId sid, std::size_t pos, std::size_t act) {
    const ScopeInstance& s = inst.scope(sid);
    const CompiledModel& m = inst.document().model(s.model);
    auto idx = m.activity_index(leaf_[pos]);
    if (!idx || m.activities[*idx].is_complex() || !inst.is_enabled(sid, leaf_[pos])) {
      return false;
    }
    ProcessInstance next = inst;
    Event started = next.start_activity(sid, leaf_[pos]);
    try {
      next.complete_activity(started.activity_instance);
    } catch (const rejection&) {
      return false;
    }
    const std::string tag = std::to_string(started.activity_instance);
    const std::size_t mark = events_.size();
    events_.push_back(TraceEvent{TraceEventKind::started, leaf_[pos], tag, parent_tag(inst, sid),
                                 false, mark});
    events_.push_back(TraceEvent{TraceEventKind::completed, leaf_[pos], tag, std::nullopt, false,
                                 mark + 1});
    if (run(next, pos + 1, act)) return true;
    events_.resize(mark);
    return false;
  }

  bool try_start_complex(const ProcessInstance& inst, ScopeId sid, const std::string& label,
                         std::size_t pos, std::size_t act) {
    if (!inst.is_enabled(sid, label)) return false;
    ProcessInstance next = inst;
    Event started = next.start_activity(sid, label);
    const std::size_t mark = events_.size();
    events_.push_back(TraceEvent{TraceEventKind::started, label,
                                 std::to_string(started.activity_instance), parent_tag(inst, sid),
                                 false, mark});
    if (run(next, pos, act + 1)) return true;
    events_.resize(mark);
    return false;
  }

  bool try_complete_complex(const ProcessInstance& inst, ScopeId sid, const std::string& label,
                            std::size_t pos, std::size_t act) {
    const ScopeInstance& s = inst.scope(sid);
    ActivityInstanceId aid = 0;
    for (const auto& [id, l] : s.running_activities) {
      if (l == label) aid = id;
    }
    ProcessInstance next = inst;
    try {
      next.complete_activity(aid);
    } catch (const rejection&) {
      return false;
    }
    const std::size_t mark = events_.size();
    events_.push_back(TraceEvent{TraceEventKind::completed, label, std::to_string(aid),
                                 std::nullopt, false, mark});
    if (run(next, pos, act)) return true;
    events_.resize(mark);
    return false;
  }

  const LeafTrace& leaf_;
  std::size_t max_activations_;
  std::vector<TraceEvent> events_;
  std::unordered_set<std::string> failed_;
};

}  // namespace

std::optional<Trace> find_schedule(std::shared_ptr<const CompiledDocument> doc,
                                   const LeafTrace& leaf, std::size_t max_activations) {
  ProcessInstance inst(doc);
  ScheduleSearch search(leaf, max_activations);
  if (!search.run(inst, 0, 0)) {
    return std::nullopt;
  }
  return search.trace();
}

bool accepts_leaf_trace(std::shared_ptr<const CompiledDocument> doc, const LeafTrace& leaf,
                        std::size_t max_activations) {
  auto schedule = find_schedule(doc, leaf, max_activations);
  return schedule && replay(doc, *schedule).accepted();
}

EquivalenceResult bounded_equivalent(const Document& first, const Document& second,
                                     const EnumerationLimits& limits) {
  const BoundedLanguage a = enumerate_language(first, limits);
  const BoundedLanguage b = enumerate_language(second, limits);
  EquivalenceResult out;
  out.first_language_size = a.traces.size();
  out.second_language_size = b.traces.size();

  auto ia = a.traces.begin();
  auto ib = b.traces.begin();
  const ShortLex less;
  while (ia != a.traces.end() || ib != b.traces.end()) {
    if (ib == b.traces.end() || (ia != a.traces.end() && less(*ia, *ib))) {
      out.counterexample = *ia;
      out.accepted_by_first = true;
      break;
    }
    if (ia == a.traces.end() || less(*ib, *ia)) {
      out.counterexample = *ib;
      out.accepted_by_first = false;
      break;
    }
    ++ia;
    ++ib;
  }
  if (!out.counterexample) {
    return out;
  }
  out.equivalent_up_to_k = false;

  const bool by_first =
      accepts_leaf_trace(CompiledDocument::compile(first), *out.counterexample, limits.max_activations);
  const bool by_second =
      accepts_leaf_trace(CompiledDocument::compile(second), *out.counterexample, limits.max_activations);
  if (by_first != out.accepted_by_first || by_second == out.accepted_by_first) {
    throw std::logic_error("counterexample is not confirmed by replay");
  }
  return out;
}

ConstraintInstance AggregatedConstraint::aggregate(const std::string& complex_label) const {
  ConstraintInstance c;
  c.tmpl = tmpl;
  c.operands = members_first ? std::vector<std::string>{complex_label, outside}
                             : std::vector<std::string>{outside, complex_label};
  return c;
}

ExtractionReport check_extraction(const Document& doc, const std::vector<std::string>& members) {
  ExtractionReport report;
  if (members.empty()) {
    report.feasible = false;
    throw extraction_error("member set is empty", report);
  }
  const ProcessModel* model = doc.owner_of(members.front());
  if (model == nullptr) {
    report.feasible = false;
    throw extraction_error("unknown member '" + members.front() + "'", report);
  }
  report.model = model->name;
  std::set<std::string> member_set;
  for (const auto& m : members) {
    if (model->find_activity(m) == nullptr) {
      report.feasible = false;
      throw extraction_error(doc.owner_of(m) ? "member '" + m + "' belongs to another model"
                                             : "unknown member '" + m + "'",
                             report);
    }
    member_set.insert(m);
  }

  struct Group {
    AggregatedConstraint agg;
    std::set<std::string> covered;
  };
  std::vector<Group> groups;
  for (const auto& c : model->constraints) {
    std::size_t inside = 0;
    for (const auto& op : c.operands) inside += member_set.count(op);
    if (inside == 0) continue;
    if (inside == c.operands.size()) {
      report.internal_constraints.push_back(c);
      continue;
    }
    const bool members_first = member_set.count(c.operands[0]) > 0;
    const std::string& member = members_first ? c.operands[0] : c.operands[1];
    const std::string& outside = members_first ? c.operands[1] : c.operands[0];
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.agg.tmpl == c.tmpl && g.agg.outside == outside && g.agg.members_first == members_first;
    });
    if (it == groups.end()) {
      groups.push_back(Group{AggregatedConstraint{c.tmpl, outside, members_first, {}}, {}});
      it = std::prev(groups.end());
    }
    it->agg.sources.push_back(c);
    it->covered.insert(member);
  }
  for (auto& g : groups) {
    if (g.covered == member_set) {
      report.aggregated_constraints.push_back(std::move(g.agg));
    } else {
      for (auto& c : g.agg.sources) report.blocking_constraints.push_back(std::move(c));
    }
  }
  report.feasible = report.blocking_constraints.empty();
  return report;
}

Document extract_subprocess(const Document& doc, const std::vector<std::string>& members,
                            const std::string& name) {
  ExtractionReport report = check_extraction(doc, members);
  if (!report.feasible) {
    throw extraction_error("extraction is infeasible: " +
                               std::to_string(report.blocking_constraints.size()) +
                               " boundary constraint(s) are not shared by every member",
                           report);
  }
  if (doc.owner_of(name) != nullptr) {
    throw extraction_error("activity '" + name + "' already exists", report);
  }
  if (doc.find(name) != nullptr) {
    throw extraction_error("model '" + name + "' already exists", report);
  }

  Document out = doc;
  auto parent_it = std::find_if(out.models.begin(), out.models.end(),
                                [&](const ProcessModel& m) { return m.name == report.model; });
  ProcessModel& parent = *parent_it;
  const std::set<std::string> member_set(members.begin(), members.end());

  ProcessModel sub;
  sub.name = name;
  sub.constraints = report.internal_constraints;
  std::vector<ActivityDecl> kept;
  bool placed = false;
  for (auto& a : parent.activities) {
    if (member_set.count(a.name)) {
      sub.activities.push_back(a);
      if (!placed) {
        kept.push_back(ActivityDecl{name, ActivityKind::complex, name});
        placed = true;
      }
    } else {
      kept.push_back(a);
    }
  }
  parent.activities = std::move(kept);

  std::vector<ConstraintInstance> constraints;
  for (const auto& c : parent.constraints) {
    const bool touches = std::any_of(c.operands.begin(), c.operands.end(),
                                     [&](const std::string& op) { return member_set.count(op) > 0; });
    if (!touches) constraints.push_back(c);
  }
  for (const auto& agg : report.aggregated_constraints) {
    constraints.push_back(agg.aggregate(name));
  }
  parent.constraints = std::move(constraints);

  out.models.insert(std::next(parent_it), std::move(sub));
  return out;
}

Document inline_rewrite(const Document& doc, const std::string& complex_label,
                        std::vector<std::string>* warnings) {
  const ProcessModel* owner = doc.owner_of(complex_label);
  if (owner == nullptr) {
    throw inline_error("unknown activity '" + complex_label + "'");
  }
  const ActivityDecl* decl = owner->find_activity(complex_label);
  if (!decl->is_complex()) {
    throw inline_error("activity '" + complex_label + "' is not complex");
  }
  const ProcessModel* sub = doc.find(decl->sub_model);
  if (sub == nullptr) {
    throw inline_error("sub-model '" + decl->sub_model + "' does not exist");
  }
  for (const auto& a : sub->activities) {
    if (a.is_complex()) {
      throw inline_error("sub-model '" + sub->name + "' contains complex activity '" + a.name +
                         "'; inline it first");
    }
  }
  std::size_t references = 0;
  for (const auto& m : doc.models) {
    for (const auto& a : m.activities) {
      references += a.is_complex() && a.sub_model == sub->name;
    }
  }
  if (references > 1) {
    throw inline_error("sub-model '" + sub->name + "' is shared by several complex activities");
  }

  Document out;
  for (const auto& m : doc.models) {
    if (&m == sub) continue;
    if (&m != owner) {
      out.models.push_back(m);
      continue;
    }
    ProcessModel flat = m;
    flat.activities.clear();
    for (const auto& a : m.activities) {
      if (a.name == complex_label) {
        flat.activities.insert(flat.activities.end(), sub->activities.begin(), sub->activities.end());
      } else {
        flat.activities.push_back(a);
      }
    }
    flat.constraints.clear();
    for (const auto& c : m.constraints) {
      const auto hits = std::count(c.operands.begin(), c.operands.end(), complex_label);
      if (hits == 0) {
        flat.constraints.push_back(c);
      } else if (c.operands.size() == 1 || static_cast<std::size_t>(hits) == c.operands.size()) {
        if (warnings) warnings->push_back("dropped " + to_string(c) + ": no per-member equivalent");
      } else {
        for (const auto& member : sub->activities) {
          ConstraintInstance copy = c;
          std::replace(copy.operands.begin(), copy.operands.end(), complex_label, member.name);
          flat.constraints.push_back(std::move(copy));
        }
      }
    }
    flat.constraints.insert(flat.constraints.end(), sub->constraints.begin(), sub->constraints.end());
    out.models.push_back(std::move(flat));
  }
  return out;
}

InlineResult inline_subprocess(const Document& doc, const std::string& complex_label,
                               const EnumerationLimits& limits) {
  InlineResult out;
  out.flat = inline_rewrite(doc, complex_label, &out.warnings);
  out.verification = bounded_equivalent(doc, out.flat, limits);
  return out;
}

}  // namespace declhier
