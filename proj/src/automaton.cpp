#include "declhier/automaton.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <tuple>

namespace declhier {

namespace {

// Template monitor state before minimisation. `bad` is the absorbing
// violation sink; the meaning of `a` and `b` depends on the template.
struct MonitorState {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  bool bad = false;

  friend auto operator<=>(const MonitorState&, const MonitorState&) = default;
};

class Monitor {
 public:
  Monitor(const ConstraintInstance& c, const std::vector<std::string>& alphabet)
      : tmpl_(c.tmpl), n_(c.cardinality) {
    auto index_of = [&](const std::string& op) {
      auto it = std::find(alphabet.begin(), alphabet.end(), op);
      if (it == alphabet.end()) {
        throw compile_error("operand '" + op + "' of " + to_string(c) + " is not in the alphabet");
      }
      return static_cast<std::size_t>(it - alphabet.begin());
    };
    if (c.operands.size() != template_arity(c.tmpl)) {
      throw compile_error("wrong operand count for " + to_string(c));
    }
    first_ = index_of(c.operands[0]);
    second_ = c.operands.size() > 1 ? index_of(c.operands[1]) : first_;
  }

  MonitorState step(MonitorState s, std::size_t x) const {
    if (s.bad) {
      return s;
    }
    const bool is_a = x == first_;
    const bool is_b = x == second_;
    switch (tmpl_) {
      case Template::existence:
        if (is_a) s.a = std::min(s.a + 1, n_);
        break;
      case Template::absence:
      case Template::exactly:
        if (is_a) s.a = std::min(s.a + 1, n_ + 1);
        break;
      case Template::init:
        // a: 0 = nothing seen yet, 1 = started with the operand.
        if (s.a == 0) {
          if (is_a) s.a = 1;
          else s.bad = true;
        }
        break;
      case Template::responded_existence:
        if (is_a) s.a = 1;
        if (is_b) s.b = 1;
        break;
      case Template::response:
        // a: an activation is waiting for a later target.
        if (is_b) s.a = 0;
        if (is_a) s.a = 1;
        break;
      case Template::precedence:
        if (is_b && s.a == 0) s.bad = true;
        if (is_a) s.a = 1;
        break;
      case Template::succession:
        // a: response obligation open, b: precedence source seen.
        if (is_b && s.b == 0) s.bad = true;
        if (is_b) s.a = 0;
        if (is_a) {
          s.a = 1;
          s.b = 1;
        }
        break;
      case Template::chain_response:
        // a: the previous event was an activation.
        if (s.a == 1 && !is_b) s.bad = true;
        s.a = is_a ? 1 : 0;
        break;
      case Template::chain_precedence:
        if (is_b && s.a == 0) s.bad = true;
        s.a = is_a ? 1 : 0;
        break;
      case Template::neg_response:
        if (is_b && s.a == 1) s.bad = true;
        if (is_a) s.a = 1;
        break;
    }
    return s;
  }

  bool accepting(MonitorState s) const {
    if (s.bad) {
      return false;
    }
    switch (tmpl_) {
      case Template::existence: return s.a >= n_;
      case Template::absence: return s.a <= n_;
      case Template::exactly: return s.a == n_;
      case Template::init: return true;
      case Template::responded_existence: return s.a == 0 || s.b == 1;
      case Template::response: return s.a == 0;
      case Template::precedence: return true;
      case Template::succession: return s.a == 0;
      case Template::chain_response: return s.a == 0;
      case Template::chain_precedence: return true;
      case Template::neg_response: return true;
    }
    return false;
  }

 private:
  Template tmpl_;
  std::uint32_t n_;
  std::size_t first_ = 0;
  std::size_t second_ = 0;
};

// Moore partition refinement followed by breadth-first renumbering from the
// initial state.
ConstraintAutomaton minimise(std::vector<std::string> alphabet, const std::vector<StateId>& delta,
                             const std::vector<bool>& accepting) {
  const std::size_t k = alphabet.size();
  const std::size_t n = accepting.size();
  std::vector<std::uint32_t> block(n);
  for (std::size_t s = 0; s < n; ++s) {
    block[s] = accepting[s] ? 1 : 0;
  }
  std::size_t block_count = 0;
  for (;;) {
    std::map<std::vector<std::uint32_t>, std::uint32_t> signatures;
    std::vector<std::uint32_t> next(n);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<std::uint32_t> sig;
      sig.reserve(k + 1);
      sig.push_back(block[s]);
      for (std::size_t x = 0; x < k; ++x) {
        sig.push_back(block[delta[s * k + x]]);
      }
      auto [it, fresh] = signatures.emplace(std::move(sig), signatures.size());
      next[s] = it->second;
    }
    block.swap(next);
    if (signatures.size() == block_count) {
      break;
    }
    block_count = signatures.size();
  }

  std::vector<std::int64_t> renumber(block_count, -1);
  std::vector<std::size_t> representative;
  std::deque<std::size_t> queue{0};
  renumber[block[0]] = 0;
  representative.push_back(0);
  while (!queue.empty()) {
    std::size_t s = queue.front();
    queue.pop_front();
    for (std::size_t x = 0; x < k; ++x) {
      std::size_t t = delta[s * k + x];
      if (renumber[block[t]] < 0) {
        renumber[block[t]] = static_cast<std::int64_t>(representative.size());
        representative.push_back(t);
        queue.push_back(t);
      }
    }
  }

  std::vector<StateId> min_delta(representative.size() * k);
  std::vector<bool> min_accepting(representative.size());
  for (std::size_t q = 0; q < representative.size(); ++q) {
    std::size_t s = representative[q];
    min_accepting[q] = accepting[s];
    for (std::size_t x = 0; x < k; ++x) {
      min_delta[q * k + x] = static_cast<StateId>(renumber[block[delta[s * k + x]]]);
    }
  }
  return ConstraintAutomaton(std::move(alphabet), std::move(min_delta), std::move(min_accepting));
}

}  // namespace

ConstraintAutomaton::ConstraintAutomaton(std::vector<std::string> alphabet,
                                         std::vector<StateId> delta, std::vector<bool> accepting)
    : alphabet_(std::move(alphabet)), delta_(std::move(delta)), accepting_(std::move(accepting)) {
  const std::size_t k = alphabet_.size();
  const std::size_t n = accepting_.size();
  if (n == 0 || delta_.size() != n * k) {
    throw compile_error("transition table does not match state and alphabet sizes");
  }
  // Backward reachability from accepting states; whatever is not reached is dead.
  std::vector<std::vector<StateId>> preds(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t x = 0; x < k; ++x) {
      preds[delta_[s * k + x]].push_back(static_cast<StateId>(s));
    }
  }
  std::vector<bool> live(accepting_);
  std::deque<StateId> work;
  for (std::size_t s = 0; s < n; ++s) {
    if (live[s]) work.push_back(static_cast<StateId>(s));
  }
  while (!work.empty()) {
    StateId t = work.front();
    work.pop_front();
    for (StateId p : preds[t]) {
      if (!live[p]) {
        live[p] = true;
        work.push_back(p);
      }
    }
  }
  dead_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    dead_[s] = !live[s];
  }
}

std::size_t ConstraintAutomaton::symbol_index(std::string_view label) const {
  auto it = std::find(alphabet_.begin(), alphabet_.end(), label);
  if (it == alphabet_.end()) {
    throw input_error("label '" + std::string(label) + "' is outside the constraint alphabet");
  }
  return static_cast<std::size_t>(it - alphabet_.begin());
}

StateId ConstraintAutomaton::step(StateId s, std::string_view label) const {
  return step(s, symbol_index(label));
}

StateId ConstraintAutomaton::run(std::span<const std::string> trace) const {
  StateId s = initial();
  for (const auto& label : trace) {
    s = step(s, label);
  }
  return s;
}

ConstraintAutomaton compile_constraint(const ConstraintInstance& c,
                                       const std::vector<std::string>& alphabet) {
  if (static_cast<std::size_t>(c.tmpl) >= template_count) {
    throw compile_error("unknown constraint template");
  }
  const Monitor monitor(c, alphabet);
  const std::size_t k = alphabet.size();

  std::map<MonitorState, StateId> ids;
  std::vector<MonitorState> states;
  auto intern = [&](MonitorState s) {
    auto [it, fresh] = ids.emplace(s, static_cast<StateId>(states.size()));
    if (fresh) states.push_back(s);
    return it->second;
  };
  intern(MonitorState{});
  std::vector<StateId> delta;
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t x = 0; x < k; ++x) {
      delta.push_back(intern(monitor.step(states[i], x)));
    }
  }
  std::vector<bool> accepting;
  accepting.reserve(states.size());
  for (const auto& s : states) {
    accepting.push_back(monitor.accepting(s));
  }
  return minimise(alphabet, delta, accepting);
}

std::string_view status_name(ConstraintStatus s) {
  switch (s) {
    case ConstraintStatus::accepting: return "accepting";
    case ConstraintStatus::pending: return "pending";
    case ConstraintStatus::violated: return "violated";
  }
  return "unknown";
}

ConstraintStatus status_of(const ConstraintAutomaton& a, StateId s) {
  if (a.accepting(s)) return ConstraintStatus::accepting;
  if (a.dead(s)) return ConstraintStatus::violated;
  return ConstraintStatus::pending;
}

ConstraintStatus evaluate_trace(const ConstraintAutomaton& a, std::span<const std::string> trace) {
  return status_of(a, a.run(trace));
}

ConstraintStatus evaluate_trace(const ConstraintInstance& c, const std::vector<std::string>& alphabet,
                                std::span<const std::string> trace) {
  return evaluate_trace(compile_constraint(c, alphabet), trace);
}

TemplateClassification classify_template(const ConstraintAutomaton& a) {
  TemplateClassification out;
  for (StateId s = 0; s < a.state_count(); ++s) {
    if (!a.accepting(s) && !a.dead(s)) {
      out.termination_restricting = true;
    }
    if (a.dead(s)) {
      continue;
    }
    for (std::size_t x = 0; x < a.alphabet().size(); ++x) {
      if (a.dead(a.step(s, x))) {
        out.execution_restricting = true;
      }
    }
  }
  return out;
}

}  // namespace declhier
