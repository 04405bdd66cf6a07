#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "declhier/model.hpp"

namespace declhier {

using StateId = std::uint32_t;

class compile_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic, total acceptor over a model's sibling completion labels.
// States are numbered in breadth-first discovery order from the initial
// state (always 0), so every state is reachable and equal constraints
// compile to identical automata.
class ConstraintAutomaton {
 public:
  ConstraintAutomaton(std::vector<std::string> alphabet, std::vector<StateId> delta,
                      std::vector<bool> accepting);

  StateId initial() const { return 0; }
  std::size_t state_count() const { return accepting_.size(); }
  const std::vector<std::string>& alphabet() const { return alphabet_; }

  // `symbol` indexes alphabet().
  StateId step(StateId s, std::size_t symbol) const { return delta_[s * alphabet_.size() + symbol]; }
  StateId step(StateId s, std::string_view label) const;
  StateId run(std::span<const std::string> trace) const;

  bool accepting(StateId s) const { return accepting_[s]; }
  // No accepting state is reachable from `s`.
  bool dead(StateId s) const { return dead_[s]; }

  std::size_t symbol_index(std::string_view label) const;

 private:
  std::vector<std::string> alphabet_;
  std::vector<StateId> delta_;
  std::vector<bool> accepting_;
  std::vector<bool> dead_;
};

ConstraintAutomaton compile_constraint(const ConstraintInstance& c,
                                       const std::vector<std::string>& alphabet);

enum class ConstraintStatus { accepting, pending, violated };

std::string_view status_name(ConstraintStatus s);
ConstraintStatus status_of(const ConstraintAutomaton& a, StateId s);

ConstraintStatus evaluate_trace(const ConstraintAutomaton& a, std::span<const std::string> trace);
ConstraintStatus evaluate_trace(const ConstraintInstance& c, const std::vector<std::string>& alphabet,
                                std::span<const std::string> trace);

struct TemplateClassification {
  bool execution_restricting = false;
  bool termination_restricting = false;
  friend bool operator==(const TemplateClassification&, const TemplateClassification&) = default;
};

TemplateClassification classify_template(const ConstraintAutomaton& a);

}  // namespace declhier
