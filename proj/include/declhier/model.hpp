#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace declhier {

enum class ActivityKind { atomic, complex };

struct ActivityDecl {
  std::string name;
  ActivityKind kind = ActivityKind::atomic;
  // Name of the referenced model; empty for atomic activities.
  std::string sub_model;

  bool is_complex() const { return kind == ActivityKind::complex; }
  friend bool operator==(const ActivityDecl&, const ActivityDecl&) = default;
};

enum class Template : std::uint8_t {
  existence,
  absence,
  exactly,
  init,
  responded_existence,
  response,
  precedence,
  succession,
  chain_response,
  chain_precedence,
  neg_response,
};

inline constexpr std::size_t template_count = 11;

std::string_view template_name(Template t);
std::optional<Template> template_from_name(std::string_view name);
const std::vector<Template>& all_templates();

// Unary templates take one operand; existence/absence/exactly additionally
// carry a cardinality.
bool is_unary(Template t);
bool has_cardinality(Template t);
inline std::size_t template_arity(Template t) { return is_unary(t) ? 1 : 2; }

struct ConstraintInstance {
  Template tmpl = Template::existence;
  std::uint32_t cardinality = 0;
  std::vector<std::string> operands;

  friend bool operator==(const ConstraintInstance&, const ConstraintInstance&) = default;
  friend auto operator<=>(const ConstraintInstance&, const ConstraintInstance&) = default;
};

// Bare identifiers print as-is; anything else (spaces, keywords, punctuation)
// is double-quoted with embedded quotes and backslashes escaped.
std::string format_label(std::string_view label);

// Renders the constraint in DSL syntax, e.g. `existence(1, A)` or
// `neg_response("Get acceptance", "Work on revision")`.
std::string to_string(const ConstraintInstance& c);

struct ProcessModel {
  std::string name;
  std::vector<ActivityDecl> activities;
  std::vector<ConstraintInstance> constraints;
  bool root = false;

  const ActivityDecl* find_activity(std::string_view label) const;
  std::optional<std::size_t> activity_index(std::string_view label) const;
  friend bool operator==(const ProcessModel&, const ProcessModel&) = default;
};

struct Document {
  std::vector<ProcessModel> models;

  const ProcessModel* find(std::string_view model_name) const;
  ProcessModel* find(std::string_view model_name);
  // First model flagged root, or nullptr.
  const ProcessModel* root() const;
  // Model that declares `label`, or nullptr.
  const ProcessModel* owner_of(std::string_view label) const;

  friend bool operator==(const Document&, const Document&) = default;
};

// Order-insensitive comparison: same models (by name), root flags, activity
// sets and constraint multisets.
bool structurally_equal(const Document& a, const Document& b);

enum class ViolationKind {
  cyclic_hierarchy,
  dangling_reference,
  duplicate_model,
  duplicate_activity,
  arity_mismatch,
  non_local_operand,
  missing_root,
  multiple_roots,
  malformed_activity,
};

std::string_view violation_kind_name(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::string model;
  // Index of the offending activity or constraint inside `model`, when the
  // violation is attached to one.
  std::optional<std::size_t> activity;
  std::optional<std::size_t> constraint;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct WellFormednessReport {
  std::vector<Violation> violations;

  bool well_formed() const { return violations.empty(); }
  bool has(ViolationKind k) const;
  friend bool operator==(const WellFormednessReport&, const WellFormednessReport&) = default;
};

WellFormednessReport validate_model(const Document& doc);

// Labels of the model's own activities, in declaration order. Descendant
// activities are not included.
std::vector<std::string> alphabet(const ProcessModel& model);

// Atomic activity labels reachable from the root through the hierarchy.
std::vector<std::string> leaf_alphabet(const Document& doc);

}  // namespace declhier
