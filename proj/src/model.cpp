#include "declhier/model.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace declhier {

namespace {

constexpr std::array<std::string_view, template_count> template_names = {
    "existence",  "absence",        "exactly",          "init",
    "responded_existence", "response", "precedence",    "succession",
    "chain_response", "chain_precedence", "neg_response",
};

// Words that cannot appear unquoted in either the model or trace grammar.
constexpr std::array<std::string_view, 8> reserved_words = {
    "root", "process", "activity", "complex", "constraint", "started", "completed", "in",
};

bool is_identifier(std::string_view s) {
  if (s.empty()) {
    return false;
  }
  auto ident_start = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  };
  if (!ident_start(s.front())) {
    return false;
  }
  return std::all_of(s.begin(), s.end(), [&](char c) {
    return ident_start(c) || (c >= '0' && c <= '9');
  });
}

}  // namespace

std::string_view template_name(Template t) {
  return template_names[static_cast<std::size_t>(t)];
}

std::optional<Template> template_from_name(std::string_view name) {
  for (std::size_t i = 0; i < template_names.size(); ++i) {
    if (template_names[i] == name) {
      return static_cast<Template>(i);
    }
  }
  return std::nullopt;
}

const std::vector<Template>& all_templates() {
  static const std::vector<Template> templates = [] {
    std::vector<Template> v;
    for (std::size_t i = 0; i < template_count; ++i) {
      v.push_back(static_cast<Template>(i));
    }
    return v;
  }();
  return templates;
}

bool is_unary(Template t) {
  switch (t) {
    case Template::existence:
    case Template::absence:
    case Template::exactly:
    case Template::init:
      return true;
    default:
      return false;
  }
}

bool has_cardinality(Template t) {
  return t == Template::existence || t == Template::absence || t == Template::exactly;
}

std::string format_label(std::string_view label) {
  const bool reserved =
      std::find(reserved_words.begin(), reserved_words.end(), label) != reserved_words.end();
  if (is_identifier(label) && !reserved) {
    return std::string(label);
  }
  std::string out = "\"";
  for (char c : label) {
    if (c == '"' || c == '\\') {
      out += '\\';
    }
    out += c;
  }
  out += '"';
  return out;
}

std::string to_string(const ConstraintInstance& c) {
  std::string out(template_name(c.tmpl));
  out += '(';
  bool first = true;
  if (has_cardinality(c.tmpl)) {
    out += std::to_string(c.cardinality);
    first = false;
  }
  for (const auto& op : c.operands) {
    if (!first) {
      out += ", ";
    }
    out += format_label(op);
    first = false;
  }
  out += ')';
  return out;
}

const ActivityDecl* ProcessModel::find_activity(std::string_view label) const {
  for (const auto& a : activities) {
    if (a.name == label) {
      return &a;
    }
  }
  return nullptr;
}

std::optional<std::size_t> ProcessModel::activity_index(std::string_view label) const {
  for (std::size_t i = 0; i < activities.size(); ++i) {
    if (activities[i].name == label) {
      return i;
    }
  }
  return std::nullopt;
}

const ProcessModel* Document::find(std::string_view model_name) const {
  for (const auto& m : models) {
    if (m.name == model_name) {
      return &m;
    }
  }
  return nullptr;
}

ProcessModel* Document::find(std::string_view model_name) {
  for (auto& m : models) {
    if (m.name == model_name) {
      return &m;
    }
  }
  return nullptr;
}

const ProcessModel* Document::root() const {
  for (const auto& m : models) {
    if (m.root) {
      return &m;
    }
  }
  return nullptr;
}

const ProcessModel* Document::owner_of(std::string_view label) const {
  for (const auto& m : models) {
    if (m.find_activity(label) != nullptr) {
      return &m;
    }
  }
  return nullptr;
}

bool structurally_equal(const Document& a, const Document& b) {
  if (a.models.size() != b.models.size()) {
    return false;
  }
  auto activity_key = [](const ActivityDecl& d) {
    return std::tuple(d.name, d.kind, d.sub_model);
  };
  for (const auto& ma : a.models) {
    const ProcessModel* mb = b.find(ma.name);
    if (mb == nullptr || mb->root != ma.root) {
      return false;
    }
    std::multiset<std::tuple<std::string, ActivityKind, std::string>> acts_a, acts_b;
    for (const auto& d : ma.activities) acts_a.insert(activity_key(d));
    for (const auto& d : mb->activities) acts_b.insert(activity_key(d));
    if (acts_a != acts_b) {
      return false;
    }
    std::multiset<ConstraintInstance> cons_a(ma.constraints.begin(), ma.constraints.end());
    std::multiset<ConstraintInstance> cons_b(mb->constraints.begin(), mb->constraints.end());
    if (cons_a != cons_b) {
      return false;
    }
  }
  return true;
}

std::string_view violation_kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::cyclic_hierarchy: return "cyclic hierarchy";
    case ViolationKind::dangling_reference: return "dangling sub-model reference";
    case ViolationKind::duplicate_model: return "duplicate model name";
    case ViolationKind::duplicate_activity: return "duplicate activity name";
    case ViolationKind::arity_mismatch: return "arity mismatch";
    case ViolationKind::non_local_operand: return "non-local operand";
    case ViolationKind::missing_root: return "missing root";
    case ViolationKind::multiple_roots: return "multiple roots";
    case ViolationKind::malformed_activity: return "malformed activity";
  }
  return "unknown";
}

bool WellFormednessReport::has(ViolationKind k) const {
  return std::any_of(violations.begin(), violations.end(),
                     [k](const Violation& v) { return v.kind == k; });
}

WellFormednessReport validate_model(const Document& doc) {
  WellFormednessReport report;
  auto add = [&](ViolationKind kind, const ProcessModel& m, std::optional<std::size_t> act,
                 std::optional<std::size_t> con, std::string msg) {
    report.violations.push_back(Violation{kind, m.name, act, con, std::move(msg)});
  };

  std::size_t roots = 0;
  std::unordered_set<std::string> model_names;
  std::unordered_map<std::string, std::string> label_owner;
  for (const auto& m : doc.models) {
    if (m.root) {
      ++roots;
      if (roots == 2) {
        add(ViolationKind::multiple_roots, m, std::nullopt, std::nullopt,
            "model '" + m.name + "' is a second root");
      }
    }
    if (!model_names.insert(m.name).second) {
      add(ViolationKind::duplicate_model, m, std::nullopt, std::nullopt,
          "model '" + m.name + "' is defined more than once");
    }
    for (std::size_t i = 0; i < m.activities.size(); ++i) {
      const auto& a = m.activities[i];
      auto [it, fresh] = label_owner.emplace(a.name, m.name);
      if (!fresh) {
        add(ViolationKind::duplicate_activity, m, i, std::nullopt,
            "activity '" + a.name + "' already declared in model '" + it->second + "'");
      }
      if (a.is_complex() == a.sub_model.empty()) {
        add(ViolationKind::malformed_activity, m, i, std::nullopt,
            a.is_complex() ? "complex activity '" + a.name + "' has no sub-model"
                           : "atomic activity '" + a.name + "' references a sub-model");
      }
    }
  }
  if (roots == 0 && !doc.models.empty()) {
    add(ViolationKind::missing_root, doc.models.front(), std::nullopt, std::nullopt,
        "document has no root model");
  } else if (doc.models.empty()) {
    report.violations.push_back(
        Violation{ViolationKind::missing_root, "", std::nullopt, std::nullopt,
                  "document has no models"});
  }

  for (const auto& m : doc.models) {
    for (std::size_t i = 0; i < m.activities.size(); ++i) {
      const auto& a = m.activities[i];
      if (a.is_complex() && !a.sub_model.empty() && doc.find(a.sub_model) == nullptr) {
        add(ViolationKind::dangling_reference, m, i, std::nullopt,
            "complex activity '" + a.name + "' references unknown model '" + a.sub_model + "'");
      }
    }
    for (std::size_t i = 0; i < m.constraints.size(); ++i) {
      const auto& c = m.constraints[i];
      if (c.operands.size() != template_arity(c.tmpl)) {
        add(ViolationKind::arity_mismatch, m, std::nullopt, i,
            std::string(template_name(c.tmpl)) + " expects " +
                std::to_string(template_arity(c.tmpl)) + " operand(s), got " +
                std::to_string(c.operands.size()));
      }
      for (const auto& op : c.operands) {
        if (m.find_activity(op) == nullptr) {
          add(ViolationKind::non_local_operand, m, std::nullopt, i,
              "operand '" + op + "' of " + to_string(c) + " is not an activity of model '" +
                  m.name + "'");
        }
      }
    }
  }

  // Cycle detection over the model reference graph; one violation per back edge.
  enum class Mark { unvisited, active, done };
  std::map<std::string, Mark> marks;
  auto visit = [&](auto&& self, const ProcessModel& m) -> void {
    marks[m.name] = Mark::active;
    for (std::size_t i = 0; i < m.activities.size(); ++i) {
      const auto& a = m.activities[i];
      if (!a.is_complex()) {
        continue;
      }
      const ProcessModel* sub = doc.find(a.sub_model);
      if (sub == nullptr) {
        continue;
      }
      Mark mark = marks.count(sub->name) ? marks[sub->name] : Mark::unvisited;
      if (mark == Mark::active) {
        add(ViolationKind::cyclic_hierarchy, m, i, std::nullopt,
            "complex activity '" + a.name + "' closes a reference cycle through model '" +
                sub->name + "'");
      } else if (mark == Mark::unvisited) {
        self(self, *sub);
      }
    }
    marks[m.name] = Mark::done;
  };
  for (const auto& m : doc.models) {
    if (!marks.count(m.name)) {
      visit(visit, m);
    }
  }
  return report;
}

std::vector<std::string> alphabet(const ProcessModel& model) {
  std::vector<std::string> out;
  out.reserve(model.activities.size());
  for (const auto& a : model.activities) {
    out.push_back(a.name);
  }
  return out;
}

std::vector<std::string> leaf_alphabet(const Document& doc) {
  std::vector<std::string> out;
  const ProcessModel* root = doc.root();
  if (root == nullptr) {
    return out;
  }
  std::set<std::string> seen_models;
  auto walk = [&](auto&& self, const ProcessModel& m) -> void {
    if (!seen_models.insert(m.name).second) {
      return;
    }
    for (const auto& a : m.activities) {
      if (!a.is_complex()) {
        out.push_back(a.name);
      } else if (const ProcessModel* sub = doc.find(a.sub_model)) {
        self(self, *sub);
      }
    }
  };
  walk(walk, *root);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace declhier
