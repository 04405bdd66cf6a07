#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "declhier/engine.hpp"
#include "declhier/model.hpp"

namespace declhier {

struct SourceDocument {
  std::string text;
  // File path, or "<inline>".
  std::string origin = "<inline>";

  static SourceDocument from_file(const std::filesystem::path& path);
};

enum class Severity { error, warning };

struct ParseDiagnostic {
  Severity severity = Severity::error;
  std::size_t line = 1;
  std::size_t column = 1;
  std::string message;
};

// `origin:line:col: error: message`
std::string format_diagnostic(const ParseDiagnostic& d, std::string_view origin);

struct ModelParseResult {
  Document document;
  std::vector<ParseDiagnostic> diagnostics;
  // Grammar errors, as opposed to well-formedness violations.
  bool syntax_ok = true;

  bool ok() const;
};

// Parses a .dpm document and runs validate_model on it; violations are
// reported as diagnostics positioned at the offending declaration.
ModelParseResult parse_model(const SourceDocument& doc);

// Canonical text: models in document order, activities in declaration order,
// constraints sorted, two-space indentation, one blank line between models.
std::string serialize_model(const Document& doc);

class trace_parse_error : public std::runtime_error {
 public:
  trace_parse_error(const ParseDiagnostic& d)
      : std::runtime_error(d.message), diagnostic_(d) {}
  const ParseDiagnostic& diagnostic() const { return diagnostic_; }

 private:
  ParseDiagnostic diagnostic_;
};

// Parses a .dpt trace. Merged tokens (bare labels) expand to started +
// completed; `.` terminates; a leading `!` marks a step that must be
// rejected. Full form: `started LABEL #TAG [in #TAG]`, `completed [LABEL] #TAG`.
Trace parse_trace(const SourceDocument& doc);

}  // namespace declhier
