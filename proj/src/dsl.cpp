#include "declhier/dsl.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace declhier {

SourceDocument SourceDocument::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return SourceDocument{buf.str(), path.string()};
}

std::string format_diagnostic(const ParseDiagnostic& d, std::string_view origin) {
  std::ostringstream out;
  out << origin << ":" << d.line << ":" << d.column << ": "
      << (d.severity == Severity::error ? "error" : "warning") << ": " << d.message;
  return out.str();
}

bool ModelParseResult::ok() const {
  return std::none_of(diagnostics.begin(), diagnostics.end(),
                      [](const ParseDiagnostic& d) { return d.severity == Severity::error; });
}

namespace {

enum class TokenKind { name, quoted, number, symbol, end };

struct Token {
  TokenKind kind = TokenKind::end;
  std::string text;
  std::size_t line = 1;
  std::size_t column = 1;
};

class syntax_error : public std::runtime_error {
 public:
  syntax_error(std::string msg, std::size_t line, std::size_t column)
      : std::runtime_error(std::move(msg)), line(line), column(column) {}
  std::size_t line;
  std::size_t column;
};

// Shared lexer for both grammars. Handles `//` comments, CRLF line endings
// and double-quoted names with backslash escapes.
class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    for (;;) {
      skip_blank();
      if (pos_ >= text_.size()) {
        out.push_back(end_token());
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_blank() {
    while (pos_ < text_.size()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < text_.size() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  // Position of the last character, so errors at end of input still point
  // inside the text.
  Token end_token() const {
    Token t;
    t.kind = TokenKind::end;
    std::size_t line = 1, column = 1, last_line = 1, last_column = 1;
    for (char c : text_) {
      last_line = line;
      last_column = column;
      if (c == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    t.line = last_line;
    t.column = last_column;
    return t;
  }

  static bool name_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || static_cast<unsigned char>(c) >= 0x80;
  }

  Token next() {
    Token t;
    t.line = line_;
    t.column = column_;
    char c = peek();
    if (c == '"') {
      t.kind = TokenKind::quoted;
      advance();
      for (;;) {
        if (pos_ >= text_.size() || peek() == '\n') {
          throw syntax_error("unterminated quoted name", t.line, t.column);
        }
        char d = peek();
        if (d == '"') {
          advance();
          break;
        }
        if (d == '\\') {
          advance();
          if (pos_ >= text_.size()) {
            throw syntax_error("unterminated quoted name", t.line, t.column);
          }
          d = peek();
        }
        t.text += d;
        advance();
      }
      return t;
    }
    if (name_char(c)) {
      bool digits = true;
      while (pos_ < text_.size() && name_char(peek())) {
        digits = digits && peek() >= '0' && peek() <= '9';
        t.text += peek();
        advance();
      }
      t.kind = digits ? TokenKind::number : TokenKind::name;
      return t;
    }
    t.kind = TokenKind::symbol;
    t.text = std::string(1, c);
    advance();
    return t;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t column_ = 1;
};

struct SourcePos {
  std::size_t line = 1;
  std::size_t column = 1;
};

struct ModelPositions {
  SourcePos model;
  std::vector<SourcePos> activities;
  std::vector<SourcePos> constraints;
};

class ModelParser {
 public:
  explicit ModelParser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Document parse(std::vector<ModelPositions>& positions) {
    Document doc;
    if (at_end()) {
      throw error("expected a process definition");
    }
    while (!at_end()) {
      ModelPositions pos;
      doc.models.push_back(parse_process(pos));
      positions.push_back(std::move(pos));
    }
    return doc;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  bool at_end() const { return peek().kind == TokenKind::end; }
  Token take() {
    Token t = tokens_[pos_];
    if (!at_end()) ++pos_;
    return t;
  }

  syntax_error error(const std::string& msg) const {
    const Token& t = peek();
    std::string found = t.kind == TokenKind::end ? "end of input" : "'" + t.text + "'";
    return syntax_error(msg + ", found " + found, t.line, t.column);
  }

  bool peek_keyword(std::string_view kw) const {
    return peek().kind == TokenKind::name && peek().text == kw;
  }

  void expect_keyword(std::string_view kw) {
    if (!peek_keyword(kw)) {
      throw error("expected '" + std::string(kw) + "'");
    }
    take();
  }

  void expect_symbol(char c) {
    if (peek().kind != TokenKind::symbol || peek().text[0] != c) {
      throw error(std::string("expected '") + c + "'");
    }
    take();
  }

  bool accept_symbol(char c) {
    if (peek().kind == TokenKind::symbol && peek().text[0] == c) {
      take();
      return true;
    }
    return false;
  }

  std::string expect_name(const char* what) {
    if (peek().kind == TokenKind::quoted || peek().kind == TokenKind::name) {
      return take().text;
    }
    throw error(std::string("expected ") + what);
  }

  ProcessModel parse_process(ModelPositions& pos) {
    ProcessModel m;
    pos.model = SourcePos{peek().line, peek().column};
    if (peek_keyword("root")) {
      take();
      m.root = true;
    }
    expect_keyword("process");
    m.name = expect_name("a process name");
    expect_symbol('{');
    while (!accept_symbol('}')) {
      if (at_end()) {
        throw error("expected '}' to close process '" + m.name + "'");
      }
      SourcePos here{peek().line, peek().column};
      if (peek_keyword("activity")) {
        take();
        m.activities.push_back(ActivityDecl{expect_name("an activity name"), ActivityKind::atomic, ""});
        pos.activities.push_back(here);
      } else if (peek_keyword("complex")) {
        take();
        ActivityDecl a{expect_name("an activity name"), ActivityKind::complex, ""};
        expect_symbol('=');
        expect_keyword("process");
        a.sub_model = expect_name("a process name");
        m.activities.push_back(std::move(a));
        pos.activities.push_back(here);
      } else if (peek_keyword("constraint")) {
        take();
        m.constraints.push_back(parse_constraint());
        pos.constraints.push_back(here);
      } else {
        throw error("expected 'activity', 'complex', 'constraint' or '}'");
      }
    }
    return m;
  }

  ConstraintInstance parse_constraint() {
    if (peek().kind != TokenKind::name) {
      throw error("expected a constraint template");
    }
    auto tmpl = template_from_name(peek().text);
    if (!tmpl) {
      throw error("unknown constraint template");
    }
    take();
    ConstraintInstance c;
    c.tmpl = *tmpl;
    expect_symbol('(');
    bool need_comma = false;
    if (has_cardinality(c.tmpl)) {
      if (peek().kind != TokenKind::number) {
        throw error(std::string(template_name(c.tmpl)) + " expects a cardinality first");
      }
      const std::string digits = take().text;
      if (digits.size() > 9) {
        throw syntax_error("cardinality is too large", tokens_[pos_ - 1].line,
                           tokens_[pos_ - 1].column);
      }
      c.cardinality = static_cast<std::uint32_t>(std::stoul(digits));
      need_comma = true;
    }
    while (!accept_symbol(')')) {
      if (need_comma) {
        expect_symbol(',');
      }
      c.operands.push_back(expect_name("an activity name"));
      need_comma = true;
    }
    return c;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

SourcePos position_of(const Violation& v, const Document& doc,
                      const std::vector<ModelPositions>& positions) {
  for (std::size_t i = 0; i < doc.models.size(); ++i) {
    if (doc.models[i].name != v.model) {
      continue;
    }
    const ModelPositions& p = positions[i];
    if (v.activity && *v.activity < p.activities.size()) return p.activities[*v.activity];
    if (v.constraint && *v.constraint < p.constraints.size()) return p.constraints[*v.constraint];
    return p.model;
  }
  return SourcePos{};
}

}  // namespace

ModelParseResult parse_model(const SourceDocument& src) {
  ModelParseResult result;
  std::vector<ModelPositions> positions;
  try {
    Lexer lexer(src.text);
    ModelParser parser(lexer.tokenize());
    result.document = parser.parse(positions);
  } catch (const syntax_error& e) {
    result.syntax_ok = false;
    result.document = Document{};
    result.diagnostics.push_back(ParseDiagnostic{Severity::error, e.line, e.column, e.what()});
    return result;
  }
  // Violations are matched to the first model with that name.
  for (const auto& v : validate_model(result.document).violations) {
    SourcePos p = position_of(v, result.document, positions);
    result.diagnostics.push_back(ParseDiagnostic{
        Severity::error, p.line, p.column, std::string(violation_kind_name(v.kind)) + ": " + v.message});
  }
  return result;
}

std::string serialize_model(const Document& doc) {
  std::ostringstream out;
  bool first_model = true;
  for (const auto& m : doc.models) {
    if (!first_model) {
      out << "\n";
    }
    first_model = false;
    out << (m.root ? "root " : "") << "process " << format_label(m.name) << " {\n";
    for (const auto& a : m.activities) {
      if (a.is_complex()) {
        out << "  complex " << format_label(a.name) << " = process " << format_label(a.sub_model)
            << "\n";
      } else {
        out << "  activity " << format_label(a.name) << "\n";
      }
    }
    std::vector<ConstraintInstance> sorted = m.constraints;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& c : sorted) {
      out << "  constraint " << to_string(c) << "\n";
    }
    out << "}\n";
  }
  return out.str();
}

Trace parse_trace(const SourceDocument& src) {
  std::vector<Token> tokens;
  try {
    tokens = Lexer(src.text).tokenize();
  } catch (const syntax_error& e) {
    throw trace_parse_error(ParseDiagnostic{Severity::error, e.line, e.column, e.what()});
  }
  auto fail = [](const Token& t, const std::string& msg) {
    throw trace_parse_error(ParseDiagnostic{Severity::error, t.line, t.column, msg});
  };
  auto is_symbol = [](const Token& t, char c) {
    return t.kind == TokenKind::symbol && t.text[0] == c;
  };
  auto is_label = [](const Token& t) {
    return t.kind == TokenKind::quoted || t.kind == TokenKind::name || t.kind == TokenKind::number;
  };

  Trace trace;
  std::map<std::string, std::string> open_tags;
  std::set<std::string> used_tags;
  std::size_t pos = 0;
  std::size_t step = 0;
  auto tag_at = [&](std::size_t& p) -> std::string {
    if (!is_symbol(tokens[p], '#')) {
      fail(tokens[p], "expected an activity tag '#N'");
    }
    ++p;
    if (tokens[p].kind != TokenKind::number) {
      fail(tokens[p], "expected a numeric tag after '#'");
    }
    return tokens[p++].text;
  };

  while (tokens[pos].kind != TokenKind::end) {
    const Token start = tokens[pos];
    bool expect_rejection = false;
    if (is_symbol(start, '!')) {
      expect_rejection = true;
      ++pos;
    }
    const Token& t = tokens[pos];
    TraceEvent ev;
    ev.step = step;
    ev.expect_rejection = expect_rejection;
    ev.line = start.line;
    ev.column = start.column;
    if (is_symbol(t, '.')) {
      ev.kind = TraceEventKind::terminate;
      ++pos;
      trace.events.push_back(ev);
    } else if (t.kind == TokenKind::name && t.text == "started") {
      ++pos;
      if (!is_label(tokens[pos])) fail(tokens[pos], "expected an activity label");
      ev.kind = TraceEventKind::started;
      ev.label = tokens[pos++].text;
      ev.tag = tag_at(pos);
      if (tokens[pos].kind == TokenKind::name && tokens[pos].text == "in") {
        ++pos;
        ev.parent_tag = tag_at(pos);
      }
      if (!used_tags.insert(ev.tag).second) {
        fail(t, "activity tag #" + ev.tag + " is used twice");
      }
      open_tags.emplace(ev.tag, ev.label);
      trace.events.push_back(ev);
    } else if (t.kind == TokenKind::name && t.text == "completed") {
      ++pos;
      ev.kind = TraceEventKind::completed;
      if (is_label(tokens[pos])) {
        ev.label = tokens[pos++].text;
      }
      ev.tag = tag_at(pos);
      auto open = open_tags.find(ev.tag);
      if (open == open_tags.end()) {
        fail(t, "completion of #" + ev.tag + " has no matching start");
      }
      if (ev.label.empty()) {
        ev.label = open->second;
      } else if (ev.label != open->second) {
        fail(t, "#" + ev.tag + " was started as '" + open->second + "', not '" + ev.label + "'");
      }
      open_tags.erase(open);
      trace.events.push_back(ev);
    } else if (is_label(t)) {
      ++pos;
      ev.label = t.text;
      ev.tag = "m" + std::to_string(step);
      ev.kind = TraceEventKind::started;
      trace.events.push_back(ev);
      ev.kind = TraceEventKind::completed;
      trace.events.push_back(ev);
    } else {
      fail(t, "unexpected '" + t.text + "' in trace");
    }
    ++step;
  }
  return trace;
}

}  // namespace declhier
