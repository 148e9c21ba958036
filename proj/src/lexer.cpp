// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <vector>

#include "gapfinder/mutator.hpp"

namespace gapfinder {

std::string_view to_string(TokenKind kind) noexcept {
  switch (kind) {
    case TokenKind::identifier:
      return "identifier";
    case TokenKind::keyword:
      return "keyword";
    case TokenKind::number:
      return "number";
    case TokenKind::string_literal:
      return "string_literal";
    case TokenKind::operator_:
      return "operator";
    case TokenKind::punctuation:
      return "punctuation";
    case TokenKind::comment:
      return "comment";
    case TokenKind::whitespace:
      return "whitespace";
    case TokenKind::newline:
      return "newline";
  }
  return "?";
}

namespace {

const std::set<std::string_view> kJavaKeywords = {
    "abstract", "assert",     "boolean",   "break",     "byte",     "case",       "catch",        "char",
    "class",    "const",      "continue",  "default",   "do",       "double",     "else",         "enum",
    "extends",  "final",      "finally",   "float",     "for",      "goto",       "if",           "implements",
    "import",   "instanceof", "int",       "interface", "long",     "native",     "new",          "package",
    "private",  "protected",  "public",    "return",    "short",    "static",     "strictfp",     "super",
    "switch",   "synchronized", "this",    "throw",     "throws",   "transient",  "try",          "void",
    "volatile", "while",      "true",      "false",     "null",     "var",        "record",       "yield"};

const std::set<std::string_view> kPythonKeywords = {
    "False", "None",  "True",     "and",    "as",   "assert", "async",  "await",  "break", "class",
    "continue", "def", "del",     "elif",   "else", "except", "finally", "for",   "from",  "global",
    "if",    "import", "in",      "is",     "lambda", "nonlocal", "not", "or",    "pass",  "raise",
    "return", "try",  "while",    "with",   "yield"};

// Longest first within each list.
constexpr std::string_view kJavaOperators[] = {
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=",
    "<=",   ">=",  "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "<<", ">>", "+",
    "-",    "*",   "/",   "%",   "=",   "<",  ">",  "!",  "~",  "?",  "&",  "|",  "^",  "@"};

constexpr std::string_view kPythonOperators[] = {
    "**=", "//=", ">>=", "<<=", "**", "//", "==", "!=", "<=", ">=", "->", ":=", "+=", "-=",
    "*=",  "/=",  "%=",  "&=",  "|=", "^=", "@=", "<<", ">>", "+",  "-",  "*",  "/",  "%",
    "=",   "<",   ">",   "!",   "~",  "&",  "|",  "^",  "@"};

bool ident_start(unsigned char c) { return std::isalpha(c) != 0 || c == '_' || c == '$' || c >= 0x80; }
bool ident_part(unsigned char c) { return std::isalnum(c) != 0 || c == '_' || c == '$' || c >= 0x80; }

bool is_python_string_prefix(std::string_view word) {
  if (word.empty() || word.size() > 2) return false;
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  static const std::set<std::string> kPrefixes = {"r", "u", "b", "f", "br", "rb", "fr", "rf"};
  return kPrefixes.count(lower) > 0;
}

class Lexer {
 public:
  Lexer(std::string_view src, Language lang) : src_(src), lang_(lang) {}

  std::vector<Token> run() {
    while (pos_ < src_.size()) step();
    return std::move(tokens_);
  }

 private:
  char at(std::size_t i) const { return i < src_.size() ? src_[i] : '\0'; }
  bool starts(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  void emit(TokenKind kind, std::size_t end) {
    tokens_.push_back(Token{kind, std::string(src_.substr(pos_, end - pos_)), pos_, end});
    pos_ = end;
  }

  void step() {
    const char c = src_[pos_];
    if (c == '\n') return emit(TokenKind::newline, pos_ + 1);
    if (c == '\r') return emit(TokenKind::newline, at(pos_ + 1) == '\n' ? pos_ + 2 : pos_ + 1);
    if (c == ' ' || c == '\t' || c == '\f' || c == '\v') {
      std::size_t e = pos_;
      while (e < src_.size() && (src_[e] == ' ' || src_[e] == '\t' || src_[e] == '\f' || src_[e] == '\v')) ++e;
      return emit(TokenKind::whitespace, e);
    }
    if (lang_ == Language::java && starts("//")) return line_comment();
    if (lang_ == Language::java && starts("/*")) return block_comment();
    if (lang_ == Language::python && c == '#') return line_comment();
    if (c == '"' || c == '\'') return string_literal(pos_);
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(at(pos_ + 1))))) {
      return number();
    }
    if (ident_start(static_cast<unsigned char>(c))) return word();
    if (op()) return;
    emit(TokenKind::punctuation, pos_ + 1);
  }

  void line_comment() {
    std::size_t e = pos_;
    while (e < src_.size() && src_[e] != '\n' && src_[e] != '\r') ++e;
    emit(TokenKind::comment, e);
  }

  void block_comment() {
    const auto close = src_.find("*/", pos_ + 2);
    if (close == std::string_view::npos) throw LexError("unterminated block comment at byte " + std::to_string(pos_), pos_);
    emit(TokenKind::comment, close + 2);
  }

  // `start` may precede pos_ when a Python prefix (r, b, f, ...) was consumed.
  void string_literal(std::size_t start) {
    const char quote = src_[pos_];
    const bool triple = at(pos_ + 1) == quote && at(pos_ + 2) == quote &&
                        (lang_ == Language::python || quote == '"');
    std::size_t i = pos_ + (triple ? 3 : 1);
    for (;;) {
      if (i >= src_.size()) {
        throw LexError("unterminated string literal starting at byte " + std::to_string(start), start);
      }
      const char ch = src_[i];
      if (ch == '\\') {
        i += 2;
        continue;
      }
      if (triple) {
        if (ch == quote && at(i + 1) == quote && at(i + 2) == quote) {
          i += 3;
          break;
        }
      } else {
        if (ch == quote) {
          ++i;
          break;
        }
        if (ch == '\n' || ch == '\r') {
          throw LexError("unterminated string literal starting at byte " + std::to_string(start), start);
        }
      }
      ++i;
    }
    pos_ = start;
    emit(TokenKind::string_literal, i);
  }

  void number() {
    std::size_t e = pos_;
    const bool hex = src_[e] == '0' && (at(e + 1) == 'x' || at(e + 1) == 'X');
    bool seen_dot = false;
    while (e < src_.size()) {
      const auto ch = static_cast<unsigned char>(src_[e]);
      if (std::isalnum(ch) || ch == '_') {
        const bool exponent = !hex && (ch == 'e' || ch == 'E');
        ++e;
        if (exponent && (at(e) == '+' || at(e) == '-')) ++e;
        continue;
      }
      if (ch == '.' && !seen_dot && !hex && std::isdigit(static_cast<unsigned char>(at(e + 1)))) {
        seen_dot = true;
        ++e;
        continue;
      }
      if (ch == '.' && !seen_dot && !hex && !ident_start(static_cast<unsigned char>(at(e + 1))) && at(e + 1) != '.') {
        // trailing-dot float such as `5.`
        seen_dot = true;
        ++e;
        continue;
      }
      break;
    }
    emit(TokenKind::number, e);
  }

  void word() {
    std::size_t e = pos_;
    while (e < src_.size() && ident_part(static_cast<unsigned char>(src_[e]))) ++e;
    const std::string_view w = src_.substr(pos_, e - pos_);
    if (lang_ == Language::python && (at(e) == '"' || at(e) == '\'') && is_python_string_prefix(w)) {
      const std::size_t start = pos_;
      pos_ = e;
      return string_literal(start);
    }
    const auto& keywords = lang_ == Language::java ? kJavaKeywords : kPythonKeywords;
    emit(keywords.count(w) > 0 ? TokenKind::keyword : TokenKind::identifier, e);
  }

  bool op() {
    auto try_list = [&](auto const& list) {
      for (std::string_view o : list) {
        if (starts(o)) {
          emit(TokenKind::operator_, pos_ + o.size());
          return true;
        }
      }
      return false;
    };
    if (lang_ == Language::java) return try_list(kJavaOperators);
    return try_list(kPythonOperators);
  }

  std::string_view src_;
  Language lang_;
  std::size_t pos_ = 0;
  std::vector<Token> tokens_;
};

bool is_trivia(TokenKind k) { return k == TokenKind::whitespace || k == TokenKind::comment || k == TokenKind::newline; }

}  // namespace

std::vector<Token> lex(std::string_view source, Language language) { return Lexer(source, language).run(); }

std::string detokenize(std::span<const Token> tokens) {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

WellFormedness check_well_formed(std::span<const Token> tokens, Language language) {
  std::vector<const Token*> stack;
  auto opener_for = [](char close) { return close == ')' ? '(' : close == ']' ? '[' : '{'; };
  for (const auto& t : tokens) {
    if (t.kind != TokenKind::punctuation || t.text.size() != 1) continue;
    const char c = t.text[0];
    if (c == '(' || c == '[' || c == '{') {
      stack.push_back(&t);
    } else if (c == ')' || c == ']' || c == '}') {
      if (stack.empty() || stack.back()->text[0] != opener_for(c)) {
        return {false, "unbalanced '" + t.text + "' at byte " + std::to_string(t.begin)};
      }
      stack.pop_back();
    }
  }
  if (!stack.empty()) return {false, "unclosed '" + stack.back()->text + "' at byte " + std::to_string(stack.back()->begin)};
  if (language == Language::java) return {};

  // Python indentation: walk logical lines at bracket depth 0.
  std::vector<std::string> indents{""};
  int depth = 0;
  bool at_line_start = true;
  bool continued = false;
  bool expect_indent = false;
  std::string line_indent;
  const Token* last_significant = nullptr;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind == TokenKind::newline) {
      if (depth == 0 && !continued && last_significant != nullptr) {
        expect_indent = last_significant->text == ":";
      }
      if (depth == 0 && !continued) last_significant = nullptr;
      at_line_start = depth == 0 && !continued;
      continued = false;
      line_indent.clear();
      continue;
    }
    if (at_line_start) {
      if (t.kind == TokenKind::whitespace) {
        line_indent = t.text;
        continue;
      }
      if (t.kind == TokenKind::comment) continue;
      at_line_start = false;
      const std::string& top = indents.back();
      if (expect_indent) {
        if (line_indent.size() <= top.size() || line_indent.compare(0, top.size(), top) != 0) {
          return {false, "expected an indented block at byte " + std::to_string(t.begin)};
        }
        indents.push_back(line_indent);
        expect_indent = false;
      } else if (line_indent != top) {
        if (line_indent.size() > top.size()) return {false, "unexpected indent at byte " + std::to_string(t.begin)};
        while (indents.size() > 1 && indents.back().size() > line_indent.size()) indents.pop_back();
        if (indents.back() != line_indent) return {false, "inconsistent dedent at byte " + std::to_string(t.begin)};
      }
    }
    if (is_trivia(t.kind)) continue;
    if (t.kind == TokenKind::punctuation && t.text == "\\") {
      continued = true;
      continue;
    }
    if (t.kind == TokenKind::punctuation && (t.text == "(" || t.text == "[" || t.text == "{")) ++depth;
    if (t.kind == TokenKind::punctuation && (t.text == ")" || t.text == "]" || t.text == "}")) --depth;
    last_significant = &t;
  }
  if (expect_indent && last_significant == nullptr) {
    // File ends right after a block opener.
    return {false, "expected an indented block at end of input"};
  }
  return {};
}

}  // namespace gapfinder
