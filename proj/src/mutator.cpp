// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <regex>
#include <set>
#include <tuple>

#include "gapfinder/mutator.hpp"
#include "gapfinder/synth.hpp"
#include "gapfinder/text.hpp"

namespace gapfinder {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

bool trivia(TokenKind k) { return k == TokenKind::whitespace || k == TokenKind::comment || k == TokenKind::newline; }

// Significant-token view over a token stream. Positions below ("sig
// positions") index `sig`, which holds indices into the token span.
class TokenView {
 public:
  explicit TokenView(std::span<const Token> tokens) : tokens_(tokens) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!trivia(tokens[i].kind)) sig_.push_back(i);
    }
  }

  std::size_t size() const { return sig_.size(); }
  const Token& at(std::size_t k) const { return tokens_[sig_[k]]; }
  std::size_t token_index(std::size_t k) const { return sig_[k]; }
  std::span<const Token> tokens() const { return tokens_; }

  bool is(std::size_t k, std::string_view text) const { return k < sig_.size() && at(k).text == text; }
  bool is(std::size_t k, TokenKind kind) const { return k < sig_.size() && at(k).kind == kind; }
  bool is_punct(std::size_t k, std::string_view text) const {
    return k < sig_.size() && at(k).kind == TokenKind::punctuation && at(k).text == text;
  }
  bool is_op(std::size_t k, std::string_view text) const {
    return k < sig_.size() && at(k).kind == TokenKind::operator_ && at(k).text == text;
  }

  /// Sig position of the bracket closing the one opened at `k`.
  std::size_t match(std::size_t k) const {
    int depth = 0;
    for (std::size_t j = k; j < sig_.size(); ++j) {
      const Token& t = at(j);
      if (t.kind != TokenKind::punctuation) continue;
      if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
      if (t.text == ")" || t.text == "]" || t.text == "}") {
        if (--depth == 0) return j;
      }
    }
    return npos;
  }

  /// Source text covered by sig positions [a, b), trivia included.
  std::string text(std::size_t a, std::size_t b) const {
    if (a >= b) return {};
    std::string out;
    for (std::size_t i = sig_[a]; i <= sig_[b - 1]; ++i) out += tokens_[i].text;
    return out;
  }

  /// True when sig position k starts a line (only trivia before it on the line).
  bool starts_line(std::size_t k) const {
    std::size_t i = sig_[k];
    while (i > 0) {
      --i;
      if (tokens_[i].kind == TokenKind::newline) return true;
      if (tokens_[i].kind != TokenKind::whitespace) return false;
    }
    return true;
  }

 private:
  std::span<const Token> tokens_;
  std::vector<std::size_t> sig_;
};

struct Region {
  std::size_t begin = 0;  // sig positions, half-open
  std::size_t end = 0;
};

// Python logical-line end: the first `:` at depth 0, or the newline.
std::size_t python_header_colon(const TokenView& v, std::size_t from) {
  int depth = 0;
  for (std::size_t j = from; j < v.size(); ++j) {
    const Token& t = v.at(j);
    if (t.kind == TokenKind::punctuation) {
      if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
      if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
      if (t.text == ":" && depth == 0) return j;
    }
  }
  return npos;
}

struct JavaFor {
  Region init, cond, update;
};

std::optional<JavaFor> java_for_header(const TokenView& v, std::size_t k) {
  if (!(v.is(k, TokenKind::keyword) && v.at(k).text == "for" && v.is_punct(k + 1, "("))) return std::nullopt;
  const std::size_t close = v.match(k + 1);
  if (close == npos) return std::nullopt;
  std::vector<std::size_t> semis;
  int depth = 0;
  for (std::size_t j = k + 2; j < close; ++j) {
    const Token& t = v.at(j);
    if (t.kind == TokenKind::punctuation) {
      if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
      if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
      if (t.text == ";" && depth == 0) semis.push_back(j);
    }
  }
  if (semis.size() != 2) return std::nullopt;
  return JavaFor{{k + 2, semis[0]}, {semis[0] + 1, semis[1]}, {semis[1] + 1, close}};
}

// Parenthesized condition after a Java keyword (`if`, `while`).
std::optional<Region> java_paren_condition(const TokenView& v, std::size_t k, std::string_view keyword) {
  if (!(v.is(k, TokenKind::keyword) && v.at(k).text == keyword && v.is_punct(k + 1, "("))) return std::nullopt;
  const std::size_t close = v.match(k + 1);
  if (close == npos) return std::nullopt;
  return Region{k + 2, close};
}

std::optional<Region> python_condition(const TokenView& v, std::size_t k, std::initializer_list<std::string_view> kws) {
  if (!v.is(k, TokenKind::keyword)) return std::nullopt;
  if (std::find(kws.begin(), kws.end(), v.at(k).text) == kws.end()) return std::nullopt;
  const std::size_t colon = python_header_colon(v, k + 1);
  if (colon == npos) return std::nullopt;
  return Region{k + 1, colon};
}

struct PythonRange {
  std::string var;
  std::size_t open = 0;  // sig position of `(` after range
  std::size_t close = 0;
  std::vector<Region> args;
};

std::optional<PythonRange> python_for_range(const TokenView& v, std::size_t k) {
  if (!(v.is(k, TokenKind::keyword) && v.at(k).text == "for")) return std::nullopt;
  if (!(v.is(k + 1, TokenKind::identifier) && v.is(k + 2, TokenKind::keyword) && v.at(k + 2).text == "in" &&
        v.is(k + 3, TokenKind::identifier) && v.at(k + 3).text == "range" && v.is_punct(k + 4, "("))) {
    return std::nullopt;
  }
  PythonRange r;
  r.var = v.at(k + 1).text;
  r.open = k + 4;
  r.close = v.match(k + 4);
  if (r.close == npos) return std::nullopt;
  int depth = 0;
  std::size_t start = r.open + 1;
  for (std::size_t j = r.open + 1; j < r.close; ++j) {
    const Token& t = v.at(j);
    if (t.kind != TokenKind::punctuation) continue;
    if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
    if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
    if (t.text == "," && depth == 0) {
      r.args.push_back({start, j});
      start = j + 1;
    }
  }
  if (start < r.close) r.args.push_back({start, r.close});
  return r;
}

std::optional<long long> int_literal(const Token& t) {
  if (t.kind != TokenKind::number) return std::nullopt;
  long long value = 0;
  const auto* first = t.text.data();
  const auto* last = t.text.data() + t.text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

bool is_comparison(const Token& t) {
  return t.kind == TokenKind::operator_ && (t.text == "<" || t.text == "<=" || t.text == ">" || t.text == ">=");
}

std::string flipped_bound(std::string_view op) {
  if (op == "<=") return "<";
  if (op == "<") return "<=";
  if (op == ">=") return ">";
  return ">=";
}

bool looks_generic(const TokenView& v, std::size_t k) {
  auto upper_ident = [&](std::size_t j) {
    return j < v.size() && v.at(j).kind == TokenKind::identifier && text::starts_with_upper(v.at(j).text);
  };
  return k > 0 && upper_ident(k - 1) && (upper_ident(k + 1) || v.is_op(k + 1, ">") || v.is_op(k + 1, "?"));
}

// End (exclusive sig position) of the operand that starts at `from`, stopping
// at a boolean connective, a separator or the region end.
std::size_t operand_end(const TokenView& v, std::size_t from, std::size_t limit) {
  int depth = 0;
  for (std::size_t j = from; j < limit; ++j) {
    const Token& t = v.at(j);
    if (t.kind == TokenKind::punctuation) {
      if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
      if (t.text == ")" || t.text == "]" || t.text == "}") {
        if (depth == 0) return j;
        --depth;
      }
      if ((t.text == "," || t.text == ";") && depth == 0) return j;
    }
    if (depth == 0 && (t.text == "&&" || t.text == "||" || t.text == "and" || t.text == "or" || t.text == "?")) {
      return j;
    }
  }
  return limit;
}

std::string line_excerpt(std::span<const Token> tokens, std::size_t first, std::size_t last) {
  std::size_t a = first;
  while (a > 0 && tokens[a - 1].kind != TokenKind::newline) --a;
  std::size_t b = last;
  while (b < tokens.size() && tokens[b].kind != TokenKind::newline) ++b;
  std::string out;
  for (std::size_t i = a; i < b; ++i) out += tokens[i].text;
  return std::string(text::trim(out));
}

MutationSite make_site(const TokenView& v, std::string op_id, std::size_t first_token, std::size_t count,
                       std::string replacement, std::map<std::string, std::string> facts) {
  MutationSite s;
  s.operator_id = std::move(op_id);
  s.token_index = first_token;
  s.token_count = count;
  for (std::size_t i = first_token; i < first_token + count; ++i) s.original += v.tokens()[i].text;
  s.replacement = std::move(replacement);
  s.context_excerpt = line_excerpt(v.tokens(), first_token, first_token + count);
  s.facts = std::move(facts);
  return s;
}

MutationSite make_sig_site(const TokenView& v, std::string op_id, std::size_t k, std::string replacement,
                           std::map<std::string, std::string> facts) {
  return make_site(v, std::move(op_id), v.token_index(k), 1, std::move(replacement), std::move(facts));
}

// ---------------------------------------------------------------------------
// Explanation rewriting

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool contains_word(std::string_view sentence, std::string_view word) {
  if (word.empty()) return false;
  for (std::size_t pos = sentence.find(word); pos != std::string_view::npos; pos = sentence.find(word, pos + 1)) {
    const bool left_ok = pos == 0 || !word_char(sentence[pos - 1]) || !word_char(word.front());
    const std::size_t after = pos + word.size();
    const bool right_ok = after >= sentence.size() || !word_char(sentence[after]) || !word_char(word.back());
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::string escape_regex(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!word_char(c)) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

struct Rule {
  std::regex pattern;
  std::function<std::string(const std::smatch&)> replace;
  bool last_match = false;
  std::function<bool(const std::string&)> sentence_filter;  // optional
};

Rule rule(const std::string& pattern, std::function<std::string(const std::smatch&)> replace, bool last = false,
          std::function<bool(const std::string&)> filter = {}) {
  return Rule{std::regex(pattern, std::regex::ECMAScript | std::regex::icase), std::move(replace), last,
              std::move(filter)};
}

Rule literal_rule(const std::string& pattern, std::string replacement, bool last = false,
                  std::function<bool(const std::string&)> filter = {}) {
  return rule(pattern, [replacement](const std::smatch&) { return replacement; }, last, std::move(filter));
}

std::optional<std::string> apply_rule(const std::string& sentence, const Rule& r) {
  if (r.sentence_filter && !r.sentence_filter(sentence)) return std::nullopt;
  std::smatch chosen;
  bool found = false;
  for (auto it = std::sregex_iterator(sentence.begin(), sentence.end(), r.pattern); it != std::sregex_iterator();
       ++it) {
    chosen = *it;
    found = true;
    if (!r.last_match) break;
  }
  if (!found) return std::nullopt;
  const auto pos = static_cast<std::size_t>(chosen.position(0));
  const auto len = static_cast<std::size_t>(chosen.length(0));
  std::string out = sentence.substr(0, pos) + r.replace(chosen) + sentence.substr(pos + len);
  if (out == sentence) return std::nullopt;
  return out;
}

// Rules are tried in priority order; each rule scans sentences in order.
std::optional<ExplanationRewrite> first_rewrite(std::span<const std::string> sentences, const std::vector<Rule>& rules) {
  for (const Rule& r : rules) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (auto rewritten = apply_rule(sentences[i], r)) return ExplanationRewrite{i, *rewritten};
    }
  }
  return std::nullopt;
}

std::string fact(const MutationSite& s, const std::string& key) {
  const auto it = s.facts.find(key);
  return it == s.facts.end() ? std::string() : it->second;
}

std::function<bool(const std::string&)> mentions(std::vector<std::string> words) {
  return [words = std::move(words)](const std::string& sentence) {
    return std::any_of(words.begin(), words.end(), [&](const std::string& w) { return contains_word(sentence, w); });
  };
}

// "i = 5" style end-value rewrites, shared by the loop-bound operator.
void add_end_value_rules(std::vector<Rule>& rules, const std::string& var, long long old_last, long long new_last) {
  const std::string v = escape_regex(var);
  const std::string o = std::to_string(old_last);
  const std::string n = std::to_string(new_last);
  rules.push_back(literal_rule("\\b" + v + "\\s*=\\s*" + o + "\\b", var + " = " + n, true));
  rules.push_back(rule("\\b(to|through|until|up to) " + o + "\\b",
                       [n](const std::smatch& m) { return m[1].str() + " " + n; }, true));
}

// ---------------------------------------------------------------------------
// Operators

std::vector<MutationSite> find_loop_bound(std::span<const Token> tokens, Language lang) {
  const TokenView v(tokens);
  std::vector<MutationSite> out;
  auto scan_comparisons = [&](Region region) {
    for (std::size_t j = region.begin; j < region.end; ++j) {
      if (!is_comparison(v.at(j)) || j == region.begin) continue;
      if (lang == Language::java && looks_generic(v, j)) continue;
      if (!v.is(j - 1, TokenKind::identifier) || (j >= 2 && v.is_punct(j - 2, "."))) continue;
      const std::size_t rhs_end = operand_end(v, j + 1, region.end);
      if (rhs_end <= j + 1) continue;
      std::map<std::string, std::string> facts{{"form", "comparison"},
                                               {"var", v.at(j - 1).text},
                                               {"op", v.at(j).text},
                                               {"new_op", flipped_bound(v.at(j).text)},
                                               {"bound", std::string(text::trim(v.text(j + 1, rhs_end)))}};
      if (rhs_end == j + 2) {
        if (auto n = int_literal(v.at(j + 1))) facts["bound_int"] = std::to_string(*n);
      }
      out.push_back(make_sig_site(v, "loop_bound_off_by_one", j, flipped_bound(v.at(j).text), std::move(facts)));
    }
  };
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (lang == Language::java) {
      if (auto header = java_for_header(v, k)) scan_comparisons(header->cond);
      if (auto cond = java_paren_condition(v, k, "while")) scan_comparisons(*cond);
    } else {
      if (auto cond = python_condition(v, k, {"while"})) scan_comparisons(*cond);
      if (auto range = python_for_range(v, k)) {
        if (range->args.empty() || range->args.size() > 2) continue;
        const Region stop = range->args.back();
        std::map<std::string, std::string> facts{{"form", "range"},
                                                 {"var", range->var},
                                                 {"bound", std::string(text::trim(v.text(stop.begin, stop.end)))}};
        if (stop.end == stop.begin + 1) {
          if (auto n = int_literal(v.at(stop.begin))) {
            if (*n < 1) continue;
            facts["bound_int"] = std::to_string(*n);
            out.push_back(make_sig_site(v, "loop_bound_off_by_one", stop.begin, std::to_string(*n - 1), facts));
            continue;
          }
        }
        const std::size_t last = stop.end - 1;
        out.push_back(make_sig_site(v, "loop_bound_off_by_one", last, v.at(last).text + " - 1", facts));
      }
    }
  }
  return out;
}

std::optional<ExplanationRewrite> rewrite_loop_bound(const MutationSite& site, std::span<const std::string> sentences) {
  const std::string var = fact(site, "var");
  const std::string bound_int = fact(site, "bound_int");
  std::vector<Rule> rules;
  const auto loop_filter = mentions({var, "loop", "loops", "iterates", "iteration"});
  if (fact(site, "form") == "range") {
    if (!bound_int.empty()) {
      const long long n = std::stoll(bound_int);
      add_end_value_rules(rules, var, n - 1, n - 2);
      rules.push_back(literal_rule("\\b" + bound_int + " times\\b", std::to_string(n - 1) + " times"));
    } else {
      rules.push_back(rule("\\b(each|every) (element|item|value|character|number)\\b",
                           [](const std::smatch& m) { return m[1].str() + " " + m[2].str() + " but the last"; }));
      rules.push_back(rule("\\ball (the )?(elements|items|values|characters|numbers)\\b",
                           [](const std::smatch& m) { return "all " + m[1].str() + m[2].str() + " but the last"; }));
    }
    return first_rewrite(sentences, rules);
  }

  const std::string op = fact(site, "op");
  if (!bound_int.empty()) {
    const long long b = std::stoll(bound_int);
    long long old_last = b, new_last = b;
    if (op == "<=") new_last = b - 1;
    if (op == "<") old_last = b - 1;
    if (op == ">=") new_last = b + 1;
    if (op == ">") old_last = b + 1;
    add_end_value_rules(rules, var, old_last, new_last);
    if (op == "<") {
      rules.push_back(literal_rule("\\bless than " + bound_int + "\\b", "less than or equal to " + bound_int));
      rules.push_back(literal_rule("\\b" + bound_int + " times\\b", std::to_string(b + 1) + " times"));
    }
    if (op == "<=") {
      rules.push_back(literal_rule("\\bless than or equal to " + bound_int + "\\b", "less than " + bound_int));
    }
  }
  if (op == "<=") {
    rules.push_back(literal_rule("\\bless than or equal to\\b", "less than", false, loop_filter));
    rules.push_back(literal_rule("\\bup to and including\\b", "up to but not including", false, loop_filter));
  } else if (op == "<") {
    rules.push_back(literal_rule("\\bless than(?! or equal)\\b", "less than or equal to", false, loop_filter));
  } else if (op == ">=") {
    rules.push_back(literal_rule("\\bgreater than or equal to\\b", "greater than", false, loop_filter));
  } else {
    rules.push_back(literal_rule("\\bgreater than(?! or equal)\\b", "greater than or equal to", false, loop_filter));
  }
  return first_rewrite(sentences, rules);
}

std::vector<MutationSite> find_relational(std::span<const Token> tokens, Language lang) {
  const TokenView v(tokens);
  std::vector<MutationSite> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    std::optional<Region> region = lang == Language::java ? java_paren_condition(v, k, "if")
                                                          : python_condition(v, k, {"if", "elif"});
    if (!region) continue;
    for (std::size_t j = region->begin + 1; j < region->end; ++j) {
      if (!is_comparison(v.at(j))) continue;
      if (lang == Language::java && looks_generic(v, j)) continue;
      const std::size_t rhs_end = operand_end(v, j + 1, region->end);
      if (rhs_end <= j + 1) continue;
      std::map<std::string, std::string> facts{{"op", v.at(j).text},
                                               {"lhs", v.at(j - 1).text},
                                               {"rhs", std::string(text::trim(v.text(j + 1, rhs_end)))}};
      out.push_back(make_sig_site(v, "relational_operator_swap", j, flipped_bound(v.at(j).text), std::move(facts)));
    }
  }
  return out;
}

std::optional<ExplanationRewrite> rewrite_relational(const MutationSite& site, std::span<const std::string> sentences) {
  const std::string op = fact(site, "op");
  const std::string rhs = fact(site, "rhs");
  const auto filter = mentions({fact(site, "lhs"), rhs});
  std::vector<Rule> rules;
  const std::string sym = "(^|[^<>=!])" + escape_regex(op) + "(?!=)\\s*" + escape_regex(rhs);
  const std::string new_op = flipped_bound(op);
  rules.push_back(rule(sym, [new_op, rhs](const std::smatch& m) { return m[1].str() + new_op + " " + rhs; }));
  if (op == ">") {
    rules.push_back(literal_rule("\\bgreater than(?! or equal)\\b", "greater than or equal to", false, filter));
    rules.push_back(literal_rule("\\bmore than\\b", "at least", false, filter));
    rules.push_back(literal_rule("\\bexceeds\\b", "is at least", false, filter));
  } else if (op == ">=") {
    rules.push_back(literal_rule("\\bgreater than or equal to\\b", "greater than", false, filter));
    rules.push_back(literal_rule("\\bat least\\b", "more than", false, filter));
  } else if (op == "<") {
    rules.push_back(literal_rule("\\bless than(?! or equal)\\b", "less than or equal to", false, filter));
    rules.push_back(literal_rule("\\bfewer than\\b", "at most", false, filter));
    rules.push_back(literal_rule("\\bbelow\\b", "at or below", false, filter));
  } else {
    rules.push_back(literal_rule("\\bless than or equal to\\b", "less than", false, filter));
    rules.push_back(literal_rule("\\bat most\\b", "less than", false, filter));
    rules.push_back(literal_rule("\\bno more than\\b", "less than", false, filter));
  }
  return first_rewrite(sentences, rules);
}

std::vector<MutationSite> find_array_size(std::span<const Token> tokens, Language lang) {
  const TokenView v(tokens);
  std::vector<MutationSite> out;
  auto propose = [&](std::size_t k) {
    const Token& t = v.at(k);
    if (auto n = int_literal(t)) {
      if (*n < 2) return;
      out.push_back(make_sig_site(v, "array_size_off_by_one", k, std::to_string(*n - 1),
                                  {{"size", t.text}, {"new_size", std::to_string(*n - 1)}, {"literal", "1"}}));
    } else if (t.kind == TokenKind::identifier) {
      out.push_back(make_sig_site(v, "array_size_off_by_one", k, t.text + " - 1",
                                  {{"size", t.text}, {"new_size", t.text + " - 1"}, {"literal", "0"}}));
    }
  };
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (lang == Language::java) {
      // new T[SIZE]
      if (!(v.is(k, TokenKind::keyword) && v.at(k).text == "new")) continue;
      if (!(v.is(k + 1, TokenKind::keyword) || v.is(k + 1, TokenKind::identifier))) continue;
      if (v.is_punct(k + 2, "[") && v.is_punct(k + 4, "]")) propose(k + 3);
    } else {
      // [fill] * SIZE
      if (!(v.is_op(k, "*") && k > 0 && v.is_punct(k - 1, "]"))) continue;
      const std::size_t size_at = k + 1;
      if (size_at >= v.size()) continue;
      const bool whole_operand = size_at + 1 >= v.size() || v.at(size_at + 1).kind == TokenKind::punctuation
                                     ? !(v.is_punct(size_at + 1, "(") || v.is_punct(size_at + 1, "[") ||
                                         v.is_punct(size_at + 1, "."))
                                     : false;
      if (whole_operand && v.starts_line(size_at + 1 < v.size() ? size_at + 1 : size_at)) propose(size_at);
      else if (whole_operand) propose(size_at);
    }
  }
  return out;
}

std::optional<ExplanationRewrite> rewrite_array_size(const MutationSite& site, std::span<const std::string> sentences) {
  const std::string size = fact(site, "size");
  const std::string new_size = fact(site, "new_size");
  const auto context = [size](const std::string& s) {
    static const std::regex kWords("\\b(array|arrays|size|length|element|elements|list|hold|holds|store|stores|slots|"
                                   "capacity|items)\\b",
                                   std::regex::icase);
    return contains_word(s, size) && std::regex_search(s, kWords);
  };
  std::vector<Rule> rules;
  rules.push_back(literal_rule("\\b" + escape_regex(size) + "\\b", new_size, false, context));
  return first_rewrite(sentences, rules);
}

std::vector<MutationSite> find_skip_zero(std::span<const Token> tokens, Language lang) {
  const TokenView v(tokens);
  std::vector<MutationSite> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (lang == Language::java) {
      auto header = java_for_header(v, k);
      if (!header) continue;
      for (std::size_t j = header->init.begin + 1; j + 1 < header->init.end + 1; ++j) {
        if (v.is_op(j, "=") && v.is(j - 1, TokenKind::identifier) && j + 1 < header->init.end &&
            v.at(j + 1).text == "0" && j + 2 == header->init.end) {
          out.push_back(make_sig_site(v, "skip_zero_index", j + 1, "1", {{"var", v.at(j - 1).text}}));
        }
      }
    } else {
      auto range = python_for_range(v, k);
      if (!range) continue;
      if (range->args.size() == 1) {
        out.push_back(make_sig_site(v, "skip_zero_index", range->open, "(1, ",
                                    {{"var", range->var}, {"stop", v.text(range->args[0].begin, range->args[0].end)}}));
      } else if (range->args.size() == 2 && range->args[0].end == range->args[0].begin + 1 &&
                 v.at(range->args[0].begin).text == "0") {
        out.push_back(make_sig_site(v, "skip_zero_index", range->args[0].begin, "1", {{"var", range->var}}));
      }
    }
  }
  return out;
}

std::optional<ExplanationRewrite> rewrite_skip_zero(const MutationSite& site, std::span<const std::string> sentences) {
  const std::string var = fact(site, "var");
  std::vector<Rule> rules;
  rules.push_back(literal_rule("\\b" + escape_regex(var) + "\\s*=\\s*0\\b", var + " = 1"));
  rules.push_back(rule("\\b(from|at|starting at|starting from|beginning at|starts at) (index |position )?0\\b",
                       [](const std::smatch& m) { return m[1].str() + " " + m[2].str() + "1"; }));
  rules.push_back(rule("\\bfirst (element|item|value|character|index)\\b",
                       [](const std::smatch& m) { return "second " + m[1].str(); }));
  rules.push_back(rule("\\b(each|every) (element|item|value|character|number|index)\\b",
                       [](const std::smatch& m) { return m[1].str() + " " + m[2].str() + " except the first"; }));
  rules.push_back(rule("\\ball (the )?(elements|items|values|characters|numbers|indices)\\b",
                       [](const std::smatch& m) { return "all " + m[1].str() + m[2].str() + " except the first"; }));
  return first_rewrite(sentences, rules);
}

// Index of the sig position ending the current Java expression statement.
std::size_t java_expression_end(const TokenView& v, std::size_t from) {
  int depth = 0;
  for (std::size_t j = from; j < v.size(); ++j) {
    const Token& t = v.at(j);
    if (t.kind != TokenKind::punctuation) continue;
    if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
    if (t.text == ")" || t.text == "]" || t.text == "}") {
      if (depth == 0) return j;
      --depth;
    }
    if ((t.text == ";" || t.text == ",") && depth == 0) return j;
  }
  return v.size();
}

bool division_ahead(const TokenView& v, std::size_t from) {
  const std::size_t end = java_expression_end(v, from);
  for (std::size_t j = from; j < end; ++j) {
    if (v.is_op(j, "/")) return true;
  }
  return false;
}

std::vector<MutationSite> find_int_division(std::span<const Token> tokens, Language lang) {
  const TokenView v(tokens);
  std::vector<MutationSite> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (lang == Language::python) {
      if (v.is_op(k, "/") && k > 0) {
        out.push_back(make_sig_site(v, "int_division_swap", k, "//", {{"form", "floor_operator"}}));
      }
      continue;
    }
    // 1.0 * a / b  ->  a / b
    if (v.at(k).kind == TokenKind::number && (v.at(k).text == "1.0" || v.at(k).text == "1.0d") && v.is_op(k + 1, "*") &&
        k + 2 < v.size() && division_ahead(v, k + 2)) {
      const std::size_t first = v.token_index(k);
      const std::size_t next = v.token_index(k + 2);
      out.push_back(make_site(v, "int_division_swap", first, next - first, "", {{"form", "drop_float_factor"}}));
    }
    // (double) a / b  ->  a / b
    if (v.is_punct(k, "(") && (v.is(k + 1, "double") || v.is(k + 1, "float")) && v.is_punct(k + 2, ")") &&
        k + 3 < v.size() && division_ahead(v, k + 3)) {
      const std::size_t first = v.token_index(k);
      const std::size_t next = v.token_index(k + 3);
      out.push_back(make_site(v, "int_division_swap", first, next - first, "", {{"form", "drop_cast"}}));
    }
    // a / 2.0  ->  a / 2
    if (v.is_op(k, "/") && k + 1 < v.size() && v.at(k + 1).kind == TokenKind::number) {
      const std::string& lit = v.at(k + 1).text;
      const auto dot = lit.find('.');
      if (dot != std::string::npos && dot > 0 && lit.substr(dot) == ".0") {
        out.push_back(make_sig_site(v, "int_division_swap", k + 1, lit.substr(0, dot), {{"form", "int_divisor"}}));
      }
    }
  }
  return out;
}

std::optional<ExplanationRewrite> rewrite_int_division(const MutationSite&, std::span<const std::string> sentences) {
  std::vector<Rule> rules;
  const auto not_integer = [](const std::string& s) { return text::to_lower(s).find("integer") == std::string::npos; };
  rules.push_back(literal_rule("\\b(floating-point|floating point|float|decimal|real) division\\b", "integer division"));
  rules.push_back(literal_rule("\\bdivided by\\b", "integer-divided by", false, not_integer));
  rules.push_back(literal_rule("\\bdivides\\b", "integer-divides", false, not_integer));
  rules.push_back(literal_rule("\\bdivide\\b", "integer-divide", false, not_integer));
  rules.push_back(literal_rule("\\bdivision\\b", "integer division", false, not_integer));
  rules.push_back(literal_rule("\\baverage\\b", "truncated integer average", false, not_integer));
  rules.push_back(literal_rule("\\bquotient\\b", "integer quotient", false, not_integer));
  return first_rewrite(sentences, rules);
}

std::vector<MutationSite> find_assignment_comparison(std::span<const Token> tokens, Language lang) {
  const TokenView v(tokens);
  std::vector<MutationSite> out;
  if (lang == Language::java) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      std::optional<Region> region = java_paren_condition(v, k, "if");
      if (!region) region = java_paren_condition(v, k, "while");
      if (!region) continue;
      for (std::size_t j = region->begin; j < region->end; ++j) {
        if (!v.is_op(j, "==") || j == region->begin) continue;
        out.push_back(make_sig_site(v, "assignment_for_comparison", j, "=",
                                    {{"direction", "comparison_to_assignment"},
                                     {"var", v.at(j - 1).text},
                                     {"value", std::string(text::trim(v.text(j + 1, region->end)))},
                                     {"condition", v.text(region->begin, region->end)}}));
      }
    }
    return out;
  }
  std::set<std::string> assigned;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    if (v.is(k, TokenKind::keyword) && v.at(k).text == "for" && v.is(k + 1, TokenKind::identifier)) {
      assigned.insert(v.at(k + 1).text);
    }
    if (!(v.is(k, TokenKind::identifier) && v.starts_line(k))) continue;
    const std::string& name = v.at(k).text;
    if (v.is_op(k + 1, "=")) {
      if (assigned.count(name) > 0) {
        std::size_t e = k + 2;
        while (e < v.size() && !v.starts_line(e)) ++e;
        out.push_back(make_sig_site(v, "assignment_for_comparison", k + 1, "==",
                                    {{"direction", "assignment_to_comparison"},
                                     {"var", name},
                                     {"value", std::string(text::trim(v.text(k + 2, e)))}}));
      }
      assigned.insert(name);
    } else if (v.is_op(k + 1, "==")) {
      out.push_back(make_sig_site(v, "assignment_for_comparison", k + 1, "=",
                                  {{"direction", "comparison_to_assignment"}, {"var", name}}));
    }
  }
  return out;
}

std::optional<std::string> guard_assignment_comparison(const MutationSite& site, std::span<const Token>, Language lang) {
  if (lang != Language::java) return std::nullopt;
  // `if (flag == true)` -> `if (flag = true)` compiles only for a lone boolean
  // variable compared against a boolean literal.
  const std::string condition = std::string(text::trim(fact(site, "condition")));
  static const std::regex kBooleanTest("^[A-Za-z_$][A-Za-z0-9_$]*\\s*==\\s*(true|false)$");
  if (!std::regex_match(condition, kBooleanTest)) {
    return "assignment in condition \"" + condition + "\" would not compile (not a lone boolean test)";
  }
  return std::nullopt;
}

std::optional<ExplanationRewrite> rewrite_assignment_comparison(const MutationSite& site,
                                                                std::span<const std::string> sentences) {
  const std::string var = fact(site, "var");
  const std::string v = escape_regex(var);
  const auto filter = mentions({var});
  std::vector<Rule> rules;
  if (fact(site, "direction") == "assignment_to_comparison") {
    rules.push_back(literal_rule("\\b(assigns|sets|stores|updates|initializes|reassigns)\\b", "compares", false, filter));
    rules.push_back(literal_rule("\\b(assigned|stored|updated|initialized|reassigned)\\b", "compared", false, filter));
    rules.push_back(literal_rule("\\bis set\\b", "is compared", false, filter));
    rules.push_back(literal_rule("\\b(assign|store|update|initialize)\\b", "compare", false, filter));
    rules.push_back(literal_rule("\\b" + v + "\\s*=(?!=)\\s*", var + " == "));
  } else {
    rules.push_back(rule("\\b" + v + " is (true|false)\\b",
                         [var](const std::smatch& m) { return var + " is assigned " + m[1].str(); }));
    rules.push_back(rule("\\b" + v + " (equals|is equal to) ",
                         [var](const std::smatch&) { return var + " is assigned "; }));
    rules.push_back(literal_rule("\\b" + v + "\\s*==\\s*", var + " = "));
    rules.push_back(literal_rule("\\b(checks|tests|compares)\\b", "assigns", false, filter));
  }
  return first_rewrite(sentences, rules);
}

std::vector<MutationSite> find_print_format(std::span<const Token> tokens, Language lang) {
  const TokenView v(tokens);
  std::vector<MutationSite> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (lang == Language::java) {
      if (!(k >= 2 && v.is_punct(k - 1, ".") && v.is(k - 2, "out") && v.is_punct(k + 1, "("))) continue;
      const std::size_t close = v.match(k + 1);
      const std::string arg = close != npos && close > k + 2 && v.is(k + 2, TokenKind::identifier) ? v.at(k + 2).text : "";
      if (v.at(k).text == "println") {
        out.push_back(make_sig_site(v, "print_format_variation", k, "print", {{"change", "no_newline"}, {"arg", arg}}));
      } else if (v.at(k).text == "print") {
        out.push_back(make_sig_site(v, "print_format_variation", k, "println", {{"change", "newline"}, {"arg", arg}}));
      }
    } else {
      if (!(v.is(k, TokenKind::identifier) && v.at(k).text == "print" && v.is_punct(k + 1, "("))) continue;
      if (k > 0 && v.is_punct(k - 1, ".")) continue;
      const std::size_t close = v.match(k + 1);
      if (close == npos) continue;
      bool has_end = false;
      for (std::size_t j = k + 2; j + 1 < close; ++j) {
        if (v.is(j, "end") && v.is_op(j + 1, "=")) has_end = true;
      }
      if (has_end) continue;
      const bool empty = close == k + 2;
      const std::string arg = !empty && v.is(k + 2, TokenKind::identifier) ? v.at(k + 2).text : "";
      out.push_back(make_sig_site(v, "print_format_variation", close, empty ? "end=\"\")" : ", end=\"\")",
                                  {{"change", "no_newline"}, {"arg", arg}}));
    }
  }
  return out;
}

std::optional<ExplanationRewrite> rewrite_print_format(const MutationSite& site, std::span<const std::string> sentences) {
  const std::string suffix = fact(site, "change") == "newline" ? " followed by a newline" : " without a trailing newline";
  const std::string arg = fact(site, "arg");
  const std::string words = "\\b(prints|printed|print|printing|outputs|output|displays|displayed|display)\\b";
  const auto append = [suffix](const std::smatch& m) { return m[1].str() + suffix; };
  std::vector<Rule> rules;
  if (!arg.empty()) rules.push_back(rule(words, append, false, mentions({arg})));
  rules.push_back(rule(words, append));
  return first_rewrite(sentences, rules);
}

std::vector<MutationOperator> make_catalog() {
  const std::vector<Language> both{Language::java, Language::python};
  std::vector<MutationOperator> ops;
  ops.push_back({"array_size_off_by_one", both, "array or list constructed one element too small",
                 "array-construction-off-by-one", find_array_size, {}, rewrite_array_size});
  ops.push_back({"loop_bound_off_by_one", both, "off-by-one error in the loop condition", "loop-bound-off-by-one",
                 find_loop_bound, {}, rewrite_loop_bound});
  ops.push_back({"relational_operator_swap", both,
                 "a relational operator is confused with a similar one (such as > versus >=)",
                 "relational-operator-confusion", find_relational, {}, rewrite_relational});
  ops.push_back({"skip_zero_index", both, "the element at index 0 is ignored (indexing assumed to start at 1)",
                 "zero-index-ignored", find_skip_zero, {}, rewrite_skip_zero});
  ops.push_back({"int_division_swap", both, "floating-point division is confused with integer division",
                 "integer-division", find_int_division, {}, rewrite_int_division});
  ops.push_back({"assignment_for_comparison", both, "the assignment operator (=) is confused with comparison (==)",
                 "assignment-comparison-confusion", find_assignment_comparison, guard_assignment_comparison,
                 rewrite_assignment_comparison});
  ops.push_back({"print_format_variation", both, "the formatting of printed output (line breaks) is misread",
                 "print-formatting", find_print_format, {}, rewrite_print_format});
  return ops;
}

}  // namespace

bool MutationOperator::applies_to(Language language) const {
  return std::find(languages.begin(), languages.end(), language) != languages.end();
}

const std::vector<MutationOperator>& builtin_operators() {
  static const std::vector<MutationOperator> catalog = make_catalog();
  return catalog;
}

const MutationOperator* find_operator(std::span<const MutationOperator> operators, std::string_view id) {
  for (const auto& op : operators) {
    if (op.id == id) return &op;
  }
  return nullptr;
}

std::vector<MutationSite> find_sites(std::span<const Token> tokens, Language language,
                                     std::span<const MutationOperator> operators) {
  std::vector<MutationSite> out;
  for (const auto& op : operators) {
    if (!op.applies_to(language) || !op.find) continue;
    for (auto& site : op.find(tokens, language)) {
      const bool duplicate = std::any_of(out.begin(), out.end(), [&](const MutationSite& s) {
        return s.operator_id == site.operator_id && s.token_index == site.token_index &&
               s.replacement == site.replacement;
      });
      if (!duplicate) out.push_back(std::move(site));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MutationSite& a, const MutationSite& b) { return a.token_index < b.token_index; });
  return out;
}

MutationOutcome apply_mutation(const CodeExample& example, const MutationSite& site,
                               std::span<const MutationOperator> operators) {
  const MutationOperator* op = find_operator(operators, site.operator_id);
  if (op == nullptr) return {std::nullopt, "unknown operator " + site.operator_id};
  if (!op->applies_to(example.language)) {
    return {std::nullopt, "operator " + op->id + " does not apply to " + std::string(to_string(example.language))};
  }

  std::vector<Token> tokens;
  try {
    tokens = lex(example.source_text, example.language);
  } catch (const LexError& e) {
    return {std::nullopt, std::string("original does not lex: ") + e.what()};
  }
  if (site.token_count == 0 || site.token_index + site.token_count > tokens.size()) {
    return {std::nullopt, "site lies outside the token stream"};
  }
  std::string original;
  for (std::size_t i = site.token_index; i < site.token_index + site.token_count; ++i) original += tokens[i].text;
  if (original != site.original) {
    return {std::nullopt, "site does not match this source (sites are computed against the original only)"};
  }

  const std::size_t byte_start = tokens[site.token_index].begin;
  const std::size_t byte_end = tokens[site.token_index + site.token_count - 1].end;
  std::string mutated = example.source_text.substr(0, byte_start) + site.replacement + example.source_text.substr(byte_end);
  if (mutated == example.source_text) return {std::nullopt, "rewrite leaves the program unchanged"};

  std::vector<Token> mutated_tokens;
  try {
    mutated_tokens = lex(mutated, example.language);
  } catch (const LexError& e) {
    return {std::nullopt, std::string("mutant does not lex: ") + e.what()};
  }
  if (const auto wf = check_well_formed(mutated_tokens, example.language); !wf.ok) {
    return {std::nullopt, "mutant is not well-formed: " + wf.diagnostic};
  }
  if (op->guard) {
    if (auto diagnostic = op->guard(site, mutated_tokens, example.language)) return {std::nullopt, *diagnostic};
  }

  std::vector<std::string> sentences;
  for (const auto& s : example.expert_explanation) sentences.push_back(text::normalize_whitespace(s));
  const auto rewrite = op->rewrite_explanation ? op->rewrite_explanation(site, sentences) : std::nullopt;
  if (!rewrite) return {std::nullopt, "no explanation sentence describes the site \"" + site.original + "\""};

  MutationRecord record;
  record.operator_id = op->id;
  record.misconception_tag = op->misconception_tag;
  record.misconception = op->description;
  record.token_index = site.token_index;
  record.byte_start = byte_start;
  record.byte_end = byte_end;
  record.original_fragment = site.original;
  record.replacement_fragment = site.replacement;
  record.context_excerpt = site.context_excerpt;
  record.sentence_index = rewrite->sentence_index;
  record.original_sentence = sentences[rewrite->sentence_index];
  record.rewritten_sentence = text::normalize_whitespace(rewrite->rewritten);
  record.mutated_code = mutated;

  // The "site" shown in feedback is the whole comparison/expression when the
  // window is a single operator token.
  sentences[rewrite->sentence_index] = record.rewritten_sentence;

  Provenance p;
  p.generator = "mutator." + op->id;
  p.mutation = std::move(record);

  SimulatedResponse r;
  r.id = example.id + "/mut-" + op->id + "-" + std::to_string(site.token_index);
  r.example_id = example.id;
  r.kind = ResponseKind::incorrect;
  r.explanation_text = text::join(sentences, " ");
  r.gold_feedback = render_gold_feedback(r.kind, p);
  r.provenance = std::move(p);
  return {Mutant{std::move(mutated), std::move(r)}, {}};
}

}  // namespace gapfinder
