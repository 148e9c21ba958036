// SPDX-License-Identifier: Apache-2.0
//
// Misconception injection: a lossless Java/Python lexer, a catalog of
// token-window rewrite operators, and the code/explanation co-mutation that
// produces incorrect student explanations.
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gapfinder/corpus.hpp"
#include "gapfinder/error.hpp"

namespace gapfinder {

enum class TokenKind {
  identifier,
  keyword,
  number,
  string_literal,
  operator_,
  punctuation,
  comment,
  whitespace,
  newline
};

std::string_view to_string(TokenKind kind) noexcept;

struct Token {
  TokenKind kind = TokenKind::whitespace;
  std::string text;
  std::size_t begin = 0;  // byte offsets into the source
  std::size_t end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

class LexError : public DataError {
 public:
  LexError(const std::string& what, std::size_t offset) : DataError(what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Lossless tokenization: concatenating the token texts reproduces `source`
/// byte for byte. Throws LexError on unterminated strings or block comments.
std::vector<Token> lex(std::string_view source, Language language);

std::string detokenize(std::span<const Token> tokens);

struct WellFormedness {
  bool ok = true;
  std::string diagnostic;
};

/// Balanced brackets for both languages; for Python also a consistent
/// indentation stack (indent only after a line ending in `:`, dedent only to
/// an enclosing level).
WellFormedness check_well_formed(std::span<const Token> tokens, Language language);

/// A proposed single-window rewrite. `token_count` tokens starting at
/// `token_index` are replaced by `replacement`. `facts` carries what the
/// operator learned about the site (loop variable, bound, ...) for the
/// explanation rewrite.
struct MutationSite {
  std::string operator_id;
  std::size_t token_index = 0;
  std::size_t token_count = 1;
  std::string original;
  std::string replacement;
  std::string context_excerpt;  // the source line(s) holding the site
  std::map<std::string, std::string> facts;

  friend bool operator==(const MutationSite&, const MutationSite&) = default;
};

struct ExplanationRewrite {
  std::size_t sentence_index = 0;
  std::string rewritten;
};

struct MutationOperator {
  std::string id;
  std::vector<Language> languages;
  std::string description;
  std::string misconception_tag;
  /// Site predicate + rewrite: every window this operator can rewrite.
  std::function<std::vector<MutationSite>(std::span<const Token>, Language)> find;
  /// Optional semantic guard run on the rewritten program; returns a
  /// diagnostic when the mutant would no longer compile/run as a program.
  std::function<std::optional<std::string>(const MutationSite&, std::span<const Token>, Language)> guard;
  /// Maps the benchmark sentences to the incorrect counterpart of the one
  /// sentence describing the site, or nullopt when no sentence matches.
  std::function<std::optional<ExplanationRewrite>(const MutationSite&, std::span<const std::string>)>
      rewrite_explanation;

  bool applies_to(Language language) const;
};

/// The seven misconception families: array_size_off_by_one,
/// loop_bound_off_by_one, relational_operator_swap, skip_zero_index,
/// int_division_swap, assignment_for_comparison, print_format_variation.
const std::vector<MutationOperator>& builtin_operators();

const MutationOperator* find_operator(std::span<const MutationOperator> operators, std::string_view id);

/// All sites of the given operators, in source order (ties: catalog order).
std::vector<MutationSite> find_sites(std::span<const Token> tokens, Language language,
                                     std::span<const MutationOperator> operators);

struct Mutant {
  std::string mutated_code;
  SimulatedResponse response;
};

/// Either a mutant or the reason the site was rejected.
struct MutationOutcome {
  std::optional<Mutant> mutant;
  std::string diagnostic;

  explicit operator bool() const noexcept { return mutant.has_value(); }
};

/// Applies one site to the example's original source and co-mutates the
/// explanation. Rejections (stale site, broken well-formedness, guard failure,
/// no matching explanation sentence) are reported, never silently altered.
MutationOutcome apply_mutation(const CodeExample& example, const MutationSite& site,
                               std::span<const MutationOperator> operators = builtin_operators());

}  // namespace gapfinder
