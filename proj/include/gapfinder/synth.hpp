// SPDX-License-Identifier: Apache-2.0
//
// Simulated student explanations derived from an expert benchmark: noisy but
// correct variants, and incomplete explanations with two consecutive sentences
// removed. Misconception-based (incorrect) explanations live in mutator.hpp.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gapfinder/corpus.hpp"

namespace gapfinder {

struct AugmentConfig {
  double word_deletion_rate = 0.1;
  double synonym_replacement_rate = 0.1;
  double char_typo_rate = 0.1;
  std::size_t variants_per_explanation = 2;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a rate leaves [0, 1] or the variant count is 0.
  void validate() const;
};

/// Static word -> synonyms table. File format: `word<TAB>syn1,syn2,...` per
/// line; `#` starts a comment line. Lookup is lowercase exact match.
class Thesaurus {
 public:
  Thesaurus() = default;
  static Thesaurus load(const std::filesystem::path& path);
  static Thesaurus parse(std::istream& in, std::string_view source = "<thesaurus>");
  /// The thesaurus shipped under data/.
  static Thesaurus bundled();

  void add(std::string word, std::vector<std::string> synonyms);
  const std::vector<std::string>* lookup(std::string_view lowercase_word) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

/// The unaltered expert explanation as one string: whitespace-normalized
/// sentences joined by single spaces.
std::string benchmark_text(const CodeExample& example);

/// Positive one-liner used as gold feedback for correct variants.
inline constexpr std::string_view kPositiveFeedback =
    "Your explanation is complete and correct, aside from minor typos or wording issues. Well done!";

/// Deterministic gold feedback for a response kind. Throws DataError when the
/// provenance payload does not match the kind.
std::string render_gold_feedback(ResponseKind kind, const Provenance& payload);

/// Correct-with-noise variants of the benchmark explanation.
///
/// Each variant draws from `Pcg32::for_key(config.seed, "<example id>#cv<index>")`.
/// Edits run in three passes over each sentence's word list, in this order:
///   1. synonym replacement, 2. word deletion, 3. character typos.
/// A pass whose rate is zero is skipped without consuming draws. Within a
/// pass, sentences and words are visited in order; each eligible word costs
/// one `uniform()` draw and is edited when the draw is below the rate.
/// Eligible words are neither the first nor the last word of their sentence
/// and contain no `.`, `!` or `?`. A synonym edit then draws `bounded(#synonyms)`
/// and only applies to words with a thesaurus entry (no draw otherwise). A
/// typo edit needs an interior ASCII letter; it draws `bounded(#positions)`
/// then `bounded(25)` to pick a lowercase letter different from the original.
///
/// Variants are numbered from `first_index`; `count` defaults to
/// `config.variants_per_explanation`.
std::vector<SimulatedResponse> gen_correct_variants(const CodeExample& example, const AugmentConfig& config,
                                                    const Thesaurus& thesaurus,
                                                    std::optional<std::size_t> count = std::nullopt,
                                                    std::size_t first_index = 0);

/// One response per pair of consecutive sentences (n - 1 of them). Returns an
/// empty list, with a logged warning, when the benchmark has fewer than 3
/// sentences.
std::vector<SimulatedResponse> gen_incomplete(const CodeExample& example);

/// Rebuilds a response's explanation from the benchmark and its provenance.
/// Generation is invertible: this equals `response.explanation_text`.
std::string reconstruct_explanation(const CodeExample& example, const SimulatedResponse& response);

}  // namespace gapfinder
