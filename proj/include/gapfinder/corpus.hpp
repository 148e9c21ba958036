// SPDX-License-Identifier: Apache-2.0
//
// Data model shared by the whole pipeline plus line-delimited JSON storage.
//
// Every record is one JSON object per line, UTF-8, field names exactly as the
// struct members below. Unknown fields are rejected on load.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gapfinder/io.hpp"

namespace gapfinder {

enum class Language { java, python };
enum class ResponseKind { correct_variant, incomplete, incorrect };
enum class Split { train, test, validation };

std::string_view to_string(Language lang) noexcept;
std::string_view to_string(ResponseKind kind) noexcept;
std::string_view to_string(Split split) noexcept;
Language parse_language(std::string_view s);
ResponseKind parse_response_kind(std::string_view s);
Split parse_split(std::string_view s);

struct CodeExample {
  std::string id;
  Language language = Language::java;
  std::string source_text;
  std::vector<std::string> concepts;
  std::vector<std::string> expert_explanation;

  friend bool operator==(const CodeExample&, const CodeExample&) = default;
};

/// One word-level edit applied to a benchmark sentence. `word` indexes the
/// sentence's word list as it stood when the edit was applied.
struct WordEdit {
  enum class Op { synonym, deletion, typo };
  Op op = Op::synonym;
  std::size_t sentence = 0;
  std::size_t word = 0;
  std::string original;
  std::string replacement;  // empty for deletions

  friend bool operator==(const WordEdit&, const WordEdit&) = default;
};

struct MutationRecord {
  std::string operator_id;
  std::string misconception_tag;
  std::string misconception;  // human-readable description used in feedback
  std::size_t token_index = 0;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  std::string original_fragment;
  std::string replacement_fragment;
  std::string context_excerpt;
  std::size_t sentence_index = 0;  // 0-based into the benchmark sentences
  std::string original_sentence;
  std::string rewritten_sentence;
  std::string mutated_code;

  friend bool operator==(const MutationRecord&, const MutationRecord&) = default;
};

struct Provenance {
  std::string generator;
  std::uint64_t seed = 0;
  std::map<std::string, double> parameters;
  std::vector<WordEdit> edits;
  std::vector<std::size_t> removed_sentences;  // 1-based, consecutive
  std::vector<std::string> removed_text;
  std::optional<MutationRecord> mutation;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SimulatedResponse {
  std::string id;
  std::string example_id;
  ResponseKind kind = ResponseKind::correct_variant;
  std::string explanation_text;
  std::string gold_feedback;
  Provenance provenance;

  friend bool operator==(const SimulatedResponse&, const SimulatedResponse&) = default;
};

struct SplitAssignment {
  std::string response_id;
  Split split = Split::train;

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

/// Throws DataError when a record violates its type's invariants.
void validate(const CodeExample& example);
void validate(const SimulatedResponse& response);

json to_json(const CodeExample& example);
json to_json(const SimulatedResponse& response);
json to_json(const SplitAssignment& assignment);
CodeExample code_example_from_json(const json& record);
SimulatedResponse response_from_json(const json& record);
SplitAssignment split_from_json(const json& record);

/// Loads a corpus, verifying invariants and id uniqueness.
std::vector<CodeExample> load_corpus(const std::filesystem::path& path);
std::vector<CodeExample> parse_corpus(std::istream& in, std::string_view source = "<corpus>");
void save_corpus(const std::filesystem::path& path, std::span<const CodeExample> examples);

std::vector<SimulatedResponse> load_responses(const std::filesystem::path& path);
std::vector<SimulatedResponse> parse_responses(std::istream& in, std::string_view source = "<responses>");
void save_responses(const std::filesystem::path& path, std::span<const SimulatedResponse> responses);
std::string serialize_responses(std::span<const SimulatedResponse> responses);

std::vector<SplitAssignment> load_splits(const std::filesystem::path& path);
void save_splits(const std::filesystem::path& path, std::span<const SplitAssignment> splits);

/// Rule-based sentence splitter.
///
/// A boundary falls after `.`, `!` or `?` (plus any closing quotes or
/// brackets) when the next non-space character is an uppercase letter or the
/// text ends. Short abbreviations such as "e.g." never end a sentence.
/// Sentences come back whitespace-normalized, so joining them with single
/// spaces reproduces `normalize_whitespace(text)`.
std::vector<std::string> segment_sentences(std::string_view text);

struct SplitRatios {
  double train = 0.75;
  double test = 0.20;
  double validation = 0.05;
};

/// Deterministic train/test/validation split.
///
/// With `stratify`, responses are grouped by (language, kind); per-stratum
/// counts come from `apportion_table`, so every stratum is split at the
/// configured ratios and the overall counts equal the largest-remainder
/// apportionment of the whole set. Within a stratum, members (in input order)
/// are shuffled with `Pcg32::for_key(seed, "split/<language>/<kind>")` and
/// dealt train-first. Assignments come back in input order.
std::vector<SplitAssignment> split_dataset(std::span<const SimulatedResponse> responses,
                                           std::span<const CodeExample> examples, SplitRatios ratios,
                                           std::uint64_t seed, bool stratify = true);

/// Index from id to record; throws DataError on duplicates.
std::map<std::string, const CodeExample*> index_by_id(std::span<const CodeExample> examples);

}  // namespace gapfinder
