// SPDX-License-Identifier: Apache-2.0
//
// Run configuration, run-directory layout and the bodies of the CLI
// subcommands. Each command reads and writes files under the run directory:
//
//   <run>/config.json      snapshot of the effective configuration
//   <run>/manifest.json    tool version and SHA-256 of every input file
//   <run>/responses/       responses.jsonl, summary.json, rejections.jsonl
//   <run>/splits/          splits.jsonl
//   <run>/cache/           provider request/response records, one per hash
//   <run>/feedback/        <model>__<method>__<split>.jsonl
//   <run>/prompts/         rendered prompts, same file names as feedback/
//   <run>/pairs/           preference pairs
//   <run>/diagnostics/     ORPO per-epoch records
//   <run>/checkpoints/     toy-model checkpoints
//   <run>/annotations/     samples.jsonl, <annotator>.session.json, labels-<annotator>.jsonl
//   <run>/reports/         metrics.csv, table1.txt, rubric.csv, table2.txt, kappa.json, report.md
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gapfinder/corpus.hpp"
#include "gapfinder/llmgate.hpp"
#include "gapfinder/metrics.hpp"
#include "gapfinder/mutator.hpp"
#include "gapfinder/orpo.hpp"
#include "gapfinder/synth.hpp"

namespace gapfinder::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

struct GenerationConfig {
  AugmentConfig augment;
  std::size_t mutants_per_example = 1;
  /// Optional per-language totals ("java", "python"). When set they replace
  /// the per-example counts and are spread over that language's examples in
  /// corpus order: each gets floor(total / n), the first total % n one more.
  /// Mutant shortfalls on one example move to later examples with spare sites.
  std::map<std::string, std::size_t> variants_total;
  std::map<std::string, std::size_t> mutants_total;
};

struct GenerationSummary {
  /// counts[language][kind]
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  std::size_t total = 0;
  std::size_t rejected_sites = 0;
};

json to_json(const GenerationSummary& s);
std::string render_summary(const GenerationSummary& s);

struct Rejection {
  std::string example_id;
  std::string operator_id;
  std::size_t token_index = 0;
  std::string diagnostic;
};

struct GenerationResult {
  std::vector<SimulatedResponse> responses;
  GenerationSummary summary;
  std::vector<Rejection> rejections;
};

/// Variants, incomplete and incorrect responses for every example, grouped by
/// example in corpus order. Mutants are picked among successful sites in
/// source order, first one per distinct operator, then the rest.
GenerationResult generate(std::span<const CodeExample> examples, const GenerationConfig& config,
                          const Thesaurus& thesaurus);

struct EmbeddingSettings {
  std::string kind = "hash";  // hash | http | none
  std::size_t dimensions = 256;
  metrics::HttpEmbeddingConfig http;
};

struct RaterSettings {
  std::size_t sample_size = 220;
  bool blind = true;
};

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> thesaurus;
  std::uint64_t seed = 0;
  GenerationConfig generation;
  SplitRatios split;
  bool stratify = true;
  std::vector<llm::ProviderConfig> providers;
  std::vector<std::string> fewshot_exemplar_ids;
  EmbeddingSettings embedding;
  orpo::OrpoConfig orpo;
  RaterSettings rater;

  void validate() const;  // throws ConfigError
  const llm::ProviderConfig& provider(const std::string& model) const;
};

/// Relative paths resolve against the config file's directory.
RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json(const json& record, const std::filesystem::path& base_dir);
json to_json(const RunConfig& config);

/// Creates the run directory and writes config.json and manifest.json.
void init_run_dir(const RunConfig& config);

std::string file_stem(const std::string& model, const std::string& method, const std::string& split);

// Subcommands. Output goes to files under the run directory; a short human
// summary is written to `out`. Each returns the process exit code.

int cmd_generate(const RunConfig& config, std::ostream& out);
int cmd_split(const RunConfig& config, std::ostream& out);
int cmd_prompt(const RunConfig& config, llm::Method method, const std::string& model, Split split, std::ostream& out);
/// Empty `feedback_files` means every file under feedback/.
int cmd_eval(const RunConfig& config, const std::vector<std::filesystem::path>& feedback_files, std::ostream& out);
int cmd_prefs(const RunConfig& config, const std::string& model, llm::Method method, Split split, std::ostream& out);
int cmd_orpo_train(const RunConfig& config, const std::vector<std::filesystem::path>& pair_files, std::ostream& out);
/// Builds annotations/samples.jsonl on first use (stratified over all
/// feedback records), then runs or resumes the annotator's session.
int cmd_annotate(const RunConfig& config, const std::string& annotator, std::istream& keys, std::ostream& out,
                 std::optional<bool> blind = std::nullopt);
int cmd_kappa(const RunConfig& config, std::ostream& out);
int cmd_report(const RunConfig& config, std::ostream& out);
int cmd_operators(std::ostream& out);

}  // namespace gapfinder::pipeline
