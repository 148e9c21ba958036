// SPDX-License-Identifier: Apache-2.0
//
// Human evaluation: stratified sampling, a resumable terminal annotation
// loop over three binary rubric judgments, Cohen's kappa and rubric tables.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gapfinder/io.hpp"

namespace gapfinder::rater {

enum class Dimension { correct, diagnostic, positive };
std::string_view to_string(Dimension d) noexcept;
Dimension parse_dimension(std::string_view s);
inline constexpr Dimension kDimensions[] = {Dimension::correct, Dimension::diagnostic, Dimension::positive};

/// One item shown to annotators: a response plus one model's feedback.
struct Sample {
  std::string sample_id;
  std::string response_id;
  std::string language;
  std::string kind;
  std::string model;
  std::string method;
  std::string code;
  std::string student_explanation;
  std::string gold_feedback;
  std::string model_feedback;

  friend bool operator==(const Sample&, const Sample&) = default;
};

json to_json(const Sample& s);
Sample sample_from_json(const json& r);
std::vector<Sample> load_samples(const std::filesystem::path& path);
void save_samples(const std::filesystem::path& path, std::span<const Sample> samples);

struct RubricLabel {
  std::string sample_id;
  std::string annotator_id;
  bool correct = false;
  bool diagnostic = false;
  bool positive = false;
  std::string timestamp;

  bool get(Dimension d) const noexcept;
  friend bool operator==(const RubricLabel&, const RubricLabel&) = default;
};

json to_json(const RubricLabel& l);
RubricLabel label_from_json(const json& r);
/// Missing file reads as no labels. Throws DataError on a repeated
/// (sample_id, annotator_id).
std::vector<RubricLabel> load_labels(const std::filesystem::path& path);

/// Indices of a stratified sample, ascending. `strata[i]` is the stratum of
/// population member i; strata are ordered by first appearance. Quotas come
/// from largest-remainder apportionment of n over stratum sizes; a quota
/// above its stratum's size is capped and the excess reapportioned (with a
/// warning). Members are picked by a shuffle seeded with
/// `Pcg32::for_key(seed, "sample/" + stratum)`. Throws ConfigError when n
/// exceeds the population.
std::vector<std::size_t> stratified_sample(std::span<const std::string> strata, std::size_t n, std::uint64_t seed);

struct Session {
  std::string annotator_id;
  std::size_t cursor = 0;
  bool completed = false;
  bool blind = true;
  std::filesystem::path samples_path;
  std::filesystem::path labels_path;
};

json to_json(const Session& s);

/// Opens or resumes the session stored at `session_path`. On resume the
/// cursor is moved past any sample this annotator already labeled, so a crash
/// between persisting a label and saving the cursor never repeats work.
Session open_session(const std::filesystem::path& session_path, const std::string& annotator_id,
                     const std::filesystem::path& samples_path, const std::filesystem::path& labels_path,
                     bool blind = true);
void save_session(const std::filesystem::path& session_path, const Session& session);

/// Screen text for one sample. Blind mode hides gold feedback, model name and
/// prompting method.
std::string render_sample(const Sample& sample, std::size_t position, std::size_t total, bool blind);

struct AnnotateOutcome {
  std::size_t labeled = 0;
  std::size_t skipped = 0;
  bool quit = false;  // 'q' or end of input before the last sample
};

/// Key protocol, one key per judgment (whitespace ignored):
///   y = yes, n = no, s = skip this sample, q = save and quit.
/// Judgments are asked in order correct, diagnostic, positive. Any other key
/// re-prompts without persisting. Each label is appended to the labels file
/// before the cursor advances and the session file is rewritten.
AnnotateOutcome annotate(Session& session, const std::filesystem::path& session_path, std::span<const Sample> samples,
                         std::istream& keys, std::ostream& screen,
                         const std::function<std::string()>& clock = {});

struct Contingency {
  long long yy = 0, yn = 0, ny = 0, nn = 0;  // first letter: annotator a
};

/// Pairs labels by sample id. Throws DataError unless both annotators
/// labeled the same sample set.
Contingency contingency(std::span<const RubricLabel> a, std::span<const RubricLabel> b, Dimension d);

/// kappa = (p_o - p_e) / (1 - p_e), evaluated in integer arithmetic as
/// (N*agree - S) / (N^2 - S). When p_e = 1 the value is 1 if p_o = 1;
/// otherwise DataError.
double cohen_kappa(const Contingency& table);
double cohen_kappa(std::span<const RubricLabel> a, std::span<const RubricLabel> b, Dimension d);

struct PairwiseKappa {
  std::string annotator_a;
  std::string annotator_b;
  std::map<Dimension, double> kappa;
};

struct AgreementReport {
  std::vector<std::string> annotators;  // sorted
  std::vector<PairwiseKappa> pairs;
  std::map<Dimension, double> mean;  // mean over all annotator pairs
};

/// Restricted to samples labeled by every annotator. Needs two or more.
AgreementReport agreement(std::span<const RubricLabel> labels);

struct RubricRow {
  std::string model;
  std::string method;
  std::string language;
  std::size_t samples = 0;
  double correct = 0;
  double diagnostic = 0;
  double positive = 0;
};

/// Per-sample means over annotators, then per-(model, method, language)
/// means over samples. Groups follow the first appearance in `samples`.
/// Labels for unknown sample ids raise DataError.
std::vector<RubricRow> aggregate_rubric(std::span<const RubricLabel> labels, std::span<const Sample> samples);

/// One row per (model, method); column groups Java | Python, each
/// (Correct, Diagnostic, Positive), two decimals.
std::string render_table2(std::span<const RubricRow> rows);
std::string rubric_csv(std::span<const RubricRow> rows);

}  // namespace gapfinder::rater
