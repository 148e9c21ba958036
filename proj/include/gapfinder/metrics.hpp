// SPDX-License-Identifier: Apache-2.0
//
// Feedback similarity metrics (chrF, METEOR, BERTScore, sentence-embedding
// cosine) and the per-(model, method, language) report built from them.
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gapfinder/error.hpp"

namespace gapfinder::metrics {

/// Character n-gram F-score. Text is whitespace-collapsed and trimmed, then
/// split into Unicode code points. Precision and recall are each averaged
/// over the orders 1..max_n for which the reference has n-grams, then
/// combined as F_beta. Both empty gives 1; empty reference alone gives 0.
double chrf(std::string_view hypothesis, std::string_view reference, int max_n = 6, double beta = 2.0);

/// Lowercased word and punctuation tokens.
std::vector<std::string> meteor_tokenize(std::string_view text);

/// Suffix-stripping stemmer used by METEOR's second matching stage.
std::string stem(std::string_view word);

struct MeteorDetail {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0;
  double recall = 0;
  double fmean = 0;
  double penalty = 0;
  double score = 0;
};

/// Two-stage (exact, then stem) unigram alignment. Each stage walks the
/// hypothesis left to right and links a token to the first still-unmatched
/// reference token that agrees. Fmean = 10PR/(R+9P); the fragmentation
/// penalty is 0.5 * (chunks/matches)^3.
MeteorDetail meteor_detail(std::string_view hypothesis, std::string_view reference);
double meteor(std::string_view hypothesis, std::string_view reference);

using Vector = std::vector<double>;

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Greedy max-cosine matching without idf weights or baseline rescaling.
/// Throws DataError on an empty side or a zero vector.
PRF bertscore(std::span<const Vector> hypothesis_tokens, std::span<const Vector> reference_tokens);

/// Cosine similarity. Throws DataError on a zero vector or size mismatch.
double use_similarity(const Vector& hypothesis, const Vector& reference);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  /// Unit-norm sentence vector.
  virtual Vector sentence_embed(std::string_view text) const = 0;
  /// Unit-norm contextual vector per token; may be empty for empty text.
  virtual std::vector<std::pair<std::string, Vector>> token_embed(std::string_view text) const = 0;
};

/// Deterministic pseudo-embeddings from hashed character trigrams. Token
/// vectors mix in their neighbours so repeated words differ by context.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dimensions = 256) : dims_(dimensions) {}
  std::string name() const override { return "hash-" + std::to_string(dims_); }
  Vector sentence_embed(std::string_view text) const override;
  std::vector<std::pair<std::string, Vector>> token_embed(std::string_view text) const override;

 private:
  std::size_t dims_;
};

struct HttpEmbeddingConfig {
  /// OpenAI-style embeddings endpoint: POST {"model", "input": [text]} and
  /// read data[0].embedding.
  std::string sentence_url;
  std::string sentence_model;
  /// Token endpoint: POST {"model", "text"} returning
  /// {"tokens": [...], "embeddings": [[...], ...]}.
  std::string token_url;
  std::string token_model;
  std::string auth_token_env;
  double request_timeout_seconds = 60.0;
};

std::unique_ptr<EmbeddingProvider> make_http_embedding_provider(HttpEmbeddingConfig config);

struct MetricScore {
  double chrf = 0;
  double meteor = 0;
  std::optional<double> use_sim;
  std::optional<double> bertscore_f1;
};

/// All four metrics for one pair; embedding metrics only when `provider` is
/// set. Empty token lists on both sides score BERTScore 1, on one side 0.
MetricScore score_pair(std::string_view generated, std::string_view gold, const EmbeddingProvider* provider);

struct FeedbackRecord {
  std::string generated;
  std::string gold;
  std::string model;
  std::string method;
  std::string language;
};

struct ReportRow {
  std::string model;
  std::string method;
  std::string language;
  std::size_t count = 0;
  double chrf = 0;
  double meteor = 0;
  std::optional<double> use_sim;
  std::optional<double> bertscore_f1;
};

struct MetricReport {
  std::vector<ReportRow> rows;  // groups in first-appearance order
};

/// Arithmetic means per (model, method, language). Scoring runs on up to
/// `threads` workers (0: hardware concurrency); sums are accumulated in record
/// order, so the result does not depend on the thread count.
MetricReport evaluate_run(std::span<const FeedbackRecord> records, const EmbeddingProvider* provider,
                          unsigned threads = 0);

/// model,method,language,n,chrf,meteor,use,bertscore with full precision;
/// unavailable values are empty cells.
std::string report_csv(const MetricReport& report);

/// Plain-text table: one row per (model, method); column groups Python | Java,
/// each (chrF, METEOR, USE, BERTScr), two decimals, "n/a" when unavailable.
std::string render_table1(const MetricReport& report);

}  // namespace gapfinder::metrics
