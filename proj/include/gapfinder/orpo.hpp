// SPDX-License-Identifier: Apache-2.0
//
// Odds-ratio preference optimization on a toy character-level model.
//
// For a prompt x and response y of m tokens:
//   avg_loglik   a(y)     = (1/m) * sum_t log p(y_t | x, y_<t)
//   probability  P(y)     = clamp(exp(a(y)), eps, 1 - eps)
//   odds         odds(y)  = P / (1 - P)
//   odds ratio   OR       = odds(y_w) / odds(y_l)
//   L_SFT                 = -a(y_w)
//   L_OR                  = -log sigmoid(OR)        (default)
//                         = -log sigmoid(log OR)    (inner_log = true)
//   L                     = mean(L_SFT) + lambda * mean(L_OR)   over the batch
//
// The default applies the sigmoid to the odds ratio itself; `inner_log`
// switches to the log-odds-ratio form. The two are not equivalent and the
// choice is left to the caller.
//
// Optimizer: AdamW with bias correction and decoupled weight decay,
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
//   theta <- theta - lr * ( m/(1-b1^t) / (sqrt(v/(1-b2^t)) + e) + wd * theta ).
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gapfinder/error.hpp"
#include "gapfinder/io.hpp"

namespace gapfinder::orpo {

using TokenSeq = std::vector<std::size_t>;

/// Code-point vocabulary. Index 0 is reserved for the begin/padding symbol.
class Vocabulary {
 public:
  Vocabulary() : symbols_{U'\0'} {}
  /// Sorted code points of `texts`. Throws DataError when more than
  /// `max_size` symbols (padding included) would be needed.
  static Vocabulary build(std::span<const std::string> texts, std::size_t max_size = 512);
  static Vocabulary from_symbols(std::vector<char32_t> symbols_without_padding);

  std::size_t size() const noexcept { return symbols_.size(); }
  /// Throws DataError naming the first character outside the vocabulary.
  TokenSeq encode(std::string_view text) const;
  std::string decode(std::span<const std::size_t> tokens) const;
  const std::vector<char32_t>& symbols() const noexcept { return symbols_; }

 private:
  std::vector<char32_t> symbols_;
  std::map<char32_t, std::size_t> index_;
};

/// Fixed-context softmax predictor. Each of the `context_width` previous
/// tokens (padding before the start) selects one row of `theta`; a bias row
/// is always active. Logits are the sum of the active rows.
class ToyModel {
 public:
  ToyModel() = default;
  ToyModel(Vocabulary vocab, std::size_t context_width);

  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  std::size_t context_width() const noexcept { return k_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::size_t rows() const noexcept { return k_ * vocab_.size() + 1; }

  std::vector<double>& theta() noexcept { return theta_; }
  const std::vector<double>& theta() const noexcept { return theta_; }

  /// Active parameter rows for predicting position `pos` of `seq`.
  std::vector<std::size_t> active_rows(std::span<const std::size_t> seq, std::size_t pos) const;
  /// Softmax over the vocabulary for that position.
  std::vector<double> distribution(std::span<const std::size_t> seq, std::size_t pos) const;

 private:
  Vocabulary vocab_;
  std::size_t k_ = 0;
  std::vector<double> theta_;  // rows() x vocab_size(), row-major
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Reference rate for full-size models; the toy model trains with a scaled
/// copy (see OrpoConfig::learning_rate).
inline constexpr double kReferenceLearningRate = 8e-6;
inline constexpr double kToyLearningRateScale = 2500.0;

struct OrpoConfig {
  double lambda = 0.1;
  double learning_rate = kReferenceLearningRate * kToyLearningRateScale;
  std::size_t batch_size = 2;
  std::size_t epochs = 3;
  double probability_clamp_epsilon = 1e-6;
  bool inner_log = false;
  std::size_t context_width = 3;
  double init_scale = 0.01;
  std::size_t max_vocabulary = 512;
  AdamWConfig adamw;

  void validate() const;  // throws ConfigError
};

json to_json(const OrpoConfig& config);
OrpoConfig orpo_config_from_json(const json& record);

/// Counts probability clamps as they happen.
struct ClampStats {
  std::size_t token_clamps = 0;
  std::size_t sequence_clamps = 0;
};

double avg_loglik(const ToyModel& model, std::span<const std::size_t> x, std::span<const std::size_t> y,
                  double epsilon = 1e-6, ClampStats* clamps = nullptr);
double seq_probability(double avg_loglik, double epsilon = 1e-6, ClampStats* clamps = nullptr);
double seq_probability(const ToyModel& model, std::span<const std::size_t> x, std::span<const std::size_t> y,
                       double epsilon = 1e-6);
double odds(double p);
double odds_ratio(const ToyModel& model, std::span<const std::size_t> x, std::span<const std::size_t> y_w,
                  std::span<const std::size_t> y_l, double epsilon = 1e-6);

/// -log sigmoid(z), computed stably.
double neg_log_sigmoid(double z);
/// L_OR for one pair from its odds ratio.
double or_loss(double odds_ratio, bool inner_log = false);

struct Example {
  TokenSeq x;
  TokenSeq y_w;
  TokenSeq y_l;
};

struct LossParts {
  double total = 0;
  double l_sft = 0;
  double l_or = 0;
  double mean_log_or = 0;
};

LossParts orpo_loss(const ToyModel& model, std::span<const Example> batch, double lambda, double epsilon = 1e-6,
                    bool inner_log = false, ClampStats* clamps = nullptr);

/// Analytic gradient of the total loss, shaped like theta. A clamped token
/// or sequence probability contributes zero gradient through the clamp.
std::vector<double> gradient(const ToyModel& model, std::span<const Example> batch, double lambda,
                             double epsilon = 1e-6, bool inner_log = false);

/// Central finite differences over every parameter, as max over parameters
/// of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
double gradient_check(ToyModel model, std::span<const Example> batch, double lambda, double step = 1e-5,
                      double epsilon = 1e-6, bool inner_log = false);

struct EpochDiagnostics {
  std::size_t epoch = 0;  // 0: before training
  double l_sft = 0;
  double l_or = 0;
  double mean_log_or = 0;
  std::size_t clamps = 0;
};

json to_json(const EpochDiagnostics& d);

struct TrainingText {
  std::string prompt;
  std::string chosen;
  std::string rejected;
};

struct TrainResult {
  ToyModel model;
  EpochDiagnostics initial;
  std::vector<EpochDiagnostics> epochs;  // one per epoch, 1-based
};

/// Builds the vocabulary from all texts, initializes theta uniformly in
/// [-init_scale, init_scale] from `seed`, and runs mini-batch AdamW. Batches
/// follow a per-epoch seeded shuffle. Diagnostics are corpus means.
TrainResult train_toy(std::span<const TrainingText> pairs, const OrpoConfig& config, std::uint64_t seed);

/// Vocabulary, context width and theta as one JSON document.
json checkpoint_json(const ToyModel& model);
ToyModel model_from_checkpoint(const json& record);

}  // namespace gapfinder::orpo
