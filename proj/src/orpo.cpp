// SPDX-License-Identifier: Apache-2.0
#include "gapfinder/orpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "gapfinder/random.hpp"
#include "gapfinder/text.hpp"

namespace gapfinder::orpo {

namespace {

std::string describe(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return "'" + text::utf8_encode(cp) + "' (" + buf + ")";
}

}  // namespace

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t max_size) {
  std::set<char32_t> seen;
  for (const auto& t : texts) {
    for (char32_t cp : text::utf8_decode(t)) {
      if (cp == U'\0') throw DataError("NUL characters cannot be encoded");
      if (seen.insert(cp).second && seen.size() + 1 > max_size) {
        throw DataError("vocabulary overflow at character " + describe(cp) + ": more than " +
                        std::to_string(max_size) + " symbols");
      }
    }
  }
  return from_symbols(std::vector<char32_t>(seen.begin(), seen.end()));
}

Vocabulary Vocabulary::from_symbols(std::vector<char32_t> symbols) {
  Vocabulary v;
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  for (char32_t cp : symbols) {
    if (cp == U'\0') throw DataError("symbol list contains the reserved padding symbol");
    v.index_[cp] = v.symbols_.size();
    v.symbols_.push_back(cp);
  }
  return v;
}

TokenSeq Vocabulary::encode(std::string_view input) const {
  TokenSeq out;
  for (char32_t cp : text::utf8_decode(input)) {
    const auto it = index_.find(cp);
    if (it == index_.end()) throw DataError("character " + describe(cp) + " is not in the vocabulary");
    out.push_back(it->second);
  }
  return out;
}

std::string Vocabulary::decode(std::span<const std::size_t> tokens) const {
  std::string out;
  for (auto t : tokens) {
    if (t == 0 || t >= symbols_.size()) continue;
    out += text::utf8_encode(symbols_[t]);
  }
  return out;
}

ToyModel::ToyModel(Vocabulary vocab, std::size_t context_width)
    : vocab_(std::move(vocab)), k_(context_width), theta_((context_width * vocab_.size() + 1) * vocab_.size(), 0.0) {}

std::vector<std::size_t> ToyModel::active_rows(std::span<const std::size_t> seq, std::size_t pos) const {
  const std::size_t v = vocab_.size();
  std::vector<std::size_t> out;
  out.reserve(k_ + 1);
  for (std::size_t j = 1; j <= k_; ++j) {
    const std::size_t tok = pos >= j ? seq[pos - j] : 0;
    out.push_back((j - 1) * v + tok);
  }
  out.push_back(k_ * v);
  return out;
}

std::vector<double> ToyModel::distribution(std::span<const std::size_t> seq, std::size_t pos) const {
  const std::size_t v = vocab_.size();
  std::vector<double> logits(v, 0.0);
  for (std::size_t row : active_rows(seq, pos)) {
    const double* r = theta_.data() + row * v;
    for (std::size_t c = 0; c < v; ++c) logits[c] += r[c];
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    z += l;
  }
  for (double& l : logits) l /= z;
  return logits;
}

void OrpoConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("orpo lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("orpo learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("orpo batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("orpo epochs must be >= 1");
  if (!(probability_clamp_epsilon > 0.0 && probability_clamp_epsilon < 0.5)) {
    throw ConfigError("orpo probability_clamp_epsilon must lie in (0, 0.5)");
  }
  if (context_width < 1) throw ConfigError("orpo context_width must be >= 1");
  if (!(init_scale >= 0.0)) throw ConfigError("orpo init_scale must be >= 0");
  if (max_vocabulary < 2) throw ConfigError("orpo max_vocabulary must be >= 2");
}

json to_json(const OrpoConfig& c) {
  return json{{"lambda", c.lambda},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"probability_clamp_epsilon", c.probability_clamp_epsilon},
              {"inner_log", c.inner_log},
              {"context_width", c.context_width},
              {"init_scale", c.init_scale},
              {"max_vocabulary", c.max_vocabulary},
              {"adamw",
               {{"beta1", c.adamw.beta1},
                {"beta2", c.adamw.beta2},
                {"epsilon", c.adamw.epsilon},
                {"weight_decay", c.adamw.weight_decay}}}};
}

OrpoConfig orpo_config_from_json(const json& r) {
  if (!r.is_object()) throw ConfigError("orpo config must be an object");
  try {
    io::check_fields(r,
                     {"lambda", "learning_rate", "batch_size", "epochs", "probability_clamp_epsilon", "inner_log",
                      "context_width", "init_scale", "max_vocabulary", "adamw"},
                     {}, "orpo config");
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  OrpoConfig c;
  try {
    c.lambda = r.value("lambda", c.lambda);
    c.learning_rate = r.value("learning_rate", c.learning_rate);
    c.batch_size = r.value("batch_size", c.batch_size);
    c.epochs = r.value("epochs", c.epochs);
    c.probability_clamp_epsilon = r.value("probability_clamp_epsilon", c.probability_clamp_epsilon);
    c.inner_log = r.value("inner_log", c.inner_log);
    c.context_width = r.value("context_width", c.context_width);
    c.init_scale = r.value("init_scale", c.init_scale);
    c.max_vocabulary = r.value("max_vocabulary", c.max_vocabulary);
    if (r.contains("adamw")) {
      const json& a = r.at("adamw");
      c.adamw.beta1 = a.value("beta1", c.adamw.beta1);
      c.adamw.beta2 = a.value("beta2", c.adamw.beta2);
      c.adamw.epsilon = a.value("epsilon", c.adamw.epsilon);
      c.adamw.weight_decay = a.value("weight_decay", c.adamw.weight_decay);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("orpo config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

namespace {

TokenSeq concat(std::span<const std::size_t> x, std::span<const std::size_t> y) {
  TokenSeq seq(x.begin(), x.end());
  seq.insert(seq.end(), y.begin(), y.end());
  return seq;
}

}  // namespace

double avg_loglik(const ToyModel& model, std::span<const std::size_t> x, std::span<const std::size_t> y,
                  double epsilon, ClampStats* clamps) {
  if (y.empty()) throw DataError("avg_loglik needs a non-empty output sequence");
  const TokenSeq seq = concat(x, y);
  double sum = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    double p = model.distribution(seq, x.size() + t)[y[t]];
    if (p < epsilon) {
      p = epsilon;
      if (clamps != nullptr) ++clamps->token_clamps;
    }
    sum += std::log(p);
  }
  return sum / static_cast<double>(y.size());
}

double seq_probability(double avg, double epsilon, ClampStats* clamps) {
  const double p = std::exp(avg);
  const double c = std::clamp(p, epsilon, 1.0 - epsilon);
  if (c != p && clamps != nullptr) ++clamps->sequence_clamps;
  return c;
}

double seq_probability(const ToyModel& model, std::span<const std::size_t> x, std::span<const std::size_t> y,
                       double epsilon) {
  return seq_probability(avg_loglik(model, x, y, epsilon), epsilon);
}

double odds(double p) { return p / (1.0 - p); }

double odds_ratio(const ToyModel& model, std::span<const std::size_t> x, std::span<const std::size_t> y_w,
                  std::span<const std::size_t> y_l, double epsilon) {
  return odds(seq_probability(model, x, y_w, epsilon)) / odds(seq_probability(model, x, y_l, epsilon));
}

double neg_log_sigmoid(double z) { return z >= 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double log_odds(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

double or_loss(double ratio, bool inner_log) { return neg_log_sigmoid(inner_log ? std::log(ratio) : ratio); }

LossParts orpo_loss(const ToyModel& model, std::span<const Example> batch, double lambda, double epsilon,
                    bool inner_log, ClampStats* clamps) {
  if (batch.empty()) throw DataError("ORPO loss needs a non-empty batch");
  LossParts out;
  for (const auto& e : batch) {
    const double a_w = avg_loglik(model, e.x, e.y_w, epsilon, clamps);
    const double a_l = avg_loglik(model, e.x, e.y_l, epsilon, clamps);
    const double log_or =
        log_odds(seq_probability(a_w, epsilon, clamps)) - log_odds(seq_probability(a_l, epsilon, clamps));
    out.l_sft += -a_w;
    out.l_or += neg_log_sigmoid(inner_log ? log_or : std::exp(log_or));
    out.mean_log_or += log_or;
  }
  const auto n = static_cast<double>(batch.size());
  out.l_sft /= n;
  out.l_or /= n;
  out.mean_log_or /= n;
  out.total = out.l_sft + lambda * out.l_or;
  return out;
}

namespace {

// grad += coef * d avg_loglik(x, y) / d theta
void accumulate(const ToyModel& model, std::span<const std::size_t> x, std::span<const std::size_t> y, double coef,
                double epsilon, std::vector<double>& grad) {
  if (coef == 0.0) return;
  const std::size_t v = model.vocab_size();
  const TokenSeq seq = concat(x, y);
  const double scale = coef / static_cast<double>(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    const std::size_t pos = x.size() + t;
    const auto dist = model.distribution(seq, pos);
    if (dist[y[t]] < epsilon) continue;
    for (std::size_t row : model.active_rows(seq, pos)) {
      double* g = grad.data() + row * v;
      for (std::size_t c = 0; c < v; ++c) g[c] -= scale * dist[c];
      g[y[t]] += scale;
    }
  }
}

}  // namespace

std::vector<double> gradient(const ToyModel& model, std::span<const Example> batch, double lambda, double epsilon,
                             bool inner_log) {
  if (batch.empty()) throw DataError("ORPO gradient needs a non-empty batch");
  std::vector<double> grad(model.theta().size(), 0.0);
  const auto n = static_cast<double>(batch.size());
  for (const auto& e : batch) {
    const double a_w = avg_loglik(model, e.x, e.y_w, epsilon);
    const double a_l = avg_loglik(model, e.x, e.y_l, epsilon);
    const double raw_w = std::exp(a_w), raw_l = std::exp(a_l);
    const double p_w = std::clamp(raw_w, epsilon, 1.0 - epsilon);
    const double p_l = std::clamp(raw_l, epsilon, 1.0 - epsilon);
    const double log_or = log_odds(p_w) - log_odds(p_l);
    // d L_OR / d log OR
    double d_log_or = 0;
    if (inner_log) {
      d_log_or = -(1.0 - sigmoid(log_or));
    } else {
      const double ratio = std::exp(log_or);
      d_log_or = -(1.0 - sigmoid(ratio)) * ratio;
    }
    // d log odds / d a = 1 / (1 - P) while unclamped
    const double dw = p_w == raw_w ? 1.0 / (1.0 - p_w) : 0.0;
    const double dl = p_l == raw_l ? 1.0 / (1.0 - p_l) : 0.0;
    const double coef_w = (-1.0 + lambda * d_log_or * dw) / n;
    const double coef_l = (-lambda * d_log_or * dl) / n;
    accumulate(model, e.x, e.y_w, coef_w, epsilon, grad);
    accumulate(model, e.x, e.y_l, coef_l, epsilon, grad);
  }
  return grad;
}

double gradient_check(ToyModel model, std::span<const Example> batch, double lambda, double step, double epsilon,
                      bool inner_log) {
  const auto analytic = gradient(model, batch, lambda, epsilon, inner_log);
  double worst = 0;
  auto& theta = model.theta();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    const double up = orpo_loss(model, batch, lambda, epsilon, inner_log).total;
    theta[i] = saved - step;
    const double down = orpo_loss(model, batch, lambda, epsilon, inner_log).total;
    theta[i] = saved;
    const double numeric = (up - down) / (2 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

json to_json(const EpochDiagnostics& d) {
  return json{{"epoch", d.epoch}, {"l_sft", d.l_sft}, {"l_or", d.l_or}, {"mean_log_or", d.mean_log_or},
              {"clamps", d.clamps}};
}

TrainResult train_toy(std::span<const TrainingText> pairs, const OrpoConfig& config, std::uint64_t seed) {
  config.validate();
  if (pairs.empty()) throw DataError("ORPO training needs at least one preference pair");
  std::vector<std::string> texts;
  for (const auto& p : pairs) {
    texts.push_back(p.prompt);
    texts.push_back(p.chosen);
    texts.push_back(p.rejected);
  }
  TrainResult result;
  result.model = ToyModel(Vocabulary::build(texts, config.max_vocabulary), config.context_width);
  ToyModel& model = result.model;

  std::vector<Example> data;
  for (const auto& p : pairs) {
    if (p.chosen.empty() || p.rejected.empty()) throw DataError("preference pair with empty response text");
    Example e;
    e.x = model.vocabulary().encode(p.prompt);
    // Only the last context_width prompt tokens can influence any prediction.
    if (e.x.size() > config.context_width) e.x.erase(e.x.begin(), e.x.end() - static_cast<std::ptrdiff_t>(config.context_width));
    e.y_w = model.vocabulary().encode(p.chosen);
    e.y_l = model.vocabulary().encode(p.rejected);
    data.push_back(std::move(e));
  }

  Pcg32 init = Pcg32::for_key(seed, "orpo/init");
  for (double& w : model.theta()) w = (2.0 * init.uniform() - 1.0) * config.init_scale;

  auto measure = [&](std::size_t epoch) {
    ClampStats clamps;
    const auto parts =
        orpo_loss(model, data, config.lambda, config.probability_clamp_epsilon, config.inner_log, &clamps);
    return EpochDiagnostics{epoch, parts.l_sft, parts.l_or, parts.mean_log_or, clamps.token_clamps + clamps.sequence_clamps};
  };
  result.initial = measure(0);

  std::vector<double> m(model.theta().size(), 0.0), v(model.theta().size(), 0.0);
  std::size_t step = 0;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Pcg32 rng = Pcg32::for_key(seed, "orpo/epoch" + std::to_string(epoch));
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<Example> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) batch.push_back(data[order[i]]);
      const auto g = gradient(model, batch, config.lambda, config.probability_clamp_epsilon, config.inner_log);
      ++step;
      const auto& a = config.adamw;
      const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(step));
      auto& theta = model.theta();
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = a.beta1 * m[i] + (1 - a.beta1) * g[i];
        v[i] = a.beta2 * v[i] + (1 - a.beta2) * g[i] * g[i];
        theta[i] -= config.learning_rate * ((m[i] / c1) / (std::sqrt(v[i] / c2) + a.epsilon) + a.weight_decay * theta[i]);
      }
    }
    result.epochs.push_back(measure(epoch));
  }
  return result;
}

json checkpoint_json(const ToyModel& model) {
  json symbols = json::array();
  for (std::size_t i = 1; i < model.vocabulary().symbols().size(); ++i) {
    symbols.push_back(static_cast<std::uint32_t>(model.vocabulary().symbols()[i]));
  }
  return json{{"format", "gapfinder-orpo-toy/1"},
              {"context_width", model.context_width()},
              {"vocabulary", symbols},
              {"rows", model.rows()},
              {"cols", model.vocab_size()},
              {"theta", model.theta()}};
}

ToyModel model_from_checkpoint(const json& r) {
  try {
    std::vector<char32_t> symbols;
    for (const auto& s : r.at("vocabulary")) symbols.push_back(static_cast<char32_t>(s.get<std::uint32_t>()));
    ToyModel model(Vocabulary::from_symbols(symbols), r.at("context_width").get<std::size_t>());
    auto theta = r.at("theta").get<std::vector<double>>();
    if (theta.size() != model.theta().size()) throw DataError("checkpoint theta has the wrong size");
    model.theta() = std::move(theta);
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace gapfinder::orpo
