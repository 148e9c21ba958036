// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <regex>

#include "gapfinder/io.hpp"
#include "gapfinder/metrics.hpp"
#include "gapfinder/random.hpp"
#include "gapfinder/text.hpp"

namespace gapfinder::metrics {

namespace {

void add_trigrams(Vector& v, std::string_view word, double weight) {
  const std::string padded = "#" + std::string(word) + "#";
  for (std::size_t i = 0; i + 3 <= padded.size() || (i == 0 && padded.size() < 3); ++i) {
    const std::string gram = padded.substr(i, 3);
    const std::uint64_t h = fnv1a64(gram);
    const double sign = ((h >> 63) & 1U) != 0U ? -1.0 : 1.0;
    v[h % v.size()] += sign * weight;
  }
}

void normalize(Vector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  if (s == 0.0) {
    v.assign(v.size(), 0.0);
    v[0] = 1.0;
    return;
  }
  const double n = std::sqrt(s);
  for (double& x : v) x /= n;
}

}  // namespace

Vector HashEmbeddingProvider::sentence_embed(std::string_view input) const {
  Vector v(dims_, 0.0);
  for (const auto& tok : meteor_tokenize(input)) add_trigrams(v, tok, 1.0);
  normalize(v);
  return v;
}

std::vector<std::pair<std::string, Vector>> HashEmbeddingProvider::token_embed(std::string_view input) const {
  const auto toks = meteor_tokenize(input);
  std::vector<std::pair<std::string, Vector>> out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    Vector v(dims_, 0.0);
    add_trigrams(v, toks[i], 1.0);
    if (i > 0) add_trigrams(v, toks[i - 1], 0.25);
    if (i + 1 < toks.size()) add_trigrams(v, toks[i + 1], 0.25);
    normalize(v);
    out.emplace_back(toks[i], std::move(v));
  }
  return out;
}

namespace {

Vector unit(const json& arr, std::string_view what) {
  if (!arr.is_array() || arr.empty()) throw DataError(std::string(what) + ": expected a non-empty number array");
  Vector v;
  for (const auto& x : arr) v.push_back(x.get<double>());
  double s = 0;
  for (double x : v) s += x * x;
  if (s == 0.0) throw DataError(std::string(what) + ": zero vector");
  for (double& x : v) x /= std::sqrt(s);
  return v;
}

class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config) : config_(std::move(config)) {}

  std::string name() const override { return config_.sentence_model + "+" + config_.token_model; }

  Vector sentence_embed(std::string_view input) const override {
    const json reply = post(config_.sentence_url, json{{"model", config_.sentence_model}, {"input", {input}}});
    try {
      return unit(reply.at("data").at(0).at("embedding"), "sentence embedding");
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed sentence-embedding response: ") + e.what());
    }
  }

  std::vector<std::pair<std::string, Vector>> token_embed(std::string_view input) const override {
    const json reply = post(config_.token_url, json{{"model", config_.token_model}, {"text", input}});
    std::vector<std::pair<std::string, Vector>> out;
    try {
      const json& tokens = reply.at("tokens");
      const json& vectors = reply.at("embeddings");
      if (tokens.size() != vectors.size()) throw DataError("token/embedding count mismatch");
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        out.emplace_back(tokens[i].get<std::string>(), unit(vectors[i], "token embedding"));
      }
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed token-embedding response: ") + e.what());
    }
    return out;
  }

 private:
  json post(const std::string& url, const json& body) const {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) throw ConfigError("unsupported embedding URL \"" + url + "\"");
    httplib::Client client(m[1].str());
    const auto secs = static_cast<time_t>(config_.request_timeout_seconds);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    httplib::Headers headers;
    if (!config_.auth_token_env.empty()) {
      const char* token = std::getenv(config_.auth_token_env.c_str());
      if (token == nullptr) throw ConfigError("environment variable " + config_.auth_token_env + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(m[2].matched ? m[2].str() : "/", headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorClass::provider, "embedding request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw Error(ErrorClass::provider, "embedding endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorClass::provider, std::string("embedding response is not JSON: ") + e.what());
    }
  }

  HttpEmbeddingConfig config_;
};

}  // namespace

std::unique_ptr<EmbeddingProvider> make_http_embedding_provider(HttpEmbeddingConfig config) {
  return std::make_unique<HttpEmbeddingProvider>(std::move(config));
}

}  // namespace gapfinder::metrics
