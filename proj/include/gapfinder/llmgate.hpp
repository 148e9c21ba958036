// SPDX-License-Identifier: Apache-2.0
//
// Prompt rendering, few-shot assembly, a cached chat-completions client and
// preference-pair construction.
#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gapfinder/corpus.hpp"
#include "gapfinder/error.hpp"

namespace gapfinder::llm {

enum class PromptId { P1, P2 };

/// Generation method for a feedback run.
enum class Method { p1, p2, fewshot };

std::string_view to_string(PromptId id) noexcept;
std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view s);

/// Stored template text with `{code}`, `{reference explanation}` and
/// `{student explanation}` placeholders.
std::string_view template_text(PromptId id) noexcept;

/// Single-pass substitution: braces inside substituted payloads are never
/// re-scanned. Throws ConfigError for a placeholder missing from `values`.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

/// Throws ConfigError when P1 is rendered without a reference.
std::string render_prompt(PromptId id, std::string_view code, std::optional<std::string_view> reference,
                          std::string_view student);

enum class ExemplarCategory { correct_complete, correct_with_typos, incomplete, incorrect };
std::string_view to_string(ExemplarCategory category) noexcept;

struct FewShotExemplar {
  ExemplarCategory category = ExemplarCategory::correct_complete;
  std::string code;
  std::string student_explanation;
  std::string gold_feedback;
};

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Four (P2 prompt, gold answer) turns in category order, then the target's
/// P2 prompt. Throws ConfigError unless each category appears exactly once.
std::vector<ChatMessage> assemble_fewshot(std::span<const FewShotExemplar> exemplars, std::string_view code,
                                          std::string_view student);

/// Default exemplar set: for each category, the response of the matching
/// kind with the smallest id in the validation split (train, then test, as
/// fallbacks with a warning). The correct-and-complete exemplar is the
/// unaltered benchmark of the first validation response's example, answered
/// with the positive one-liner. When `ids` is non-empty it lists response ids
/// to use instead, one per category in category order; the first entry names
/// an example id whose benchmark serves as the correct-and-complete exemplar.
std::vector<FewShotExemplar> default_exemplars(std::span<const SimulatedResponse> responses,
                                               std::span<const CodeExample> examples,
                                               std::span<const SplitAssignment> splits,
                                               std::span<const std::string> ids = {});

/// Messages sent for one response under a method. Incorrect responses are
/// judged against the original (unmutated) program.
std::vector<ChatMessage> build_messages(Method method, const CodeExample& example, const SimulatedResponse& response,
                                        std::span<const FewShotExemplar> exemplars);

// ---------------------------------------------------------------------------
// Provider access

struct RetryPolicy {
  int max_attempts = 4;
  double backoff_base_seconds = 1.0;  // wait base * 2^(attempt-1) between tries
};

struct ProviderConfig {
  std::string endpoint_url;  // chat-completions URL, or "stub://<name>" for the offline stub
  std::string model_name;
  double temperature = 0.0;
  int max_output_tokens = 512;
  double request_timeout_seconds = 60.0;
  std::string auth_token_env;  // empty: no Authorization header
  int max_parallel_requests = 4;
  RetryPolicy retry;

  void validate() const;  // throws ConfigError
};

json to_json(const ProviderConfig& config);
ProviderConfig provider_config_from_json(const json& record);

enum class ProviderErrorKind { auth, rate_limit, timeout, malformed_response, http, transport };
std::string_view to_string(ProviderErrorKind kind) noexcept;

class ProviderError : public Error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& what, int attempts = 0)
      : Error(ErrorClass::provider, what), kind_(kind), attempts_(attempts) {}
  ProviderErrorKind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  ProviderErrorKind kind_;
  int attempts_;
};

struct HttpRequest {
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
  double timeout_seconds = 60.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// One POST per call. Implementations throw ProviderError with kind timeout
/// or transport when no HTTP response was obtained.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib backed transport (http and https).
std::shared_ptr<Transport> make_http_transport();

/// Offline chat-completions responder used for smoke runs. Feedback is a
/// deterministic function of the request body.
std::shared_ptr<Transport> make_stub_transport();

/// Picks the stub for "stub://" endpoints, HTTP otherwise.
std::shared_ptr<Transport> transport_for(const ProviderConfig& config);

/// Content-addressed request/response store. One JSON file per request hash;
/// writes are atomic; nothing is ever evicted.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string key(std::string_view model, std::span<const ChatMessage> messages, double temperature);

  std::optional<json> get(const std::string& key) const;
  void put(const std::string& key, const json& record) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct Usage {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  int attempts = 0;  // HTTP attempts made by this call; 0 on a cache hit
  bool from_cache = false;
};

struct Completion {
  std::string text;
  Usage usage;
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;

class ChatClient {
 public:
  ChatClient(ProviderConfig config, std::shared_ptr<Transport> transport, std::optional<ResponseCache> cache,
             Sleeper sleeper = {});

  /// Cache lookup first; on a miss resolves the auth token, then posts with
  /// retries on 429, 5xx and timeouts. Safe to call concurrently.
  Completion complete(std::span<const ChatMessage> messages) const;

  const ProviderConfig& config() const noexcept { return config_; }

 private:
  ProviderConfig config_;
  std::shared_ptr<Transport> transport_;
  std::optional<ResponseCache> cache_;
  Sleeper sleeper_;
};

struct CompletionResult {
  std::optional<Completion> completion;
  std::optional<ProviderError> error;
};

/// Runs every request with at most `max_parallel_requests` in flight; results
/// come back in input order.
std::vector<CompletionResult> complete_all(const ChatClient& client,
                                           std::span<const std::vector<ChatMessage>> requests);

// ---------------------------------------------------------------------------
// Preference data

struct PreferencePair {
  std::string prompt_context;
  std::string chosen;
  std::string rejected;
  std::string response_id;
  std::string method;  // method that produced the rejected feedback

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

json to_json(const PreferencePair& pair);
PreferencePair preference_pair_from_json(const json& record);

struct PreferenceBuild {
  std::vector<PreferencePair> pairs;
  std::size_t dropped = 0;  // chosen == rejected
};

/// One pair per response, in response order. The prompt context is the
/// rendered prompt of `method` (P1 or P2). Throws DataError naming the first
/// response without rejected feedback.
PreferenceBuild build_preference_pairs(std::span<const SimulatedResponse> responses,
                                       std::span<const CodeExample> examples,
                                       const std::map<std::string, std::string>& rejected, PromptId method);

}  // namespace gapfinder::llm
