// SPDX-License-Identifier: Apache-2.0
#include "gapfinder/llmgate.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include "gapfinder/synth.hpp"

namespace gapfinder::llm {

namespace {

constexpr std::string_view kP1 =
    "Given the following code:{code} and the following reference explanation: {reference explanation}, your task is "
    "to identify what is incorrect or missing in the following student explanation:{student explanation} of the code. "
    "Generate the missing part or incorrect part. If the explanation is complete and correct, aside from minor typos "
    "or issues, provide a single line of positive feedback.";

constexpr std::string_view kP2 =
    "Given the following code:{code}, your task is to identify what is incorrect or missing in the following student "
    "explanation:{student explanation} of the code. Generate the missing part or incorrect part. If the explanation "
    "is complete and correct, aside from minor typos or issues, provide a single line of positive feedback.";

constexpr std::array kCategories = {ExemplarCategory::correct_complete, ExemplarCategory::correct_with_typos,
                                    ExemplarCategory::incomplete, ExemplarCategory::incorrect};

}  // namespace

std::string_view to_string(PromptId id) noexcept { return id == PromptId::P1 ? "P1" : "P2"; }

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::p1:
      return "p1";
    case Method::p2:
      return "p2";
    case Method::fewshot:
      return "fewshot";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "p1") return Method::p1;
  if (s == "p2") return Method::p2;
  if (s == "fewshot") return Method::fewshot;
  throw ConfigError("unknown prompting method \"" + std::string(s) + "\" (expected p1, p2 or fewshot)");
}

std::string_view template_text(PromptId id) noexcept { return id == PromptId::P1 ? kP1 : kP2; }

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) throw ConfigError("unterminated placeholder in prompt template");
    const std::string_view name = tmpl.substr(open + 1, close - open - 1);
    const auto it = values.find(name);
    if (it == values.end()) throw ConfigError("unresolved placeholder {" + std::string(name) + "} in prompt template");
    out.append(it->second);
    pos = close + 1;
  }
  return out;
}

std::string render_prompt(PromptId id, std::string_view code, std::optional<std::string_view> reference,
                          std::string_view student) {
  std::map<std::string, std::string, std::less<>> values{{"code", std::string(code)},
                                                         {"student explanation", std::string(student)}};
  if (id == PromptId::P1) {
    if (!reference) throw ConfigError("prompt P1 requires a reference explanation");
    values["reference explanation"] = std::string(*reference);
  }
  return render_template(template_text(id), values);
}

std::string_view to_string(ExemplarCategory category) noexcept {
  switch (category) {
    case ExemplarCategory::correct_complete:
      return "correct_complete";
    case ExemplarCategory::correct_with_typos:
      return "correct_with_typos";
    case ExemplarCategory::incomplete:
      return "incomplete";
    case ExemplarCategory::incorrect:
      return "incorrect";
  }
  return "?";
}

std::vector<ChatMessage> assemble_fewshot(std::span<const FewShotExemplar> exemplars, std::string_view code,
                                          std::string_view student) {
  std::vector<ChatMessage> out;
  for (const auto category : kCategories) {
    const auto n = std::count_if(exemplars.begin(), exemplars.end(),
                                 [&](const FewShotExemplar& e) { return e.category == category; });
    if (n != 1) {
      throw ConfigError("few-shot set needs exactly one " + std::string(to_string(category)) + " exemplar, got " +
                        std::to_string(n));
    }
  }
  if (exemplars.size() != kCategories.size()) throw ConfigError("few-shot set must hold exactly four exemplars");
  for (const auto category : kCategories) {
    const auto& e = *std::find_if(exemplars.begin(), exemplars.end(),
                                  [&](const FewShotExemplar& x) { return x.category == category; });
    out.push_back({"user", render_prompt(PromptId::P2, e.code, std::nullopt, e.student_explanation)});
    out.push_back({"assistant", e.gold_feedback});
  }
  out.push_back({"user", render_prompt(PromptId::P2, code, std::nullopt, student)});
  return out;
}

std::vector<FewShotExemplar> default_exemplars(std::span<const SimulatedResponse> responses,
                                               std::span<const CodeExample> examples,
                                               std::span<const SplitAssignment> splits,
                                               std::span<const std::string> ids) {
  const auto by_example = index_by_id(examples);
  std::map<std::string, const SimulatedResponse*> by_id;
  for (const auto& r : responses) by_id[r.id] = &r;
  auto example_of = [&](const std::string& id) -> const CodeExample& {
    const auto it = by_example.find(id);
    if (it == by_example.end()) throw DataError("few-shot exemplar refers to unknown example \"" + id + "\"");
    return *it->second;
  };
  auto from_response = [&](ExemplarCategory category, const SimulatedResponse& r) {
    return FewShotExemplar{category, example_of(r.example_id).source_text, r.explanation_text, r.gold_feedback};
  };
  auto complete_exemplar = [&](const CodeExample& ex) {
    return FewShotExemplar{ExemplarCategory::correct_complete, ex.source_text, benchmark_text(ex),
                           std::string(kPositiveFeedback)};
  };

  std::vector<FewShotExemplar> out;
  if (!ids.empty()) {
    if (ids.size() != kCategories.size()) {
      throw ConfigError("few-shot exemplar ids must list four entries (example id, then three response ids)");
    }
    out.push_back(complete_exemplar(example_of(ids[0])));
    for (std::size_t i = 1; i < ids.size(); ++i) {
      const auto it = by_id.find(ids[i]);
      if (it == by_id.end()) throw ConfigError("few-shot exemplar id \"" + ids[i] + "\" is not a known response");
      out.push_back(from_response(kCategories[i], *it->second));
    }
    return out;
  }

  std::map<std::string, Split> split_of;
  for (const auto& s : splits) split_of[s.response_id] = s.split;
  // Responses sorted by id per preferred split.
  auto first_of = [&](std::optional<ResponseKind> kind) -> const SimulatedResponse* {
    for (const Split split : {Split::validation, Split::train, Split::test}) {
      const SimulatedResponse* best = nullptr;
      for (const auto& r : responses) {
        const auto it = split_of.find(r.id);
        if (it == split_of.end() || it->second != split) continue;
        if (kind && r.kind != *kind) continue;
        if (best == nullptr || r.id < best->id) best = &r;
      }
      if (best != nullptr) {
        if (split != Split::validation) {
          log::warn("no validation response of kind " +
                    std::string(kind ? to_string(*kind) : std::string_view("any")) + "; using the " +
                    std::string(to_string(split)) + " split for the few-shot exemplar");
        }
        return best;
      }
    }
    throw DataError("cannot pick a few-shot exemplar: no response of kind " +
                    std::string(kind ? to_string(*kind) : std::string_view("any")) + " in any split");
  };

  out.push_back(complete_exemplar(example_of(first_of(std::nullopt)->example_id)));
  out.push_back(from_response(ExemplarCategory::correct_with_typos, *first_of(ResponseKind::correct_variant)));
  out.push_back(from_response(ExemplarCategory::incomplete, *first_of(ResponseKind::incomplete)));
  out.push_back(from_response(ExemplarCategory::incorrect, *first_of(ResponseKind::incorrect)));
  return out;
}

std::vector<ChatMessage> build_messages(Method method, const CodeExample& example, const SimulatedResponse& response,
                                        std::span<const FewShotExemplar> exemplars) {
  switch (method) {
    case Method::p1:
      if (example.expert_explanation.empty()) {
        throw DataError("prompt P1 needs an expert explanation, example \"" + example.id + "\" has none");
      }
      return {{"user", render_prompt(PromptId::P1, example.source_text, benchmark_text(example),
                                     response.explanation_text)}};
    case Method::p2:
      return {{"user", render_prompt(PromptId::P2, example.source_text, std::nullopt, response.explanation_text)}};
    case Method::fewshot:
      return assemble_fewshot(exemplars, example.source_text, response.explanation_text);
  }
  throw ConfigError("unknown prompting method");
}

// ---------------------------------------------------------------------------

void ProviderConfig::validate() const {
  if (endpoint_url.empty()) throw ConfigError("provider endpoint_url is empty");
  if (model_name.empty()) throw ConfigError("provider model_name is empty");
  if (!(temperature >= 0.0)) throw ConfigError("provider temperature must be >= 0");
  if (max_output_tokens < 1) throw ConfigError("provider max_output_tokens must be >= 1");
  if (!(request_timeout_seconds > 0.0)) throw ConfigError("provider request_timeout_seconds must be > 0");
  if (max_parallel_requests < 1) throw ConfigError("provider max_parallel_requests must be >= 1");
  if (retry.max_attempts < 1) throw ConfigError("provider retry.max_attempts must be >= 1");
  if (!(retry.backoff_base_seconds >= 0.0)) throw ConfigError("provider retry.backoff_base_seconds must be >= 0");
}

json to_json(const ProviderConfig& c) {
  return json{{"endpoint_url", c.endpoint_url},
              {"model_name", c.model_name},
              {"temperature", c.temperature},
              {"max_output_tokens", c.max_output_tokens},
              {"request_timeout_seconds", c.request_timeout_seconds},
              {"auth_token_env", c.auth_token_env},
              {"max_parallel_requests", c.max_parallel_requests},
              {"retry", {{"max_attempts", c.retry.max_attempts}, {"backoff_base_seconds", c.retry.backoff_base_seconds}}}};
}

ProviderConfig provider_config_from_json(const json& r) {
  if (!r.is_object()) throw ConfigError("provider config must be an object");
  try {
    io::check_fields(r,
                     {"endpoint_url", "model_name", "temperature", "max_output_tokens", "request_timeout_seconds",
                      "auth_token_env", "max_parallel_requests", "retry"},
                     {"endpoint_url", "model_name"}, "provider config");
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  ProviderConfig c;
  try {
    c.endpoint_url = r.at("endpoint_url").get<std::string>();
    c.model_name = r.at("model_name").get<std::string>();
    c.temperature = r.value("temperature", c.temperature);
    c.max_output_tokens = r.value("max_output_tokens", c.max_output_tokens);
    c.request_timeout_seconds = r.value("request_timeout_seconds", c.request_timeout_seconds);
    c.auth_token_env = r.value("auth_token_env", c.auth_token_env);
    c.max_parallel_requests = r.value("max_parallel_requests", c.max_parallel_requests);
    if (r.contains("retry")) {
      const json& retry = r.at("retry");
      c.retry.max_attempts = retry.value("max_attempts", c.retry.max_attempts);
      c.retry.backoff_base_seconds = retry.value("backoff_base_seconds", c.retry.backoff_base_seconds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("provider config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string_view to_string(ProviderErrorKind kind) noexcept {
  switch (kind) {
    case ProviderErrorKind::auth:
      return "auth";
    case ProviderErrorKind::rate_limit:
      return "rate_limit";
    case ProviderErrorKind::timeout:
      return "timeout";
    case ProviderErrorKind::malformed_response:
      return "malformed_response";
    case ProviderErrorKind::http:
      return "http";
    case ProviderErrorKind::transport:
      return "transport";
  }
  return "?";
}

std::shared_ptr<Transport> transport_for(const ProviderConfig& config) {
  if (config.endpoint_url.rfind("stub://", 0) == 0) return make_stub_transport();
  return make_http_transport();
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

namespace {

json messages_json(std::span<const ChatMessage> messages) {
  json arr = json::array();
  for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

}  // namespace

std::string ResponseCache::key(std::string_view model, std::span<const ChatMessage> messages, double temperature) {
  const json keyed{{"model", model}, {"messages", messages_json(messages)}, {"temperature", temperature}};
  return io::sha256_hex(keyed.dump());
}

std::optional<json> ResponseCache::get(const std::string& key) const {
  const auto path = dir_ / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw DataError("corrupt cache entry " + path.string() + ": " + e.what());
  }
}

void ResponseCache::put(const std::string& key, const json& record) const {
  io::write_file_atomic(dir_ / (key + ".json"), record.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

ChatClient::ChatClient(ProviderConfig config, std::shared_ptr<Transport> transport, std::optional<ResponseCache> cache,
                       Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), cache_(std::move(cache)), sleeper_(std::move(sleeper)) {
  config_.validate();
  if (!sleeper_) sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
}

namespace {

Completion parse_completion(const std::string& body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::exception& e) {
    throw ProviderError(ProviderErrorKind::malformed_response, std::string("provider body is not JSON: ") + e.what());
  }
  Completion c;
  try {
    const json& content = parsed.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProviderError(ProviderErrorKind::malformed_response, "message content is not a string");
    c.text = content.get<std::string>();
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
      c.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0LL);
      c.usage.completion_tokens = parsed["usage"].value("completion_tokens", 0LL);
    }
  } catch (const json::exception& e) {
    throw ProviderError(ProviderErrorKind::malformed_response,
                        std::string("provider body lacks choices[0].message.content: ") + e.what());
  }
  return c;
}

}  // namespace

Completion ChatClient::complete(std::span<const ChatMessage> messages) const {
  const std::string key = ResponseCache::key(config_.model_name, messages, config_.temperature);
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      Completion c;
      try {
        c.text = hit->at("response").at("text").get<std::string>();
        c.usage.prompt_tokens = hit->at("response").value("prompt_tokens", 0LL);
        c.usage.completion_tokens = hit->at("response").value("completion_tokens", 0LL);
      } catch (const json::exception& e) {
        throw DataError("corrupt cache entry " + key + ": " + e.what());
      }
      c.usage.from_cache = true;
      return c;
    }
  }

  HttpRequest request;
  request.url = config_.endpoint_url;
  request.timeout_seconds = config_.request_timeout_seconds;
  request.headers["Content-Type"] = "application/json";
  if (!config_.auth_token_env.empty()) {
    const char* token = std::getenv(config_.auth_token_env.c_str());
    if (token == nullptr || *token == '\0') {
      throw ProviderError(ProviderErrorKind::auth,
                          "auth token environment variable " + config_.auth_token_env + " is not set");
    }
    request.headers["Authorization"] = std::string("Bearer ") + token;
  }
  const json body{{"model", config_.model_name},
                  {"messages", messages_json(messages)},
                  {"temperature", config_.temperature},
                  {"max_tokens", config_.max_output_tokens}};
  request.body = body.dump();

  int attempt = 0;
  for (;;) {
    ++attempt;
    std::optional<ProviderError> retryable;
    try {
      const HttpResponse response = transport_->post(request);
      if (response.status == 401 || response.status == 403) {
        throw ProviderError(ProviderErrorKind::auth, "provider rejected credentials (HTTP " +
                                                         std::to_string(response.status) + ")", attempt);
      }
      if (response.status == 429) {
        retryable.emplace(ProviderErrorKind::rate_limit, "provider rate limit (HTTP 429)", attempt);
      } else if (response.status >= 500) {
        retryable.emplace(ProviderErrorKind::http, "provider error (HTTP " + std::to_string(response.status) + ")",
                          attempt);
      } else if (response.status < 200 || response.status >= 300) {
        throw ProviderError(ProviderErrorKind::http, "provider returned HTTP " + std::to_string(response.status),
                            attempt);
      } else {
        Completion c = parse_completion(response.body);
        c.usage.attempts = attempt;
        if (cache_) {
          cache_->put(key, json{{"request", body},
                                {"response",
                                 {{"text", c.text},
                                  {"prompt_tokens", c.usage.prompt_tokens},
                                  {"completion_tokens", c.usage.completion_tokens}}}});
        }
        return c;
      }
    } catch (const ProviderError& e) {
      if (e.kind() != ProviderErrorKind::timeout) throw ProviderError(e.kind(), e.what(), attempt);
      retryable.emplace(e.kind(), e.what(), attempt);
    }
    if (attempt >= config_.retry.max_attempts) {
      throw ProviderError(retryable->kind(),
                          std::string(retryable->what()) + " after " + std::to_string(attempt) + " attempts", attempt);
    }
    sleeper_(std::chrono::duration<double>(config_.retry.backoff_base_seconds * std::pow(2.0, attempt - 1)));
  }
}

std::vector<CompletionResult> complete_all(const ChatClient& client, std::span<const std::vector<ChatMessage>> requests) {
  std::vector<CompletionResult> results(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        results[i].completion = client.complete(requests[i]);
      } catch (const ProviderError& e) {
        results[i].error = e;
      }
    }
  };
  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(client.config().max_parallel_requests), requests.size());
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return results;
}

// ---------------------------------------------------------------------------

json to_json(const PreferencePair& p) {
  return json{{"response_id", p.response_id},
              {"method", p.method},
              {"prompt_context", p.prompt_context},
              {"chosen", p.chosen},
              {"rejected", p.rejected}};
}

PreferencePair preference_pair_from_json(const json& r) {
  io::check_fields(r, {"response_id", "method", "prompt_context", "chosen", "rejected"},
                   {"response_id", "method", "prompt_context", "chosen", "rejected"}, "preference pair");
  PreferencePair p;
  try {
    p.response_id = r.at("response_id").get<std::string>();
    p.method = r.at("method").get<std::string>();
    p.prompt_context = r.at("prompt_context").get<std::string>();
    p.chosen = r.at("chosen").get<std::string>();
    p.rejected = r.at("rejected").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("preference pair: ") + e.what());
  }
  if (p.chosen.empty() || p.rejected.empty()) throw DataError("preference pair " + p.response_id + " has empty text");
  return p;
}

PreferenceBuild build_preference_pairs(std::span<const SimulatedResponse> responses,
                                       std::span<const CodeExample> examples,
                                       const std::map<std::string, std::string>& rejected, PromptId method) {
  const auto by_example = index_by_id(examples);
  PreferenceBuild out;
  for (const auto& r : responses) {
    const auto it = rejected.find(r.id);
    if (it == rejected.end()) throw DataError("no rejected feedback for response \"" + r.id + "\"");
    if (it->second == r.gold_feedback) {
      ++out.dropped;
      continue;
    }
    if (it->second.empty()) throw DataError("empty rejected feedback for response \"" + r.id + "\"");
    const auto ex = by_example.find(r.example_id);
    if (ex == by_example.end()) throw DataError("response \"" + r.id + "\" refers to unknown example");
    const auto messages = build_messages(method == PromptId::P1 ? Method::p1 : Method::p2, *ex->second, r, {});
    out.pairs.push_back({messages.back().content, r.gold_feedback, it->second, r.id,
                         std::string(to_string(method == PromptId::P1 ? Method::p1 : Method::p2))});
  }
  return out;
}

}  // namespace gapfinder::llm
