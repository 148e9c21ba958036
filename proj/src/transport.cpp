// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include <regex>

#include "gapfinder/llmgate.hpp"
#include "gapfinder/random.hpp"
#include "gapfinder/text.hpp"

namespace gapfinder::llm {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw ConfigError("unsupported endpoint URL \"" + url + "\"");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

class HttpTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    const ParsedUrl url = parse_url(request.url);
    httplib::Client client(url.origin);
    const auto secs = static_cast<time_t>(request.timeout_seconds);
    const auto usecs = static_cast<time_t>((request.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    auto result = client.Post(url.path, headers, request.body, content_type);
    if (!result) {
      const auto err = result.error();
      const std::string what = "request to " + request.url + " failed: " + httplib::to_string(err);
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        throw ProviderError(ProviderErrorKind::timeout, what);
      }
      throw ProviderError(ProviderErrorKind::transport, what);
    }
    return {result->status, result->body};
  }
};

// Deterministic, grammar-focused responder with the chat-completions shape.
class StubTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    json body;
    try {
      body = json::parse(request.body);
    } catch (const json::exception&) {
      return {400, R"({"error":"bad request"})"};
    }
    std::string prompt;
    for (const auto& m : body.value("messages", json::array())) {
      if (m.value("role", "") == "user") prompt = m.value("content", "");
    }
    std::string student;
    static constexpr std::string_view kOpen = "student explanation:";
    static constexpr std::string_view kClose = " of the code. Generate";
    if (const auto a = prompt.rfind(kOpen); a != std::string::npos) {
      const auto b = prompt.find(kClose, a);
      student = prompt.substr(a + kOpen.size(), b == std::string::npos ? std::string::npos : b - a - kOpen.size());
    }
    const auto words = text::split_whitespace(student);
    const std::string model = body.value("model", "stub");
    const std::uint64_t h = fnv1a64(model + "\n" + prompt);
    std::string feedback;
    switch (h % 3) {
      case 0:
        feedback = "The explanation is complete and correct. Nice work.";
        break;
      case 1:
        feedback = "The explanation is missing a step. Describe what the code does after \"" +
                   (words.empty() ? std::string("the start") : words.front()) + "\" in more detail.";
        break;
      default:
        feedback = "The explanation may contain a misconception. Re-check the loop bounds and conditions described "
                   "in your " + std::to_string(words.size()) + "-word explanation.";
        break;
    }
    const json reply{{"id", "stub-" + std::to_string(h)},
                     {"object", "chat.completion"},
                     {"model", model},
                     {"choices", json::array({{{"index", 0},
                                               {"message", {{"role", "assistant"}, {"content", feedback}}},
                                               {"finish_reason", "stop"}}})},
                     {"usage",
                      {{"prompt_tokens", text::split_whitespace(prompt).size()},
                       {"completion_tokens", text::split_whitespace(feedback).size()}}}};
    return {200, reply.dump()};
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttpTransport>(); }
std::shared_ptr<Transport> make_stub_transport() { return std::make_shared<StubTransport>(); }

}  // namespace gapfinder::llm
