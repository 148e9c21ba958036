// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <deque>
#include <mutex>

#include "gapfinder/error.hpp"
#include "gapfinder/io.hpp"
#include "gapfinder/llmgate.hpp"
#include "gapfinder/synth.hpp"

using namespace gapfinder;
using namespace gapfinder::llm;
namespace fs = std::filesystem;

namespace {

std::string golden(const std::string& name) { return io::read_file(fs::path(GAPFINDER_TEST_DIR) / "golden" / name); }

const char* kCode = "for i in range(3):\n    print(i)";
const char* kRef = "The loop prints 0, 1 and 2.";
const char* kStudent = "It prints {numbers} up to 3.";

std::string completion_body(const std::string& text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
              {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 5}}}}
      .dump();
}

class ScriptedTransport : public Transport {
 public:
  explicit ScriptedTransport(std::deque<HttpResponse> script) : script_(std::move(script)) {}
  HttpResponse post(const HttpRequest& request) override {
    std::lock_guard lock(mu_);
    ++calls;
    last = request;
    if (script_.empty()) return {200, completion_body("default")};
    auto r = script_.front();
    script_.pop_front();
    if (r.status == -1) throw ProviderError(ProviderErrorKind::timeout, "timed out");
    return r;
  }
  int calls = 0;
  HttpRequest last;

 private:
  std::mutex mu_;
  std::deque<HttpResponse> script_;
};

ProviderConfig config() {
  ProviderConfig c;
  c.endpoint_url = "http://127.0.0.1:9/v1/chat/completions";
  c.model_name = "m";
  c.retry.backoff_base_seconds = 0.5;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("gapfinder_llm_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<ChatMessage> one(const std::string& s) { return {{"user", s}}; }

}  // namespace

TEST(Prompts, TemplatesMatchGolden) {
  EXPECT_EQ(std::string(template_text(PromptId::P1)), golden("p1_template.txt"));
  EXPECT_EQ(std::string(template_text(PromptId::P2)), golden("p2_template.txt"));
}

TEST(Prompts, RenderedMatchGoldenAndSubstituteOnce) {
  EXPECT_EQ(render_prompt(PromptId::P1, kCode, std::string_view(kRef), kStudent), golden("p1_rendered.txt"));
  EXPECT_EQ(render_prompt(PromptId::P2, kCode, std::nullopt, kStudent), golden("p2_rendered.txt"));
}

TEST(Prompts, P1NeedsReference) { EXPECT_THROW(render_prompt(PromptId::P1, "x", std::nullopt, "y"), ConfigError); }

TEST(Prompts, UnresolvedPlaceholderThrows) {
  EXPECT_THROW(render_template("a {missing} b", {{"code", "x"}}), ConfigError);
  EXPECT_THROW(render_template("a {code", {{"code", "x"}}), ConfigError);
  EXPECT_EQ(render_template("[{code}]", {{"code", "{code}"}}), "[{code}]");
}

TEST(FewShot, NineMessagesInCategoryOrder) {
  std::vector<FewShotExemplar> ex = {
      {ExemplarCategory::incorrect, "c4", "s4", "g4"},
      {ExemplarCategory::correct_complete, "c1", "s1", "g1"},
      {ExemplarCategory::incomplete, "c3", "s3", "g3"},
      {ExemplarCategory::correct_with_typos, "c2", "s2", "g2"},
  };
  const auto msgs = assemble_fewshot(ex, "code", "student");
  ASSERT_EQ(msgs.size(), 9U);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(msgs[2 * i].role, "user");
    EXPECT_EQ(msgs[2 * i].content, render_prompt(PromptId::P2, "c" + std::to_string(i + 1), std::nullopt,
                                                 "s" + std::to_string(i + 1)));
    EXPECT_EQ(msgs[2 * i + 1].role, "assistant");
    EXPECT_EQ(msgs[2 * i + 1].content, "g" + std::to_string(i + 1));
  }
  EXPECT_EQ(msgs[8].content, render_prompt(PromptId::P2, "code", std::nullopt, "student"));
  ex[0].category = ExemplarCategory::incomplete;
  EXPECT_THROW(assemble_fewshot(ex, "code", "student"), ConfigError);
  ex.pop_back();
  EXPECT_THROW(assemble_fewshot(ex, "code", "student"), ConfigError);
}

TEST(FewShot, DefaultExemplarsPreferValidationSmallestId) {
  std::vector<CodeExample> examples = {{"e1", Language::java, "code1", {}, {"A b.", "C d.", "E f."}},
                                       {"e2", Language::java, "code2", {}, {"G h.", "I j.", "K l."}}};
  auto resp = [](std::string id, std::string ex, ResponseKind k) {
    SimulatedResponse r;
    r.id = std::move(id);
    r.example_id = std::move(ex);
    r.kind = k;
    r.explanation_text = "expl " + r.id;
    r.gold_feedback = "gold " + r.id;
    return r;
  };
  std::vector<SimulatedResponse> rs = {resp("e2/cv0", "e2", ResponseKind::correct_variant),
                                       resp("e1/cv0", "e1", ResponseKind::correct_variant),
                                       resp("e1/inc1", "e1", ResponseKind::incomplete),
                                       resp("e2/inc1", "e2", ResponseKind::incomplete),
                                       resp("e1/mut", "e1", ResponseKind::incorrect)};
  std::vector<SplitAssignment> splits = {{"e2/cv0", Split::validation},
                                         {"e1/cv0", Split::train},
                                         {"e1/inc1", Split::test},
                                         {"e2/inc1", Split::validation},
                                         {"e1/mut", Split::train}};
  const auto ex = default_exemplars(rs, examples, splits);
  ASSERT_EQ(ex.size(), 4U);
  EXPECT_EQ(ex[0].category, ExemplarCategory::correct_complete);
  EXPECT_EQ(ex[0].code, "code2");
  EXPECT_EQ(ex[0].student_explanation, "G h. I j. K l.");
  EXPECT_EQ(ex[0].gold_feedback, kPositiveFeedback);
  EXPECT_EQ(ex[1].student_explanation, "expl e2/cv0");
  EXPECT_EQ(ex[2].student_explanation, "expl e2/inc1");
  EXPECT_EQ(ex[3].student_explanation, "expl e1/mut");

  const std::vector<std::string> ids = {"e1", "e1/cv0", "e1/inc1", "e1/mut"};
  const auto chosen = default_exemplars(rs, examples, splits, ids);
  EXPECT_EQ(chosen[0].code, "code1");
  EXPECT_EQ(chosen[1].gold_feedback, "gold e1/cv0");
  const std::vector<std::string> bad = {"e1", "nope", "e1/inc1", "e1/mut"};
  EXPECT_THROW(default_exemplars(rs, examples, splits, bad), ConfigError);
}

TEST(ProviderConfig, JsonRoundTripAndValidation) {
  auto c = config();
  c.auth_token_env = "TOKEN";
  const auto back = provider_config_from_json(to_json(c));
  EXPECT_EQ(back.model_name, "m");
  EXPECT_EQ(back.auth_token_env, "TOKEN");
  EXPECT_EQ(back.retry.max_attempts, 4);
  c.max_parallel_requests = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(provider_config_from_json(json{{"endpoint_url", "x"}, {"model_name", "m"}, {"bogus", 1}}), ConfigError);
}

TEST(Cache, KeyDependsOnModelMessagesTemperature) {
  const auto m = one("hi");
  const auto k = ResponseCache::key("a", m, 0.0);
  EXPECT_EQ(k.size(), 64U);
  EXPECT_EQ(k, ResponseCache::key("a", m, 0.0));
  EXPECT_NE(k, ResponseCache::key("b", m, 0.0));
  EXPECT_NE(k, ResponseCache::key("a", one("hi!"), 0.0));
  EXPECT_NE(k, ResponseCache::key("a", m, 0.5));
}

TEST(Client, RetriesTransientFailuresWithBackoff) {
  auto t = std::make_shared<ScriptedTransport>(
      std::deque<HttpResponse>{{429, ""}, {503, ""}, {-1, ""}, {200, completion_body("ok")}});
  std::vector<double> sleeps;
  ChatClient client(config(), t, std::nullopt, [&](std::chrono::duration<double> d) { sleeps.push_back(d.count()); });
  const auto c = client.complete(one("q"));
  EXPECT_EQ(c.text, "ok");
  EXPECT_EQ(c.usage.attempts, 4);
  EXPECT_EQ(c.usage.prompt_tokens, 10);
  EXPECT_EQ(sleeps, (std::vector<double>{0.5, 1.0, 2.0}));
}

TEST(Client, GivesUpAfterMaxAttempts) {
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{500, ""}, {500, ""}, {500, ""}, {500, ""}});
  ChatClient client(config(), t, std::nullopt, [](auto) {});
  try {
    client.complete(one("q"));
    FAIL() << "expected ProviderError";
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderErrorKind::http);
    EXPECT_EQ(e.attempts(), 4);
  }
  EXPECT_EQ(t->calls, 4);
}

TEST(Client, AuthAndMalformedAreNotRetried) {
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{401, ""}});
  ChatClient client(config(), t, std::nullopt, [](auto) {});
  EXPECT_THROW(client.complete(one("q")), ProviderError);
  EXPECT_EQ(t->calls, 1);
  auto t2 = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{{200, "{not json"}});
  ChatClient c2(config(), t2, std::nullopt, [](auto) {});
  try {
    c2.complete(one("q"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderErrorKind::malformed_response);
  }
  EXPECT_EQ(t2->calls, 1);
}

TEST(Client, MissingTokenIsAuthErrorAndTokenIsSent) {
  auto c = config();
  c.auth_token_env = "GAPFINDER_TEST_TOKEN_UNSET";
  ::unsetenv("GAPFINDER_TEST_TOKEN_UNSET");
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{});
  ChatClient client(c, t, std::nullopt, [](auto) {});
  try {
    client.complete(one("q"));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderErrorKind::auth);
  }
  EXPECT_EQ(t->calls, 0);
  ::setenv("GAPFINDER_TEST_TOKEN_UNSET", "sekret", 1);
  client.complete(one("q"));
  EXPECT_EQ(t->last.headers.at("Authorization"), "Bearer sekret");
  ::unsetenv("GAPFINDER_TEST_TOKEN_UNSET");
}

TEST(Client, WarmCacheMakesNoCalls) {
  const auto dir = fresh_dir("cache");
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{});
  ChatClient client(config(), t, ResponseCache(dir), [](auto) {});
  std::vector<std::vector<ChatMessage>> reqs = {one("a"), one("b"), one("c")};
  const auto cold = complete_all(client, reqs);
  EXPECT_EQ(t->calls, 3);
  const auto warm = complete_all(client, reqs);
  EXPECT_EQ(t->calls, 3);
  for (const auto& r : warm) {
    ASSERT_TRUE(r.completion);
    EXPECT_TRUE(r.completion->usage.from_cache);
    EXPECT_EQ(r.completion->usage.attempts, 0);
    EXPECT_EQ(r.completion->text, "default");
  }
  fs::remove_all(dir);
}

TEST(Client, CompleteAllKeepsOrderAndRecordsFailures) {
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResponse>{});
  auto c = config();
  c.max_parallel_requests = 3;
  ChatClient client(c, t, std::nullopt, [](auto) {});
  std::vector<std::vector<ChatMessage>> reqs(10, one("x"));
  const auto out = complete_all(client, reqs);
  ASSERT_EQ(out.size(), 10U);
  for (const auto& r : out) EXPECT_TRUE(r.completion);
}

TEST(Stub, DeterministicOfflineFeedback) {
  ProviderConfig c = config();
  c.endpoint_url = "stub://local";
  ChatClient client(c, transport_for(c), std::nullopt, [](auto) {});
  const auto msgs = one(render_prompt(PromptId::P2, "x = 1", std::nullopt, "It sets x."));
  const auto a = client.complete(msgs);
  EXPECT_FALSE(a.text.empty());
  EXPECT_EQ(a.text, client.complete(msgs).text);
}

TEST(Preferences, OnePairPerResponseAndMissingRejectedNamed) {
  std::vector<CodeExample> examples = {{"e", Language::python, "x = 1\n", {}, {"It sets x.", "Then ends.", "Done."}}};
  SimulatedResponse r;
  r.id = "e/cv0";
  r.example_id = "e";
  r.explanation_text = "It set x.";
  r.gold_feedback = "good";
  SimulatedResponse same = r;
  same.id = "e/cv1";
  std::vector<SimulatedResponse> rs = {r, same};
  const auto build = build_preference_pairs(rs, examples, {{"e/cv0", "bad"}, {"e/cv1", "good"}}, PromptId::P1);
  ASSERT_EQ(build.pairs.size(), 1U);
  EXPECT_EQ(build.dropped, 1U);
  EXPECT_EQ(build.pairs[0].chosen, "good");
  EXPECT_EQ(build.pairs[0].rejected, "bad");
  EXPECT_EQ(build.pairs[0].prompt_context, render_prompt(PromptId::P1, "x = 1\n", std::string_view("It sets x. Then ends. Done."), "It set x."));
  EXPECT_EQ(preference_pair_from_json(to_json(build.pairs[0])), build.pairs[0]);
  try {
    build_preference_pairs(rs, examples, {{"e/cv0", "bad"}}, PromptId::P2);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("e/cv1"), std::string::npos);
  }
}
