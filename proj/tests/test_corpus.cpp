// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "gapfinder/error.hpp"
#include "gapfinder/corpus.hpp"
#include "gapfinder/text.hpp"

using namespace gapfinder;

namespace {

CodeExample sample_example() {
  return {"ex1", Language::python, "print(1)\n", {"printing"}, {"It prints one.", "Nothing else happens."}};
}

SimulatedResponse make_response(std::string id, std::string example_id, ResponseKind kind) {
  SimulatedResponse r;
  r.id = std::move(id);
  r.example_id = std::move(example_id);
  r.kind = kind;
  r.explanation_text = "text";
  r.gold_feedback = "gold";
  if (kind == ResponseKind::incomplete) r.provenance.removed_sentences = {1, 2};
  if (kind == ResponseKind::incorrect) {
    MutationRecord m;
    m.operator_id = "op";
    r.provenance.mutation = m;
  }
  return r;
}

}  // namespace

TEST(Corpus, ExampleJsonRoundTrip) {
  const auto ex = sample_example();
  EXPECT_EQ(code_example_from_json(to_json(ex)), ex);
}

TEST(Corpus, ResponseJsonRoundTripKeepsProvenance) {
  auto r = make_response("ex1/inc1", "ex1", ResponseKind::incomplete);
  r.provenance.generator = "synth.incomplete";
  r.provenance.removed_text = {"a", "b"};
  r.provenance.edits.push_back({WordEdit::Op::typo, 0, 2, "loop", "lpop"});
  EXPECT_EQ(response_from_json(to_json(r)), r);
  auto m = make_response("ex1/mut", "ex1", ResponseKind::incorrect);
  m.provenance.mutation->byte_start = 3;
  m.provenance.mutation->rewritten_sentence = "x";
  EXPECT_EQ(response_from_json(to_json(m)), m);
}

TEST(Corpus, RejectsUnknownFieldsAndBadRecords) {
  std::istringstream unknown(R"({"id":"a","language":"java","source_text":"x","concepts":[],"expert_explanation":["s"],"extra":1})");
  EXPECT_THROW(parse_corpus(unknown), DataError);
  std::istringstream empty_expl(R"({"id":"a","language":"java","source_text":"x","concepts":[],"expert_explanation":[]})");
  EXPECT_THROW(parse_corpus(empty_expl), DataError);
  std::istringstream bad_lang(R"({"id":"a","language":"cobol","source_text":"x","concepts":[],"expert_explanation":["s"]})");
  EXPECT_THROW(parse_corpus(bad_lang), DataError);
  std::istringstream dup(R"({"id":"a","language":"java","source_text":"x","concepts":[],"expert_explanation":["s"]}
{"id":"a","language":"java","source_text":"y","concepts":[],"expert_explanation":["s"]})");
  EXPECT_THROW(parse_corpus(dup), DataError);
}

TEST(Corpus, ValidateKindInvariants) {
  auto inc = make_response("r", "ex1", ResponseKind::incomplete);
  inc.provenance.removed_sentences = {1, 3};
  EXPECT_THROW(validate(inc), DataError);
  auto bad = make_response("r", "ex1", ResponseKind::incorrect);
  bad.provenance.mutation.reset();
  EXPECT_THROW(validate(bad), DataError);
  auto cv = make_response("r", "ex1", ResponseKind::correct_variant);
  cv.gold_feedback.clear();
  EXPECT_THROW(validate(cv), DataError);
}

TEST(Segmenter, SplitsOnTerminatorsBeforeUppercase) {
  EXPECT_EQ(segment_sentences("The loop runs. It prints i. Done!"),
            (std::vector<std::string>{"The loop runs.", "It prints i.", "Done!"}));
  EXPECT_EQ(segment_sentences("Use e.g. Lists here. then more"), (std::vector<std::string>{"Use e.g. Lists here. then more"}));
  EXPECT_EQ(segment_sentences("Call f(x). Then stop."), (std::vector<std::string>{"Call f(x).", "Then stop."}));
}

TEST(Segmenter, JoinReproducesNormalizedText) {
  const std::string t = "  First  one.\nSecond (with \"quote.\") Third?  Fourth ";
  const auto s = segment_sentences(t);
  EXPECT_EQ(text::join(s, " "), text::normalize_whitespace(t));
}

TEST(Split, FullScaleCountsExact) {
  std::vector<CodeExample> examples = {{"j", Language::java, "x", {}, {"s"}}, {"p", Language::python, "x", {}, {"s"}}};
  std::vector<SimulatedResponse> responses;
  auto add = [&](const char* ex, ResponseKind kind, int n) {
    for (int i = 0; i < n; ++i) {
      responses.push_back(make_response(std::string(ex) + "/" + std::string(to_string(kind)) + std::to_string(i), ex, kind));
    }
  };
  add("j", ResponseKind::correct_variant, 466);
  add("j", ResponseKind::incomplete, 338);
  add("j", ResponseKind::incorrect, 330);
  add("p", ResponseKind::correct_variant, 466);
  add("p", ResponseKind::incomplete, 958);
  add("p", ResponseKind::incorrect, 330);
  ASSERT_EQ(responses.size(), 2888U);
  for (bool stratify : {true, false}) {
    const auto a = split_dataset(responses, examples, {}, 7, stratify);
    std::map<Split, int> counts;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].response_id, responses[i].id);
      ++counts[a[i].split];
    }
    EXPECT_EQ(counts[Split::train], 2166);
    EXPECT_EQ(counts[Split::test], 578);
    EXPECT_EQ(counts[Split::validation], 144);
    EXPECT_EQ(split_dataset(responses, examples, {}, 7, stratify), a);
  }
  EXPECT_NE(split_dataset(responses, examples, {}, 7), split_dataset(responses, examples, {}, 8));
}

TEST(Split, RejectsBadRatiosAndEmptyInput) {
  std::vector<CodeExample> examples = {sample_example()};
  std::vector<SimulatedResponse> responses = {make_response("r", "ex1", ResponseKind::correct_variant)};
  EXPECT_THROW(split_dataset({}, examples, {}, 1), ConfigError);
  EXPECT_THROW(split_dataset(responses, examples, {0.5, 0.2, 0.2}, 1), ConfigError);
  EXPECT_THROW(split_dataset(responses, examples, {1.1, -0.1, 0.0}, 1), ConfigError);
}
