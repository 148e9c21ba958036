// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "gapfinder/error.hpp"
#include "gapfinder/random.hpp"
#include "gapfinder/rater.hpp"

using namespace gapfinder;
using namespace gapfinder::rater;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("gapfinder_rater_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::vector<Sample> samples(std::size_t n) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"s" + std::to_string(i), "r" + std::to_string(i), i % 2 ? "java" : "python", "incomplete",
                   i % 3 ? "m1" : "m2", "p2", "code", "student", "GOLD-TEXT", "model says"});
  }
  return out;
}

std::vector<RubricLabel> labels_from(const std::string& annotator, const std::vector<bool>& correct) {
  std::vector<RubricLabel> out;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    out.push_back({"s" + std::to_string(i), annotator, correct[i], correct[i], true, "t"});
  }
  return out;
}

}  // namespace

TEST(Kappa, WorkedTable) {
  EXPECT_DOUBLE_EQ(cohen_kappa(Contingency{20, 5, 10, 15}), 0.4);
  EXPECT_DOUBLE_EQ(cohen_kappa(Contingency{10, 0, 0, 7}), 1.0);
  EXPECT_DOUBLE_EQ(cohen_kappa(Contingency{9, 0, 0, 0}), 1.0);
  EXPECT_THROW(cohen_kappa(Contingency{0, 0, 0, 0}), DataError);
}

TEST(Kappa, IndependentRatersNearZero) {
  Pcg32 rng(2024, 11);
  std::vector<bool> a, b;
  for (int i = 0; i < 10000; ++i) {
    a.push_back(rng.uniform() < 0.6);
    b.push_back(rng.uniform() < 0.6);
  }
  const auto la = labels_from("a", a), lb = labels_from("b", b);
  EXPECT_LT(std::abs(cohen_kappa(la, lb, Dimension::correct)), 0.1);
}

TEST(Kappa, ContingencyRequiresSameSamples) {
  auto a = labels_from("a", {true, false});
  auto b = labels_from("b", {true});
  EXPECT_THROW(contingency(a, b, Dimension::correct), DataError);
  b = labels_from("b", {true, true});
  const auto t = contingency(a, b, Dimension::correct);
  EXPECT_EQ(t.yy, 1);
  EXPECT_EQ(t.ny, 1);
}

TEST(Agreement, MeanOverPairsOnCommonSamples) {
  std::vector<RubricLabel> all;
  for (auto& l : labels_from("a", {true, false, true, false})) all.push_back(l);
  for (auto& l : labels_from("b", {true, false, true, false})) all.push_back(l);
  for (auto& l : labels_from("c", {true, false, true})) all.push_back(l);
  const auto r = agreement(all);
  EXPECT_EQ(r.annotators, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(r.pairs.size(), 3U);
  EXPECT_DOUBLE_EQ(r.mean.at(Dimension::correct), 1.0);
  EXPECT_THROW(agreement(labels_from("a", {true})), DataError);
}

TEST(Sampling, StratifiedQuotasAndDeterminism) {
  std::vector<std::string> strata;
  for (int i = 0; i < 60; ++i) strata.push_back("A");
  for (int i = 0; i < 30; ++i) strata.push_back("B");
  for (int i = 0; i < 10; ++i) strata.push_back("C");
  const auto s = stratified_sample(strata, 20, 5);
  ASSERT_EQ(s.size(), 20U);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  std::map<std::string, int> per;
  for (auto i : s) ++per[strata[i]];
  EXPECT_EQ(per["A"], 12);
  EXPECT_EQ(per["B"], 6);
  EXPECT_EQ(per["C"], 2);
  EXPECT_EQ(stratified_sample(strata, 20, 5), s);
  EXPECT_THROW(stratified_sample(strata, 101, 5), ConfigError);
  EXPECT_EQ(stratified_sample(strata, 100, 5).size(), 100U);
}

TEST(Render, BlindHidesGoldAndModel) {
  const auto s = samples(1)[0];
  const auto blind = render_sample(s, 0, 1, true);
  EXPECT_EQ(blind.find("GOLD-TEXT"), std::string::npos);
  EXPECT_EQ(blind.find("m2"), std::string::npos);
  EXPECT_NE(blind.find("model says"), std::string::npos);
  EXPECT_NE(render_sample(s, 0, 1, false).find("GOLD-TEXT"), std::string::npos);
}

TEST(Annotate, KeysPersistAndResume) {
  const auto dir = fresh_dir("session");
  const auto ss = samples(3);
  save_samples(dir / "samples.jsonl", ss);
  const auto session_path = dir / "a.session.json", labels = dir / "labels-a.jsonl";
  auto session = open_session(session_path, "a", dir / "samples.jsonl", labels);
  std::istringstream keys("y n x y q");
  std::ostringstream screen;
  const auto first = annotate(session, session_path, ss, keys, screen, [] { return std::string("T"); });
  EXPECT_EQ(first.labeled, 1U);
  EXPECT_TRUE(first.quit);
  EXPECT_NE(screen.str().find("invalid key"), std::string::npos);
  auto got = load_labels(labels);
  ASSERT_EQ(got.size(), 1U);
  EXPECT_EQ(got[0], (RubricLabel{"s0", "a", true, false, true, "T"}));

  auto resumed = open_session(session_path, "a", dir / "samples.jsonl", labels);
  EXPECT_EQ(resumed.cursor, 1U);
  std::istringstream more("s n n n y y y");
  const auto second = annotate(resumed, session_path, ss, more, screen, [] { return std::string("T"); });
  EXPECT_EQ(second.labeled, 1U);
  EXPECT_EQ(second.skipped, 1U);
  EXPECT_TRUE(resumed.completed);
  got = load_labels(labels);
  ASSERT_EQ(got.size(), 2U);
  EXPECT_EQ(got[1].sample_id, "s2");
  fs::remove_all(dir);
}

TEST(Annotate, DuplicateLabelsRejected) {
  const auto dir = fresh_dir("dup");
  const auto p = dir / "labels.jsonl";
  const RubricLabel l{"s0", "a", true, true, true, "t"};
  io::append_line(p, to_json(l).dump());
  io::append_line(p, to_json(l).dump());
  EXPECT_THROW(load_labels(p), DataError);
  EXPECT_TRUE(load_labels(dir / "missing.jsonl").empty());
  fs::remove_all(dir);
}

TEST(Rubric, AggregateAndTable) {
  const auto ss = samples(4);
  std::vector<RubricLabel> labels = {{"s0", "a", true, false, true, ""},  {"s0", "b", false, false, true, ""},
                                     {"s1", "a", true, true, true, ""},   {"s2", "a", false, false, false, ""},
                                     {"s3", "a", true, true, false, ""}};
  const auto rows = aggregate_rubric(labels, ss);
  ASSERT_FALSE(rows.empty());
  const auto& r0 = rows[0];
  EXPECT_EQ(r0.model, "m2");
  EXPECT_EQ(r0.language, "python");
  EXPECT_EQ(r0.samples, 1U);
  EXPECT_DOUBLE_EQ(r0.correct, 0.5);
  const auto table = render_table2(rows);
  EXPECT_LT(table.find("Java"), table.find("Python"));
  EXPECT_NE(table.find("Diagnostic"), std::string::npos);
  labels.push_back({"zz", "a", true, true, true, ""});
  EXPECT_THROW(aggregate_rubric(labels, ss), DataError);
}
