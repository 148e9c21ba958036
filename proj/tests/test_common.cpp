// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <array>
#include <filesystem>
#include <numeric>

#include "gapfinder/error.hpp"
#include "gapfinder/apportion.hpp"
#include "gapfinder/io.hpp"
#include "gapfinder/random.hpp"
#include "gapfinder/text.hpp"

using namespace gapfinder;

TEST(Pcg32, MatchesReferenceStream) {
  // pcg32_srandom_r(&rng, 42, 54) from the reference C implementation.
  Pcg32 rng(42, 54);
  const std::array<std::uint32_t, 6> expected = {0xa15c02b7, 0x7b47f409, 0xba1d3330,
                                                 0x83d2f293, 0xbfa4784b, 0xcbed606e};
  for (auto e : expected) EXPECT_EQ(rng.next(), e);
}

TEST(Pcg32, BoundedAndUniformStayInRange) {
  Pcg32 rng = Pcg32::for_key(7, "range");
  for (int i = 0; i < 10000; ++i) {
    EXPECT_LT(rng.bounded(13), 13U);
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Pcg32, KeyedStreamsDiffer) {
  Pcg32 a = Pcg32::for_key(1, "ex1"), b = Pcg32::for_key(1, "ex2"), c = Pcg32::for_key(1, "ex1");
  const auto x = a.next();
  EXPECT_NE(x, b.next());
  EXPECT_EQ(x, c.next());
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Shuffle, IsPermutationAndDeterministic) {
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  Pcg32 r1(3, 9), r2(3, 9);
  shuffle(std::span<int>(a), r1);
  shuffle(std::span<int>(b), r2);
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}

TEST(LargestRemainder, SplitsFullScaleDataset) {
  const std::array<double, 3> w = {0.75, 0.20, 0.05};
  EXPECT_EQ(largest_remainder(2888, w), (std::vector<std::size_t>{2166, 578, 144}));
  EXPECT_EQ(largest_remainder(20, w), (std::vector<std::size_t>{15, 4, 1}));
  EXPECT_EQ(largest_remainder(7, w), (std::vector<std::size_t>{5, 2, 0}));
}

TEST(LargestRemainder, RejectsBadWeights) {
  const std::array<double, 2> zero = {0.0, 0.0};
  EXPECT_THROW(largest_remainder(3, zero), ConfigError);
  const std::array<double, 2> neg = {1.0, -0.5};
  EXPECT_THROW(largest_remainder(3, neg), ConfigError);
}

TEST(ApportionTable, RowAndColumnTotalsExact) {
  const std::array<double, 3> w = {0.75, 0.20, 0.05};
  const std::vector<std::size_t> rows = {466, 338, 330, 466, 958, 330};
  const auto table = apportion_table(rows, w);
  std::vector<std::size_t> cols(3, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    EXPECT_EQ(std::accumulate(table[r].begin(), table[r].end(), std::size_t{0}), rows[r]);
    for (std::size_t c = 0; c < 3; ++c) cols[c] += table[r][c];
  }
  EXPECT_EQ(cols, (std::vector<std::size_t>{2166, 578, 144}));
}

TEST(Text, WhitespaceHelpers) {
  EXPECT_EQ(text::normalize_whitespace("  a \t b\n\nc  "), "a b c");
  EXPECT_EQ(text::trim("  x "), "x");
  EXPECT_EQ(text::split_whitespace(" one  two "), (std::vector<std::string>{"one", "two"}));
  EXPECT_EQ(text::to_lower("MiXeD"), "mixed");
}

TEST(Text, Utf8RoundTrip) {
  const std::string s = "caf\xc3\xa9 \xe2\x82\xac";
  const auto cps = text::utf8_decode(s);
  EXPECT_EQ(cps.size(), 6U);
  EXPECT_EQ(text::utf8_encode(cps), s);
  EXPECT_EQ(text::utf8_decode("\xff").front(), U'�');
}

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, AtomicWriteAndAppend) {
  const auto dir = std::filesystem::temp_directory_path() / "gapfinder_io_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto p = dir / "f.txt";
  io::write_file_atomic(p, "one\n");
  io::append_line(p, "two");
  EXPECT_EQ(io::read_file(p), "one\ntwo\n");
  std::filesystem::remove_all(dir);
}

TEST(Io, CheckFieldsRejectsUnknownAndMissing) {
  const json ok = {{"a", 1}};
  EXPECT_NO_THROW(io::check_fields(ok, {"a", "b"}, {"a"}, "rec"));
  EXPECT_THROW(io::check_fields(json{{"c", 1}}, {"a"}, {}, "rec"), DataError);
  EXPECT_THROW(io::check_fields(json{{"b", 1}}, {"a", "b"}, {"a"}, "rec"), DataError);
}
