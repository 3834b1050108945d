/*
 * Copyright 2026 The mmrs Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mmrs/core.hpp"
#include "mmrs/io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <limits>

namespace mmrs {
namespace {

using testing::expect_error;

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(ParallelFor, SameSlotsForAnyThreadCount) {
  const std::size_t n = 37;
  std::vector<double> one(n), many(n);
  parallel_for(n, [&](std::size_t b) { one[b] = static_cast<double>(b * b) / 3.0; }, 1);
  parallel_for(n, [&](std::size_t b) { many[b] = static_cast<double>(b * b) / 3.0; }, 4);
  EXPECT_EQ(one, many);
}

TEST(ParallelFor, EveryBlockRunsOnce) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), [&](std::size_t b) { ++hits[b]; }, 3);
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(
                   8, [](std::size_t b) { if (b == 5) runtime_error("core", "boom"); }, 3),
               Error);
}

TEST(ErrorKinds, MessageCarriesModule) {
  try {
    config_error("modality_graph", "k out of range");
  } catch (const Error& e) {
    EXPECT_EQ(e.module(), "modality_graph");
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_STREQ(e.what(), "modality_graph: k out of range");
  }
}

TEST(Csv, SplitsQuotedFields) {
  const auto f = io::split_csv(R"(a,"b,c","say ""hi""",)");
  ASSERT_TRUE(f);
  ASSERT_EQ(f->size(), 4u);
  EXPECT_EQ((*f)[0], "a");
  EXPECT_EQ((*f)[1], "b,c");
  EXPECT_EQ((*f)[2], "say \"hi\"");
  EXPECT_EQ((*f)[3], "");
  EXPECT_FALSE(io::split_csv("\"unterminated"));
}

TEST(Csv, QuoteRoundTrip) {
  for (std::string s : {"plain", "with,comma", "with \"quote\"", ""}) {
    const auto f = io::split_csv(io::quote_csv(s));
    ASSERT_TRUE(f);
    ASSERT_EQ(f->size(), 1u);
    EXPECT_EQ((*f)[0], s);
  }
}

TEST(Utf8, AcceptsValidRejectsInvalid) {
  EXPECT_TRUE(io::valid_utf8("plain"));
  EXPECT_TRUE(io::valid_utf8("caf\xC3\xA9"));
  EXPECT_TRUE(io::valid_utf8("\xE2\x82\xAC"));
  EXPECT_FALSE(io::valid_utf8("\xC3"));
  EXPECT_FALSE(io::valid_utf8("\xFF"));
  EXPECT_FALSE(io::valid_utf8("\xC0\xAF"));  // overlong
}

TEST(Numbers, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int t = 0; t < 1000; ++t) {
    const double v = u(rng) / 7.0;
    EXPECT_EQ(*io::parse_number<double>(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
}

TEST(Numbers, ParseRejectsJunk) {
  EXPECT_FALSE(io::parse_number<int>("12x"));
  EXPECT_FALSE(io::parse_number<int>(""));
  EXPECT_FALSE(io::parse_number<std::size_t>("-3"));
  EXPECT_EQ(*io::parse_number<int>(" +7 "), 7);
}

TEST(Lines, StripsBomAndCarriageReturns) {
  const auto l = io::lines("\xEF\xBB\xBFh1\r\nrow\n\nlast");
  ASSERT_EQ(l.size(), 4u);
  EXPECT_EQ(l[0], "h1");
  EXPECT_EQ(l[1], "row");
  EXPECT_EQ(l[2], "");
  EXPECT_EQ(l[3], "last");
}

TEST(Bytes, LittleEndianRoundTrip) {
  io::ByteWriter w;
  w.u32(0x01020304);
  w.u64(0x1122334455667788ULL);
  w.f32(1.5f);
  w.f64(-0.1);
  w.str("xyz");
  EXPECT_EQ(static_cast<unsigned char>(w.data()[0]), 0x04);
  io::ByteReader r(w.data(), "test", "blob");
  EXPECT_EQ(r.u32(), 0x01020304u);
  EXPECT_EQ(r.u64(), 0x1122334455667788ULL);
  EXPECT_EQ(r.f32(), 1.5f);
  EXPECT_EQ(r.f64(), -0.1);
  EXPECT_EQ(r.str(), "xyz");
  EXPECT_EQ(r.remaining(), 0u);
}

TEST(Bytes, OverrunIsInputError) {
  io::ByteWriter w;
  w.u32(5);
  io::ByteReader r(w.data(), "test", "blob");
  expect_error([&] { r.u64(); }, ErrorKind::Input, "blob is truncated or corrupt");
}

TEST(Files, MissingFileNamesPath) {
  expect_error([] { io::read_file("/nonexistent/dir/file.csv", "ingest"); }, ErrorKind::Input,
               "/nonexistent/dir/file.csv");
}

}  // namespace
}  // namespace mmrs
