// Copyright 2026 The cdrloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cdrloc/io.hpp"

#include <filesystem>
#include <stdexcept>

#include <gtest/gtest.h>

#include "cdrloc/errors.hpp"

namespace cdrloc::io {
namespace {

TEST(FormatDouble, RoundTripsExactly) {
  for (double v : {0.0, 1.0, -2.5, 1e-3, 58.42371095212709, 1.1e-308,
                   26.8088301843025, 3.0e-309, 1e18}) {
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
}

TEST(ParseDouble, AcceptsGradualUnderflow) {
  // Values below the smallest normal double must parse, not throw.
  EXPECT_EQ(parse_double("3.20862274649637e-309"), 3.20862274649637e-309);
  EXPECT_EQ(parse_double("1e-320"), 1e-320);
  EXPECT_EQ(parse_double("1e-400"), 0.0);
}

TEST(ParseDouble, RejectsJunkAndOverflow) {
  EXPECT_THROW(parse_double(""), std::invalid_argument);
  EXPECT_THROW(parse_double("abc"), std::invalid_argument);
  EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
  EXPECT_THROW(parse_double("1e400"), std::invalid_argument);
}

TEST(SplitCsvLine, KeepsEmptyFields) {
  auto fields = split_csv_line("a,,c,");
  ASSERT_EQ(fields.size(), 4u);
  EXPECT_EQ(fields[0], "a");
  EXPECT_EQ(fields[1], "");
  EXPECT_EQ(fields[2], "c");
  EXPECT_EQ(fields[3], "");
}

TEST(StripCr, HandlesCrlf) {
  EXPECT_EQ(strip_cr("abc\r"), "abc");
  EXPECT_EQ(strip_cr("abc"), "abc");
  EXPECT_EQ(strip_cr(""), "");
}

TEST(Files, WriteCreatesParentDirectoriesAndReadsBack) {
  auto dir = std::filesystem::temp_directory_path() / "cdrloc_io_test";
  std::filesystem::remove_all(dir);
  auto path = dir / "nested" / "file.txt";
  write_file(path, "hello\n");
  EXPECT_EQ(read_file(path), "hello\n");
  std::filesystem::remove_all(dir);
}

TEST(Files, MissingFileThrows) {
  EXPECT_THROW(read_file("/nonexistent/cdrloc/file.csv"), Error);
}

}  // namespace
}  // namespace cdrloc::io
