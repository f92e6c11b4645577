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

#ifndef CDRLOC_IO_HPP_
#define CDRLOC_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cdrloc::io {

/// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);

/// Parses a finite decimal; tolerates gradual underflow, rejects trailing
/// junk, overflow, and empty input by throwing std::invalid_argument.
double parse_double(const std::string& text);

/// Splits one CSV line on commas; no quoting, fields returned verbatim.
std::vector<std::string> split_csv_line(std::string_view line);

/// Strips a trailing '\r' so CRLF input parses like LF.
std::string_view strip_cr(std::string_view line);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace cdrloc::io

#endif  // CDRLOC_IO_HPP_
