// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <istream>
#include <string>
#include <string_view>

#include <json.hpp>

namespace gapfinder {

using json = nlohmann::json;

namespace io {

/// Calls `visit(line_number, record)` for every non-blank line. Line numbers
/// are 1-based. A line that is not a JSON object raises DataError naming it.
void for_each_record(std::istream& in, std::string_view source,
                     const std::function<void(std::size_t, const json&)>& visit);
void for_each_record(const std::filesystem::path& path,
                     const std::function<void(std::size_t, const json&)>& visit);

/// Reject keys outside `allowed` and require every key in `required`.
void check_fields(const json& record, std::initializer_list<std::string_view> allowed,
                  std::initializer_list<std::string_view> required, std::string_view context);

std::string read_file(const std::filesystem::path& path);

/// Write via a sibling temp file and rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Append one line and flush it to the OS before returning.
void append_line(const std::filesystem::path& path, std::string_view line);

std::string sha256_hex(std::string_view data);

}  // namespace io

namespace log {

using Sink = std::function<void(std::string_view level, std::string_view message)>;

/// Replace the process-wide sink (default: stderr). Returns the previous one.
Sink set_sink(Sink sink);
void warn(std::string_view message);
void info(std::string_view message);

}  // namespace log

}  // namespace gapfinder
