// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gapfinder::text {

bool is_space(char c) noexcept;

/// Trim ASCII whitespace at both ends.
std::string_view trim(std::string_view s) noexcept;

/// Collapse every run of ASCII whitespace to one space and trim the ends.
std::string normalize_whitespace(std::string_view s);

/// Split on runs of ASCII whitespace; never yields empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

std::string join(std::span<const std::string> parts, std::string_view sep);

std::string to_lower(std::string_view s);

bool starts_with_upper(std::string_view s) noexcept;

/// Decode UTF-8 into code points. Invalid bytes decode to U+FFFD one byte at a time.
std::vector<char32_t> utf8_decode(std::string_view s);

std::string utf8_encode(char32_t cp);
std::string utf8_encode(std::span<const char32_t> cps);

}  // namespace gapfinder::text
