// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "gapfinder/error.hpp"

namespace gapfinder {

namespace detail {

// Quotas within this distance of an integer are snapped to it, so that
// 20 * 0.2 lands on 4 and not on 3.9999999999999996.
inline constexpr double kQuotaSnap = 1e-9;

inline double snap(double quota) {
  const double nearest = std::round(quota);
  return std::abs(quota - nearest) < kQuotaSnap ? nearest : quota;
}

}  // namespace detail

/// Largest-remainder (Hamilton) apportionment of `total` units over `weights`.
/// Floors every quota, then hands the leftover units to the largest fractional
/// remainders; ties go to the lower index.
inline std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> weights) {
  if (weights.empty()) throw ConfigError("largest_remainder: no weights");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw ConfigError("largest_remainder: weights must have a positive sum");
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw ConfigError("largest_remainder: negative or non-finite weight");
  }

  std::vector<std::size_t> counts(weights.size());
  std::vector<double> remainders(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = detail::snap(static_cast<double>(total) * weights[i] / sum);
    const double floored = std::floor(quota);
    counts[i] = static_cast<std::size_t>(floored);
    remainders[i] = quota - floored;
    assigned += counts[i];
  }

  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

/// Two-way apportionment: row r receives exactly `row_totals[r]` units spread
/// over the columns in proportion to `weights`, and column c receives exactly
/// `largest_remainder(sum(row_totals), weights)[c]` units.
///
/// Cells start at the floor of their quota. Leftover units go to cells in order
/// of decreasing fractional remainder (ties: row-major order) while both the
/// row and the column still need units; any units still missing after that
/// pass go to the first cell whose row and column both have a deficit.
inline std::vector<std::vector<std::size_t>> apportion_table(std::span<const std::size_t> row_totals,
                                                             std::span<const double> weights) {
  const std::size_t rows = row_totals.size();
  const std::size_t cols = weights.size();
  const std::size_t grand = std::accumulate(row_totals.begin(), row_totals.end(), std::size_t{0});
  const std::vector<std::size_t> col_targets = largest_remainder(grand, weights);
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);

  std::vector<std::vector<std::size_t>> table(rows, std::vector<std::size_t>(cols, 0));
  std::vector<std::size_t> row_need(row_totals.begin(), row_totals.end());
  std::vector<std::size_t> col_need = col_targets;

  struct Cell {
    std::size_t r, c;
    double remainder;
  };
  std::vector<Cell> cells;
  cells.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double quota = detail::snap(static_cast<double>(row_totals[r]) * weights[c] / sum);
      const double floored = std::floor(quota);
      auto units = static_cast<std::size_t>(floored);
      units = std::min({units, row_need[r], col_need[c]});
      table[r][c] = units;
      row_need[r] -= units;
      col_need[c] -= units;
      cells.push_back({r, c, quota - floored});
    }
  }

  std::stable_sort(cells.begin(), cells.end(),
                   [](const Cell& a, const Cell& b) { return a.remainder > b.remainder; });
  for (const Cell& cell : cells) {
    if (cell.remainder <= 0.0) break;
    if (row_need[cell.r] > 0 && col_need[cell.c] > 0) {
      ++table[cell.r][cell.c];
      --row_need[cell.r];
      --col_need[cell.c];
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols && row_need[r] > 0; ++c) {
      const std::size_t units = std::min(row_need[r], col_need[c]);
      table[r][c] += units;
      row_need[r] -= units;
      col_need[c] -= units;
    }
  }
  return table;
}

}  // namespace gapfinder
