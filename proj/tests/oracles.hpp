#pragma once

// Reference computations for the tests. None of these call into the
// library; they are deliberately naive so they can be trusted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline std::uint8_t xor_fold(const std::vector<std::uint8_t>& bytes) {
  std::uint8_t x = 0;
  for (auto b : bytes) x ^= b;
  return x;
}

/// Register delta in thousandths of a kWh, wrapping at 1e6 kWh.
inline std::int64_t wrapped_delta_milli(std::int64_t before, std::int64_t after) {
  const std::int64_t modulus = 1'000'000'000;
  return ((after - before) % modulus + modulus) % modulus;
}

/// Sum of squared distances of each point to the mean of its group.
inline double partition_inertia(const std::vector<std::vector<double>>& pts, const std::vector<int>& label, int k) {
  const std::size_t dim = pts.empty() ? 0 : pts[0].size();
  double total = 0;
  for (int c = 0; c < k; ++c) {
    std::vector<double> mean(dim, 0.0);
    int n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (label[i] != c) continue;
      ++n;
      for (std::size_t d = 0; d < dim; ++d) mean[d] += pts[i][d];
    }
    if (n == 0) continue;
    for (auto& m : mean) m /= n;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (label[i] != c) continue;
      for (std::size_t d = 0; d < dim; ++d) total += (pts[i][d] - mean[d]) * (pts[i][d] - mean[d]);
    }
  }
  return total;
}

/// Smallest inertia over every assignment of n points to k labels (k^n of
/// them). Partitions with empty groups are included; they never win over
/// the best partition with k non-empty groups, so the minimum is the same.
inline double brute_force_inertia(const std::vector<std::vector<double>>& pts, int k) {
  const std::size_t n = pts.size();
  std::vector<int> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    best = std::min(best, partition_inertia(pts, label, k));
    std::size_t i = 0;
    while (i < n && ++label[i] == k) label[i++] = 0;
    if (i == n) break;
  }
  return best;
}

inline double choose2(double x) { return x * (x - 1) / 2; }

/// Hubert-Arabie adjusted Rand index from the contingency table.
template <typename A, typename B>
double adjusted_rand_index(const std::vector<A>& a, const std::vector<B>& b) {
  std::map<std::pair<A, B>, double> cell;
  std::map<A, double> rows;
  std::map<B, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cell[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  double index = 0, sa = 0, sb = 0;
  for (const auto& [key, v] : cell) index += choose2(v);
  for (const auto& [key, v] : rows) sa += choose2(v);
  for (const auto& [key, v] : cols) sb += choose2(v);
  const double expected = sa * sb / choose2(double(a.size()));
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (index - expected) / (max_index - expected);
}

inline double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace oracle
