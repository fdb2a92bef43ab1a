#pragma once

// Exhaustive / direct-definition references.

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

/// Minimum over all injective maps of the smaller side into the larger one.
inline double brute_assignment(const Eigen::MatrixXd& cost) {
  const bool t = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = t ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int r = static_cast<int>(a.rows()), c = static_cast<int>(a.cols());
  if (r == 0) return 0.0;
  std::vector<int> cols(static_cast<size_t>(c));
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < r; ++i) s += a(i, cols[static_cast<size_t>(i)]);
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

inline std::vector<double> direct_convolution(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    for (size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
  }
  return y;
}

template <typename T>
long long circular_autocorrelation(const std::vector<T>& s, size_t lag) {
  long long acc = 0;
  for (size_t i = 0; i < s.size(); ++i) acc += static_cast<long long>(s[i]) * s[(i + lag) % s.size()];
  return acc;
}

/// Largest number of simultaneously open half-open intervals.
inline int max_overlap(std::vector<std::pair<double, double>> intervals) {
  std::vector<std::pair<double, int>> edges;
  for (const auto& [a, b] : intervals) {
    edges.emplace_back(a, +1);
    edges.emplace_back(b, -1);
  }
  std::sort(edges.begin(), edges.end());
  int depth = 0, best = 0;
  for (const auto& e : edges) best = std::max(best, depth += e.second);
  return best;
}

}  // namespace oracle
