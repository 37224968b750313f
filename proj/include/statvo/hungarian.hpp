#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "statvo/errors.hpp"

namespace statvo {

using Assignment = std::vector<std::pair<int, int>>;

// Exact minimum-cost assignment of min(rows, cols) pairs via shortest
// augmenting paths with potentials, O(n^2 m). Handles rectangular and
// negative costs; ties resolve to the lowest scanned index, so the result is
// deterministic.
inline Assignment hungarian_solve(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return {};
  if (!cost.allFinite()) throw EngineError("assignment costs must be finite");

  const bool transposed = rows > cols;
  const int r = transposed ? cols : rows;
  const int c = transposed ? rows : cols;
  auto at = [&](int i, int j) { return transposed ? cost(j, i) : cost(i, j); };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(r + 1, 0.0), v(c + 1, 0.0);
  std::vector<int> match(c + 1, 0), way(c + 1, 0);

  for (int i = 1; i <= r; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> min_reduced(c + 1, inf);
    std::vector<char> used(c + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= c; ++j) {
        if (used[j]) continue;
        const double reduced = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < min_reduced[j]) {
          min_reduced[j] = reduced;
          way[j] = j0;
        }
        if (min_reduced[j] < delta) {
          delta = min_reduced[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= c; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          min_reduced[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.reserve(r);
  for (int j = 1; j <= c; ++j) {
    if (match[j] == 0) continue;
    if (transposed) {
      out.emplace_back(j - 1, match[j] - 1);
    } else {
      out.emplace_back(match[j] - 1, j - 1);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline double assignment_cost(const Eigen::MatrixXd& cost, const Assignment& a) {
  double total = 0.0;
  for (const auto& [i, j] : a) total += cost(i, j);
  return total;
}

}  // namespace statvo
