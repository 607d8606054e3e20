// assignment.hpp: rectangular max-weight bipartite assignment via the
// potential-based Hungarian algorithm (Jonker-Volgenant style).
#pragma once

#include <algorithm>
#include <limits>
#include <vector>

namespace motkit {

/// Weight matrix accessor: weights[r * cols + c]. Pairs with weight <= 0 are
/// never assigned. With cardinality_first, the number of assigned pairs is
/// maximized before the total weight (per-frame tracking matches); without
/// it, the plain weight total is maximized (identity-level matching).
/// Returns row -> column (-1 when unassigned).
inline std::vector<int> max_weight_assignment(const std::vector<double>& weights,
                                              int rows, int cols,
                                              bool cardinality_first = true) {
  std::vector<int> match(rows, -1);
  if (rows == 0 || cols == 0) return match;

  // Cardinality-dominant bonus: any k+1 pair assignment must beat any k pair
  // assignment, so the bonus exceeds the largest possible weight total.
  double max_w = 0.0;
  for (double w : weights) max_w = std::max(max_w, w);
  const int n = std::max(rows, cols);
  const double bonus = cardinality_first ? max_w * n + 1.0 : 0.0;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Minimization form on an n x n padded matrix; admissible pairs cost
  // -(w + bonus), everything else 0 (meaning "leave unassigned").
  auto cost = [&](int r, int c) -> double {
    if (r < rows && c < cols) {
      const double w = weights[static_cast<std::size_t>(r) * cols + c];
      if (w > 0.0) return -(w + bonus);
    }
    return 0.0;
  };

  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= n; ++j) {
    const int r = p[j] - 1;
    const int c = j - 1;
    if (r >= 0 && r < rows && c < cols &&
        weights[static_cast<std::size_t>(r) * cols + c] > 0.0)
      match[r] = c;
  }
  return match;
}

}  // namespace motkit
