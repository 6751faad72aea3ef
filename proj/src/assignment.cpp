// Copyright 2026 The p4d Authors
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

#include "p4d/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace p4d {

namespace {

// Shortest-augmenting-path Hungarian on a dense square matrix. On return,
// row_of_col[j] is the row matched to column j and u, v are optimal duals
// (a(i,j) - u[i] - v[j] >= 0, zero on matched pairs). 1-based internally.
void hungarian(const MatrixXd& a, std::vector<int>& row_of_col, std::vector<double>& u, std::vector<double>& v) {
  const int n = static_cast<int>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
    } while (j0 != 0);
  }
  row_of_col.assign(n, -1);
  for (int j = 1; j <= n; ++j) row_of_col[j - 1] = p[j] - 1;
}

// Lexicographically smallest perfect matching inside the tight-edge graph,
// starting from the perfect matching the Hungarian pass found.
class TightMatcher {
 public:
  TightMatcher(std::vector<std::vector<int>> adj, std::vector<int> col_of_row)
      : adj_(std::move(adj)), col_of_row_(std::move(col_of_row)) {
    const int n = static_cast<int>(adj_.size());
    row_of_col_.assign(n, -1);
    for (int r = 0; r < n; ++r) row_of_col_[col_of_row_[r]] = r;
  }

  std::vector<int> solve() {
    const int n = static_cast<int>(adj_.size());
    for (int r = 0; r < n; ++r) {
      for (int c : adj_[r]) {
        if (c == col_of_row_[r]) break;
        if (tryFix(r, c)) break;
      }
    }
    return col_of_row_;
  }

 private:
  // Moves row r onto column c and re-routes the displaced row through an
  // alternating path over rows > r to the column r vacates.
  bool tryFix(int r, int c) {
    const int displaced = row_of_col_[c];
    if (displaced < r) return false;
    const int freed = col_of_row_[r];
    std::vector<int> saved_col = col_of_row_, saved_row = row_of_col_;
    col_of_row_[r] = c;
    row_of_col_[c] = r;
    row_of_col_[freed] = -1;
    col_of_row_[displaced] = -1;
    seen_.assign(adj_.size(), 0);
    if (augment(displaced, r)) return true;
    col_of_row_ = std::move(saved_col);
    row_of_col_ = std::move(saved_row);
    return false;
  }

  bool augment(int row, int fixed_upto) {
    for (int c : adj_[row]) {
      if (seen_[c]) continue;
      seen_[c] = 1;
      const int owner = row_of_col_[c];
      if (owner != -1 && owner <= fixed_upto) continue;
      if (owner == -1 || augment(owner, fixed_upto)) {
        col_of_row_[row] = c;
        row_of_col_[c] = row;
        return true;
      }
    }
    return false;
  }

  std::vector<std::vector<int>> adj_;
  std::vector<int> col_of_row_;
  std::vector<int> row_of_col_;
  std::vector<char> seen_;
};

void finalize(const MatrixXd& cost, Matching& m) {
  std::sort(m.pairs.begin(), m.pairs.end());
  std::vector<char> row_used(static_cast<std::size_t>(cost.rows()), 0), col_used(static_cast<std::size_t>(cost.cols()), 0);
  m.total_cost = 0.0;
  for (const auto& [r, c] : m.pairs) {
    row_used[r] = 1;
    col_used[c] = 1;
    m.total_cost += cost(r, c);
  }
  for (int r = 0; r < cost.rows(); ++r)
    if (!row_used[r]) m.unmatched_rows.push_back(r);
  for (int c = 0; c < cost.cols(); ++c)
    if (!col_used[c]) m.unmatched_cols.push_back(c);
}

}  // namespace

Matching linear_assignment(const MatrixXd& cost, double max_cost) {
  if (!cost.allFinite()) throw ArgumentError("linear_assignment: non-finite cost");
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  Matching m;
  if (rows == 0 || cols == 0) {
    finalize(cost, m);
    return m;
  }

  // Square padding: dummy columns absorb unmatched rows, dummy rows absorb
  // unmatched columns. Real pairs carry (cost - max_cost) < 0.
  const int n = rows + cols;
  double mag = 0.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (cost(r, c) < max_cost) mag += max_cost - cost(r, c);
  const double forbidden = 1.0 + 2.0 * mag;
  MatrixXd padded = MatrixXd::Zero(n, n);
  std::vector<std::vector<char>> allowed(n, std::vector<char>(n, 1));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (cost(r, c) < max_cost) {
        padded(r, c) = cost(r, c) - max_cost;
      } else {
        padded(r, c) = forbidden;
        allowed[r][c] = 0;
      }
    }
  }

  std::vector<int> row_of_col;
  std::vector<double> u, v;
  hungarian(padded, row_of_col, u, v);

  std::vector<int> col_of_row(n, -1);
  for (int c = 0; c < n; ++c) col_of_row[row_of_col[c]] = c;

  const double tol = 1e-9 * (1.0 + mag);
  std::vector<std::vector<int>> tight(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (!allowed[r][c]) continue;
      if (padded(r, c) - u[r + 1] - v[c + 1] <= tol || col_of_row[r] == c) tight[r].push_back(c);
    }
  }
  col_of_row = TightMatcher(std::move(tight), std::move(col_of_row)).solve();

  for (int r = 0; r < rows; ++r) {
    if (col_of_row[r] < cols) m.pairs.emplace_back(r, col_of_row[r]);
  }
  finalize(cost, m);
  return m;
}

Matching greedy_assignment(const MatrixXd& cost, double max_cost) {
  std::vector<std::tuple<double, int, int>> cand;
  for (int r = 0; r < cost.rows(); ++r)
    for (int c = 0; c < cost.cols(); ++c)
      if (cost(r, c) < max_cost) cand.emplace_back(cost(r, c), r, c);
  std::sort(cand.begin(), cand.end());
  std::vector<char> row_used(static_cast<std::size_t>(cost.rows()), 0), col_used(static_cast<std::size_t>(cost.cols()), 0);
  Matching m;
  for (const auto& [cst, r, c] : cand) {
    if (row_used[r] || col_used[c]) continue;
    row_used[r] = col_used[c] = 1;
    m.pairs.emplace_back(r, c);
  }
  finalize(cost, m);
  return m;
}

}  // namespace p4d
