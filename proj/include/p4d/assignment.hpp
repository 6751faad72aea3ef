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

#pragma once

#include <utility>
#include <vector>

#include "p4d/types.hpp"

namespace p4d {

/// One-to-one row/column matching.
struct Matching {
  std::vector<std::pair<int, int>> pairs;  // ascending by row
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
  double total_cost = 0.0;  // sum of matched costs, accumulated in row order
};

/// Minimum-cost one-to-one matching over pairs with cost < max_cost.
///
/// Leaving a row unmatched is charged max_cost, so the solver minimizes
/// sum over matched pairs of (cost - max_cost). Among equal-cost optima the
/// lexicographically smallest (row, col) pair list wins.
Matching linear_assignment(const MatrixXd& cost, double max_cost);

/// Greedy matching: repeatedly takes the cheapest remaining pair below
/// max_cost, ties broken by (row, col).
Matching greedy_assignment(const MatrixXd& cost, double max_cost);

}  // namespace p4d
