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

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "p4d/geom.hpp"

namespace p4d {

/// Uniform voxel hash over a point subset. Queries return indices into the
/// original frame, never into the subset.
class VoxelGrid {
 public:
  static constexpr double kDefaultCellSize = 0.5;

  VoxelGrid(const PointMatrix& points, double cell_size = kDefaultCellSize);
  VoxelGrid(const PointMatrix& points, std::span<const std::uint32_t> subset,
            double cell_size = kDefaultCellSize);

  std::size_t size() const { return ids_.size(); }
  double cellSize() const { return cell_; }

  /// Euclidean-closest point, ties to the lowest index. Throws on an empty grid.
  NearestNeighbor nearest(const Vector3d& query) const;

  /// All points with distance <= radius, ascending by index.
  void radius(const Vector3d& query, double radius, std::vector<std::uint32_t>& out) const;

 private:
  struct Key {
    std::int64_t x, y, z;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return static_cast<std::size_t>(k.x * 73856093LL ^ k.y * 19349663LL ^ k.z * 83492791LL);
    }
  };

  Key keyOf(const Vector3d& p) const;
  void build(const PointMatrix& points, std::span<const std::uint32_t> subset, bool all);
  NearestNeighbor linearScan(const Vector3d& query) const;

  double cell_;
  Eigen::Matrix3Xd xyz_;
  std::vector<std::uint32_t> ids_;
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> cells_;  // slots into xyz_/ids_
  Key lo_{0, 0, 0};
  Key hi_{0, 0, 0};
};

}  // namespace p4d
