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

#include "p4d/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace p4d {

namespace {

// Rings searched before the exhaustive fallback.
constexpr std::int64_t kMaxRings = 24;

double sq_dist(const Eigen::Matrix3Xd& xyz, std::size_t slot, const Vector3d& q) {
  const double dx = xyz(0, slot) - q.x();
  const double dy = xyz(1, slot) - q.y();
  const double dz = xyz(2, slot) - q.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

VoxelGrid::VoxelGrid(const PointMatrix& points, double cell_size) : cell_(cell_size) {
  build(points, {}, true);
}

VoxelGrid::VoxelGrid(const PointMatrix& points, std::span<const std::uint32_t> subset, double cell_size)
    : cell_(cell_size) {
  build(points, subset, false);
}

VoxelGrid::Key VoxelGrid::keyOf(const Vector3d& p) const {
  return Key{static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
             static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

void VoxelGrid::build(const PointMatrix& points, std::span<const std::uint32_t> subset, bool all) {
  if (!(cell_ > 0.0)) throw ArgumentError("VoxelGrid: cell size must be positive");
  const std::size_t n = all ? static_cast<std::size_t>(points.rows()) : subset.size();
  xyz_.resize(3, static_cast<Eigen::Index>(n));
  ids_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint32_t id = all ? static_cast<std::uint32_t>(s) : subset[s];
    ids_[s] = id;
    xyz_.col(static_cast<Eigen::Index>(s)) = points.row(id).head<3>().transpose();
    const Key k = keyOf(xyz_.col(static_cast<Eigen::Index>(s)));
    cells_[k].push_back(static_cast<std::uint32_t>(s));
    if (s == 0) {
      lo_ = hi_ = k;
    } else {
      lo_ = Key{std::min(lo_.x, k.x), std::min(lo_.y, k.y), std::min(lo_.z, k.z)};
      hi_ = Key{std::max(hi_.x, k.x), std::max(hi_.y, k.y), std::max(hi_.z, k.z)};
    }
  }
}

NearestNeighbor VoxelGrid::linearScan(const Vector3d& query) const {
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_id = 0;
  for (std::size_t s = 0; s < ids_.size(); ++s) {
    const double d = sq_dist(xyz_, s, query);
    if (d < best || (d == best && ids_[s] < best_id)) {
      best = d;
      best_id = ids_[s];
    }
  }
  return NearestNeighbor{best_id, std::sqrt(best)};
}

NearestNeighbor VoxelGrid::nearest(const Vector3d& query) const {
  if (ids_.empty()) throw ArgumentError("VoxelGrid::nearest: empty index");
  const Key q = keyOf(query);
  const std::int64_t reach =
      std::max({std::abs(q.x - lo_.x), std::abs(q.x - hi_.x), std::abs(q.y - lo_.y), std::abs(q.y - hi_.y),
                std::abs(q.z - lo_.z), std::abs(q.z - hi_.z)});
  if (reach > kMaxRings) return linearScan(query);

  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_id = 0;
  for (std::int64_t r = 0; r <= reach; ++r) {
    for (std::int64_t dx = -r; dx <= r; ++dx) {
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        const bool edge_xy = std::abs(dx) == r || std::abs(dy) == r;
        for (std::int64_t dz = -r; dz <= r; dz += (edge_xy ? 1 : std::max<std::int64_t>(1, 2 * r))) {
          auto it = cells_.find(Key{q.x + dx, q.y + dy, q.z + dz});
          if (it == cells_.end()) continue;
          for (std::uint32_t s : it->second) {
            const double d = sq_dist(xyz_, s, query);
            if (d < best || (d == best && ids_[s] < best_id)) {
              best = d;
              best_id = ids_[s];
            }
          }
        }
      }
    }
    // Anything outside ring r is at least r cells away.
    const double bound = static_cast<double>(r) * cell_;
    if (best < bound * bound) break;
  }
  return NearestNeighbor{best_id, std::sqrt(best)};
}

void VoxelGrid::radius(const Vector3d& query, double radius, std::vector<std::uint32_t>& out) const {
  out.clear();
  const double r2 = radius * radius;
  const Key lo = keyOf(query - Vector3d::Constant(radius));
  const Key hi = keyOf(query + Vector3d::Constant(radius));
  for (std::int64_t x = lo.x; x <= hi.x; ++x) {
    for (std::int64_t y = lo.y; y <= hi.y; ++y) {
      for (std::int64_t z = lo.z; z <= hi.z; ++z) {
        auto it = cells_.find(Key{x, y, z});
        if (it == cells_.end()) continue;
        for (std::uint32_t s : it->second) {
          if (sq_dist(xyz_, s, query) <= r2) out.push_back(ids_[s]);
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
}

}  // namespace p4d
