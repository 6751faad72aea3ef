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
#include <optional>
#include <span>
#include <vector>

#include "p4d/geom.hpp"

namespace p4d {

constexpr int kNoise = -1;

struct GroundConfig {
  int iterations = 500;
  double threshold = 0.25;  // meters
  std::uint64_t seed = 0;
};

/// DBSCAN clusters of one frame's non-ground points, pooled across several
/// density parameters.
struct SegmentSet {
  int frame = 0;
  PointSet non_ground;
  std::vector<PointSet> segments;
  std::vector<double> epsilon_of;  // one per segment

  std::size_t size() const { return segments.size(); }
};

/// RANSAC plane fit; returns the indices farther than `cfg.threshold` from
/// the dominant plane. The RNG stream depends only on the seed and the frame
/// timestamp.
PointSet remove_ground(const PointFrame& frame, const GroundConfig& cfg = {});

/// Per-point cluster labels (kNoise or 0-based cluster id in discovery order),
/// aligned with `subset.indices`.
std::vector<int> dbscan(const PointFrame& frame, const PointSet& subset, double eps, int min_pts);

/// Converts dbscan labels into one PointSet per cluster.
std::vector<PointSet> clusters_from_labels(const PointSet& subset, std::span<const int> labels);

SegmentSet dbscan_ensemble(const PointFrame& frame, std::span<const double> eps_list, int min_pts,
                           const GroundConfig& ground = {});

/// All-frames variant: clusters the ego-compensated superposition of the
/// window and splits every cluster back into per-frame segments.
std::vector<SegmentSet> dbscan_ensemble_window(std::span<const PointFrame> frames, std::span<const double> eps_list,
                                               int min_pts, const GroundConfig& ground = {});

struct RefinedMask {
  PointSet mask;
  std::optional<double> eps;  // set when a segment replaced the mask
};

RefinedMask refine_mask(const PointSet& mask, const SegmentSet& segs, double iou_threshold);

/// Re-clusters a replaced mask (ground points included) and keeps its
/// largest cluster.
PointSet refine_per_instance(const PointFrame& frame, const PointSet& mask, double eps, int min_pts);

}  // namespace p4d
