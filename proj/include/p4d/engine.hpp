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
#include <span>
#include <vector>

#include "p4d/cluster.hpp"
#include "p4d/geom.hpp"

namespace p4d {

/// Binary image stored as alternating run lengths, row-major, starting with
/// a (possibly empty) run of zeros.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  static RleMask Encode(const ImageMask& mask);
  ImageMask decode() const;
  std::size_t count() const;
  bool operator==(const RleMask&) const = default;
};

/// One tracked image instance: a mask and a feature per window frame.
struct ImageMasklet {
  std::uint32_t local_id = 0;
  std::vector<RleMask> masks;
  std::vector<Feature> features;

  bool operator==(const ImageMasklet&) const = default;
};

struct ImageMaskletSet {
  int camera = 0;
  int window_start = 0;
  int window_size = 0;
  int height = 0;
  int width = 0;
  int feature_dim = 0;
  std::vector<ImageMasklet> instances;

  FrameRange window() const { return FrameRange{window_start, window_size}; }
  /// Throws ArgumentError on shape inconsistencies.
  void validate() const;
  bool operator==(const ImageMaskletSet&) const = default;
};

/// Spatio-temporal Lidar instance over one window.
struct LidarMasklet {
  std::uint32_t local_id = 0;
  std::vector<PointSet> masks;  // one per window frame, in frame order
  Feature feature;
  std::uint64_t volume = 0;

  void recomputeVolume();
  const PointSet* maskAt(int frame) const;
};

enum class DbscanMode { kPerFrame, kAllFrames };

struct WindowConfig {
  int k = 8;
  int s = 4;
  double theta_iom = 0.5;
  double cam_fuse_iou = 0.5;
  double dbscan_iou = 0.5;
  std::vector<double> eps_list = {1.2488, 0.8136, 0.6952, 0.594, 0.4353, 0.3221};
  int min_pts = 5;
  int tau = 1;
  DbscanMode dbscan_mode = DbscanMode::kPerFrame;
  GroundConfig ground;

  void validate() const;
};

/// Greedy cross-camera insert-or-merge at 4D IoU >= iou_threshold, highest
/// IoU first. Merged features are point-count weighted means.
std::vector<LidarMasklet> fuse_cameras(const std::vector<std::vector<LidarMasklet>>& groups, double iou_threshold);

/// Volume-ordered IoM suppression, without resolving residual overlaps.
std::vector<LidarMasklet> flatten_suppress(std::vector<LidarMasklet> masklets, double theta);

/// Hands every contested point to the first masklet (in list order) that
/// claims it; drops masklets left empty and re-sorts by volume.
std::vector<LidarMasklet> claim_points(std::vector<LidarMasklet> masklets);

/// flatten_suppress followed by claim_points; output is point-disjoint.
std::vector<LidarMasklet> flatten_window(std::vector<LidarMasklet> masklets, double theta);

/// Per-window lift, refine, fuse and flatten. `frames` covers the window,
/// `sets` holds one ImageMaskletSet per camera, `cams` is indexed by camera id.
std::vector<LidarMasklet> label_window(std::span<const PointFrame> frames, std::span<const ImageMaskletSet> sets,
                                       std::span<const CameraModel> cams, const WindowConfig& cfg);

struct FlattenedMask {
  std::size_t source = 0;  // index into the input list
  PointSet mask;
};

/// Single-frame coverage NMS: suppress masks whose IoM with a larger
/// survivor exceeds `threshold`, then make survivors disjoint.
std::vector<FlattenedMask> flatten_coverage_3d(std::span<const PointSet> masks, double threshold);

/// Single-scan engine: per camera lift, refine, coverage-flatten; then
/// cross-camera insert-or-merge. `sets` are window-size-1 masklet sets.
std::vector<LidarMasklet> single_scan_label(const PointFrame& frame, std::span<const ImageMaskletSet> sets,
                                            std::span<const CameraModel> cams, const WindowConfig& cfg);

}  // namespace p4d
