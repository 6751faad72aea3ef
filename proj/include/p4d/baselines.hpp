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

#include <string>
#include <vector>

#include "p4d/stitcher.hpp"

namespace p4d {

typedef Eigen::Matrix<double, 9, 1> KalmanState;
typedef Eigen::Matrix<double, 9, 9> KalmanCovariance;

struct KalmanConfig {
  double q_pos = 0.01;
  double q_size = 0.01;
  double q_vel = 0.1;
  double r = 0.1;
  double p0 = 10.0;
};

/// Constant-velocity box track: state is (center, size, velocity per frame).
struct KalmanTrack {
  KalmanState state = KalmanState::Zero();
  KalmanCovariance covariance = KalmanCovariance::Identity();
  int hits = 0;
  int age_since_update = 0;
  InstanceId id = 0;

  Vector3d center() const { return state.head<3>(); }
  Vector3d size() const { return state.segment<3>(3); }
  Vector3d velocity() const { return state.tail<3>(); }
  Aabb3 box() const;
};

/// Symmetric with every eigenvalue >= -tol.
bool is_symmetric_psd(const KalmanCovariance& p, double tol = 1e-9);

KalmanTrack kalman_init(const Aabb3& box, InstanceId id, const KalmanConfig& cfg = {});
KalmanTrack kalman_predict(const KalmanTrack& track, const KalmanConfig& cfg = {});
/// Joseph-form correction with the box center and size as observation.
KalmanTrack kalman_update(const KalmanTrack& track, const Aabb3& box, const KalmanConfig& cfg = {});

/// Single-scan instances of one frame. Boxes live in world coordinates.
struct FrameDetections {
  int frame = 0;
  std::vector<PointSet> masks;
  std::vector<Aabb3> boxes;
  std::vector<Feature> embeddings;  // empty or one per mask

  /// Fits world-frame boxes to the masks of `frame`.
  static FrameDetections FromMasks(const PointFrame& frame, int index, std::vector<PointSet> masks,
                                   std::vector<Feature> embeddings = {});
  void validate() const;
};

/// Per-frame detections from a labeled single-scan sequence: one mask per id
/// per frame, embedding from the instance table.
std::vector<FrameDetections> detections_from_labels(std::span<const PointFrame> frames, const LabeledSequence& seq);

LabeledSequence sw_track(std::span<const PointFrame> frames, std::span<const FrameDetections> detections,
                         double vote_threshold = 0.5);

struct MotParams {
  std::string algm = "greedy";
  std::string metric = "giou_3d";
  double thres = -0.4;
  int min_hits = 1;
  int max_age = 2;
  KalmanConfig kalman;

  /// Throws ConfigError on an unknown algorithm or metric.
  void validate() const;
};

LabeledSequence mot_track(std::span<const std::size_t> frame_sizes, std::span<const FrameDetections> detections,
                          const MotParams& params = {});

struct VisDiagnostics {
  /// Rows whose best cosine distance is shared by several columns.
  int ties = 0;
};

/// Frame-pair embedding matching, then cross-window stitching of the
/// size-2 windows.
LabeledSequence vis_track(std::span<const std::size_t> frame_sizes, std::span<const FrameDetections> detections,
                          double max_cost = 1.0, VisDiagnostics* diag = nullptr);

}  // namespace p4d
