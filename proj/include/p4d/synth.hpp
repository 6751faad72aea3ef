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
#include <set>
#include <string>
#include <vector>

#include "p4d/baselines.hpp"
#include "p4d/engine.hpp"
#include "p4d/metrics.hpp"
#include "p4d/zeroshot.hpp"

namespace p4d {

enum class ShapeKind { kBox, kCylinder };

/// Rigid object on the ground plane. `position` is the base center at
/// frame 0 in world coordinates; cylinders use size.x() as diameter.
struct SceneObject {
  ShapeKind shape = ShapeKind::kBox;
  Vector3d size = Vector3d(4.0, 2.0, 1.5);
  Vector3d position = Vector3d::Zero();
  Vector3d velocity = Vector3d::Zero();  // meters per frame
  double yaw = 0.0;
  ClassId class_id = 2;
};

/// Parametric sensor trajectory: position start + t * velocity, heading
/// yaw0 + t * yaw_rate.
struct EgoMotion {
  Vector3d start = Vector3d::Zero();
  Vector3d velocity = Vector3d::Zero();
  double yaw0 = 0.0;
  double yaw_rate = 0.0;

  Rigid3d poseAt(int t, double sensor_height) const;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int n_frames = 8;
  std::vector<SceneObject> objects;
  double ground_inner = 3.0;
  double ground_outer = 25.0;
  int points_per_object = 400;
  int points_on_ground = 3000;
  double sensor_height = 1.7;
  EgoMotion ego;
  std::vector<CameraModel> cameras;
  double dropout = 0.0;
  double jitter = 0.0;
  std::vector<std::string> vocabulary;
  std::set<ClassId> things;
  ClassId ground_class = 1;
  int feature_dim = 32;

  void validate() const;
};

struct SyntheticScene {
  std::vector<PointFrame> frames;
  GroundTruthSequence gt;
  std::vector<CameraModel> cameras;
  int feature_dim = 32;

  std::vector<std::size_t> frameSizes() const;
};

std::vector<std::string> default_vocabulary();
std::set<ClassId> default_things();

/// Four cameras at 90 degree yaw steps around the sensor origin.
std::vector<CameraModel> surround_cameras(int width = 480, int height = 360, double focal = 200.0);
/// Camera looking along +x from the Lidar origin.
CameraModel forward_camera(int width, int height, double focal);

/// Samples object surfaces and ground, applies noise and per-pixel z-order
/// visibility, and expresses everything in the sensor frame. Coordinates
/// are rounded to float precision so that on-disk copies are exact.
SyntheticScene generate_scene(const SceneSpec& spec);

/// One-hot embedding of class `c` (1-based) in `dim` dimensions.
Feature class_embedding(ClassId c, int dim);
/// Prompt vocabulary whose entry c - 1 is class_embedding(c).
PromptVocabulary oracle_prompts(const SceneSpec& spec);
PromptVocabulary oracle_prompts(const GroundTruthSequence& gt, int dim);

/// Exact projected pixel masks of every GT region visible to `camera` in
/// the first window frame: thing instances plus one region per stuff class.
ImageMaskletSet oracle_masklets(const SyntheticScene& scene, const FrameRange& window, int camera);
std::vector<ImageMaskletSet> oracle_window_sets(const SyntheticScene& scene, const FrameRange& window);

/// Per-frame GT thing instances as detections. With `instance_embeddings`
/// each instance gets its own one-hot embedding; otherwise embeddings are
/// class one-hots. `dropped` lists (frame, instance) pairs to omit.
std::vector<FrameDetections> gt_detections(const SyntheticScene& scene, bool instance_embeddings,
                                           const std::vector<std::pair<int, InstanceId>>& dropped = {});

/// The GT itself as a labeled sequence with class-embedding features.
LabeledSequence gt_as_sequence(const SyntheticScene& scene);

/// 5 objects (2 moving), 24 frames, every object inside one camera view.
SceneSpec acceptance_scene_spec(std::uint64_t seed = 7);
/// Static objects, ego translating 0.5 m per frame.
SceneSpec static_scene_spec(std::uint64_t seed = 11, int n_frames = 8);
/// Two cars passing each other on neighboring lanes.
SceneSpec crossing_scene_spec(std::uint64_t seed = 13);

struct SpinningLidarSpec {
  int beams = 64;
  double elevation_min_deg = -24.8;
  double elevation_max_deg = 2.0;
  int azimuth_steps = 2048;
  double height = 1.73;
  double wall_radius = 50.0;
};

/// Single spinning-Lidar scan of flat ground surrounded by a distant wall,
/// with a KITTI-sized front camera.
SyntheticScene spinning_lidar_scene(const SpinningLidarSpec& spec = {});

struct CorruptionModel {
  int id_switches = 0;
  double mask_erosion = 0.0;
  double feature_noise = 0.0;
};

/// Seeded defects. An id switch relabels one id from a frame strictly after
/// its first frame onward; switches for k are a prefix of those for k + 1.
/// Erosion unlabels floor(r * n) points per instance per frame. Only ids in
/// `eligible` are switched (all ids when null).
LabeledSequence corrupt(const LabeledSequence& seq, const CorruptionModel& model, std::uint64_t seed,
                        const std::set<InstanceId>* eligible = nullptr);

}  // namespace p4d
