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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "p4d/baselines.hpp"
#include "p4d/engine.hpp"
#include "p4d/metrics.hpp"
#include "p4d/stitcher.hpp"
#include "p4d/zeroshot.hpp"

namespace p4d {

namespace fs = std::filesystem;

/// Whole-file helpers; failures raise FormatError.
std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

// Point clouds: little-endian f32 (x, y, z, intensity) per point.
std::string encode_point_cloud(const PointFrame& frame);
PointFrame decode_point_cloud(std::string_view bytes);
PointFrame read_point_cloud(const fs::path& path);
void write_point_cloud(const fs::path& path, const PointFrame& frame);

// Poses: 12 numbers per line, row-major 3x4.
std::string encode_poses(std::span<const Rigid3d> poses);
std::vector<Rigid3d> decode_poses(std::string_view text);
std::vector<Rigid3d> read_poses(const fs::path& path);
void write_poses(const fs::path& path, std::span<const Rigid3d> poses);

// Calibration: `cameras: N`, then per camera `K<i>:` (9 numbers),
// `T<i>:` (12 numbers, Lidar to camera) and `size<i>: W H`.
std::string encode_calibration(std::span<const CameraModel> cams);
std::vector<CameraModel> decode_calibration(std::string_view text);
std::vector<CameraModel> read_calibration(const fs::path& path);
void write_calibration(const fs::path& path, std::span<const CameraModel> cams);

// Masklet archives ("MSKL").
constexpr std::uint16_t kMaskletVersion = 1;
std::string encode_masklet_archive(const ImageMaskletSet& set);
ImageMaskletSet decode_masklet_archive(std::string_view bytes);
ImageMaskletSet read_masklet_archive(const fs::path& path);
void write_masklet_archive(const fs::path& path, const ImageMaskletSet& set);

// Labels: labels/%06d.label (u32 per point) and instances.bin ("INST").
constexpr std::uint16_t kInstanceTableVersion = 1;
std::string encode_label_frame(std::span<const InstanceId> ids);
std::vector<InstanceId> decode_label_frame(std::string_view bytes);
std::string encode_instance_table(const LabeledSequence& seq);
/// Returns the frame count from the header and the table; point counts are
/// left at zero until frames are attached.
std::pair<std::size_t, std::map<InstanceId, InstanceInfo>> decode_instance_table(std::string_view bytes);
LabeledSequence read_labels(const fs::path& dir);
void write_labels(const fs::path& dir, const LabeledSequence& seq);

// Ground truth: gt/%06d.label (class | instance << 16) and classes.txt.
// Reading checks the encoding only; call GroundTruthSequence::validate().
GroundTruthSequence read_ground_truth(const fs::path& root);
void write_ground_truth(const fs::path& root, const GroundTruthSequence& gt);

// Prompt vocabulary: u32 d, u32 count, then per entry u32 name length,
// UTF-8 name, u8 stuff flag, d f32.
std::string encode_prompts(const PromptVocabulary& vocab);
PromptVocabulary decode_prompts(std::string_view bytes);
PromptVocabulary read_prompts(const fs::path& path);
void write_prompts(const fs::path& path, const PromptVocabulary& vocab);

/// Paths inside one sequence directory.
struct DatasetLayout {
  fs::path root;

  fs::path scan(int t) const;
  fs::path poses() const { return root / "poses.txt"; }
  fs::path calib() const { return root / "calib.txt"; }
  fs::path masklets(int camera, int start) const;
  fs::path single(int camera, int t) const;
  fs::path prompts() const { return root / "prompts.bin"; }
  fs::path config() const { return root / "config.txt"; }
};

std::string frame_name(int t, std::string_view ext);

/// Frame count from poses.txt, then every scan with its pose and timestamp.
std::vector<PointFrame> read_scans(const DatasetLayout& layout);
void write_scans(const DatasetLayout& layout, std::span<const PointFrame> frames);

/// Complete run configuration with reference defaults.
struct RunConfig {
  WindowConfig window;
  StitchConfig stitch;
  MotParams mot;
  double sw_vote = 0.5;
  double vis_max_cost = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

RunConfig parse_config(std::string_view text);
RunConfig read_config(const fs::path& path);

}  // namespace p4d
