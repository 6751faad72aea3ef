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
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "p4d/assignment.hpp"
#include "p4d/engine.hpp"

namespace p4d {

struct InstanceInfo {
  Feature feature;
  int first_frame = 0;
  int last_frame = 0;
  std::uint64_t point_count = 0;
  std::optional<ClassId> class_id;

  bool operator==(const InstanceInfo&) const = default;
};

/// Per-frame point -> global id maps (0 = unlabeled) plus the instance table.
struct LabeledSequence {
  std::vector<std::vector<InstanceId>> frames;
  std::map<InstanceId, InstanceInfo> instances;

  std::size_t length() const { return frames.size(); }

  /// Recomputes spans and point counts from the maps and drops table
  /// entries that no longer own any point.
  void refreshInstances();
  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  bool operator==(const LabeledSequence&) const = default;
};

/// Empty sequence sized to the given per-frame point counts.
LabeledSequence make_empty_sequence(std::span<const std::size_t> frame_sizes);

struct StitchConfig {
  double max_cost = 1.0;
  int tau = 1;
};

/// Cost 1 - IoU over the overlapping frames, solved as a linear assignment.
Matching associate_windows(std::span<const LidarMasklet> prev, std::span<const LidarMasklet> cur,
                           const FrameRange& overlap, double max_cost = 1.0);

/// Weight-normalized mean of features.
Feature aggregate_feature(std::span<const std::pair<Feature, double>> observations);

/// Near-online cross-window association. Windows must arrive in start
/// order; frames before the newest window's start are final and can be
/// taken out with takeFinalized().
class SequenceStitcher {
 public:
  SequenceStitcher(std::vector<std::size_t> frame_sizes, StitchConfig cfg = {});

  /// Associates the window with its predecessor and writes its labels
  /// (later windows overwrite earlier ones where they label a point).
  void addWindow(const FrameRange& range, std::vector<LidarMasklet> masklets);

  /// Frames that no later window can touch, in order.
  std::vector<std::pair<int, std::vector<InstanceId>>> takeFinalized();

  /// Closes the sequence: returns all frames not yet taken plus the full
  /// instance table (spans and counts cover taken frames too).
  LabeledSequence finish();

  /// Number of distinct frames each global id appeared in (taken frames included).
  const std::map<InstanceId, int>& frameCounts() const { return frame_counts_; }

 private:
  void finalizeFrame(int t);

  std::vector<std::size_t> sizes_;
  StitchConfig cfg_;
  InstanceId next_id_ = 1;
  bool has_prev_ = false;
  FrameRange prev_range_;
  std::vector<LidarMasklet> prev_masklets_;
  std::vector<InstanceId> prev_ids_;

  std::map<int, std::vector<InstanceId>> live_;      // frames still writable
  std::map<int, std::vector<InstanceId>> finished_;  // final, not yet taken
  int finalized_upto_ = 0;

  std::map<InstanceId, std::pair<Eigen::VectorXd, double>> feature_acc_;
  std::map<InstanceId, InstanceInfo> table_;
  std::map<InstanceId, int> frame_counts_;
};

LabeledSequence stitch_sequence(std::span<const std::size_t> frame_sizes,
                                std::vector<std::pair<FrameRange, std::vector<LidarMasklet>>> windows,
                                const StitchConfig& cfg = {});

/// Removes instances present in fewer than tau frames.
LabeledSequence prune_short(const LabeledSequence& seq, int tau);

/// Sliding windows [kS, kS + K) clipped to the sequence, for every start < length.
std::vector<FrameRange> sliding_windows(int length, int k, int s);

/// Converts window-local labels back to masklets (one per id, masks over `range`).
std::vector<LidarMasklet> masklets_from_labels(const LabeledSequence& window_labels, const FrameRange& range);

}  // namespace p4d
