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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "p4d/stitcher.hpp"

namespace p4d {

/// Per-point ground truth. Class 0 marks unlabeled points, which every
/// metric ignores; instance 0 marks stuff.
struct GroundTruthSequence {
  std::vector<std::vector<ClassId>> classes;
  std::vector<std::vector<InstanceId>> instances;
  std::vector<std::string> vocabulary;  // name of class c at c - 1
  std::set<ClassId> things;

  std::size_t length() const { return classes.size(); }
  int numClasses() const { return static_cast<int>(vocabulary.size()); }
  bool isThing(ClassId c) const { return things.count(c) != 0; }
  /// Throws ValidationError.
  void validate() const;
};

typedef std::vector<std::vector<ClassId>> PointClasses;

struct PqStats {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  double iou_sum = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
};

struct PanopticResult {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  double pq_th = 0.0;
  double pq_st = 0.0;
  std::map<ClassId, PqStats> per_class;
};

struct SemanticResult {
  double s_cls = 0.0;
  std::map<ClassId, double> iou_per_class;
  double iou_st = 0.0;
  double iou_th = 0.0;
};

struct EvalReport {
  double lstq = 0.0;
  double s_assoc = 0.0;
  SemanticResult semantic;
  PanopticResult panoptic;
  std::size_t points = 0;

  /// One `key=value` per line, fixed precision, class names from `vocabulary`.
  std::string to_record(const std::vector<std::string>& vocabulary) const;
};

struct EvalOptions {
  /// Tubes are GT instance ids regardless of class and predicted semantics
  /// are replaced by the ground truth.
  bool class_agnostic = false;
};

double s_assoc(const LabeledSequence& pred, const GroundTruthSequence& gt, bool class_agnostic = false);
SemanticResult s_cls(const PointClasses& pred, const GroundTruthSequence& gt);
PanopticResult panoptic_quality(const LabeledSequence& pred, const PointClasses& pred_classes,
                                const GroundTruthSequence& gt);
EvalReport lstq(const LabeledSequence& pred, const PointClasses& pred_classes, const GroundTruthSequence& gt,
                const EvalOptions& opts = {});

/// Collapses all instances of each stuff class into one sequence-wide id
/// (the smallest id of that class). Features are point-count weighted.
LabeledSequence merge_stuff(const LabeledSequence& pred, const std::map<InstanceId, ClassId>& instance_classes,
                            const std::set<ClassId>& stuff);

struct EvalInputs {
  LabeledSequence pred;
  PointClasses pred_classes;
  GroundTruthSequence gt;
};

/// Drops every point outside all camera frustums from prediction and GT.
EvalInputs restrict_frustum(const LabeledSequence& pred, const PointClasses& pred_classes,
                            const GroundTruthSequence& gt, std::span<const PointFrame> frames,
                            std::span<const CameraModel> cams);

}  // namespace p4d
