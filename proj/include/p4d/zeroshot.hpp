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
#include <string>
#include <vector>

#include "p4d/stitcher.hpp"

namespace p4d {

struct PromptEntry {
  std::string name;
  Feature embedding;
  bool stuff = false;

  bool operator==(const PromptEntry&) const = default;
};

/// Test-time class vocabulary. Class ids are 1-based positions in `entries`.
struct PromptVocabulary {
  std::vector<PromptEntry> entries;

  Eigen::Index dim() const { return entries.empty() ? 0 : entries.front().embedding.size(); }
  /// Uniform dimension and unique names; throws ArgumentError.
  void validate() const;
  bool operator==(const PromptVocabulary&) const = default;
};

struct Classification {
  int index = 0;  // 0-based entry index
  Eigen::VectorXf scores;
};

/// Argmax of raw dot products; ties go to the lowest index.
Classification classify(const Feature& feature, const PromptVocabulary& vocab);

struct SemanticAssignment {
  std::vector<std::vector<ClassId>> point_classes;  // kUnlabeledClass for unlabeled points
  std::map<InstanceId, ClassId> instance_classes;
};

/// Classifies every instance once from its aggregated feature. Zero-norm
/// features map to kUnlabeledClass.
SemanticAssignment assign_semantics(const LabeledSequence& seq, const PromptVocabulary& vocab);

/// Copy of `seq` with each instance's class_id filled from `sem`.
LabeledSequence with_classes(const LabeledSequence& seq, const SemanticAssignment& sem);

/// Per-point classes from the class_id stored in the instance table.
std::vector<std::vector<ClassId>> point_classes_from_table(const LabeledSequence& seq);

}  // namespace p4d
