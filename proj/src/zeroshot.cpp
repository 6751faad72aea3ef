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

#include "p4d/zeroshot.hpp"

#include <set>

namespace p4d {

void PromptVocabulary::validate() const {
  std::set<std::string> names;
  for (const PromptEntry& e : entries) {
    if (e.embedding.size() != dim()) throw ArgumentError("prompt vocabulary: mixed embedding dimensions");
    if (!names.insert(e.name).second) throw ArgumentError("prompt vocabulary: duplicate name '" + e.name + "'");
  }
}

Classification classify(const Feature& feature, const PromptVocabulary& vocab) {
  if (vocab.entries.empty()) throw ArgumentError("classify: empty vocabulary");
  if (feature.size() != vocab.dim()) {
    throw ArgumentError("classify: feature dimension " + std::to_string(feature.size()) + " vs vocabulary " +
                        std::to_string(vocab.dim()));
  }
  Classification out;
  out.scores.resize(static_cast<Eigen::Index>(vocab.entries.size()));
  for (std::size_t i = 0; i < vocab.entries.size(); ++i) {
    out.scores(static_cast<Eigen::Index>(i)) = vocab.entries[i].embedding.dot(feature);
  }
  for (Eigen::Index i = 1; i < out.scores.size(); ++i) {
    if (out.scores(i) > out.scores(out.index)) out.index = static_cast<int>(i);
  }
  return out;
}

SemanticAssignment assign_semantics(const LabeledSequence& seq, const PromptVocabulary& vocab) {
  if (vocab.entries.empty()) throw ArgumentError("assign_semantics: zero-shot recognition needs at least one prompt");
  vocab.validate();
  SemanticAssignment out;
  for (const auto& [id, info] : seq.instances) {
    if (info.feature.size() == 0) {
      throw ArgumentError("assign_semantics: instance " + std::to_string(id) + " has no feature");
    }
    if (info.feature.squaredNorm() == 0.0f) {
      out.instance_classes[id] = kUnlabeledClass;
      continue;
    }
    out.instance_classes[id] = static_cast<ClassId>(classify(info.feature, vocab).index + 1);
  }
  out.point_classes.reserve(seq.frames.size());
  for (const auto& frame : seq.frames) {
    std::vector<ClassId> cls(frame.size(), kUnlabeledClass);
    for (std::size_t p = 0; p < frame.size(); ++p) {
      if (frame[p] == kUnlabeled) continue;
      auto it = out.instance_classes.find(frame[p]);
      if (it == out.instance_classes.end()) {
        throw ArgumentError("assign_semantics: id " + std::to_string(frame[p]) + " missing from the instance table");
      }
      cls[p] = it->second;
    }
    out.point_classes.push_back(std::move(cls));
  }
  return out;
}

LabeledSequence with_classes(const LabeledSequence& seq, const SemanticAssignment& sem) {
  LabeledSequence out = seq;
  for (auto& [id, info] : out.instances) {
    auto it = sem.instance_classes.find(id);
    if (it != sem.instance_classes.end()) info.class_id = it->second;
  }
  return out;
}

std::vector<std::vector<ClassId>> point_classes_from_table(const LabeledSequence& seq) {
  std::vector<std::vector<ClassId>> out;
  out.reserve(seq.frames.size());
  for (const auto& frame : seq.frames) {
    std::vector<ClassId> cls(frame.size(), kUnlabeledClass);
    for (std::size_t p = 0; p < frame.size(); ++p) {
      if (frame[p] == kUnlabeled) continue;
      auto it = seq.instances.find(frame[p]);
      if (it != seq.instances.end() && it->second.class_id) cls[p] = *it->second.class_id;
    }
    out.push_back(std::move(cls));
  }
  return out;
}

}  // namespace p4d
