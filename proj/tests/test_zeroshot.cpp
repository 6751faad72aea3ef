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

#include <random>

#include <gtest/gtest.h>

#include "p4d/zeroshot.hpp"

namespace p4d {
namespace {

PromptVocabulary vocab3() {
  PromptVocabulary v;
  v.entries.push_back({"road", Feature::Unit(3, 0), true});
  v.entries.push_back({"car", Feature::Unit(3, 1), false});
  v.entries.push_back({"tree", Feature::Unit(3, 2), true});
  return v;
}

Feature f3(float a, float b, float c) {
  Feature f(3);
  f << a, b, c;
  return f;
}

TEST(Classify, ArgmaxOfDotProducts) {
  const PromptVocabulary v = vocab3();
  const Classification c = classify(f3(0.1f, 0.7f, 0.2f), v);
  EXPECT_EQ(c.index, 1);
  EXPECT_FLOAT_EQ(c.scores[2], 0.2f);
  EXPECT_EQ(classify(f3(0.5f, 0.5f, 0.0f), v).index, 0);  // tie -> lowest
  EXPECT_THROW(classify(Feature::Zero(2), v), ArgumentError);
  EXPECT_THROW(classify(f3(1, 0, 0), PromptVocabulary{}), ArgumentError);
}

TEST(Classify, PositiveScalingKeepsArgmax) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> g;
  std::uniform_real_distribution<float> s(1e-3f, 1e3f);
  PromptVocabulary v;
  for (int i = 0; i < 6; ++i) v.entries.push_back({"c" + std::to_string(i), Feature::NullaryExpr(8, [&] { return g(rng); })});
  for (int i = 0; i < 200; ++i) {
    const Feature f = Feature::NullaryExpr(8, [&] { return g(rng); });
    EXPECT_EQ(classify(f, v).index, classify((s(rng) * f).eval(), v).index);
  }
}

TEST(AssignSemantics, OneClassPerInstance) {
  LabeledSequence seq;
  seq.frames = {{1, 2, 0, 3}, {2, 2, 1, 0}};
  seq.instances[1].feature = f3(0, 1, 0);
  seq.instances[2].feature = f3(0.9f, 0.1f, 0);
  seq.instances[3].feature = Feature::Zero(3);
  seq.refreshInstances();
  const SemanticAssignment sem = assign_semantics(seq, vocab3());
  EXPECT_EQ(sem.instance_classes.at(1), 2);
  EXPECT_EQ(sem.instance_classes.at(2), 1);
  EXPECT_EQ(sem.instance_classes.at(3), kUnlabeledClass);
  EXPECT_EQ(sem.point_classes[0], (std::vector<ClassId>{2, 1, 0, 0}));
  EXPECT_EQ(sem.point_classes[1], (std::vector<ClassId>{1, 1, 2, 0}));

  const LabeledSequence tagged = with_classes(seq, sem);
  EXPECT_EQ(tagged.instances.at(1).class_id, ClassId{2});
  EXPECT_EQ(point_classes_from_table(tagged), sem.point_classes);
}

TEST(AssignSemantics, Errors) {
  LabeledSequence seq;
  seq.frames = {{1}};
  seq.instances[1].feature = f3(1, 0, 0);
  seq.refreshInstances();
  EXPECT_THROW(assign_semantics(seq, PromptVocabulary{}), ArgumentError);
  PromptVocabulary dup = vocab3();
  dup.entries[2].name = "road";
  EXPECT_THROW(assign_semantics(seq, dup), ArgumentError);
  seq.instances[1].feature = Feature();
  EXPECT_THROW(assign_semantics(seq, vocab3()), ArgumentError);
}

}  // namespace
}  // namespace p4d
