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

#include "oracles.hpp"
#include "p4d/metrics.hpp"

namespace p4d {
namespace {

// classes: 1 road (stuff), 2 car (thing)
GroundTruthSequence two_frame_gt() {
  GroundTruthSequence gt;
  gt.vocabulary = {"road", "car"};
  gt.things = {2};
  gt.classes = {{1, 1, 2, 2, 0}, {1, 1, 2, 2, 0}};
  gt.instances = {{0, 0, 7, 7, 0}, {0, 0, 7, 7, 0}};
  return gt;
}

LabeledSequence seq_of(std::vector<std::vector<InstanceId>> frames) {
  LabeledSequence s;
  s.frames = std::move(frames);
  for (const auto& f : s.frames)
    for (InstanceId id : f)
      if (id) s.instances[id].feature = Feature::Zero(1);
  s.refreshInstances();
  return s;
}

TEST(Metrics, PerfectPrediction) {
  const GroundTruthSequence gt = two_frame_gt();
  const LabeledSequence pred = seq_of({{5, 5, 1, 1, 9}, {5, 5, 1, 1, 9}});
  const EvalReport r = lstq(pred, gt.classes, gt);
  EXPECT_DOUBLE_EQ(r.s_assoc, 1.0);
  EXPECT_DOUBLE_EQ(r.semantic.s_cls, 1.0);
  EXPECT_DOUBLE_EQ(r.lstq, 1.0);
  EXPECT_DOUBLE_EQ(r.panoptic.pq, 1.0);
  EXPECT_EQ(r.points, 10u);
}

TEST(Metrics, IdSwitchHalvesAssociation) {
  const GroundTruthSequence gt = two_frame_gt();
  const LabeledSequence pred = seq_of({{5, 5, 1, 1, 0}, {5, 5, 2, 2, 0}});
  // two predicted tubes, each TPA 2 with IoU 2/4: (2 * 0.5 + 2 * 0.5) / 4
  EXPECT_DOUBLE_EQ(s_assoc(pred, gt), 0.5);
  // per frame the segments still match, so PQ is unaffected
  const PanopticResult pq = panoptic_quality(pred, gt.classes, gt);
  EXPECT_DOUBLE_EQ(pq.per_class.at(2).pq, 1.0);
}

TEST(Metrics, SemanticIgnoresUnlabeledGroundTruth) {
  const GroundTruthSequence gt = two_frame_gt();
  PointClasses pred = gt.classes;
  pred[0][4] = 2;  // ignored point
  pred[1][0] = 2;  // road predicted as car
  const SemanticResult s = s_cls(pred, gt);
  EXPECT_DOUBLE_EQ(s.iou_per_class.at(1), 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(s.iou_per_class.at(2), 4.0 / 5.0);
  EXPECT_DOUBLE_EQ(s.s_cls, (0.75 + 0.8) / 2);
  EXPECT_DOUBLE_EQ(s.iou_st, 0.75);
  EXPECT_DOUBLE_EQ(s.iou_th, 0.8);
}

TEST(Metrics, NoTubesGivesZeroAssociation) {
  GroundTruthSequence gt = two_frame_gt();
  gt.classes = {{1, 1, 1, 1, 1}, {1, 1, 1, 1, 1}};
  gt.instances = {{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}};
  EXPECT_DOUBLE_EQ(s_assoc(seq_of({{1, 1, 1, 1, 1}, {1, 1, 1, 1, 1}}), gt), 0.0);
}

TEST(Metrics, ShapeMismatchThrows) {
  const GroundTruthSequence gt = two_frame_gt();
  EXPECT_THROW(s_assoc(seq_of({{1, 1, 1, 1, 1}}), gt), ArgumentError);
  PointClasses bad = gt.classes;
  bad[0][0] = 9;
  EXPECT_THROW(s_cls(bad, gt), ArgumentError);
}

TEST(Metrics, ClassAgnosticUsesGroundTruthSemantics) {
  const GroundTruthSequence gt = two_frame_gt();
  const LabeledSequence pred = seq_of({{5, 5, 1, 1, 0}, {5, 5, 1, 1, 0}});
  PointClasses wrong = gt.classes;
  for (auto& f : wrong)
    for (auto& c : f) c = 1;
  EvalOptions opts;
  opts.class_agnostic = true;
  EXPECT_DOUBLE_EQ(lstq(pred, wrong, gt, opts).lstq, 1.0);
  EXPECT_LT(lstq(pred, wrong, gt).lstq, 1.0);
}

TEST(Metrics, MatchesNaiveImplementations) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const oracle::MicroCase mc = oracle::random_micro_case(rng);
    EXPECT_NEAR(s_assoc(mc.pred, mc.gt), oracle::s_assoc(mc.pred, mc.gt), 1e-9);
    EXPECT_NEAR(s_cls(mc.pred_classes, mc.gt).s_cls, oracle::s_cls(mc.pred_classes, mc.gt), 1e-9);
    EXPECT_NEAR(panoptic_quality(mc.pred, mc.pred_classes, mc.gt).pq,
                oracle::panoptic_quality(mc.pred, mc.pred_classes, mc.gt), 1e-9);
  }
}

TEST(Metrics, RecordIsStable) {
  const GroundTruthSequence gt = two_frame_gt();
  const LabeledSequence pred = seq_of({{5, 5, 1, 1, 9}, {5, 5, 1, 1, 9}});
  const std::string rec = lstq(pred, gt.classes, gt).to_record(gt.vocabulary);
  EXPECT_EQ(rec.rfind("lstq=1.000000000\ns_assoc=1.000000000\n", 0), 0u);
  EXPECT_NE(rec.find("iou.road=1.000000000"), std::string::npos);
  EXPECT_NE(rec.find("tp.car=2"), std::string::npos);
}

TEST(MergeStuff, CollapsesStuffIds) {
  LabeledSequence pred = seq_of({{3, 4, 1, 1, 0}, {4, 4, 1, 1, 0}});
  pred.instances.at(3).feature = Feature::Constant(1, 1.0f);
  pred.instances.at(4).feature = Feature::Constant(1, 4.0f);
  const std::map<InstanceId, ClassId> cls{{1, 2}, {3, 1}, {4, 1}};
  const LabeledSequence m = merge_stuff(pred, cls, {1});
  EXPECT_EQ(m.frames[1][0], 3u);
  EXPECT_EQ(m.instances.count(4), 0u);
  EXPECT_EQ(m.instances.at(3).point_count, 4u);
  EXPECT_FLOAT_EQ(m.instances.at(3).feature[0], (1.0f + 3 * 4.0f) / 4.0f);
  EXPECT_EQ(m.instances.at(1).class_id, ClassId{2});
  EXPECT_THROW(merge_stuff(pred, {{1, 2}}, {1}), ArgumentError);
}

TEST(GroundTruth, Validate) {
  GroundTruthSequence gt = two_frame_gt();
  EXPECT_NO_THROW(gt.validate());
  gt.instances[0][0] = 3;  // instance on stuff
  EXPECT_THROW(gt.validate(), ValidationError);
  gt = two_frame_gt();
  gt.classes[1][1] = 3;
  EXPECT_THROW(gt.validate(), ValidationError);
}

TEST(Frustum, RestrictsBothSides) {
  GroundTruthSequence gt = two_frame_gt();
  gt.classes.resize(1);
  gt.instances.resize(1);
  PointFrame f;
  f.points.resize(5, 4);
  f.points << 0, 0, 5, 0, 0, 0, -5, 0, 0, 0, 6, 0, 0, 0, -6, 0, 0, 0, 7, 0;
  CameraModel cam;
  cam.width = cam.height = 10;
  cam.intrinsics << 5, 0, 5, 0, 5, 5, 0, 0, 1;
  const LabeledSequence pred = seq_of({{5, 5, 1, 1, 9}});
  const std::vector<PointFrame> frames{f};
  const std::vector<CameraModel> cams{cam};
  const EvalInputs in = restrict_frustum(pred, gt.classes, gt, frames, cams);
  EXPECT_EQ(in.gt.classes[0], (std::vector<ClassId>{1, 2, 0}));
  EXPECT_EQ(in.pred.frames[0], (std::vector<InstanceId>{5, 1, 9}));
  EXPECT_EQ(in.pred.instances.at(5).point_count, 1u);
}

}  // namespace
}  // namespace p4d
