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

#include <gtest/gtest.h>

#include "p4d/stitcher.hpp"

namespace p4d {
namespace {

LidarMasklet masklet(std::vector<PointSet> masks, float feat) {
  LidarMasklet m;
  m.masks = std::move(masks);
  m.feature = Feature::Constant(2, feat);
  m.recomputeVolume();
  return m;
}

TEST(SlidingWindows, ClipsToSequence) {
  const auto w = sliding_windows(10, 4, 2);
  ASSERT_EQ(w.size(), 5u);
  EXPECT_EQ(w[0], (FrameRange{0, 4}));
  EXPECT_EQ(w[3], (FrameRange{6, 4}));
  EXPECT_EQ(w[4], (FrameRange{8, 2}));
  EXPECT_THROW(sliding_windows(10, 0, 1), ArgumentError);
  EXPECT_TRUE(sliding_windows(0, 4, 2).empty());
}

TEST(Stitch, CarriesIdsAcrossOverlap) {
  const std::vector<std::size_t> sizes(4, 10);
  std::vector<std::pair<FrameRange, std::vector<LidarMasklet>>> windows;
  // window 0: frames 0-1, two objects
  windows.push_back({FrameRange{0, 2},
                     {masklet({PointSet(0, {0, 1}), PointSet(1, {0, 1})}, 1.0f),
                      masklet({PointSet(0, {5, 6}), PointSet(1, {5, 6})}, 2.0f)}});
  // window 1: frames 1-2; order swapped, second object's mask moved
  windows.push_back({FrameRange{1, 2},
                     {masklet({PointSet(1, {5, 6}), PointSet(2, {5, 6, 7})}, 4.0f),
                      masklet({PointSet(1, {0, 1}), PointSet(2, {0, 1})}, 1.0f)}});
  // window 2: frames 2-3, a new object appears
  windows.push_back({FrameRange{2, 2},
                     {masklet({PointSet(2, {0, 1}), PointSet(3, {0, 1})}, 1.0f),
                      masklet({PointSet(2, {9}), PointSet(3, {9})}, 7.0f)}});
  const LabeledSequence seq = stitch_sequence(sizes, windows);
  EXPECT_NO_THROW(seq.validate());
  EXPECT_EQ(seq.frames[0][0], 1u);
  EXPECT_EQ(seq.frames[3][0], 1u);
  EXPECT_EQ(seq.frames[0][5], 2u);
  EXPECT_EQ(seq.frames[2][7], 2u);
  EXPECT_EQ(seq.frames[3][9], 3u);
  EXPECT_EQ(seq.instances.at(2).first_frame, 0);
  EXPECT_EQ(seq.instances.at(2).last_frame, 2);
  // volume weighted: (4 * 2 + 5 * 4) / 9
  EXPECT_FLOAT_EQ(seq.instances.at(2).feature[0], 28.0f / 9.0f);
}

TEST(Stitch, RejectsUnorderedOrDisjointWindows) {
  SequenceStitcher st(std::vector<std::size_t>(6, 4));
  st.addWindow(FrameRange{2, 2}, {});
  EXPECT_THROW(st.addWindow(FrameRange{0, 2}, {}), ArgumentError);
  EXPECT_THROW(st.addWindow(FrameRange{5, 1}, {}), ArgumentError);
  EXPECT_THROW(st.addWindow(FrameRange{4, 4}, {}), ArgumentError);
}

TEST(Stitch, FinalizedFramesStreamInOrder) {
  SequenceStitcher st(std::vector<std::size_t>(6, 3));
  st.addWindow(FrameRange{0, 4}, {masklet({PointSet(0, {0}), PointSet(1, {0})}, 1.0f)});
  EXPECT_TRUE(st.takeFinalized().empty());
  st.addWindow(FrameRange{2, 4}, {});
  const auto done = st.takeFinalized();
  ASSERT_EQ(done.size(), 2u);
  EXPECT_EQ(done[0].first, 0);
  EXPECT_EQ(done[0].second, (std::vector<InstanceId>{1, 0, 0}));
  const LabeledSequence rest = st.finish();
  EXPECT_EQ(rest.instances.at(1).last_frame, 1);
  EXPECT_EQ(st.frameCounts().at(1), 2);
}

TEST(Prune, DropsShortInstances) {
  LabeledSequence seq;
  seq.frames = {{1, 2}, {1, 0}, {1, 0}};
  seq.instances[1].feature = Feature::Zero(1);
  seq.instances[2].feature = Feature::Zero(1);
  seq.refreshInstances();
  const LabeledSequence p = prune_short(seq, 2);
  EXPECT_EQ(p.frames[0], (std::vector<InstanceId>{1, 0}));
  EXPECT_EQ(p.instances.count(2), 0u);
  EXPECT_EQ(prune_short(seq, 1), seq);
  EXPECT_THROW(prune_short(seq, -1), ArgumentError);
}

TEST(LabeledSequence, ValidateFindsBrokenTables) {
  LabeledSequence seq;
  seq.frames = {{1, 0}, {1, 1}};
  seq.instances[1].feature = Feature::Zero(2);
  seq.refreshInstances();
  EXPECT_NO_THROW(seq.validate());
  EXPECT_EQ(seq.instances.at(1).point_count, 3u);
  LabeledSequence bad = seq;
  bad.frames[1][0] = 5;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = seq;
  bad.instances.at(1).last_frame = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = seq;
  bad.instances[7].feature = Feature::Zero(2);
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(AggregateFeature, WeightedMean) {
  const std::vector<std::pair<Feature, double>> obs{{Feature::Constant(2, 1.0f), 1.0}, {Feature::Constant(2, 4.0f), 2.0}};
  EXPECT_FLOAT_EQ(aggregate_feature(obs)[1], 3.0f);
  EXPECT_THROW(aggregate_feature({}), ArgumentError);
}

TEST(MaskletsFromLabels, RoundTripsThroughStitch) {
  LabeledSequence local;
  local.frames = {{0, 3, 3}, {3, 0, 4}};
  local.instances[3].feature = Feature::Constant(2, 1.0f);
  local.instances[4].feature = Feature::Constant(2, 2.0f);
  local.refreshInstances();
  const auto ms = masklets_from_labels(local, FrameRange{5, 2});
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].masks[0], PointSet(5, {1, 2}));
  EXPECT_EQ(ms[0].masks[1], PointSet(6, {0}));
  EXPECT_EQ(ms[1].volume, 1u);
  EXPECT_THROW(masklets_from_labels(local, FrameRange{0, 3}), ArgumentError);
}

}  // namespace
}  // namespace p4d
