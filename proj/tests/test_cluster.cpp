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
#include "p4d/cluster.hpp"

namespace p4d {
namespace {

// Gaussian blobs plus uniform clutter.
PointFrame blob_cloud(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> box(-6, 6);
  std::normal_distribution<double> g(0.0, 0.4);
  std::vector<Vector3d> centers;
  for (int c = 0; c < 4; ++c) centers.emplace_back(box(rng), box(rng), box(rng) * 0.2);
  PointFrame f;
  f.points.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    Vector3d p;
    if (i % 5 == 0) {
      p = Vector3d(box(rng), box(rng), box(rng));
    } else {
      p = centers[static_cast<std::size_t>(i) % centers.size()] + Vector3d(g(rng), g(rng), g(rng));
    }
    f.points.row(i) << p.x(), p.y(), p.z(), 0.0;
  }
  return f;
}

PointSet everything(const PointFrame& f) {
  PointSet s;
  for (Eigen::Index i = 0; i < f.size(); ++i) s.indices.push_back(static_cast<std::uint32_t>(i));
  return s;
}

TEST(Dbscan, TwoBlobsAndNoise) {
  PointFrame f;
  f.points.resize(9, 4);
  f.points << 0, 0, 0, 0, 0.1, 0, 0, 0, 0, 0.1, 0, 0, 0.1, 0.1, 0, 0,  //
      5, 5, 5, 0, 5.1, 5, 5, 0, 5, 5.1, 5, 0,                          //
      20, 0, 0, 0, 0.25, 0.15, 0, 0;
  const auto labels = dbscan(f, everything(f), 0.2, 3);
  // The last point is within 0.2 of (0.1, 0.1) only, so it is a
  // border of the first cluster.
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 0, 0, 1, 1, 1, kNoise, 0}));
  const auto clusters = clusters_from_labels(everything(f), labels);
  ASSERT_EQ(clusters.size(), 2u);
  EXPECT_EQ(clusters[1].indices, (std::vector<std::uint32_t>{4, 5, 6}));
}

TEST(Dbscan, MinPtsOneMakesEveryPointACluster) {
  std::mt19937_64 rng(1);
  const PointFrame f = blob_cloud(rng, 30);
  const auto labels = dbscan(f, everything(f), 1e-6, 1);
  for (int i = 0; i < 30; ++i) EXPECT_EQ(labels[static_cast<std::size_t>(i)], i);
}

TEST(Dbscan, MatchesNaiveOracleOnSubsets) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const PointFrame f = blob_cloud(rng, 150);
    PointSet subset;
    for (std::uint32_t i = 0; i < 150; ++i)
      if (rng() % 3 != 0) subset.indices.push_back(i);
    for (double eps : {0.3, 0.6, 1.1}) {
      EXPECT_EQ(dbscan(f, subset, eps, 4), oracle::dbscan(f, subset, eps, 4)) << "trial " << trial << " eps " << eps;
    }
  }
}

TEST(Dbscan, RejectsBadParameters) {
  PointFrame f;
  EXPECT_THROW(dbscan(f, PointSet{}, 0.0, 3), ArgumentError);
  EXPECT_THROW(dbscan(f, PointSet{}, 1.0, 0), ArgumentError);
  EXPECT_TRUE(dbscan(f, PointSet{}, 1.0, 3).empty());
}

PointFrame ground_and_box(int t) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-15, 15), small(-0.02, 0.02), b(-0.5, 0.5);
  PointFrame f;
  f.timestamp = t;
  f.points.resize(700, 4);
  for (int i = 0; i < 600; ++i) f.points.row(i) << u(rng), u(rng), -1.7 + small(rng), 0.0;
  for (int i = 600; i < 700; ++i) f.points.row(i) << 5 + b(rng), 5 + b(rng), -0.5 + b(rng), 0.0;
  return f;
}

TEST(Ground, RemovesThePlaneOnly) {
  const PointFrame f = ground_and_box(0);
  const PointSet ng = remove_ground(f);
  for (std::uint32_t i : ng.indices) EXPECT_GE(i, 600u);
  // box points within 0.25 of the plane (z < -1.45) are ground
  std::size_t expected = 0;
  for (int i = 600; i < 700; ++i) expected += f.points(i, 2) > -1.7 + 0.25 + 0.02;
  EXPECT_GE(ng.size(), expected);
  EXPECT_LE(ng.size(), 100u);
}

TEST(Ground, DeterministicPerSeedAndTimestamp) {
  const PointFrame f = ground_and_box(3);
  EXPECT_EQ(remove_ground(f).indices, remove_ground(f).indices);
  PointFrame tiny;
  tiny.points.resize(10, 4);
  tiny.points.setZero();
  EXPECT_THROW(remove_ground(tiny), ArgumentError);
}

TEST(Ensemble, PoolsSegmentsAcrossEpsilons) {
  const PointFrame f = ground_and_box(0);
  const std::vector<double> eps{1.0, 0.5};
  const SegmentSet s = dbscan_ensemble(f, eps, 5);
  ASSERT_EQ(s.segments.size(), s.epsilon_of.size());
  ASSERT_GE(s.segments.size(), 2u);
  EXPECT_EQ(s.epsilon_of.front(), 1.0);
  EXPECT_EQ(s.epsilon_of.back(), 0.5);
  for (const PointSet& seg : s.segments)
    for (std::uint32_t i : seg.indices) EXPECT_TRUE(s.non_ground.contains(i));
  EXPECT_THROW(dbscan_ensemble(f, std::vector<double>{}, 5), ArgumentError);
}

TEST(Ensemble, WindowModeSplitsClustersPerFrame) {
  std::vector<PointFrame> frames{ground_and_box(0), ground_and_box(1)};
  frames[1].pose.translation = Vector3d(1, 0, 0);
  // shift frame 1 so the box is static in the world
  frames[1].points.col(0).array() -= 1.0;
  const std::vector<double> eps{1.0};
  const auto segs = dbscan_ensemble_window(frames, eps, 5);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].segments.size(), 1u);
  EXPECT_EQ(segs[1].segments.size(), 1u);
  EXPECT_EQ(segs[1].frame, 1);
}

TEST(Refine, ReplacesMaskWithBestSegment) {
  SegmentSet segs;
  segs.non_ground = PointSet(0, {0, 1, 2, 3, 4, 5, 6, 7});
  segs.segments = {PointSet(0, {0, 1, 2, 3}), PointSet(0, {4, 5, 6, 7})};
  segs.epsilon_of = {0.5, 0.9};
  // 8 and 9 are ground points and survive the replacement
  const RefinedMask r = refine_mask(PointSet(0, {1, 2, 3, 8, 9}), segs, 0.5);
  ASSERT_TRUE(r.eps);
  EXPECT_EQ(*r.eps, 0.5);
  EXPECT_EQ(r.mask.indices, (std::vector<std::uint32_t>{0, 1, 2, 3, 8, 9}));
  // IoU 1/4 < 0.5: unchanged
  const RefinedMask keep = refine_mask(PointSet(0, {4}), segs, 0.5);
  EXPECT_FALSE(keep.eps);
  EXPECT_EQ(keep.mask.indices, (std::vector<std::uint32_t>{4}));
}

TEST(Refine, PerInstanceKeepsLargestCluster) {
  PointFrame f;
  f.points.resize(7, 4);
  f.points << 0, 0, 0, 0, 0.1, 0, 0, 0, 0.2, 0, 0, 0, 0.3, 0, 0, 0,  //
      9, 9, 9, 0, 9.1, 9, 9, 0, 9.2, 9, 9, 0;
  const PointSet all(0, {0, 1, 2, 3, 4, 5, 6});
  EXPECT_EQ(refine_per_instance(f, all, 0.15, 2).indices, (std::vector<std::uint32_t>{0, 1, 2, 3}));
  EXPECT_THROW(refine_per_instance(f, PointSet{}, 0.15, 2), ArgumentError);
}

}  // namespace
}  // namespace p4d
