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

#include "p4d/cluster.hpp"

#include <algorithm>
#include <deque>
#include <random>

#include <Eigen/Eigenvalues>

#include "p4d/spatial_index.hpp"

namespace p4d {

namespace {

constexpr int kUnvisited = -2;
constexpr Eigen::Index kMinGroundPoints = 50;

}  // namespace

PointSet remove_ground(const PointFrame& frame, const GroundConfig& cfg) {
  const Eigen::Index n = frame.size();
  if (n < kMinGroundPoints) {
    throw ArgumentError("remove_ground: need at least 50 points, got " + std::to_string(n));
  }
  std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(frame.timestamp + 1)));
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);

  Vector3d best_normal = Vector3d::UnitZ();
  double best_offset = 0.0;
  Eigen::Index best_count = -1;
  for (int it = 0; it < cfg.iterations; ++it) {
    const Eigen::Index a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const Vector3d pa = frame.xyz(a);
    Vector3d normal = (frame.xyz(b) - pa).cross(frame.xyz(c) - pa);
    const double norm = normal.norm();
    if (norm < 1e-12) continue;
    normal /= norm;
    const double offset = -normal.dot(pa);
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(normal.dot(frame.xyz(i)) + offset) <= cfg.threshold) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_normal = normal;
      best_offset = offset;
    }
  }

  PointSet out;
  out.frame = frame.timestamp;
  if (best_count < 0) {
    // No non-degenerate sample: nothing is ground.
    out.indices.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out.indices[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
    return out;
  }
  // Least-squares refit on the consensus set; a minimal sample can tilt the
  // plane enough to lose far ground points.
  for (int round = 0; round < 2; ++round) {
    Vector3d centroid = Vector3d::Zero();
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(best_normal.dot(frame.xyz(i)) + best_offset) <= cfg.threshold) {
        centroid += frame.xyz(i);
        ++m;
      }
    }
    if (m < 3) break;
    centroid /= static_cast<double>(m);
    Matrix3d cov = Matrix3d::Zero();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(best_normal.dot(frame.xyz(i)) + best_offset) <= cfg.threshold) {
        const Vector3d d = frame.xyz(i) - centroid;
        cov += d * d.transpose();
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix3d> es(cov);
    Vector3d normal = es.eigenvectors().col(0);
    if (normal.dot(best_normal) < 0) normal = -normal;
    best_normal = normal;
    best_offset = -normal.dot(centroid);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(best_normal.dot(frame.xyz(i)) + best_offset) > cfg.threshold) {
      out.indices.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return out;
}

std::vector<int> dbscan(const PointFrame& frame, const PointSet& subset, double eps, int min_pts) {
  if (!(eps > 0.0)) throw ArgumentError("dbscan: eps must be positive");
  if (min_pts < 1) throw ArgumentError("dbscan: min_pts must be >= 1");
  const std::size_t n = subset.size();
  std::vector<int> labels(n, kUnvisited);
  if (n == 0) return labels;

  const VoxelGrid grid(frame.points, subset.indices, eps);
  // Frame index -> slot in the subset.
  auto slot_of = [&](std::uint32_t id) {
    return static_cast<std::size_t>(std::lower_bound(subset.indices.begin(), subset.indices.end(), id) -
                                    subset.indices.begin());
  };

  std::vector<std::uint32_t> nbrs;
  std::deque<std::size_t> queue;
  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    grid.radius(frame.xyz(subset.indices[i]), eps, nbrs);
    if (static_cast<int>(nbrs.size()) < min_pts) {
      labels[i] = kNoise;
      continue;
    }
    labels[i] = cluster;
    for (std::uint32_t id : nbrs) queue.push_back(slot_of(id));
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (labels[j] == kNoise) {
        labels[j] = cluster;  // border point
        continue;
      }
      if (labels[j] != kUnvisited) continue;
      labels[j] = cluster;
      grid.radius(frame.xyz(subset.indices[j]), eps, nbrs);
      if (static_cast<int>(nbrs.size()) >= min_pts) {
        for (std::uint32_t id : nbrs) {
          const std::size_t s = slot_of(id);
          if (labels[s] == kUnvisited || labels[s] == kNoise) queue.push_back(s);
        }
      }
    }
    ++cluster;
  }
  return labels;
}

std::vector<PointSet> clusters_from_labels(const PointSet& subset, std::span<const int> labels) {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<PointSet> out(static_cast<std::size_t>(max_label + 1));
  for (auto& s : out) s.frame = subset.frame;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].indices.push_back(subset.indices[i]);
  }
  return out;
}

namespace {

PointSet non_ground_of(const PointFrame& frame, const GroundConfig& ground) {
  if (frame.size() < kMinGroundPoints) {
    // Too sparse to fit a plane: treat every point as non-ground.
    PointSet all;
    all.frame = frame.timestamp;
    for (Eigen::Index i = 0; i < frame.size(); ++i) all.indices.push_back(static_cast<std::uint32_t>(i));
    return all;
  }
  return remove_ground(frame, ground);
}

}  // namespace

SegmentSet dbscan_ensemble(const PointFrame& frame, std::span<const double> eps_list, int min_pts,
                           const GroundConfig& ground) {
  if (eps_list.empty()) throw ArgumentError("dbscan_ensemble: empty epsilon list");
  SegmentSet out;
  out.frame = frame.timestamp;
  out.non_ground = non_ground_of(frame, ground);
  for (double eps : eps_list) {
    const auto labels = dbscan(frame, out.non_ground, eps, min_pts);
    for (PointSet& seg : clusters_from_labels(out.non_ground, labels)) {
      out.segments.push_back(std::move(seg));
      out.epsilon_of.push_back(eps);
    }
  }
  return out;
}

std::vector<SegmentSet> dbscan_ensemble_window(std::span<const PointFrame> frames, std::span<const double> eps_list,
                                               int min_pts, const GroundConfig& ground) {
  if (eps_list.empty()) throw ArgumentError("dbscan_ensemble_window: empty epsilon list");
  std::vector<SegmentSet> out(frames.size());
  if (frames.empty()) return out;
  const auto aligned = ego_compensate(frames, 0);

  // Superimpose the non-ground points of every frame.
  std::vector<std::pair<std::size_t, std::uint32_t>> origin;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    out[f].frame = frames[f].timestamp;
    out[f].non_ground = non_ground_of(frames[f], ground);
    for (std::uint32_t i : out[f].non_ground.indices) origin.emplace_back(f, i);
  }
  PointFrame merged;
  merged.timestamp = frames[0].timestamp;
  merged.points.resize(static_cast<Eigen::Index>(origin.size()), 4);
  PointSet all;
  all.frame = merged.timestamp;
  for (std::size_t k = 0; k < origin.size(); ++k) {
    merged.points.row(static_cast<Eigen::Index>(k)) = aligned[origin[k].first].points.row(origin[k].second);
    all.indices.push_back(static_cast<std::uint32_t>(k));
  }

  for (double eps : eps_list) {
    const auto labels = dbscan(merged, all, eps, min_pts);
    for (const PointSet& cluster : clusters_from_labels(all, labels)) {
      std::vector<PointSet> per_frame(frames.size());
      for (std::uint32_t k : cluster.indices) per_frame[origin[k].first].indices.push_back(origin[k].second);
      for (std::size_t f = 0; f < frames.size(); ++f) {
        if (per_frame[f].empty()) continue;
        per_frame[f].frame = frames[f].timestamp;
        out[f].segments.push_back(std::move(per_frame[f]));
        out[f].epsilon_of.push_back(eps);
      }
    }
  }
  return out;
}

RefinedMask refine_mask(const PointSet& mask, const SegmentSet& segs, double iou_threshold) {
  const PointSet non_ground = set_intersection(mask, segs.non_ground);
  const PointSet ground = set_difference(mask, segs.non_ground);

  std::size_t best = segs.segments.size();
  double best_iou = -1.0;
  for (std::size_t s = 0; s < segs.segments.size(); ++s) {
    const double iou = point_set_iou(non_ground, segs.segments[s]);
    if (iou > best_iou || (iou == best_iou && segs.segments[s].size() > segs.segments[best].size())) {
      best_iou = iou;
      best = s;
    }
  }
  if (best == segs.segments.size() || best_iou <= 0.0 || best_iou < iou_threshold) {
    return RefinedMask{mask, std::nullopt};
  }
  return RefinedMask{set_union(segs.segments[best], ground), segs.epsilon_of[best]};
}

PointSet refine_per_instance(const PointFrame& frame, const PointSet& mask, double eps, int min_pts) {
  if (mask.empty()) throw ArgumentError("refine_per_instance: empty mask");
  const auto labels = dbscan(frame, mask, eps, min_pts);
  const auto clusters = clusters_from_labels(mask, labels);
  PointSet out;
  out.frame = mask.frame;
  for (const PointSet& c : clusters) {
    if (c.size() > out.size()) out = c;
  }
  out.frame = mask.frame;
  return out;
}

}  // namespace p4d
