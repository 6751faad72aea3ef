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

#include "p4d/geom.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <unordered_map>

#include "p4d/spatial_index.hpp"

namespace p4d {

Matrix3d yaw_rotation(double yaw) { return Eigen::AngleAxisd(yaw, Vector3d::UnitZ()).toRotationMatrix(); }

PointSet PointSet::FromUnsorted(int frame, std::vector<std::uint32_t> idx) {
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return PointSet(frame, std::move(idx));
}

bool PointSet::contains(std::uint32_t i) const { return std::binary_search(indices.begin(), indices.end(), i); }

bool PointSet::isValid(std::size_t num_points) const {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= num_points) return false;
    if (i > 0 && indices[i] <= indices[i - 1]) return false;
  }
  return true;
}

std::size_t intersection_size(const PointSet& a, const PointSet& b) {
  std::size_t n = 0;
  auto i = a.indices.begin();
  auto j = b.indices.begin();
  while (i != a.indices.end() && j != b.indices.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

PointSet set_union(const PointSet& a, const PointSet& b) {
  PointSet out;
  out.frame = a.frame;
  out.indices.reserve(a.size() + b.size());
  std::set_union(a.indices.begin(), a.indices.end(), b.indices.begin(), b.indices.end(),
                 std::back_inserter(out.indices));
  return out;
}

PointSet set_intersection(const PointSet& a, const PointSet& b) {
  PointSet out;
  out.frame = a.frame;
  std::set_intersection(a.indices.begin(), a.indices.end(), b.indices.begin(), b.indices.end(),
                        std::back_inserter(out.indices));
  return out;
}

PointSet set_difference(const PointSet& a, const PointSet& b) {
  PointSet out;
  out.frame = a.frame;
  std::set_difference(a.indices.begin(), a.indices.end(), b.indices.begin(), b.indices.end(),
                      std::back_inserter(out.indices));
  return out;
}

bool CameraModel::isValid() const {
  return width > 0 && height > 0 && intrinsics(2, 2) == 1.0 && intrinsics(0, 0) > 0 && intrinsics(1, 1) > 0 &&
         extrinsic.isValid(1e-6);
}

std::size_t ImageMask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

FrameRange FrameRange::intersect(const FrameRange& o) const {
  const int s = std::max(start, o.start);
  const int e = std::min(end(), o.end());
  return FrameRange{s, std::max(0, e - s)};
}

PointFrame transform_points(const PointFrame& frame, const Rigid3d& t) {
  PointFrame out = frame;
  // Row-major N x 3 block: rows are points.
  out.points.leftCols<3>() =
      (frame.points.leftCols<3>() * t.rotation.transpose()).rowwise() + t.translation.transpose();
  return out;
}

std::vector<PointFrame> ego_compensate(std::span<const PointFrame> frames, std::size_t reference) {
  if (reference >= frames.size()) {
    throw IndexError("ego_compensate: reference " + std::to_string(reference) + " out of range for " +
                     std::to_string(frames.size()) + " frames");
  }
  const Rigid3d world_to_ref = frames[reference].pose.inverse();
  std::vector<PointFrame> out;
  out.reserve(frames.size());
  for (const PointFrame& f : frames) {
    PointFrame c = transform_points(f, world_to_ref * f.pose);
    c.pose = frames[reference].pose;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<PixelProjection> project_to_image(const PointFrame& frame, const CameraModel& cam) {
  std::vector<PixelProjection> out(static_cast<std::size_t>(frame.size()));
  for (Eigen::Index i = 0; i < frame.size(); ++i) {
    const Vector3d pc = cam.extrinsic * frame.xyz(i);
    PixelProjection& p = out[static_cast<std::size_t>(i)];
    if (!(pc.z() > 0.0)) continue;
    const Vector3d h = cam.intrinsics * pc;
    p.u = h.x() / h.z();
    p.v = h.y() / h.z();
    p.valid = p.u >= 0.0 && p.u < cam.width && p.v >= 0.0 && p.v < cam.height;
  }
  return out;
}

std::pair<int, int> pixel_of(const PixelProjection& p, const CameraModel& cam) {
  const int col = std::clamp(static_cast<int>(std::lround(p.u)), 0, cam.width - 1);
  const int row = std::clamp(static_cast<int>(std::lround(p.v)), 0, cam.height - 1);
  return {col, row};
}

std::vector<bool> frustum_mask(const PointFrame& frame, std::span<const CameraModel> cams) {
  if (cams.empty()) throw ArgumentError("frustum_mask: no cameras");
  std::vector<bool> visible(static_cast<std::size_t>(frame.size()), false);
  for (const CameraModel& cam : cams) {
    const auto proj = project_to_image(frame, cam);
    for (std::size_t i = 0; i < proj.size(); ++i) {
      if (proj[i].valid) visible[i] = true;
    }
  }
  return visible;
}

PointSet lift_mask(int frame_index, std::span<const PixelProjection> projections, const CameraModel& cam,
                   const ImageMask& mask) {
  if (mask.width != cam.width || mask.height != cam.height) {
    throw ArgumentError("lift_mask: mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                        ", camera is " + std::to_string(cam.width) + "x" + std::to_string(cam.height));
  }
  PointSet out;
  out.frame = frame_index;
  for (std::size_t i = 0; i < projections.size(); ++i) {
    if (!projections[i].valid) continue;
    const auto [col, row] = pixel_of(projections[i], cam);
    if (mask.at(row, col)) out.indices.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

PointSet lift_mask(const PointFrame& frame, const CameraModel& cam, const ImageMask& mask) {
  const auto proj = project_to_image(frame, cam);
  return lift_mask(frame.timestamp, proj, cam, mask);
}

double point_set_iou(const PointSet& a, const PointSet& b) {
  if (a.frame != b.frame) throw ArgumentError("point_set_iou: frame mismatch");
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double point_set_iom(const PointSet& a, const PointSet& b) {
  if (a.frame != b.frame) throw ArgumentError("point_set_iom: frame mismatch");
  if (a.empty() && b.empty()) throw ArgumentError("point_set_iom: both sets empty");
  const std::size_t denom = std::min(a.size(), b.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(intersection_size(a, b)) / static_cast<double>(denom);
}

namespace {

const PointSet* find_frame(std::span<const PointSet> masks, int t) {
  for (const PointSet& m : masks) {
    if (m.frame == t) return &m;
  }
  return nullptr;
}

}  // namespace

double masklet_iou_4d(std::span<const PointSet> a, std::span<const PointSet> b, const FrameRange& frames) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (int t = frames.start; t < frames.end(); ++t) {
    const PointSet* ma = find_frame(a, t);
    const PointSet* mb = find_frame(b, t);
    const std::size_t na = ma ? ma->size() : 0;
    const std::size_t nb = mb ? mb->size() : 0;
    const std::size_t i = (ma && mb) ? intersection_size(*ma, *mb) : 0;
    inter += i;
    uni += na + nb - i;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Aabb3 fit_aabb(const PointFrame& frame, const PointSet& mask) {
  if (mask.empty()) throw ArgumentError("fit_aabb: empty mask");
  Aabb3 box;
  for (std::uint32_t i : mask.indices) box.extend(frame.xyz(i));
  return box;
}

NearestNeighbor nearest_neighbor(const Vector3d& query, const PointFrame& frame) {
  if (frame.size() == 0) throw ArgumentError("nearest_neighbor: empty frame");
  return VoxelGrid(frame.points).nearest(query);
}

}  // namespace p4d
