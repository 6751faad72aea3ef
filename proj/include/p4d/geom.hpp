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
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "p4d/types.hpp"

namespace p4d {

/// Rotation plus translation, p' = R p + t.
template <typename Scalar>
struct RigidTransform {
  typedef Eigen::Matrix<Scalar, 3, 3> RotationType;
  typedef Eigen::Matrix<Scalar, 3, 1> VectorType;

  RotationType rotation = RotationType::Identity();
  VectorType translation = VectorType::Zero();

  static RigidTransform Identity() { return RigidTransform(); }

  static RigidTransform FromParts(const RotationType& r, const VectorType& t) {
    RigidTransform out;
    out.rotation = r;
    out.translation = t;
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return FromParts(rotation * rhs.rotation, rotation * rhs.translation + translation);
  }

  VectorType operator*(const VectorType& p) const { return rotation * p + translation; }

  /// Orthonormal with determinant +1, within `tol`.
  bool isValid(Scalar tol = Scalar(1e-9)) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Scalar ortho = (rotation.transpose() * rotation - RotationType::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - Scalar(1)) <= tol;
  }
};

typedef RigidTransform<double> Rigid3d;

/// Rotation about +z by `yaw` radians.
Matrix3d yaw_rotation(double yaw);

/// Timestamped Lidar scan in its sensor frame; `pose` maps sensor to world.
struct PointFrame {
  PointMatrix points;
  int timestamp = 0;
  Rigid3d pose;

  Eigen::Index size() const { return points.rows(); }
  Vector3d xyz(Eigen::Index i) const { return points.row(i).head<3>().transpose(); }
};

/// Sparse point mask: sorted unique indices into one frame.
struct PointSet {
  int frame = 0;
  std::vector<std::uint32_t> indices;

  PointSet() = default;
  PointSet(int f, std::vector<std::uint32_t> idx) : frame(f), indices(std::move(idx)) {}

  /// Sorts and deduplicates.
  static PointSet FromUnsorted(int frame, std::vector<std::uint32_t> idx);

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  bool contains(std::uint32_t i) const;
  /// Strictly increasing and below `num_points`.
  bool isValid(std::size_t num_points) const;

  bool operator==(const PointSet&) const = default;
};

std::size_t intersection_size(const PointSet& a, const PointSet& b);
PointSet set_union(const PointSet& a, const PointSet& b);
PointSet set_intersection(const PointSet& a, const PointSet& b);
PointSet set_difference(const PointSet& a, const PointSet& b);

typedef Eigen::AlignedBox3d Aabb3;

struct CameraModel {
  Matrix3d intrinsics = Matrix3d::Identity();
  Rigid3d extrinsic;  // Lidar frame -> camera frame
  int width = 0;
  int height = 0;

  bool isValid() const;
};

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  bool valid = false;
};

/// Row-major binary image.
struct ImageMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ImageMask() = default;
  ImageMask(int w, int h, bool fill = false)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col] != 0; }
  void set(int row, int col, bool v = true) { data[static_cast<std::size_t>(row) * width + col] = v ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const ImageMask&) const = default;
};

/// Inclusive-exclusive frame interval [start, start + count).
struct FrameRange {
  int start = 0;
  int count = 0;

  int end() const { return start + count; }
  bool contains(int t) const { return t >= start && t < end(); }
  bool empty() const { return count <= 0; }
  FrameRange intersect(const FrameRange& o) const;
  bool operator==(const FrameRange&) const = default;
};

PointFrame transform_points(const PointFrame& frame, const Rigid3d& t);

/// Re-expresses every frame in the sensor frame of `frames[reference]`.
std::vector<PointFrame> ego_compensate(std::span<const PointFrame> frames, std::size_t reference);

std::vector<PixelProjection> project_to_image(const PointFrame& frame, const CameraModel& cam);

/// Pixel (col, row) hit by a valid projection: nearest-integer rounding,
/// clamped into the image so that every valid projection lands on a pixel.
std::pair<int, int> pixel_of(const PixelProjection& p, const CameraModel& cam);

std::vector<bool> frustum_mask(const PointFrame& frame, std::span<const CameraModel> cams);

PointSet lift_mask(const PointFrame& frame, const CameraModel& cam, const ImageMask& mask);
PointSet lift_mask(int frame_index, std::span<const PixelProjection> projections, const CameraModel& cam,
                   const ImageMask& mask);

double point_set_iou(const PointSet& a, const PointSet& b);
double point_set_iom(const PointSet& a, const PointSet& b);

/// 4D IoU over `frames`; per-frame masks are looked up by PointSet::frame,
/// missing frames count as empty.
double masklet_iou_4d(std::span<const PointSet> a, std::span<const PointSet> b, const FrameRange& frames);

Aabb3 fit_aabb(const PointFrame& frame, const PointSet& mask);

template <typename Scalar>
Scalar box_volume(const Eigen::AlignedBox<Scalar, 3>& b) {
  if (b.isEmpty()) return Scalar(0);
  return b.sizes().prod();
}

/// Generalized IoU of axis-aligned boxes, in (-1, 1].
template <typename Scalar>
Scalar giou_3d(const Eigen::AlignedBox<Scalar, 3>& a, const Eigen::AlignedBox<Scalar, 3>& b) {
  const Scalar hull = box_volume(a.merged(b));
  if (!(hull > Scalar(0))) throw ArgumentError("giou_3d: zero-volume hull");
  const Scalar inter = box_volume(a.intersection(b));
  const Scalar uni = box_volume(a) + box_volume(b) - inter;
  const Scalar iou = uni > Scalar(0) ? inter / uni : Scalar(0);
  return iou - (hull - uni) / hull;
}

struct NearestNeighbor {
  std::uint32_t index = 0;
  double distance = 0.0;
};

NearestNeighbor nearest_neighbor(const Vector3d& query, const PointFrame& frame);

}  // namespace p4d
