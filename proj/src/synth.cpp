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

#include "p4d/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <unordered_map>

namespace p4d {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

typedef std::uint64_t RegionKey;
RegionKey region_key(ClassId c, InstanceId inst) { return (static_cast<std::uint64_t>(c) << 32) | inst; }

// Surface samples in the object frame (base center at the origin, z up),
// bottom face excluded.
std::vector<Vector3d> sample_surface(const SceneObject& obj, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vector3d> out;
  out.reserve(static_cast<std::size_t>(n));
  const double l = obj.size.x(), w = obj.size.y(), h = obj.size.z();
  if (obj.shape == ShapeKind::kBox) {
    const double a_top = l * w, a_x = w * h, a_y = l * h;
    const double total = a_top + 2 * a_x + 2 * a_y;
    for (int i = 0; i < n; ++i) {
      const double pick = u01(rng) * total;
      const double s = u01(rng) - 0.5, r = u01(rng);
      if (pick < a_top) {
        out.emplace_back(s * l, (r - 0.5) * w, h);
      } else if (pick < a_top + a_x) {
        out.emplace_back(0.5 * l, s * w, r * h);
      } else if (pick < a_top + 2 * a_x) {
        out.emplace_back(-0.5 * l, s * w, r * h);
      } else if (pick < a_top + 2 * a_x + a_y) {
        out.emplace_back(s * l, 0.5 * w, r * h);
      } else {
        out.emplace_back(s * l, -0.5 * w, r * h);
      }
    }
  } else {
    const double radius = 0.5 * l;
    const double a_side = 2 * std::numbers::pi * radius * h, a_top = std::numbers::pi * radius * radius;
    for (int i = 0; i < n; ++i) {
      const double phi = 2 * std::numbers::pi * u01(rng);
      if (u01(rng) * (a_side + a_top) < a_side) {
        out.emplace_back(radius * std::cos(phi), radius * std::sin(phi), u01(rng) * h);
      } else {
        const double rr = radius * std::sqrt(u01(rng));
        out.emplace_back(rr * std::cos(phi), rr * std::sin(phi), h);
      }
    }
  }
  return out;
}

Vector3d object_center(const SceneObject& obj, int t) { return obj.position + static_cast<double>(t) * obj.velocity; }

bool inside_footprint(const SceneObject& obj, int t, const Vector3d& p) {
  const Vector3d local = yaw_rotation(obj.yaw).transpose() * (p - object_center(obj, t));
  const double margin = 0.05;
  if (obj.shape == ShapeKind::kCylinder) return local.head<2>().norm() <= 0.5 * obj.size.x() + margin;
  return std::abs(local.x()) <= 0.5 * obj.size.x() + margin && std::abs(local.y()) <= 0.5 * obj.size.y() + margin;
}

Matrix3d camera_rotation(double yaw) {
  Matrix3d r;
  r << std::sin(yaw), -std::cos(yaw), 0.0,  //
      0.0, 0.0, -1.0,                       //
      std::cos(yaw), std::sin(yaw), 0.0;
  return r;
}

// Drops every point whose pixel, in any camera, is shared with a nearer
// point of another region.
std::vector<bool> zorder_visible(const PointFrame& frame, const std::vector<RegionKey>& keys,
                                 std::span<const CameraModel> cams) {
  std::vector<bool> keep(static_cast<std::size_t>(frame.size()), true);
  for (const CameraModel& cam : cams) {
    const auto proj = project_to_image(frame, cam);
    std::vector<double> depth(proj.size(), 0.0);
    std::unordered_map<std::int64_t, std::pair<double, RegionKey>> nearest;
    std::vector<std::int64_t> pix(proj.size(), -1);
    for (std::size_t i = 0; i < proj.size(); ++i) {
      if (!proj[i].valid) continue;
      const auto [col, row] = pixel_of(proj[i], cam);
      pix[i] = static_cast<std::int64_t>(row) * cam.width + col;
      depth[i] = (cam.extrinsic * frame.xyz(static_cast<Eigen::Index>(i))).z();
      auto [it, inserted] = nearest.try_emplace(pix[i], depth[i], keys[i]);
      if (!inserted && depth[i] < it->second.first) it->second = {depth[i], keys[i]};
    }
    for (std::size_t i = 0; i < proj.size(); ++i) {
      if (pix[i] >= 0 && nearest.at(pix[i]).second != keys[i]) keep[i] = false;
    }
  }
  return keep;
}

}  // namespace

Rigid3d EgoMotion::poseAt(int t, double sensor_height) const {
  const double td = static_cast<double>(t);
  return Rigid3d::FromParts(yaw_rotation(yaw0 + td * yaw_rate), start + td * velocity + Vector3d(0, 0, sensor_height));
}

void SceneSpec::validate() const {
  if (n_frames < 1) throw ArgumentError("scene: n_frames must be >= 1");
  if (objects.empty() && points_on_ground <= 0) throw ArgumentError("scene: no objects and no ground");
  if (!objects.empty() && points_per_object <= 0) throw ArgumentError("scene: points_per_object must be > 0");
  if (!(ground_outer > ground_inner) || ground_inner < 0) throw ArgumentError("scene: bad ground annulus");
  if (dropout < 0 || dropout >= 1) throw ArgumentError("scene: dropout must be in [0, 1)");
  if (jitter < 0) throw ArgumentError("scene: jitter must be >= 0");
  if (feature_dim < static_cast<int>(vocabulary.size())) throw ArgumentError("scene: feature_dim below vocabulary size");
  const auto known = [&](ClassId c) { return c >= 1 && c <= vocabulary.size(); };
  if (!known(ground_class)) throw ArgumentError("scene: unknown ground class");
  for (const SceneObject& o : objects) {
    if (!known(o.class_id)) throw ArgumentError("scene: object with unknown class " + std::to_string(o.class_id));
    if ((o.size.array() <= 0).any()) throw ArgumentError("scene: object sizes must be positive");
  }
  for (const CameraModel& c : cameras) {
    if (!c.isValid()) throw ArgumentError("scene: invalid camera");
  }
}

std::vector<std::size_t> SyntheticScene::frameSizes() const {
  std::vector<std::size_t> out;
  for (const PointFrame& f : frames) out.push_back(static_cast<std::size_t>(f.size()));
  return out;
}

std::vector<std::string> default_vocabulary() {
  return {"road", "car", "truck", "pedestrian", "cyclist", "building", "pole", "vegetation"};
}

std::set<ClassId> default_things() { return {2, 3, 4, 5}; }

CameraModel forward_camera(int width, int height, double focal) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.intrinsics << focal, 0.0, 0.5 * width, 0.0, focal, 0.5 * height, 0.0, 0.0, 1.0;
  cam.extrinsic = Rigid3d::FromParts(camera_rotation(0.0), Vector3d::Zero());
  return cam;
}

std::vector<CameraModel> surround_cameras(int width, int height, double focal) {
  std::vector<CameraModel> cams;
  for (int i = 0; i < 4; ++i) {
    CameraModel cam = forward_camera(width, height, focal);
    cam.extrinsic.rotation = camera_rotation(i * 0.5 * std::numbers::pi);
    cams.push_back(cam);
  }
  return cams;
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::vector<std::vector<Vector3d>> samples;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    std::mt19937_64 rng(mix(spec.seed, 1000 + i));
    samples.push_back(sample_surface(spec.objects[i], spec.points_per_object, rng));
  }

  SyntheticScene scene;
  scene.cameras = spec.cameras;
  scene.feature_dim = spec.feature_dim;
  scene.gt.vocabulary = spec.vocabulary;
  scene.gt.things = spec.things;

  for (int t = 0; t < spec.n_frames; ++t) {
    std::mt19937_64 rng(mix(spec.seed, static_cast<std::uint64_t>(t)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const Rigid3d pose = spec.ego.poseAt(t, spec.sensor_height);
    const Rigid3d to_sensor = pose.inverse();

    std::vector<Vector3d> world;
    std::vector<ClassId> cls;
    std::vector<InstanceId> inst;
    const Vector3d ego_xy(pose.translation.x(), pose.translation.y(), 0.0);
    const double r2_in = spec.ground_inner * spec.ground_inner, r2_out = spec.ground_outer * spec.ground_outer;
    for (int k = 0; k < spec.points_on_ground; ++k) {
      const double r = std::sqrt(r2_in + u01(rng) * (r2_out - r2_in));
      const double phi = 2 * std::numbers::pi * u01(rng);
      const Vector3d p = ego_xy + Vector3d(r * std::cos(phi), r * std::sin(phi), 0.0);
      if (std::any_of(spec.objects.begin(), spec.objects.end(),
                      [&](const SceneObject& o) { return inside_footprint(o, t, p); })) {
        continue;
      }
      world.push_back(p);
      cls.push_back(spec.ground_class);
      inst.push_back(0);
    }
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const SceneObject& o = spec.objects[i];
      const Matrix3d rot = yaw_rotation(o.yaw);
      const Vector3d c = object_center(o, t);
      const bool thing = spec.things.count(o.class_id) != 0;
      for (const Vector3d& s : samples[i]) {
        world.push_back(c + rot * s);
        cls.push_back(o.class_id);
        inst.push_back(thing ? static_cast<InstanceId>(i + 1) : 0);
      }
    }

    std::vector<Vector3d> sensor;
    std::vector<ClassId> kept_cls;
    std::vector<InstanceId> kept_inst;
    for (std::size_t k = 0; k < world.size(); ++k) {
      const bool drop = spec.dropout > 0 && u01(rng) < spec.dropout;
      Vector3d p = world[k];
      if (spec.jitter > 0) p += spec.jitter * Vector3d(noise(rng), noise(rng), noise(rng));
      if (drop) continue;
      sensor.push_back(to_sensor * p);
      kept_cls.push_back(cls[k]);
      kept_inst.push_back(inst[k]);
    }

    PointFrame frame;
    frame.timestamp = t;
    frame.pose = pose;
    frame.points.resize(static_cast<Eigen::Index>(sensor.size()), 4);
    std::vector<RegionKey> keys(sensor.size());
    for (std::size_t k = 0; k < sensor.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      for (int d = 0; d < 3; ++d) frame.points(row, d) = to_float_precision(sensor[k](d));
      frame.points(row, 3) = to_float_precision(0.01 * kept_cls[k]);
      keys[k] = region_key(kept_cls[k], kept_inst[k]);
    }

    std::vector<bool> keep(sensor.size(), true);
    if (!spec.cameras.empty()) keep = zorder_visible(frame, keys, spec.cameras);
    const auto n_keep = static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true));
    PointFrame visible;
    visible.timestamp = t;
    visible.pose = pose;
    visible.points.resize(n_keep, 4);
    auto& gc = scene.gt.classes.emplace_back();
    auto& gi = scene.gt.instances.emplace_back();
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (!keep[k]) continue;
      visible.points.row(row++) = frame.points.row(static_cast<Eigen::Index>(k));
      gc.push_back(kept_cls[k]);
      gi.push_back(kept_inst[k]);
    }
    scene.frames.push_back(std::move(visible));
  }
  return scene;
}

Feature class_embedding(ClassId c, int dim) {
  if (c < 1 || c > dim) throw ArgumentError("class_embedding: class " + std::to_string(c) + " does not fit");
  Feature f = Feature::Zero(dim);
  f(c - 1) = 1.0f;
  return f;
}

PromptVocabulary oracle_prompts(const GroundTruthSequence& gt, int dim) {
  PromptVocabulary v;
  for (int c = 1; c <= gt.numClasses(); ++c) {
    const auto id = static_cast<ClassId>(c);
    v.entries.push_back(PromptEntry{gt.vocabulary[static_cast<std::size_t>(c - 1)], class_embedding(id, dim),
                                    !gt.isThing(id)});
  }
  return v;
}

PromptVocabulary oracle_prompts(const SceneSpec& spec) {
  GroundTruthSequence gt;
  gt.vocabulary = spec.vocabulary;
  gt.things = spec.things;
  return oracle_prompts(gt, spec.feature_dim);
}

ImageMaskletSet oracle_masklets(const SyntheticScene& scene, const FrameRange& window, int camera) {
  if (camera < 0 || static_cast<std::size_t>(camera) >= scene.cameras.size()) {
    throw ArgumentError("oracle_masklets: no camera " + std::to_string(camera));
  }
  const CameraModel& cam = scene.cameras[static_cast<std::size_t>(camera)];
  const int end = std::min(window.end(), static_cast<int>(scene.frames.size()));
  ImageMaskletSet set;
  set.camera = camera;
  set.window_start = window.start;
  set.window_size = end - window.start;
  set.height = cam.height;
  set.width = cam.width;
  set.feature_dim = scene.feature_dim;
  if (set.window_size <= 0) throw ArgumentError("oracle_masklets: window outside the scene");

  auto key_of = [&](int t, std::size_t p) {
    const ClassId c = scene.gt.classes[static_cast<std::size_t>(t)][p];
    return region_key(c, scene.gt.isThing(c) ? scene.gt.instances[static_cast<std::size_t>(t)][p] : 0);
  };

  std::map<RegionKey, std::vector<ImageMask>> masks;
  for (int t = window.start; t < end; ++t) {
    const auto proj = project_to_image(scene.frames[static_cast<std::size_t>(t)], cam);
    for (std::size_t p = 0; p < proj.size(); ++p) {
      if (!proj[p].valid) continue;
      const RegionKey key = key_of(t, p);
      if (key >> 32 == kUnlabeledClass) continue;
      auto it = masks.find(key);
      if (it == masks.end()) {
        if (t != window.start) continue;
        it = masks.emplace(key, std::vector<ImageMask>(static_cast<std::size_t>(set.window_size),
                                                       ImageMask(cam.width, cam.height)))
                 .first;
      }
      const auto [col, row] = pixel_of(proj[p], cam);
      it->second[static_cast<std::size_t>(t - window.start)].set(row, col);
    }
  }
  for (auto& [key, per_frame] : masks) {
    ImageMasklet m;
    m.local_id = static_cast<std::uint32_t>(set.instances.size());
    const Feature f = class_embedding(static_cast<ClassId>(key >> 32), scene.feature_dim);
    for (const ImageMask& im : per_frame) {
      m.masks.push_back(RleMask::Encode(im));
      m.features.push_back(f);
    }
    set.instances.push_back(std::move(m));
  }
  return set;
}

std::vector<ImageMaskletSet> oracle_window_sets(const SyntheticScene& scene, const FrameRange& window) {
  std::vector<ImageMaskletSet> out;
  for (std::size_t c = 0; c < scene.cameras.size(); ++c) out.push_back(oracle_masklets(scene, window, static_cast<int>(c)));
  return out;
}

std::vector<FrameDetections> gt_detections(const SyntheticScene& scene, bool instance_embeddings,
                                           const std::vector<std::pair<int, InstanceId>>& dropped) {
  InstanceId max_inst = 0;
  for (const auto& f : scene.gt.instances)
    for (InstanceId i : f) max_inst = std::max(max_inst, i);
  const int dim = std::max(scene.feature_dim, static_cast<int>(max_inst));
  std::vector<FrameDetections> out;
  for (std::size_t t = 0; t < scene.frames.size(); ++t) {
    std::map<InstanceId, std::pair<ClassId, std::vector<std::uint32_t>>> groups;
    for (std::size_t p = 0; p < scene.gt.instances[t].size(); ++p) {
      const InstanceId i = scene.gt.instances[t][p];
      if (i == 0) continue;
      auto& g = groups[i];
      g.first = scene.gt.classes[t][p];
      g.second.push_back(static_cast<std::uint32_t>(p));
    }
    std::vector<PointSet> masks;
    std::vector<Feature> emb;
    for (auto& [i, g] : groups) {
      if (std::find(dropped.begin(), dropped.end(), std::make_pair(static_cast<int>(t), i)) != dropped.end()) continue;
      masks.emplace_back(static_cast<int>(t), std::move(g.second));
      if (instance_embeddings) {
        Feature f = Feature::Zero(dim);
        f(static_cast<Eigen::Index>(i - 1)) = 1.0f;
        emb.push_back(f);
      } else {
        emb.push_back(class_embedding(g.first, dim));
      }
    }
    out.push_back(FrameDetections::FromMasks(scene.frames[t], static_cast<int>(t), std::move(masks), std::move(emb)));
  }
  return out;
}

LabeledSequence gt_as_sequence(const SyntheticScene& scene) {
  InstanceId max_inst = 0;
  for (const auto& f : scene.gt.instances)
    for (InstanceId i : f) max_inst = std::max(max_inst, i);
  LabeledSequence seq;
  std::map<InstanceId, ClassId> cls;
  for (std::size_t t = 0; t < scene.gt.length(); ++t) {
    auto& frame = seq.frames.emplace_back(scene.gt.classes[t].size(), kUnlabeled);
    for (std::size_t p = 0; p < frame.size(); ++p) {
      const ClassId c = scene.gt.classes[t][p];
      if (c == kUnlabeledClass) continue;
      const InstanceId id = scene.gt.isThing(c) ? scene.gt.instances[t][p] : max_inst + c;
      frame[p] = id;
      cls[id] = c;
    }
  }
  for (const auto& [id, c] : cls) {
    InstanceInfo& info = seq.instances[id];
    info.feature = class_embedding(c, scene.feature_dim);
    info.class_id = c;
  }
  seq.refreshInstances();
  return seq;
}

SceneSpec acceptance_scene_spec(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.n_frames = 24;
  s.vocabulary = default_vocabulary();
  s.things = default_things();
  s.cameras = surround_cameras();
  auto box = [](Vector3d size, Vector3d pos, Vector3d vel, ClassId c) {
    SceneObject o;
    o.size = size;
    o.position = pos;
    o.velocity = vel;
    o.class_id = c;
    return o;
  };
  s.objects.push_back(box({4.0, 2.0, 1.5}, {12.0, 3.0, 0.0}, Vector3d::Zero(), 2));
  s.objects.push_back(box({4.0, 2.0, 1.5}, {7.0, -3.5, 0.0}, {0.25, 0.0, 0.0}, 2));
  SceneObject ped = box({0.6, 0.6, 1.8}, {1.0, 9.0, 0.0}, Vector3d::Zero(), 4);
  ped.shape = ShapeKind::kCylinder;
  s.objects.push_back(ped);
  s.objects.push_back(box({7.0, 2.5, 3.0}, {-14.0, 1.0, 0.0}, Vector3d::Zero(), 3));
  s.objects.push_back(box({1.8, 0.6, 1.7}, {3.0, -9.0, 0.0}, {-0.2, 0.0, 0.0}, 5));
  return s;
}

SceneSpec static_scene_spec(std::uint64_t seed, int n_frames) {
  SceneSpec s;
  s.seed = seed;
  s.n_frames = n_frames;
  s.vocabulary = default_vocabulary();
  s.things = default_things();
  s.cameras = surround_cameras();
  s.ego.velocity = Vector3d(0.5, 0.0, 0.0);
  SceneObject a;
  a.position = {12.0, 4.0, 0.0};
  SceneObject b;
  b.position = {6.0, -7.0, 0.0};
  b.yaw = 0.3;
  SceneObject c;
  c.size = {7.0, 2.5, 3.0};
  c.position = {-10.0, -2.0, 0.0};
  c.class_id = 3;
  SceneObject d;
  d.shape = ShapeKind::kCylinder;
  d.size = {0.6, 0.6, 1.8};
  d.position = {2.0, 8.0, 0.0};
  d.class_id = 4;
  s.objects = {a, b, c, d};
  return s;
}

SceneSpec crossing_scene_spec(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.n_frames = 24;
  s.vocabulary = default_vocabulary();
  s.things = default_things();
  s.cameras = surround_cameras();
  SceneObject a;
  a.yaw = 0.5 * std::numbers::pi;
  a.position = {-1.5, 5.0, 0.0};
  a.velocity = {0.0, 0.8, 0.0};
  SceneObject b = a;
  b.position = {1.5, 5.0 + 23 * 0.8, 0.0};
  b.velocity = {0.0, -0.8, 0.0};
  s.objects = {a, b};
  return s;
}

SyntheticScene spinning_lidar_scene(const SpinningLidarSpec& spec) {
  if (spec.beams < 2 || spec.azimuth_steps < 1) throw ArgumentError("spinning_lidar_scene: bad resolution");
  SyntheticScene scene;
  scene.gt.vocabulary = default_vocabulary();
  scene.gt.things = default_things();
  scene.cameras = {forward_camera(1242, 375, 721.5)};
  const ClassId road = 1, building = 6;
  std::vector<Vector3d> pts;
  auto& cls = scene.gt.classes.emplace_back();
  for (int b = 0; b < spec.beams; ++b) {
    const double e = (spec.elevation_min_deg + (spec.elevation_max_deg - spec.elevation_min_deg) * b / (spec.beams - 1)) *
                     std::numbers::pi / 180.0;
    for (int k = 0; k < spec.azimuth_steps; ++k) {
      const double a = 2 * std::numbers::pi * k / spec.azimuth_steps;
      const Vector3d dir(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e));
      double range = spec.wall_radius / std::cos(e);
      ClassId c = building;
      if (e < 0 && spec.height / -std::sin(e) < range) {
        range = spec.height / -std::sin(e);
        c = road;
      }
      pts.push_back(range * dir);
      cls.push_back(c);
    }
  }
  PointFrame f;
  f.points.resize(static_cast<Eigen::Index>(pts.size()), 4);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int d = 0; d < 3; ++d) f.points(static_cast<Eigen::Index>(i), d) = to_float_precision(pts[i](d));
    f.points(static_cast<Eigen::Index>(i), 3) = 0.0;
  }
  scene.gt.instances.emplace_back(pts.size(), 0);
  scene.frames.push_back(std::move(f));
  return scene;
}

LabeledSequence corrupt(const LabeledSequence& seq, const CorruptionModel& model, std::uint64_t seed,
                        const std::set<InstanceId>* eligible) {
  if (model.id_switches < 0 || model.mask_erosion < 0 || model.mask_erosion > 1 || model.feature_noise < 0) {
    throw ArgumentError("corrupt: invalid corruption model");
  }
  LabeledSequence out = seq;
  std::mt19937_64 rng(mix(seed, 77));
  InstanceId next = 1;
  for (const auto& [id, info] : out.instances) next = std::max(next, id + 1);
  std::set<InstanceId> allowed;
  if (eligible) allowed = *eligible;

  for (int k = 0; k < model.id_switches; ++k) {
    std::vector<InstanceId> cand;
    for (const auto& [id, info] : out.instances) {
      if ((!eligible || allowed.count(id)) && info.last_frame > info.first_frame) cand.push_back(id);
    }
    if (cand.empty()) break;
    const InstanceId victim = cand[std::uniform_int_distribution<std::size_t>(0, cand.size() - 1)(rng)];
    const InstanceInfo& info = out.instances.at(victim);
    const int t0 = std::uniform_int_distribution<int>(info.first_frame + 1, info.last_frame)(rng);
    const InstanceId fresh = next++;
    for (std::size_t t = static_cast<std::size_t>(t0); t < out.frames.size(); ++t) {
      for (InstanceId& id : out.frames[t]) {
        if (id == victim) id = fresh;
      }
    }
    InstanceInfo copy = info;
    out.instances[fresh] = copy;
    if (eligible) allowed.insert(fresh);
    out.refreshInstances();
  }

  if (model.mask_erosion > 0) {
    for (auto& frame : out.frames) {
      std::map<InstanceId, std::vector<std::size_t>> groups;
      for (std::size_t p = 0; p < frame.size(); ++p) {
        if (frame[p] != kUnlabeled) groups[frame[p]].push_back(p);
      }
      for (auto& [id, idx] : groups) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n = static_cast<std::size_t>(std::floor(model.mask_erosion * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < n; ++i) frame[idx[i]] = kUnlabeled;
      }
    }
    out.refreshInstances();
  }

  if (model.feature_noise > 0) {
    std::normal_distribution<double> noise(0.0, model.feature_noise);
    for (auto& [id, info] : out.instances) {
      for (Eigen::Index d = 0; d < info.feature.size(); ++d) info.feature(d) += static_cast<float>(noise(rng));
    }
  }
  return out;
}

}  // namespace p4d
