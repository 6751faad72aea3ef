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

#include "p4d/engine.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

namespace p4d {

RleMask RleMask::Encode(const ImageMask& mask) {
  RleMask out;
  out.width = mask.width;
  out.height = mask.height;
  std::uint8_t cur = 0;
  std::uint32_t len = 0;
  for (std::uint8_t px : mask.data) {
    const std::uint8_t bit = px ? 1 : 0;
    if (bit == cur) {
      ++len;
    } else {
      out.runs.push_back(len);
      cur = bit;
      len = 1;
    }
  }
  out.runs.push_back(len);
  return out;
}

ImageMask RleMask::decode() const {
  ImageMask out(width, height);
  std::size_t pos = 0;
  bool bit = false;
  for (std::uint32_t run : runs) {
    if (pos + run > out.data.size()) throw ArgumentError("RleMask: runs exceed image size");
    if (bit) std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(pos), run, std::uint8_t{1});
    pos += run;
    bit = !bit;
  }
  if (pos != out.data.size()) throw ArgumentError("RleMask: runs do not cover the image");
  return out;
}

std::size_t RleMask::count() const {
  std::size_t n = 0;
  for (std::size_t i = 1; i < runs.size(); i += 2) n += runs[i];
  return n;
}

void ImageMaskletSet::validate() const {
  if (window_size < 1) throw ArgumentError("masklet set: window size must be >= 1");
  for (const ImageMasklet& inst : instances) {
    if (static_cast<int>(inst.masks.size()) != window_size || static_cast<int>(inst.features.size()) != window_size) {
      throw ArgumentError("masklet set: instance " + std::to_string(inst.local_id) + " does not cover the window");
    }
    for (const RleMask& m : inst.masks) {
      if (m.width != width || m.height != height) {
        throw ArgumentError("masklet set: instance " + std::to_string(inst.local_id) + " has a mis-sized mask");
      }
    }
    for (const Feature& f : inst.features) {
      if (f.size() != feature_dim) {
        throw ArgumentError("masklet set: instance " + std::to_string(inst.local_id) + " has feature dimension " +
                            std::to_string(f.size()) + ", expected " + std::to_string(feature_dim));
      }
    }
  }
}

void LidarMasklet::recomputeVolume() {
  volume = 0;
  for (const PointSet& m : masks) volume += m.size();
}

const PointSet* LidarMasklet::maskAt(int frame) const {
  for (const PointSet& m : masks) {
    if (m.frame == frame) return &m;
  }
  return nullptr;
}

void WindowConfig::validate() const {
  if (k < 1 || s < 1 || s > k) throw ArgumentError("window config: need 1 <= stride <= window size");
  auto ratio = [](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) throw ArgumentError(std::string("window config: ") + name + " must be in (0, 1]");
  };
  ratio(theta_iom, "theta");
  ratio(cam_fuse_iou, "camera fusion IoU");
  ratio(dbscan_iou, "DBSCAN IoU");
  if (eps_list.empty()) throw ArgumentError("window config: empty epsilon list");
  for (double e : eps_list) {
    if (!(e > 0.0)) throw ArgumentError("window config: epsilon values must be positive");
  }
  if (min_pts < 1) throw ArgumentError("window config: min_pts must be >= 1");
  if (tau < 0) throw ArgumentError("window config: tau must be >= 0");
}

namespace {

FrameRange span_of(const LidarMasklet& m) {
  if (m.masks.empty()) return FrameRange{};
  return FrameRange{m.masks.front().frame, static_cast<int>(m.masks.size())};
}

std::size_t masklet_intersection(const LidarMasklet& a, const LidarMasklet& b) {
  std::size_t n = 0;
  for (const PointSet& ma : a.masks) {
    if (const PointSet* mb = b.maskAt(ma.frame)) n += intersection_size(ma, *mb);
  }
  return n;
}

bool volume_order(const LidarMasklet& a, const LidarMasklet& b) {
  if (a.volume != b.volume) return a.volume > b.volume;
  return a.local_id < b.local_id;
}

}  // namespace

std::vector<LidarMasklet> fuse_cameras(const std::vector<std::vector<LidarMasklet>>& groups, double iou_threshold) {
  if (groups.size() == 1) return groups.front();

  struct Entry {
    LidarMasklet masklet;
    Eigen::VectorXd feature_sum;
    double weight = 0.0;
  };
  std::vector<Entry> fused;
  auto absorb = [](Entry& e, const LidarMasklet& m) {
    const double w = static_cast<double>(m.volume);
    if (e.feature_sum.size() == 0) e.feature_sum = Eigen::VectorXd::Zero(m.feature.size());
    e.feature_sum += w * m.feature.cast<double>();
    e.weight += w;
  };

  for (const auto& group : groups) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
    const std::size_t existing = fused.size();
    for (std::size_t e = 0; e < existing; ++e) {
      for (std::size_t j = 0; j < group.size(); ++j) {
        const FrameRange range = span_of(fused[e].masklet);
        const double iou = masklet_iou_4d(fused[e].masklet.masks, group[j].masks, range);
        if (iou > 0.0 && iou >= iou_threshold) cand.emplace_back(iou, e, j);
      }
    }
    std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      return std::make_pair(std::get<1>(a), std::get<2>(a)) < std::make_pair(std::get<1>(b), std::get<2>(b));
    });
    std::vector<char> entry_used(existing, 0), taken(group.size(), 0);
    for (const auto& [iou, e, j] : cand) {
      if (entry_used[e] || taken[j]) continue;
      entry_used[e] = taken[j] = 1;
      Entry& dst = fused[e];
      for (PointSet& m : dst.masklet.masks) {
        if (const PointSet* other = group[j].maskAt(m.frame)) m = set_union(m, *other);
      }
      absorb(dst, group[j]);
    }
    for (std::size_t j = 0; j < group.size(); ++j) {
      if (taken[j]) continue;
      Entry e;
      e.masklet = group[j];
      absorb(e, group[j]);
      fused.push_back(std::move(e));
    }
  }

  std::vector<LidarMasklet> out;
  out.reserve(fused.size());
  for (std::size_t i = 0; i < fused.size(); ++i) {
    LidarMasklet m = std::move(fused[i].masklet);
    m.local_id = static_cast<std::uint32_t>(i);
    if (fused[i].weight > 0.0) m.feature = (fused[i].feature_sum / fused[i].weight).cast<float>();
    m.recomputeVolume();
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<LidarMasklet> flatten_suppress(std::vector<LidarMasklet> masklets, double theta) {
  for (LidarMasklet& m : masklets) m.recomputeVolume();
  std::erase_if(masklets, [](const LidarMasklet& m) { return m.volume == 0; });
  std::stable_sort(masklets.begin(), masklets.end(), volume_order);

  std::vector<LidarMasklet> survivors;
  for (LidarMasklet& cand : masklets) {
    bool suppressed = false;
    for (const LidarMasklet& s : survivors) {
      const double iom = static_cast<double>(masklet_intersection(s, cand)) /
                         static_cast<double>(std::min(s.volume, cand.volume));
      if (iom > theta) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) survivors.push_back(std::move(cand));
  }
  return survivors;
}

std::vector<LidarMasklet> claim_points(std::vector<LidarMasklet> masklets) {
  std::map<int, std::vector<char>> claimed;
  for (LidarMasklet& m : masklets) {
    for (PointSet& mask : m.masks) {
      std::vector<char>& taken = claimed[mask.frame];
      std::vector<std::uint32_t> kept;
      kept.reserve(mask.size());
      for (std::uint32_t i : mask.indices) {
        if (i >= taken.size()) taken.resize(static_cast<std::size_t>(i) + 1, 0);
        if (taken[i]) continue;
        taken[i] = 1;
        kept.push_back(i);
      }
      mask.indices = std::move(kept);
    }
    m.recomputeVolume();
  }
  std::erase_if(masklets, [](const LidarMasklet& m) { return m.volume == 0; });
  std::stable_sort(masklets.begin(), masklets.end(), volume_order);
  return masklets;
}

std::vector<LidarMasklet> flatten_window(std::vector<LidarMasklet> masklets, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw ArgumentError("flatten_window: theta must be in (0, 1]");
  return claim_points(flatten_suppress(std::move(masklets), theta));
}

namespace {

void check_cameras(std::span<const ImageMaskletSet> sets, std::span<const CameraModel> cams) {
  for (const ImageMaskletSet& set : sets) {
    set.validate();
    if (set.camera < 0 || static_cast<std::size_t>(set.camera) >= cams.size()) {
      throw ArgumentError("masklet set refers to camera " + std::to_string(set.camera) + ", calibration has " +
                          std::to_string(cams.size()));
    }
    const CameraModel& cam = cams[static_cast<std::size_t>(set.camera)];
    if (cam.width != set.width || cam.height != set.height) {
      throw ArgumentError("masklet set for camera " + std::to_string(set.camera) +
                          " does not match the calibrated image size");
    }
  }
}

struct LiftedMask {
  PointSet mask;
  std::size_t lifted = 0;
};

LiftedMask lift_and_refine(const PointFrame& frame, std::span<const PixelProjection> proj, const CameraModel& cam,
                           const RleMask& rle, const SegmentSet& segs, const WindowConfig& cfg) {
  LiftedMask out;
  out.mask = lift_mask(frame.timestamp, proj, cam, rle.decode());
  out.lifted = out.mask.size();
  if (out.mask.empty()) return out;
  const RefinedMask refined = refine_mask(out.mask, segs, cfg.dbscan_iou);
  out.mask = refined.mask;
  if (refined.eps) out.mask = refine_per_instance(frame, out.mask, *refined.eps, cfg.min_pts);
  return out;
}

}  // namespace

std::vector<LidarMasklet> label_window(std::span<const PointFrame> frames, std::span<const ImageMaskletSet> sets,
                                       std::span<const CameraModel> cams, const WindowConfig& cfg) {
  cfg.validate();
  check_cameras(sets, cams);
  for (std::size_t f = 1; f < frames.size(); ++f) {
    if (frames[f].timestamp != frames[f - 1].timestamp + 1) {
      throw ArgumentError("label_window: frames are not consecutive");
    }
  }
  for (const ImageMaskletSet& set : sets) {
    if (frames.empty() || set.window_start != frames.front().timestamp ||
        set.window_size != static_cast<int>(frames.size())) {
      throw ArgumentError("label_window: masklet set for camera " + std::to_string(set.camera) +
                          " does not match the window frames");
    }
  }
  if (sets.empty()) return {};

  std::vector<SegmentSet> segs;
  if (cfg.dbscan_mode == DbscanMode::kAllFrames) {
    segs = dbscan_ensemble_window(frames, cfg.eps_list, cfg.min_pts, cfg.ground);
  } else {
    segs.reserve(frames.size());
    for (const PointFrame& f : frames) segs.push_back(dbscan_ensemble(f, cfg.eps_list, cfg.min_pts, cfg.ground));
  }

  std::vector<std::vector<LidarMasklet>> groups;
  for (const ImageMaskletSet& set : sets) {
    const CameraModel& cam = cams[static_cast<std::size_t>(set.camera)];
    std::vector<std::vector<PixelProjection>> proj;
    proj.reserve(frames.size());
    for (const PointFrame& f : frames) proj.push_back(project_to_image(f, cam));

    std::vector<LidarMasklet> group;
    for (const ImageMasklet& inst : set.instances) {
      LidarMasklet m;
      m.local_id = inst.local_id;
      Eigen::VectorXd feature_sum = Eigen::VectorXd::Zero(set.feature_dim);
      double weight = 0.0;
      for (std::size_t f = 0; f < frames.size(); ++f) {
        LiftedMask lm = lift_and_refine(frames[f], proj[f], cam, inst.masks[f], segs[f], cfg);
        feature_sum += static_cast<double>(lm.lifted) * inst.features[f].cast<double>();
        weight += static_cast<double>(lm.lifted);
        m.masks.push_back(std::move(lm.mask));
      }
      if (weight <= 0.0) continue;  // no Lidar evidence in any frame
      m.feature = (feature_sum / weight).cast<float>();
      m.recomputeVolume();
      if (m.volume == 0) continue;
      group.push_back(std::move(m));
    }
    groups.push_back(std::move(group));
  }

  std::vector<LidarMasklet> out = flatten_window(fuse_cameras(groups, cfg.cam_fuse_iou), cfg.theta_iom);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].local_id = static_cast<std::uint32_t>(i);
  return out;
}

std::vector<FlattenedMask> flatten_coverage_3d(std::span<const PointSet> masks, double threshold) {
  for (const PointSet& m : masks) {
    if (!masks.empty() && m.frame != masks.front().frame) {
      throw ArgumentError("flatten_coverage_3d: masks from different frames");
    }
  }
  std::vector<std::size_t> order(masks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return masks[a].size() > masks[b].size(); });

  std::vector<std::size_t> survivors;
  for (std::size_t i : order) {
    if (masks[i].empty()) continue;
    bool covered = false;
    for (std::size_t s : survivors) {
      if (point_set_iom(masks[s], masks[i]) > threshold) {
        covered = true;
        break;
      }
    }
    if (!covered) survivors.push_back(i);
  }

  std::vector<FlattenedMask> out;
  PointSet taken;
  for (std::size_t s : survivors) {
    PointSet own = set_difference(masks[s], taken);
    if (own.empty()) continue;
    taken = set_union(taken, own);
    out.push_back(FlattenedMask{s, std::move(own)});
  }
  return out;
}

std::vector<LidarMasklet> single_scan_label(const PointFrame& frame, std::span<const ImageMaskletSet> sets,
                                            std::span<const CameraModel> cams, const WindowConfig& cfg) {
  cfg.validate();
  check_cameras(sets, cams);
  for (const ImageMaskletSet& set : sets) {
    if (set.window_size != 1 || set.window_start != frame.timestamp) {
      throw ArgumentError("single_scan_label: masklet set for camera " + std::to_string(set.camera) +
                          " is not a single-frame set for frame " + std::to_string(frame.timestamp));
    }
  }
  if (sets.empty()) return {};

  const SegmentSet segs = dbscan_ensemble(frame, cfg.eps_list, cfg.min_pts, cfg.ground);
  std::vector<std::vector<LidarMasklet>> groups;
  for (const ImageMaskletSet& set : sets) {
    const CameraModel& cam = cams[static_cast<std::size_t>(set.camera)];
    const auto proj = project_to_image(frame, cam);
    std::vector<PointSet> refined;
    std::vector<const ImageMasklet*> source;
    for (const ImageMasklet& inst : set.instances) {
      LiftedMask lm = lift_and_refine(frame, proj, cam, inst.masks[0], segs, cfg);
      if (lm.mask.empty()) continue;
      refined.push_back(std::move(lm.mask));
      source.push_back(&inst);
    }
    std::vector<LidarMasklet> group;
    for (FlattenedMask& fm : flatten_coverage_3d(refined, cfg.theta_iom)) {
      LidarMasklet m;
      m.local_id = source[fm.source]->local_id;
      m.feature = source[fm.source]->features[0];
      m.masks.push_back(std::move(fm.mask));
      m.recomputeVolume();
      group.push_back(std::move(m));
    }
    groups.push_back(std::move(group));
  }

  std::vector<LidarMasklet> fused = fuse_cameras(groups, cfg.cam_fuse_iou);
  std::stable_sort(fused.begin(), fused.end(), volume_order);
  std::vector<LidarMasklet> out = claim_points(std::move(fused));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].local_id = static_cast<std::uint32_t>(i);
  return out;
}

}  // namespace p4d
