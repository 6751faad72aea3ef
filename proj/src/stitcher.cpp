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

#include "p4d/stitcher.hpp"

#include <algorithm>
#include <set>

namespace p4d {

void LabeledSequence::refreshInstances() {
  for (auto& [id, info] : instances) {
    info.point_count = 0;
    info.first_frame = -1;
    info.last_frame = -1;
  }
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (InstanceId id : frames[t]) {
      if (id == kUnlabeled) continue;
      auto it = instances.find(id);
      if (it == instances.end()) continue;
      InstanceInfo& info = it->second;
      if (info.point_count == 0) info.first_frame = static_cast<int>(t);
      info.last_frame = static_cast<int>(t);
      ++info.point_count;
    }
  }
  std::erase_if(instances, [](const auto& kv) { return kv.second.point_count == 0; });
}

void LabeledSequence::validate() const {
  std::map<InstanceId, InstanceInfo> seen;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t p = 0; p < frames[t].size(); ++p) {
      const InstanceId id = frames[t][p];
      if (id == kUnlabeled) continue;
      if (!instances.count(id)) {
        throw ValidationError("frame " + std::to_string(t) + " point " + std::to_string(p) + " refers to id " +
                              std::to_string(id) + " missing from the instance table");
      }
      auto [it, inserted] = seen.try_emplace(id);
      if (inserted) it->second.first_frame = static_cast<int>(t);
      it->second.last_frame = static_cast<int>(t);
      ++it->second.point_count;
    }
  }
  Eigen::Index dim = -1;
  for (const auto& [id, info] : instances) {
    if (id == kUnlabeled) throw ValidationError("instance table contains the reserved id 0");
    auto it = seen.find(id);
    if (it == seen.end()) throw ValidationError("instance " + std::to_string(id) + " owns no points");
    if (it->second.first_frame != info.first_frame || it->second.last_frame != info.last_frame) {
      throw ValidationError("instance " + std::to_string(id) + " span [" + std::to_string(info.first_frame) + ", " +
                            std::to_string(info.last_frame) + "] disagrees with its occurrences [" +
                            std::to_string(it->second.first_frame) + ", " + std::to_string(it->second.last_frame) + "]");
    }
    if (it->second.point_count != info.point_count) {
      throw ValidationError("instance " + std::to_string(id) + " point count disagrees with the labels");
    }
    if (dim < 0) dim = info.feature.size();
    if (info.feature.size() != dim) throw ValidationError("instance features have mixed dimensions");
    if (!info.feature.allFinite()) throw ValidationError("instance " + std::to_string(id) + " has a non-finite feature");
  }
}

LabeledSequence make_empty_sequence(std::span<const std::size_t> frame_sizes) {
  LabeledSequence seq;
  for (std::size_t n : frame_sizes) seq.frames.emplace_back(n, kUnlabeled);
  return seq;
}

Matching associate_windows(std::span<const LidarMasklet> prev, std::span<const LidarMasklet> cur,
                           const FrameRange& overlap, double max_cost) {
  if (overlap.empty()) throw ArgumentError("associate_windows: windows do not overlap");
  MatrixXd cost(static_cast<Eigen::Index>(prev.size()), static_cast<Eigen::Index>(cur.size()));
  for (std::size_t i = 0; i < prev.size(); ++i) {
    for (std::size_t j = 0; j < cur.size(); ++j) {
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          1.0 - masklet_iou_4d(prev[i].masks, cur[j].masks, overlap);
    }
  }
  return linear_assignment(cost, max_cost);
}

Feature aggregate_feature(std::span<const std::pair<Feature, double>> observations) {
  if (observations.empty()) throw ArgumentError("aggregate_feature: no observations");
  const Eigen::Index d = observations.front().first.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  double total = 0.0;
  for (const auto& [f, w] : observations) {
    if (f.size() != d) throw ArgumentError("aggregate_feature: mixed feature dimensions");
    if (w < 0.0) throw ArgumentError("aggregate_feature: negative weight");
    sum += w * f.cast<double>();
    total += w;
  }
  if (!(total > 0.0)) throw ArgumentError("aggregate_feature: all weights are zero");
  return (sum / total).cast<float>();
}

SequenceStitcher::SequenceStitcher(std::vector<std::size_t> frame_sizes, StitchConfig cfg)
    : sizes_(std::move(frame_sizes)), cfg_(cfg) {}

void SequenceStitcher::finalizeFrame(int t) {
  std::vector<InstanceId> ids;
  auto it = live_.find(t);
  if (it != live_.end()) {
    ids = std::move(it->second);
    live_.erase(it);
  } else {
    ids.assign(sizes_[static_cast<std::size_t>(t)], kUnlabeled);
  }
  std::set<InstanceId> present;
  for (InstanceId id : ids) {
    if (id == kUnlabeled) continue;
    auto [entry, inserted] = table_.try_emplace(id);
    if (inserted) entry->second.first_frame = t;
    entry->second.last_frame = t;
    ++entry->second.point_count;
    present.insert(id);
  }
  for (InstanceId id : present) ++frame_counts_[id];
  finished_.emplace(t, std::move(ids));
}

void SequenceStitcher::addWindow(const FrameRange& range, std::vector<LidarMasklet> masklets) {
  if (range.empty() || range.start < 0 || static_cast<std::size_t>(range.end()) > sizes_.size()) {
    throw ArgumentError("stitch: window [" + std::to_string(range.start) + ", " + std::to_string(range.end()) +
                        ") lies outside the sequence");
  }
  std::vector<InstanceId> ids(masklets.size(), kUnlabeled);
  if (has_prev_) {
    if (range.start < prev_range_.start) throw ArgumentError("stitch: windows are not sorted by start");
    const FrameRange overlap = prev_range_.intersect(range);
    if (overlap.empty()) {
      throw ArgumentError("stitch: window starting at " + std::to_string(range.start) +
                          " does not overlap its predecessor");
    }
    const Matching m = associate_windows(prev_masklets_, masklets, overlap, cfg_.max_cost);
    for (const auto& [r, c] : m.pairs) ids[static_cast<std::size_t>(c)] = prev_ids_[static_cast<std::size_t>(r)];
  }
  for (InstanceId& id : ids) {
    if (id == kUnlabeled) id = next_id_++;
  }

  for (; finalized_upto_ < range.start; ++finalized_upto_) finalizeFrame(finalized_upto_);

  for (std::size_t i = 0; i < masklets.size(); ++i) {
    const LidarMasklet& m = masklets[i];
    for (const PointSet& mask : m.masks) {
      if (!range.contains(mask.frame)) throw ArgumentError("stitch: masklet mask outside its window");
      auto [it, inserted] = live_.try_emplace(mask.frame);
      if (inserted) it->second.assign(sizes_[static_cast<std::size_t>(mask.frame)], kUnlabeled);
      for (std::uint32_t p : mask.indices) {
        if (p >= it->second.size()) throw ArgumentError("stitch: point index beyond frame size");
        it->second[p] = ids[i];
      }
    }
    auto [acc, inserted] = feature_acc_.try_emplace(ids[i]);
    if (inserted) acc->second.first = Eigen::VectorXd::Zero(m.feature.size());
    if (acc->second.first.size() == m.feature.size()) {
      const double w = static_cast<double>(m.volume);
      acc->second.first += w * m.feature.cast<double>();
      acc->second.second += w;
    }
  }

  has_prev_ = true;
  prev_range_ = range;
  prev_masklets_ = std::move(masklets);
  prev_ids_ = std::move(ids);
}

std::vector<std::pair<int, std::vector<InstanceId>>> SequenceStitcher::takeFinalized() {
  std::vector<std::pair<int, std::vector<InstanceId>>> out;
  for (auto& [t, ids] : finished_) out.emplace_back(t, std::move(ids));
  finished_.clear();
  return out;
}

LabeledSequence SequenceStitcher::finish() {
  for (; static_cast<std::size_t>(finalized_upto_) < sizes_.size(); ++finalized_upto_) finalizeFrame(finalized_upto_);
  LabeledSequence seq;
  seq.frames.resize(sizes_.size());
  for (auto& [t, ids] : finished_) seq.frames[static_cast<std::size_t>(t)] = std::move(ids);
  finished_.clear();
  for (auto& [id, info] : table_) {
    auto acc = feature_acc_.find(id);
    if (acc != feature_acc_.end()) {
      info.feature = acc->second.second > 0.0 ? Feature((acc->second.first / acc->second.second).cast<float>())
                                              : Feature(acc->second.first.cast<float>());
    }
  }
  seq.instances = table_;
  return seq;
}

LabeledSequence stitch_sequence(std::span<const std::size_t> frame_sizes,
                                std::vector<std::pair<FrameRange, std::vector<LidarMasklet>>> windows,
                                const StitchConfig& cfg) {
  SequenceStitcher st(std::vector<std::size_t>(frame_sizes.begin(), frame_sizes.end()), cfg);
  for (auto& [range, masklets] : windows) st.addWindow(range, std::move(masklets));
  return prune_short(st.finish(), cfg.tau);
}

LabeledSequence prune_short(const LabeledSequence& seq, int tau) {
  if (tau < 0) throw ArgumentError("prune_short: tau must be >= 0");
  if (tau <= 1) return seq;  // every table entry owns at least one frame
  std::map<InstanceId, int> counts;
  for (const auto& frame : seq.frames) {
    std::set<InstanceId> present(frame.begin(), frame.end());
    for (InstanceId id : present) {
      if (id != kUnlabeled) ++counts[id];
    }
  }
  std::set<InstanceId> drop;
  for (const auto& [id, n] : counts) {
    if (n < tau) drop.insert(id);
  }
  LabeledSequence out = seq;
  for (auto& frame : out.frames) {
    for (InstanceId& id : frame) {
      if (drop.count(id)) id = kUnlabeled;
    }
  }
  for (InstanceId id : drop) out.instances.erase(id);
  return out;
}

std::vector<FrameRange> sliding_windows(int length, int k, int s) {
  if (k < 1 || s < 1) throw ArgumentError("sliding_windows: window size and stride must be >= 1");
  std::vector<FrameRange> out;
  for (int start = 0; start < length; start += s) out.push_back(FrameRange{start, std::min(k, length - start)});
  return out;
}

std::vector<LidarMasklet> masklets_from_labels(const LabeledSequence& window_labels, const FrameRange& range) {
  if (static_cast<int>(window_labels.length()) != range.count) {
    throw ArgumentError("masklets_from_labels: label length does not match the window");
  }
  std::map<InstanceId, std::size_t> slot;
  std::vector<LidarMasklet> out;
  for (const auto& [id, info] : window_labels.instances) {
    slot[id] = out.size();
    LidarMasklet m;
    m.local_id = static_cast<std::uint32_t>(out.size());
    m.feature = info.feature;
    for (int t = range.start; t < range.end(); ++t) m.masks.emplace_back(t, std::vector<std::uint32_t>{});
    out.push_back(std::move(m));
  }
  for (std::size_t t = 0; t < window_labels.frames.size(); ++t) {
    const auto& frame = window_labels.frames[t];
    for (std::size_t p = 0; p < frame.size(); ++p) {
      if (frame[p] == kUnlabeled) continue;
      auto it = slot.find(frame[p]);
      if (it == slot.end()) throw ArgumentError("masklets_from_labels: id missing from the instance table");
      out[it->second].masks[t].indices.push_back(static_cast<std::uint32_t>(p));
    }
  }
  for (LidarMasklet& m : out) m.recomputeVolume();
  return out;
}

}  // namespace p4d
