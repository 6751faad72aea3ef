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

// Slow reference implementations and random generators shared by the unit
// tests and the acceptance binary. Nothing here calls into the library
// routine it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "p4d/engine.hpp"
#include "p4d/metrics.hpp"
#include "p4d/stitcher.hpp"

namespace p4d::oracle {

// ---------------------------------------------------------------- DBSCAN

/// O(n^2) density reachability over `subset` (same label convention as the
/// library: clusters numbered by their smallest core index, border points
/// join the lowest-numbered neighboring cluster).
inline std::vector<int> dbscan(const PointFrame& frame, const PointSet& subset, double eps, int min_pts) {
  const std::size_t n = subset.size();
  auto close = [&](std::size_t a, std::size_t b) {
    const Vector3d d = frame.xyz(subset.indices[a]) - frame.xyz(subset.indices[b]);
    return d.squaredNorm() <= eps * eps;
  };
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int cnt = 0;
    for (std::size_t j = 0; j < n; ++j) cnt += close(i, j);
    core[i] = cnt >= min_pts;
  }
  // union-find over core-core edges
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && close(i, j)) parent[std::max(find(i), find(j))] = std::min(find(i), find(j));

  std::map<std::size_t, int> number;  // root -> cluster id, by smallest member
  std::vector<int> label(n, kNoise);
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    auto [it, fresh] = number.try_emplace(find(i), static_cast<int>(number.size()));
    label[i] = it->second;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (core[j] && close(i, j) && (label[i] == kNoise || label[j] < label[i])) label[i] = label[j];
    }
  }
  return label;
}

// ------------------------------------------------------------ assignment

/// Minimum of sum(cost - max_cost) over all partial matchings restricted to
/// pairs with cost < max_cost, by exhaustive search.
inline double best_assignment(const MatrixXd& cost, double max_cost) {
  const int rows = static_cast<int>(cost.rows()), cols = static_cast<int>(cost.cols());
  std::vector<char> used(cols, 0);
  double best = 0.0;
  auto rec = [&](auto&& self, int r, double acc) -> void {
    if (r == rows) {
      best = std::min(best, acc);
      return;
    }
    self(self, r + 1, acc);
    for (int c = 0; c < cols; ++c) {
      if (used[c] || !(cost(r, c) < max_cost)) continue;
      used[c] = 1;
      self(self, r + 1, acc + cost(r, c) - max_cost);
      used[c] = 0;
    }
  };
  rec(rec, 0, 0.0);
  return best;
}

// --------------------------------------------------------------- metrics

inline double s_assoc(const LabeledSequence& pred, const GroundTruthSequence& gt) {
  std::set<std::pair<ClassId, InstanceId>> tubes;
  std::set<InstanceId> pred_ids;
  for (std::size_t t = 0; t < gt.length(); ++t) {
    for (std::size_t p = 0; p < gt.classes[t].size(); ++p) {
      if (gt.classes[t][p] == 0) continue;
      if (gt.isThing(gt.classes[t][p]) && gt.instances[t][p] != 0) tubes.insert({gt.classes[t][p], gt.instances[t][p]});
      if (pred.frames[t][p] != 0) pred_ids.insert(pred.frames[t][p]);
    }
  }
  if (tubes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : tubes) {
    double gsize = 0.0, acc = 0.0;
    for (std::size_t t = 0; t < gt.length(); ++t)
      for (std::size_t p = 0; p < gt.classes[t].size(); ++p)
        gsize += gt.classes[t][p] == g.first && gt.instances[t][p] == g.second;
    for (InstanceId s : pred_ids) {
      double tp = 0.0, fp = 0.0, fn = 0.0;
      for (std::size_t t = 0; t < gt.length(); ++t) {
        for (std::size_t p = 0; p < gt.classes[t].size(); ++p) {
          if (gt.classes[t][p] == 0) continue;
          const bool in_g = gt.classes[t][p] == g.first && gt.instances[t][p] == g.second;
          const bool in_s = pred.frames[t][p] == s;
          tp += in_g && in_s;
          fp += !in_g && in_s;
          fn += in_g && !in_s;
        }
      }
      if (tp > 0) acc += tp * tp / (tp + fp + fn);
    }
    total += acc / gsize;
  }
  return total / static_cast<double>(tubes.size());
}

inline double s_cls(const PointClasses& pred, const GroundTruthSequence& gt) {
  double sum = 0.0;
  int n = 0;
  for (int c = 1; c <= gt.numClasses(); ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t t = 0; t < gt.length(); ++t) {
      for (std::size_t p = 0; p < gt.classes[t].size(); ++p) {
        if (gt.classes[t][p] == 0) continue;
        const bool g = gt.classes[t][p] == c, q = pred[t][p] == c;
        tp += g && q;
        fp += !g && q;
        fn += g && !q;
      }
    }
    if (tp + fp + fn == 0) continue;
    sum += tp / (tp + fp + fn);
    ++n;
  }
  return n ? sum / n : 0.0;
}

/// Mean PQ over classes that occur (as TP, FP or FN) anywhere.
inline double panoptic_quality(const LabeledSequence& pred, const PointClasses& pc, const GroundTruthSequence& gt) {
  std::map<int, double> iou_sum, tp, fp, fn;
  for (std::size_t t = 0; t < gt.length(); ++t) {
    const std::size_t n = gt.classes[t].size();
    // segment membership as point lists
    std::map<std::pair<int, std::uint32_t>, std::vector<std::size_t>> gseg, pseg;
    for (std::size_t p = 0; p < n; ++p) {
      const int g = gt.classes[t][p];
      if (g == 0) continue;
      if (!gt.isThing(g)) gseg[{g, 0}].push_back(p);
      else if (gt.instances[t][p] != 0) gseg[{g, gt.instances[t][p]}].push_back(p);
      const int q = pc[t][p];
      if (q == 0) continue;
      if (!gt.isThing(q)) pseg[{q, 0}].push_back(p);
      else if (pred.frames[t][p] != 0) pseg[{q, pred.frames[t][p]}].push_back(p);
    }
    std::set<std::pair<int, std::uint32_t>> gm, pm;
    for (const auto& [gk, gpts] : gseg) {
      for (const auto& [pk, ppts] : pseg) {
        if (gk.first != pk.first) continue;
        std::vector<std::size_t> both;
        std::set_intersection(gpts.begin(), gpts.end(), ppts.begin(), ppts.end(), std::back_inserter(both));
        // the union excludes points of the predicted segment that the GT ignores
        double uni = static_cast<double>(gpts.size() + ppts.size() - both.size());
        const double iou = static_cast<double>(both.size()) / uni;
        if (iou > 0.5) {
          gm.insert(gk);
          pm.insert(pk);
          tp[gk.first] += 1;
          iou_sum[gk.first] += iou;
        }
      }
    }
    for (const auto& [gk, v] : gseg)
      if (!gm.count(gk)) fn[gk.first] += 1;
    for (const auto& [pk, v] : pseg)
      if (!pm.count(pk)) fp[pk.first] += 1;
  }
  std::set<int> classes;
  for (auto* m : {&tp, &fp, &fn})
    for (const auto& kv : *m) classes.insert(kv.first);
  if (classes.empty()) return 0.0;
  double sum = 0.0;
  for (int c : classes) {
    const double d = tp[c] + 0.5 * fp[c] + 0.5 * fn[c];
    sum += d > 0 ? iou_sum[c] / d : 0.0;
  }
  return sum / static_cast<double>(classes.size());
}

// ------------------------------------------------------------ generators

struct MicroCase {
  LabeledSequence pred;
  PointClasses pred_classes;
  GroundTruthSequence gt;
};

/// <= 4 frames, <= 60 points, <= 5 instances, 4 classes (2 and 3 are things).
/// Predictions are noisy copies of the GT so that matches above 0.5 occur.
inline MicroCase random_micro_case(std::mt19937_64& rng) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  MicroCase mc;
  mc.gt.vocabulary = {"a", "b", "c", "d"};
  mc.gt.things = {2, 3};
  const int frames = uni(1, 4);
  const int n_inst = uni(1, 5);
  const int points = uni(4, 60);
  std::vector<ClassId> inst_class(n_inst + 1);
  for (int i = 1; i <= n_inst; ++i) inst_class[i] = static_cast<ClassId>(uni(2, 3));
  const double flip = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
  std::bernoulli_distribution noisy(flip);
  for (int t = 0; t < frames; ++t) {
    std::vector<ClassId> gc;
    std::vector<InstanceId> gi, pi;
    std::vector<ClassId> pcl;
    for (int p = 0; p < points; ++p) {
      const int kind = uni(0, 9);
      ClassId c = 0;
      InstanceId inst = 0;
      if (kind == 0) {
        c = 0;
      } else if (kind <= 3) {
        c = static_cast<ClassId>(uni(0, 1) ? 1 : 4);
      } else {
        inst = static_cast<InstanceId>(uni(1, n_inst));
        c = inst_class[inst];
      }
      gc.push_back(c);
      gi.push_back(inst);
      InstanceId id = inst != 0 ? inst : (c == 0 ? 0 : 10 + c);
      ClassId q = c;
      if (noisy(rng)) id = static_cast<InstanceId>(uni(0, 7));
      if (noisy(rng)) q = static_cast<ClassId>(uni(0, 4));
      pi.push_back(id);
      pcl.push_back(q);
    }
    mc.gt.classes.push_back(std::move(gc));
    mc.gt.instances.push_back(std::move(gi));
    mc.pred.frames.push_back(std::move(pi));
    mc.pred_classes.push_back(std::move(pcl));
  }
  for (const auto& f : mc.pred.frames)
    for (InstanceId id : f)
      if (id != 0) mc.pred.instances[id].feature = Feature::Zero(2);
  mc.pred.refreshInstances();
  return mc;
}

/// Random masklets over one window with heavy overlap between some of them.
inline std::vector<LidarMasklet> random_soup(std::mt19937_64& rng, const FrameRange& window, std::uint32_t points) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int n = uni(1, 12);
  std::vector<LidarMasklet> out;
  for (int i = 0; i < n; ++i) {
    LidarMasklet m;
    m.local_id = static_cast<std::uint32_t>(i);
    m.feature = Feature::Constant(3, static_cast<float>(i));
    const int lo = uni(0, static_cast<int>(points) - 1);
    const int len = uni(1, static_cast<int>(points) / 2);
    const double keep = std::uniform_real_distribution<double>(0.3, 1.0)(rng);
    std::bernoulli_distribution take(keep);
    for (int t = window.start; t < window.end(); ++t) {
      std::vector<std::uint32_t> idx;
      if (uni(0, 5) != 0) {
        for (int p = lo; p < std::min<int>(lo + len, static_cast<int>(points)); ++p)
          if (take(rng)) idx.push_back(static_cast<std::uint32_t>(p));
      }
      m.masks.emplace_back(t, std::move(idx));
    }
    m.recomputeVolume();
    out.push_back(std::move(m));
  }
  return out;
}

/// IoM of two masklets, counting points over all frames.
inline double masklet_iom(const LidarMasklet& a, const LidarMasklet& b) {
  std::size_t inter = 0, na = 0, nb = 0;
  for (const PointSet& m : a.masks) na += m.size();
  for (const PointSet& m : b.masks) nb += m.size();
  for (const PointSet& ma : a.masks)
    for (const PointSet& mb : b.masks)
      if (ma.frame == mb.frame)
        for (std::uint32_t p : ma.indices) inter += std::count(mb.indices.begin(), mb.indices.end(), p);
  const std::size_t lo = std::min(na, nb);
  return lo ? static_cast<double>(inter) / static_cast<double>(lo) : 0.0;
}

}  // namespace p4d::oracle
