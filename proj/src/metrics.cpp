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

#include "p4d/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace p4d {

namespace {

void check_shapes(const LabeledSequence& pred, const GroundTruthSequence& gt) {
  if (pred.length() != gt.length()) {
    throw ArgumentError("prediction has " + std::to_string(pred.length()) + " frames, ground truth " +
                        std::to_string(gt.length()));
  }
  for (std::size_t t = 0; t < gt.length(); ++t) {
    if (pred.frames[t].size() != gt.classes[t].size()) {
      throw ArgumentError("frame " + std::to_string(t) + ": prediction has " + std::to_string(pred.frames[t].size()) +
                          " points, ground truth " + std::to_string(gt.classes[t].size()));
    }
  }
}

void check_classes(const PointClasses& pred, const GroundTruthSequence& gt) {
  if (pred.size() != gt.length()) throw ArgumentError("semantic prediction length differs from ground truth");
  for (std::size_t t = 0; t < gt.length(); ++t) {
    if (pred[t].size() != gt.classes[t].size()) {
      throw ArgumentError("frame " + std::to_string(t) + ": semantic prediction size differs from ground truth");
    }
    for (ClassId c : pred[t]) {
      if (c > gt.numClasses()) {
        throw ArgumentError("frame " + std::to_string(t) + ": predicted class " + std::to_string(c) +
                            " outside the vocabulary");
      }
    }
  }
}

double safe_div(double a, double b) { return b > 0.0 ? a / b : 0.0; }

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

void GroundTruthSequence::validate() const {
  if (instances.size() != classes.size()) throw ValidationError("ground truth: class and instance frame counts differ");
  for (ClassId c : things) {
    if (c == 0 || c > numClasses()) throw ValidationError("ground truth: thing class " + std::to_string(c) + " unknown");
  }
  for (std::size_t t = 0; t < classes.size(); ++t) {
    if (instances[t].size() != classes[t].size()) {
      throw ValidationError("ground truth frame " + std::to_string(t) + ": class and instance sizes differ");
    }
    for (std::size_t p = 0; p < classes[t].size(); ++p) {
      const ClassId c = classes[t][p];
      if (c > numClasses()) {
        throw ValidationError("ground truth frame " + std::to_string(t) + " point " + std::to_string(p) + ": class " +
                              std::to_string(c) + " outside 1.." + std::to_string(numClasses()));
      }
      if (instances[t][p] != 0 && !isThing(c)) {
        throw ValidationError("ground truth frame " + std::to_string(t) + " point " + std::to_string(p) +
                              ": instance id on a non-thing class");
      }
    }
  }
}

double s_assoc(const LabeledSequence& pred, const GroundTruthSequence& gt, bool class_agnostic) {
  check_shapes(pred, gt);
  // Tube keys: (class, instance) for GT, id for prediction.
  typedef std::pair<ClassId, InstanceId> GtKey;
  std::map<GtKey, std::uint64_t> gt_size;
  std::map<InstanceId, std::uint64_t> pred_size;
  std::map<std::pair<GtKey, InstanceId>, std::uint64_t> inter;
  for (std::size_t t = 0; t < gt.length(); ++t) {
    for (std::size_t p = 0; p < gt.classes[t].size(); ++p) {
      const ClassId c = gt.classes[t][p];
      if (c == kUnlabeledClass) continue;
      const InstanceId pid = pred.frames[t][p];
      if (pid != kUnlabeled) ++pred_size[pid];
      const InstanceId gid = gt.instances[t][p];
      if (gid == 0) continue;
      if (!class_agnostic && !gt.isThing(c)) continue;
      const GtKey key{class_agnostic ? ClassId{0} : c, gid};
      ++gt_size[key];
      if (pid != kUnlabeled) ++inter[{key, pid}];
    }
  }
  if (gt_size.empty()) return 0.0;
  std::map<GtKey, double> per_tube;
  for (const auto& [k, n] : inter) {
    const double g = static_cast<double>(gt_size[k.first]);
    const double s = static_cast<double>(pred_size[k.second]);
    const double tp = static_cast<double>(n);
    per_tube[k.first] += tp * (tp / (g + s - tp));
  }
  double sum = 0.0;
  for (const auto& [k, n] : gt_size) sum += per_tube[k] / static_cast<double>(n);
  return sum / static_cast<double>(gt_size.size());
}

SemanticResult s_cls(const PointClasses& pred, const GroundTruthSequence& gt) {
  check_classes(pred, gt);
  const int L = gt.numClasses();
  std::vector<std::uint64_t> tp(L + 1, 0), fp(L + 1, 0), fn(L + 1, 0);
  for (std::size_t t = 0; t < gt.length(); ++t) {
    for (std::size_t p = 0; p < gt.classes[t].size(); ++p) {
      const ClassId g = gt.classes[t][p];
      if (g == kUnlabeledClass) continue;
      const ClassId q = pred[t][p];
      if (q == g) {
        ++tp[g];
      } else {
        ++fn[g];
        if (q != kUnlabeledClass) ++fp[q];
      }
    }
  }
  SemanticResult out;
  std::vector<double> all, st, th;
  for (int c = 1; c <= L; ++c) {
    const std::uint64_t denom = tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp[c]) / static_cast<double>(denom);
    out.iou_per_class[static_cast<ClassId>(c)] = iou;
    all.push_back(iou);
    (gt.isThing(static_cast<ClassId>(c)) ? th : st).push_back(iou);
  }
  out.s_cls = mean_of(all);
  out.iou_st = mean_of(st);
  out.iou_th = mean_of(th);
  return out;
}

PanopticResult panoptic_quality(const LabeledSequence& pred, const PointClasses& pred_classes,
                                const GroundTruthSequence& gt) {
  check_shapes(pred, gt);
  check_classes(pred_classes, gt);
  // Segment key within a frame: (class, id); stuff segments use id 0.
  typedef std::pair<ClassId, InstanceId> SegKey;
  std::map<ClassId, PqStats> stats;
  for (std::size_t t = 0; t < gt.length(); ++t) {
    std::map<SegKey, std::uint64_t> gsz, psz;
    std::map<std::pair<SegKey, SegKey>, std::uint64_t> inter;
    for (std::size_t p = 0; p < gt.classes[t].size(); ++p) {
      const ClassId g = gt.classes[t][p];
      if (g == kUnlabeledClass) continue;
      const SegKey gk{g, gt.isThing(g) ? gt.instances[t][p] : 0};
      const bool g_valid = !gt.isThing(g) || gk.second != 0;
      if (g_valid) ++gsz[gk];
      const ClassId q = pred_classes[t][p];
      if (q == kUnlabeledClass) continue;
      const SegKey pk{q, gt.isThing(q) ? pred.frames[t][p] : 0};
      if (gt.isThing(q) && pk.second == kUnlabeled) continue;
      ++psz[pk];
      if (g_valid && gk.first == pk.first) ++inter[{gk, pk}];
    }
    std::set<SegKey> gmatched, pmatched;
    for (const auto& [k, n] : inter) {
      const double u = static_cast<double>(gsz[k.first] + psz[k.second] - n);
      const double iou = static_cast<double>(n) / u;
      if (iou <= 0.5) continue;
      if (!gmatched.insert(k.first).second || !pmatched.insert(k.second).second) {
        throw InternalError("panoptic_quality: segment matched twice above IoU 0.5");
      }
      PqStats& s = stats[k.first.first];
      ++s.tp;
      s.iou_sum += iou;
    }
    for (const auto& [k, n] : gsz) {
      if (!gmatched.count(k)) ++stats[k.first].fn;
    }
    for (const auto& [k, n] : psz) {
      if (!pmatched.count(k)) ++stats[k.first].fp;
    }
  }
  PanopticResult out;
  std::vector<double> pq, sq, rq, pq_th, pq_st;
  for (auto& [c, s] : stats) {
    const double denom = static_cast<double>(s.tp) + 0.5 * static_cast<double>(s.fp) + 0.5 * static_cast<double>(s.fn);
    s.pq = safe_div(s.iou_sum, denom);
    s.sq = safe_div(s.iou_sum, static_cast<double>(s.tp));
    s.rq = safe_div(static_cast<double>(s.tp), denom);
    pq.push_back(s.pq);
    sq.push_back(s.sq);
    rq.push_back(s.rq);
    (gt.isThing(c) ? pq_th : pq_st).push_back(s.pq);
  }
  out.pq = mean_of(pq);
  out.sq = mean_of(sq);
  out.rq = mean_of(rq);
  out.pq_th = mean_of(pq_th);
  out.pq_st = mean_of(pq_st);
  out.per_class = std::move(stats);
  return out;
}

EvalReport lstq(const LabeledSequence& pred, const PointClasses& pred_classes, const GroundTruthSequence& gt,
                const EvalOptions& opts) {
  check_shapes(pred, gt);
  const PointClasses& classes = opts.class_agnostic ? gt.classes : pred_classes;
  EvalReport r;
  r.s_assoc = s_assoc(pred, gt, opts.class_agnostic);
  r.semantic = s_cls(classes, gt);
  r.panoptic = panoptic_quality(pred, classes, gt);
  r.lstq = std::sqrt(r.s_assoc * r.semantic.s_cls);
  for (const auto& f : gt.classes) r.points += f.size();
  return r;
}

std::string EvalReport::to_record(const std::vector<std::string>& vocabulary) const {
  std::ostringstream os;
  char buf[64];
  auto put = [&](const std::string& key, double v) {
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    os << key << '=' << buf << '\n';
  };
  auto name = [&](ClassId c) {
    return c >= 1 && c <= vocabulary.size() ? vocabulary[c - 1] : "class" + std::to_string(c);
  };
  put("lstq", lstq);
  put("s_assoc", s_assoc);
  put("s_cls", semantic.s_cls);
  put("iou_st", semantic.iou_st);
  put("iou_th", semantic.iou_th);
  put("pq", panoptic.pq);
  put("sq", panoptic.sq);
  put("rq", panoptic.rq);
  put("pq_th", panoptic.pq_th);
  put("pq_st", panoptic.pq_st);
  os << "points=" << points << '\n';
  for (const auto& [c, v] : semantic.iou_per_class) put("iou." + name(c), v);
  for (const auto& [c, s] : panoptic.per_class) {
    put("pq." + name(c), s.pq);
    os << "tp." << name(c) << '=' << s.tp << '\n';
    os << "fp." << name(c) << '=' << s.fp << '\n';
    os << "fn." << name(c) << '=' << s.fn << '\n';
  }
  return os.str();
}

LabeledSequence merge_stuff(const LabeledSequence& pred, const std::map<InstanceId, ClassId>& instance_classes,
                            const std::set<ClassId>& stuff) {
  std::map<InstanceId, InstanceId> remap;
  std::map<ClassId, InstanceId> target;
  for (const auto& [id, info] : pred.instances) {
    auto it = instance_classes.find(id);
    if (it == instance_classes.end()) throw ArgumentError("merge_stuff: instance " + std::to_string(id) + " has no class");
    if (!stuff.count(it->second)) continue;
    auto [t, inserted] = target.try_emplace(it->second, id);
    remap[id] = t->second;
  }
  LabeledSequence out = pred;
  for (auto& frame : out.frames) {
    for (InstanceId& id : frame) {
      if (id == kUnlabeled) continue;
      if (!pred.instances.count(id)) throw ArgumentError("merge_stuff: id " + std::to_string(id) + " missing from the table");
      auto it = remap.find(id);
      if (it != remap.end()) id = it->second;
    }
  }
  // Point-count weighted features for the merged entries.
  std::map<InstanceId, std::vector<std::pair<Feature, double>>> obs;
  for (const auto& [from, to] : remap) {
    const InstanceInfo& info = pred.instances.at(from);
    if (info.feature.size() > 0) obs[to].emplace_back(info.feature, static_cast<double>(info.point_count));
  }
  for (const auto& [from, to] : remap) {
    if (from != to) out.instances.erase(from);
  }
  for (auto& [id, o] : obs) {
    double w = 0.0;
    for (const auto& x : o) w += x.second;
    if (w > 0.0) out.instances[id].feature = aggregate_feature(o);
  }
  for (auto& [id, info] : out.instances) {
    auto it = instance_classes.find(id);
    if (it != instance_classes.end()) info.class_id = it->second;
  }
  out.refreshInstances();
  return out;
}

EvalInputs restrict_frustum(const LabeledSequence& pred, const PointClasses& pred_classes,
                            const GroundTruthSequence& gt, std::span<const PointFrame> frames,
                            std::span<const CameraModel> cams) {
  check_shapes(pred, gt);
  check_classes(pred_classes, gt);
  if (frames.size() != gt.length()) throw ArgumentError("restrict_frustum: frame count differs from ground truth");
  EvalInputs out;
  out.gt.vocabulary = gt.vocabulary;
  out.gt.things = gt.things;
  out.pred.instances = pred.instances;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (static_cast<std::size_t>(frames[t].size()) != gt.classes[t].size()) {
      throw ArgumentError("restrict_frustum: frame " + std::to_string(t) + " point count differs from labels");
    }
    const std::vector<bool> keep = frustum_mask(frames[t], cams);
    auto& pf = out.pred.frames.emplace_back();
    auto& pc = out.pred_classes.emplace_back();
    auto& gc = out.gt.classes.emplace_back();
    auto& gi = out.gt.instances.emplace_back();
    for (std::size_t p = 0; p < keep.size(); ++p) {
      if (!keep[p]) continue;
      pf.push_back(pred.frames[t][p]);
      pc.push_back(pred_classes[t][p]);
      gc.push_back(gt.classes[t][p]);
      gi.push_back(gt.instances[t][p]);
    }
  }
  out.pred.refreshInstances();
  return out;
}

}  // namespace p4d
