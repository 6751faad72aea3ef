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

#include "p4d/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "p4d/spatial_index.hpp"

namespace p4d {

namespace {

typedef Eigen::Matrix<double, 6, 9> ObsMatrix;
typedef Eigen::Matrix<double, 6, 1> Observation;

KalmanCovariance process_noise(const KalmanConfig& cfg) {
  KalmanCovariance q = KalmanCovariance::Zero();
  q.diagonal() << cfg.q_pos, cfg.q_pos, cfg.q_pos, cfg.q_size, cfg.q_size, cfg.q_size, cfg.q_vel, cfg.q_vel, cfg.q_vel;
  return q;
}

Observation observe(const Aabb3& box) {
  Observation z;
  z << box.center(), box.sizes();
  return z;
}

// Collects per-frame labels and point-weighted embeddings into a sequence.
class LabelWriter {
 public:
  explicit LabelWriter(std::span<const std::size_t> sizes) {
    for (std::size_t n : sizes) seq_.frames.emplace_back(n, kUnlabeled);
  }

  void write(const PointSet& mask, InstanceId id, const Feature* embedding) {
    auto& frame = seq_.frames.at(static_cast<std::size_t>(mask.frame));
    for (std::uint32_t p : mask.indices) {
      if (p >= frame.size()) throw ArgumentError("detection mask index beyond frame size");
      frame[p] = id;
    }
    auto& obs = features_[id];
    if (embedding && !mask.empty()) obs.emplace_back(*embedding, static_cast<double>(mask.size()));
  }

  LabeledSequence finish() {
    for (const auto& [id, obs] : features_) seq_.instances[id].feature = obs.empty() ? Feature() : aggregate_feature(obs);
    for (const auto& frame : seq_.frames) {
      for (InstanceId id : frame) {
        if (id != kUnlabeled) seq_.instances.try_emplace(id);
      }
    }
    seq_.refreshInstances();
    return seq_;
  }

 private:
  LabeledSequence seq_;
  std::map<InstanceId, std::vector<std::pair<Feature, double>>> features_;
};

const Feature* embedding_of(const FrameDetections& d, std::size_t i) {
  return d.embeddings.empty() ? nullptr : &d.embeddings[i];
}

void check_detections(std::span<const FrameDetections> detections, std::size_t frames) {
  if (detections.size() != frames) {
    throw ArgumentError("expected detections for " + std::to_string(frames) + " frames, got " +
                        std::to_string(detections.size()));
  }
  for (std::size_t t = 0; t < detections.size(); ++t) {
    if (detections[t].frame != static_cast<int>(t)) {
      throw ArgumentError("detections out of order at frame " + std::to_string(t));
    }
    detections[t].validate();
  }
}

double affinity(const Aabb3& a, const Aabb3& b, const std::string& metric) {
  const double hull = box_volume(a.merged(b));
  if (!(hull > 0.0)) return a.isApprox(b) ? 1.0 : -1.0;
  const double g = giou_3d(a, b);
  if (metric == "giou_3d") return g;
  const double inter = box_volume(a.intersection(b));
  const double uni = box_volume(a) + box_volume(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace

Aabb3 KalmanTrack::box() const {
  const Vector3d half = 0.5 * size().cwiseMax(0.0);
  return Aabb3(center() - half, center() + half);
}

bool is_symmetric_psd(const KalmanCovariance& p, double tol) {
  if (!p.allFinite()) return false;
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + p.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<KalmanCovariance> es(p, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

KalmanTrack kalman_init(const Aabb3& box, InstanceId id, const KalmanConfig& cfg) {
  KalmanTrack t;
  t.state.head<6>() = observe(box);
  t.covariance = cfg.p0 * KalmanCovariance::Identity();
  t.hits = 1;
  t.id = id;
  return t;
}

KalmanTrack kalman_predict(const KalmanTrack& track, const KalmanConfig& cfg) {
  KalmanCovariance f = KalmanCovariance::Identity();
  f.block<3, 3>(0, 6) = Matrix3d::Identity();
  KalmanTrack out = track;
  out.state = f * track.state;
  out.covariance = f * track.covariance * f.transpose() + process_noise(cfg);
  ++out.age_since_update;
  return out;
}

KalmanTrack kalman_update(const KalmanTrack& track, const Aabb3& box, const KalmanConfig& cfg) {
  ObsMatrix h = ObsMatrix::Zero();
  h.leftCols<6>().setIdentity();
  const Eigen::Matrix<double, 6, 6> r = cfg.r * Eigen::Matrix<double, 6, 6>::Identity();
  const KalmanCovariance& p = track.covariance;
  const Eigen::Matrix<double, 6, 6> s = h * p * h.transpose() + r;
  const Eigen::Matrix<double, 9, 6> k = p * h.transpose() * s.inverse();
  const KalmanCovariance ikh = KalmanCovariance::Identity() - k * h;

  KalmanTrack out = track;
  out.state = track.state + k * (observe(box) - h * track.state);
  out.covariance = ikh * p * ikh.transpose() + k * r * k.transpose();
  if (!is_symmetric_psd(out.covariance)) {
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    if (!is_symmetric_psd(out.covariance)) throw InternalError("kalman_update: covariance lost positive semidefiniteness");
  }
  ++out.hits;
  out.age_since_update = 0;
  return out;
}

FrameDetections FrameDetections::FromMasks(const PointFrame& frame, int index, std::vector<PointSet> masks,
                                           std::vector<Feature> embeddings) {
  FrameDetections d;
  d.frame = index;
  const PointFrame world = transform_points(frame, frame.pose);
  for (const PointSet& m : masks) d.boxes.push_back(fit_aabb(world, m));
  d.masks = std::move(masks);
  d.embeddings = std::move(embeddings);
  d.validate();
  return d;
}

void FrameDetections::validate() const {
  if (boxes.size() != masks.size()) throw ArgumentError("detections: one box per mask required");
  if (!embeddings.empty() && embeddings.size() != masks.size()) {
    throw ArgumentError("detections: one embedding per mask required");
  }
  for (const PointSet& m : masks) {
    if (m.frame != frame) throw ArgumentError("detections: mask belongs to another frame");
  }
}

std::vector<FrameDetections> detections_from_labels(std::span<const PointFrame> frames, const LabeledSequence& seq) {
  if (frames.size() != seq.length()) throw ArgumentError("detections_from_labels: frame count mismatch");
  std::vector<FrameDetections> out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::map<InstanceId, std::vector<std::uint32_t>> groups;
    for (std::size_t p = 0; p < seq.frames[t].size(); ++p) {
      if (seq.frames[t][p] != kUnlabeled) groups[seq.frames[t][p]].push_back(static_cast<std::uint32_t>(p));
    }
    std::vector<PointSet> masks;
    std::vector<Feature> emb;
    bool has_features = true;
    for (auto& [id, idx] : groups) {
      masks.emplace_back(static_cast<int>(t), std::move(idx));
      auto it = seq.instances.find(id);
      if (it == seq.instances.end() || it->second.feature.size() == 0) {
        has_features = false;
      } else {
        emb.push_back(it->second.feature);
      }
    }
    if (!has_features) emb.clear();
    out.push_back(FrameDetections::FromMasks(frames[t], static_cast<int>(t), std::move(masks), std::move(emb)));
  }
  return out;
}

LabeledSequence sw_track(std::span<const PointFrame> frames, std::span<const FrameDetections> detections,
                         double vote_threshold) {
  check_detections(detections, frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (!frames[t].pose.isValid(1e-6)) throw ArgumentError("sw_track: frame " + std::to_string(t) + " has no valid pose");
  }
  std::vector<std::size_t> sizes;
  for (const PointFrame& f : frames) sizes.push_back(static_cast<std::size_t>(f.size()));
  LabelWriter writer(sizes);
  InstanceId next_id = 1;
  std::vector<InstanceId> prev_labels;
  PointFrame prev_world;

  for (std::size_t t = 0; t < frames.size(); ++t) {
    const FrameDetections& det = detections[t];
    const PointFrame world = transform_points(frames[t], frames[t].pose);
    std::vector<InstanceId> ids(det.masks.size(), kUnlabeled);

    if (t > 0 && prev_world.size() > 0) {
      const VoxelGrid grid(prev_world.points);
      // (votes, detection index, inherited id)
      std::vector<std::tuple<std::size_t, std::size_t, InstanceId>> claims;
      for (std::size_t i = 0; i < det.masks.size(); ++i) {
        const PointSet& m = det.masks[i];
        if (m.empty()) continue;
        std::map<InstanceId, std::size_t> votes;
        for (std::uint32_t p : m.indices) ++votes[prev_labels[grid.nearest(world.xyz(p)).index]];
        InstanceId best = kUnlabeled;
        std::size_t best_votes = 0;
        for (const auto& [id, n] : votes) {
          if (id != kUnlabeled && n > best_votes) {
            best = id;
            best_votes = n;
          }
        }
        if (best != kUnlabeled && static_cast<double>(best_votes) > vote_threshold * static_cast<double>(m.size())) {
          claims.emplace_back(best_votes, i, best);
        }
      }
      std::sort(claims.begin(), claims.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::get<1>(a) < std::get<1>(b);
      });
      std::set<InstanceId> taken;
      for (const auto& [n, i, id] : claims) {
        if (taken.insert(id).second) ids[i] = id;
      }
    }
    for (InstanceId& id : ids) {
      if (id == kUnlabeled) id = next_id++;
    }

    prev_labels.assign(sizes[t], kUnlabeled);
    for (std::size_t i = 0; i < det.masks.size(); ++i) {
      writer.write(det.masks[i], ids[i], embedding_of(det, i));
      for (std::uint32_t p : det.masks[i].indices) prev_labels[p] = ids[i];
    }
    prev_world = world;
  }
  return writer.finish();
}

void MotParams::validate() const {
  if (algm != "greedy" && algm != "hungarian") throw ConfigError("mot.algm: unknown algorithm '" + algm + "'");
  if (metric != "giou_3d" && metric != "iou_3d") throw ConfigError("mot.metric: unknown metric '" + metric + "'");
  if (min_hits < 0) throw ConfigError("mot.min_hits: must be >= 0");
  if (max_age < 0) throw ConfigError("mot.max_age: must be >= 0");
}

LabeledSequence mot_track(std::span<const std::size_t> frame_sizes, std::span<const FrameDetections> detections,
                          const MotParams& params) {
  params.validate();
  check_detections(detections, frame_sizes.size());
  LabelWriter writer(frame_sizes);
  std::vector<KalmanTrack> tracks;
  InstanceId next_id = 1;

  for (const FrameDetections& det : detections) {
    for (KalmanTrack& tr : tracks) tr = kalman_predict(tr, params.kalman);

    const int nt = static_cast<int>(tracks.size());
    const int nd = static_cast<int>(det.boxes.size());
    MatrixXd aff(nt, nd);
    for (int i = 0; i < nt; ++i) {
      const Aabb3 pred = tracks[static_cast<std::size_t>(i)].box();
      for (int j = 0; j < nd; ++j) aff(i, j) = affinity(pred, det.boxes[static_cast<std::size_t>(j)], params.metric);
    }
    // Both matchers minimize cost; accepting cost < -thres means affinity > thres.
    const Matching m = params.algm == "greedy" ? greedy_assignment(-aff, -params.thres)
                                               : linear_assignment(-aff, -params.thres);

    std::vector<int> track_of(static_cast<std::size_t>(nd), -1);
    for (const auto& [i, j] : m.pairs) {
      KalmanTrack& tr = tracks[static_cast<std::size_t>(i)];
      tr = kalman_update(tr, det.boxes[static_cast<std::size_t>(j)], params.kalman);
      track_of[static_cast<std::size_t>(j)] = i;
    }
    for (int j = 0; j < nd; ++j) {
      if (track_of[static_cast<std::size_t>(j)] >= 0) continue;
      if (det.masks[static_cast<std::size_t>(j)].empty()) continue;
      tracks.push_back(kalman_init(det.boxes[static_cast<std::size_t>(j)], next_id++, params.kalman));
      track_of[static_cast<std::size_t>(j)] = static_cast<int>(tracks.size()) - 1;
    }
    for (int j = 0; j < nd; ++j) {
      const int i = track_of[static_cast<std::size_t>(j)];
      if (i < 0) continue;
      const KalmanTrack& tr = tracks[static_cast<std::size_t>(i)];
      if (tr.hits >= params.min_hits) {
        writer.write(det.masks[static_cast<std::size_t>(j)], tr.id, embedding_of(det, static_cast<std::size_t>(j)));
      }
    }
    std::erase_if(tracks, [&](const KalmanTrack& tr) { return tr.age_since_update > params.max_age; });
  }
  return writer.finish();
}

LabeledSequence vis_track(std::span<const std::size_t> frame_sizes, std::span<const FrameDetections> detections,
                          double max_cost, VisDiagnostics* diag) {
  check_detections(detections, frame_sizes.size());
  Eigen::Index dim = -1;
  for (const FrameDetections& d : detections) {
    if (d.embeddings.empty() && !d.masks.empty()) {
      throw ArgumentError("vis_track: frame " + std::to_string(d.frame) + " has no embeddings");
    }
    for (const Feature& e : d.embeddings) {
      if (dim < 0) dim = e.size();
      if (e.size() != dim) throw ArgumentError("vis_track: mixed embedding dimensions");
    }
  }
  if (diag) *diag = VisDiagnostics{};

  auto cosine_distance = [](const Feature& a, const Feature& b) {
    const double na = a.cast<double>().norm(), nb = b.cast<double>().norm();
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - a.cast<double>().dot(b.cast<double>()) / (na * nb);
  };
  auto single = [](const FrameDetections& d, std::size_t i) {
    LidarMasklet m;
    m.masks.push_back(d.masks[i]);
    m.feature = d.embeddings[i];
    return m;
  };

  const int T = static_cast<int>(frame_sizes.size());
  std::vector<std::pair<FrameRange, std::vector<LidarMasklet>>> windows;
  for (const FrameRange& w : sliding_windows(T, 2, 1)) {
    const FrameDetections& a = detections[static_cast<std::size_t>(w.start)];
    std::vector<LidarMasklet> masklets;
    if (w.count == 1) {
      for (std::size_t i = 0; i < a.masks.size(); ++i) masklets.push_back(single(a, i));
    } else {
      const FrameDetections& b = detections[static_cast<std::size_t>(w.start + 1)];
      MatrixXd cost(static_cast<Eigen::Index>(a.masks.size()), static_cast<Eigen::Index>(b.masks.size()));
      for (Eigen::Index i = 0; i < cost.rows(); ++i)
        for (Eigen::Index j = 0; j < cost.cols(); ++j)
          cost(i, j) = cosine_distance(a.embeddings[static_cast<std::size_t>(i)], b.embeddings[static_cast<std::size_t>(j)]);
      if (diag) {
        for (Eigen::Index i = 0; i < cost.rows(); ++i) {
          if (cost.cols() < 2) break;
          const double best = cost.row(i).minCoeff();
          if ((cost.row(i).array() <= best + 1e-12).count() > 1) ++diag->ties;
        }
      }
      const Matching m = linear_assignment(cost, max_cost);
      for (const auto& [i, j] : m.pairs) {
        LidarMasklet ml = single(a, static_cast<std::size_t>(i));
        ml.masks.push_back(b.masks[static_cast<std::size_t>(j)]);
        ml.feature = aggregate_feature(std::vector<std::pair<Feature, double>>{
            {a.embeddings[static_cast<std::size_t>(i)], 1.0}, {b.embeddings[static_cast<std::size_t>(j)], 1.0}});
        masklets.push_back(std::move(ml));
      }
      for (int i : m.unmatched_rows) masklets.push_back(single(a, static_cast<std::size_t>(i)));
      for (int j : m.unmatched_cols) masklets.push_back(single(b, static_cast<std::size_t>(j)));
    }
    for (std::size_t k = 0; k < masklets.size(); ++k) {
      masklets[k].local_id = static_cast<std::uint32_t>(k);
      masklets[k].recomputeVolume();
    }
    windows.emplace_back(w, std::move(masklets));
  }
  return stitch_sequence(frame_sizes, std::move(windows), StitchConfig{1.0, 1});
}

}  // namespace p4d
