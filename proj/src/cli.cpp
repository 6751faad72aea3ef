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

#include "p4d/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "p4d/io.hpp"
#include "p4d/synth.hpp"

namespace p4d::cli {

namespace {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {
    if (const char* env = std::getenv("P4D_LOG_LEVEL")) {
      const std::string v(env);
      if (v == "error") level_ = Level::kError;
      if (v == "info") level_ = Level::kInfo;
      if (v == "debug") level_ = Level::kDebug;
    }
  }
  void log(Level l, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (l <= level_) err_ << "[" << names[static_cast<int>(l)] << "] " << msg << '\n';
  }
  void warn(const std::string& m) { log(Level::kWarn, m); }
  void info(const std::string& m) { log(Level::kInfo, m); }

 private:
  std::ostream& err_;
  Level level_ = Level::kWarn;
};

struct Options {
  std::string input;
  std::string output;
  std::string config;
  std::string gt;
  std::string prompts;
  std::string detections;
  std::string scene = "acceptance";
  std::string method;
  std::uint64_t seed = 7;
  int jobs = 1;
  int window_size = 0;
  int stride = 0;
  int frames = 0;
  bool frustum = false;
  bool class_agnostic = false;
};

class Record {
 public:
  explicit Record(std::ostream& out) : out_(out) {}
  template <typename T>
  Record& put(const std::string& key, const T& v) {
    out_ << key << '=' << v << '\n';
    return *this;
  }

 private:
  std::ostream& out_;
};

RunConfig load_config(const Options& o, Logger& log) {
  RunConfig cfg = o.config.empty() ? parse_config("") : read_config(o.config);
  for (const std::string& w : cfg.warnings) log.warn("config: " + w);
  if (o.window_size > 0) {
    cfg.window.k = o.window_size;
    cfg.window.s = o.stride > 0 ? o.stride : std::max(1, o.window_size / 2);
  } else if (o.stride > 0) {
    cfg.window.s = o.stride;
  }
  if (cfg.window.s < 1 || cfg.window.s > cfg.window.k) throw ConfigError("--stride must lie in [1, window size]");
  cfg.window.validate();
  return cfg;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the failure
// of the lowest index so errors do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::size_t> sizes_of(std::span<const PointFrame> frames) {
  std::vector<std::size_t> out;
  for (const PointFrame& f : frames) out.push_back(static_cast<std::size_t>(f.size()));
  return out;
}

void check_set(const ImageMaskletSet& set, const FrameRange& w, int camera, const fs::path& path) {
  if (set.camera != camera || set.window() != w) {
    throw ArgumentError(path.string() + ": archive covers camera " + std::to_string(set.camera) + " frames [" +
                        std::to_string(set.window_start) + ", " + std::to_string(set.window().end()) +
                        "), expected camera " + std::to_string(camera) + " frames [" + std::to_string(w.start) + ", " +
                        std::to_string(w.end()) + ")");
  }
}

std::vector<ImageMaskletSet> load_sets(const DatasetLayout& layout, std::size_t cameras, const FrameRange& w,
                                       bool single) {
  std::vector<ImageMaskletSet> sets;
  for (std::size_t c = 0; c < cameras; ++c) {
    const int cam = static_cast<int>(c);
    const fs::path path = single ? layout.single(cam, w.start) : layout.masklets(cam, w.start);
    sets.push_back(read_masklet_archive(path));
    check_set(sets.back(), w, cam, path);
  }
  return sets;
}

int cmd_synth(const Options& o, std::ostream& out, Logger& log) {
  RunConfig cfg = load_config(o, log);
  SceneSpec spec;
  if (o.scene == "acceptance") {
    spec = acceptance_scene_spec(o.seed);
  } else if (o.scene == "static") {
    spec = static_scene_spec(o.seed);
  } else if (o.scene == "crossing") {
    spec = crossing_scene_spec(o.seed);
  } else {
    throw ArgumentError("unknown scene '" + o.scene + "' (acceptance, static, crossing)");
  }
  if (o.frames > 0) spec.n_frames = o.frames;
  const SyntheticScene scene = generate_scene(spec);
  const DatasetLayout layout{o.output};
  write_scans(layout, scene.frames);
  write_calibration(layout.calib(), scene.cameras);
  write_ground_truth(layout.root, scene.gt);
  write_prompts(layout.prompts(), oracle_prompts(spec));

  const int T = static_cast<int>(scene.frames.size());
  const auto windows = sliding_windows(T, cfg.window.k, cfg.window.s);
  const std::size_t ncam = scene.cameras.size();
  parallel_for(windows.size() * ncam, o.jobs, [&](std::size_t i) {
    const FrameRange& w = windows[i / ncam];
    const int c = static_cast<int>(i % ncam);
    write_masklet_archive(layout.masklets(c, w.start), oracle_masklets(scene, w, c));
  });
  parallel_for(static_cast<std::size_t>(T) * ncam, o.jobs, [&](std::size_t i) {
    const int t = static_cast<int>(i / ncam);
    const int c = static_cast<int>(i % ncam);
    write_masklet_archive(layout.single(c, t), oracle_masklets(scene, FrameRange{t, 1}, c));
  });
  std::size_t points = 0;
  for (const PointFrame& f : scene.frames) points += static_cast<std::size_t>(f.size());
  Record(out).put("scene", o.scene).put("seed", o.seed).put("frames", T).put("points", points).put("windows", windows.size());
  return kOk;
}

int cmd_pseudo_label(const Options& o, std::ostream& out, Logger& log) {
  const RunConfig cfg = load_config(o, log);
  const DatasetLayout layout{o.input};
  const std::vector<PointFrame> frames = read_scans(layout);
  const std::vector<CameraModel> cams = read_calibration(layout.calib());
  const auto sizes = sizes_of(frames);
  const auto windows = sliding_windows(static_cast<int>(frames.size()), cfg.window.k, cfg.window.s);
  const fs::path dir(o.output);
  fs::create_directories(dir / "labels");

  SequenceStitcher stitcher(sizes, cfg.stitch);
  const bool stream = cfg.stitch.tau <= 1;
  std::vector<char> written(frames.size(), 0);
  auto flush = [&](int t, const std::vector<InstanceId>& ids) {
    write_file(dir / "labels" / frame_name(t, ".label"), encode_label_frame(ids));
    written[static_cast<std::size_t>(t)] = 1;
  };

  const std::size_t batch = static_cast<std::size_t>(std::max(1, o.jobs));
  for (std::size_t b0 = 0; b0 < windows.size(); b0 += batch) {
    const std::size_t n = std::min(batch, windows.size() - b0);
    std::vector<std::vector<LidarMasklet>> results(n);
    parallel_for(n, o.jobs, [&](std::size_t i) {
      const FrameRange& w = windows[b0 + i];
      const auto sets = load_sets(layout, cams.size(), w, false);
      results[i] = label_window(std::span<const PointFrame>(frames).subspan(static_cast<std::size_t>(w.start),
                                                                            static_cast<std::size_t>(w.count)),
                                sets, cams, cfg.window);
    });
    for (std::size_t i = 0; i < n; ++i) {
      log.info("window " + std::to_string(windows[b0 + i].start) + ": " + std::to_string(results[i].size()) + " masklets");
      stitcher.addWindow(windows[b0 + i], std::move(results[i]));
      if (stream) {
        for (const auto& [t, ids] : stitcher.takeFinalized()) flush(t, ids);
      }
    }
  }
  LabeledSequence seq = stitcher.finish();
  if (!stream) seq = prune_short(seq, cfg.stitch.tau);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    if (!written[t]) flush(static_cast<int>(t), seq.frames[t]);
  }
  write_file(dir / "instances.bin", encode_instance_table(seq));
  Record(out).put("frames", frames.size()).put("windows", windows.size()).put("instances", seq.instances.size());
  return kOk;
}

int cmd_single_scan(const Options& o, std::ostream& out, Logger& log) {
  const RunConfig cfg = load_config(o, log);
  const DatasetLayout layout{o.input};
  const std::vector<PointFrame> frames = read_scans(layout);
  const std::vector<CameraModel> cams = read_calibration(layout.calib());
  std::vector<std::vector<LidarMasklet>> per_frame(frames.size());
  parallel_for(frames.size(), o.jobs, [&](std::size_t t) {
    const auto sets = load_sets(layout, cams.size(), FrameRange{static_cast<int>(t), 1}, true);
    per_frame[t] = single_scan_label(frames[t], sets, cams, cfg.window);
  });
  LabeledSequence seq = make_empty_sequence(sizes_of(frames));
  InstanceId next = 1;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (const LidarMasklet& m : per_frame[t]) {
      const InstanceId id = next++;
      for (const PointSet& mask : m.masks)
        for (std::uint32_t p : mask.indices) seq.frames[t][p] = id;
      seq.instances[id].feature = m.feature;
    }
  }
  seq.refreshInstances();
  write_labels(o.output, seq);
  Record(out).put("frames", frames.size()).put("instances", seq.instances.size());
  return kOk;
}

int cmd_stitch(const Options& o, std::ostream& out, Logger& log) {
  const RunConfig cfg = load_config(o, log);
  const LabeledSequence in = read_labels(o.input);
  std::vector<std::size_t> sizes;
  for (const auto& f : in.frames) sizes.push_back(f.size());
  std::vector<std::pair<FrameRange, std::vector<LidarMasklet>>> windows;
  for (const FrameRange& w : sliding_windows(static_cast<int>(in.length()), cfg.window.k, cfg.window.s)) {
    LabeledSequence local;
    for (int t = w.start; t < w.end(); ++t) {
      local.frames.push_back(in.frames[static_cast<std::size_t>(t)]);
      for (InstanceId id : local.frames.back()) {
        if (id != kUnlabeled) local.instances.try_emplace(id, in.instances.at(id));
      }
    }
    windows.emplace_back(w, masklets_from_labels(local, w));
  }
  const std::size_t nwin = windows.size();
  const LabeledSequence seq = stitch_sequence(sizes, std::move(windows), cfg.stitch);
  write_labels(o.output, seq);
  Record(out).put("frames", seq.length()).put("windows", nwin).put("instances", seq.instances.size());
  return kOk;
}

int cmd_classify(const Options& o, std::ostream& out, Logger&) {
  const LabeledSequence seq = read_labels(o.input);
  const PromptVocabulary vocab = read_prompts(o.prompts);
  const SemanticAssignment sem = assign_semantics(seq, vocab);
  write_labels(o.output, with_classes(seq, sem));
  std::map<ClassId, int> counts;
  for (const auto& [id, c] : sem.instance_classes) ++counts[c];
  Record rec(out);
  rec.put("instances", seq.instances.size());
  for (const auto& [c, n] : counts) {
    rec.put("class." + (c == kUnlabeledClass ? std::string("unlabeled") : vocab.entries[c - 1].name), n);
  }
  return kOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, Logger&) {
  LabeledSequence seq = read_labels(o.input);
  const fs::path gt_root = o.gt.empty() ? fs::path(o.input) : fs::path(o.gt);
  const GroundTruthSequence gt = read_ground_truth(gt_root);
  gt.validate();
  if (seq.length() != gt.length()) {
    const std::size_t first = std::min(seq.length(), gt.length());
    throw ArgumentError("frame " + std::to_string(first) + ": present in " +
                        (seq.length() > gt.length() ? "the prediction" : "the ground truth") + " only (prediction has " +
                        std::to_string(seq.length()) + " frames, ground truth " + std::to_string(gt.length()) + ")");
  }
  if (!o.class_agnostic) {
    std::map<InstanceId, ClassId> classes;
    for (const auto& [id, info] : seq.instances) {
      if (!info.class_id) throw ArgumentError("instance " + std::to_string(id) + " has no class; run classify first");
      classes[id] = *info.class_id;
    }
    std::set<ClassId> stuff;
    for (int c = 1; c <= gt.numClasses(); ++c) {
      if (!gt.isThing(static_cast<ClassId>(c))) stuff.insert(static_cast<ClassId>(c));
    }
    seq = merge_stuff(seq, classes, stuff);
  }
  PointClasses pred_classes = point_classes_from_table(seq);
  EvalOptions opts;
  opts.class_agnostic = o.class_agnostic;
  EvalReport report;
  if (o.frustum) {
    const DatasetLayout layout{gt_root};
    const auto frames = read_scans(layout);
    const auto cams = read_calibration(layout.calib());
    const EvalInputs in = restrict_frustum(seq, pred_classes, gt, frames, cams);
    report = lstq(in.pred, in.pred_classes, in.gt, opts);
  } else {
    report = lstq(seq, pred_classes, gt, opts);
  }
  const std::string text = report.to_record(gt.vocabulary);
  out << text;
  if (!o.output.empty()) write_file(o.output, text);
  return kOk;
}

int cmd_baseline(const Options& o, std::ostream& out, Logger& log) {
  const RunConfig cfg = load_config(o, log);
  const DatasetLayout layout{o.input};
  const std::vector<PointFrame> frames = read_scans(layout);
  const LabeledSequence det_seq = read_labels(o.detections);
  const auto dets = detections_from_labels(frames, det_seq);
  const auto sizes = sizes_of(frames);
  LabeledSequence seq;
  Record rec(out);
  if (o.method == "sw") {
    seq = sw_track(frames, dets, cfg.sw_vote);
  } else if (o.method == "mot") {
    seq = mot_track(sizes, dets, cfg.mot);
  } else if (o.method == "vis") {
    VisDiagnostics diag;
    seq = vis_track(sizes, dets, cfg.vis_max_cost, &diag);
    if (diag.ties > 0) log.warn("vis: " + std::to_string(diag.ties) + " ambiguous embedding matches");
    rec.put("vis_ties", diag.ties);
  } else {
    throw ArgumentError("unknown baseline '" + o.method + "' (sw, mot, vis)");
  }
  write_labels(o.output, seq);
  rec.put("method", o.method).put("frames", seq.length()).put("instances", seq.instances.size());
  return kOk;
}

int cmd_validate(const Options& o, std::ostream& out, Logger&) {
  Record rec(out);
  if (!o.input.empty()) {
    const LabeledSequence seq = read_labels(o.input);
    seq.validate();
    rec.put("labels", "valid").put("frames", seq.length()).put("instances", seq.instances.size());
  }
  if (!o.gt.empty()) {
    const GroundTruthSequence gt = read_ground_truth(o.gt);
    gt.validate();
    rec.put("ground_truth", "valid").put("gt_frames", gt.length());
  }
  if (o.input.empty() && o.gt.empty()) throw ArgumentError("validate: nothing to check (give labels and/or --gt)");
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Logger log(err);
  Options o;
  CLI::App app{"Zero-shot 4D Lidar panoptic pseudo-labeling", "p4d"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration (key = value)");
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto windowing = [&](CLI::App* sub) {
    sub->add_option("--window-size", o.window_size, "Window size K")->check(CLI::PositiveNumber);
    sub->add_option("--stride", o.stride, "Window stride S")->check(CLI::PositiveNumber);
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic sequence with oracle masklets");
  synth->add_option("--output", o.output, "Output sequence directory")->required();
  synth->add_option("--seed", o.seed, "Scene seed");
  synth->add_option("--scene", o.scene, "acceptance, static or crossing");
  synth->add_option("--frames", o.frames, "Override the frame count")->check(CLI::PositiveNumber);
  common(synth);
  windowing(synth);

  CLI::App* pl = app.add_subcommand("pseudo-label", "Per-window lifting and flattening, then stitching");
  pl->add_option("input,--input", o.input, "Sequence directory")->required();
  pl->add_option("--output", o.output, "Label directory")->required();
  common(pl);
  windowing(pl);

  CLI::App* ss = app.add_subcommand("single-scan", "Single-scan pseudo-labels per frame");
  ss->add_option("input,--input", o.input, "Sequence directory")->required();
  ss->add_option("--output", o.output, "Label directory")->required();
  common(ss);

  CLI::App* st = app.add_subcommand("stitch", "Near-online stitching of window-consistent predictions");
  st->add_option("input,--input", o.input, "Label directory")->required();
  st->add_option("--output", o.output, "Label directory")->required();
  common(st);
  windowing(st);

  CLI::App* cl = app.add_subcommand("classify", "Zero-shot classification of instance features");
  cl->add_option("input,--input", o.input, "Label directory")->required();
  cl->add_option("--prompts", o.prompts, "Prompt vocabulary file")->required();
  cl->add_option("--output", o.output, "Label directory")->required();
  common(cl);

  CLI::App* ev = app.add_subcommand("evaluate", "LSTQ and PQ against ground truth");
  ev->add_option("input,--input", o.input, "Label directory")->required();
  ev->add_option("--gt", o.gt, "Sequence directory holding gt/ and classes.txt")->required();
  ev->add_option("--output", o.output, "Report file");
  ev->add_flag("--frustum", o.frustum, "Evaluate camera-visible points only");
  ev->add_flag("--class-agnostic", o.class_agnostic, "Class-agnostic tubes, ground-truth semantics");
  common(ev);

  CLI::App* bl = app.add_subcommand("baseline", "Stationary-world, Kalman MOT or embedding VIS tracking");
  bl->add_option("method", o.method, "sw, mot or vis")->required();
  bl->add_option("input,--input", o.input, "Sequence directory")->required();
  bl->add_option("--detections", o.detections, "Single-scan label directory")->required();
  bl->add_option("--output", o.output, "Label directory")->required();
  common(bl);

  CLI::App* va = app.add_subcommand("validate", "Check label and ground-truth invariants");
  va->add_option("input,--input", o.input, "Label directory");
  va->add_option("--gt", o.gt, "Sequence directory with ground truth");
  common(va);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out, log);
    if (pl->parsed()) return cmd_pseudo_label(o, out, log);
    if (ss->parsed()) return cmd_single_scan(o, out, log);
    if (st->parsed()) return cmd_stitch(o, out, log);
    if (cl->parsed()) return cmd_classify(o, out, log);
    if (ev->parsed()) return cmd_evaluate(o, out, log);
    if (bl->parsed()) return cmd_baseline(o, out, log);
    if (va->parsed()) return cmd_validate(o, out, log);
  } catch (const ValidationError& e) {
    log.log(Level::kError, std::string("validation failed: ") + e.what());
    return kInvalid;
  } catch (const FormatError& e) {
    log.log(Level::kError, e.what());
    return kBadInput;
  } catch (const ConfigError& e) {
    log.log(Level::kError, e.what());
    return kBadInput;
  } catch (const ArgumentError& e) {
    log.log(Level::kError, e.what());
    return kBadInput;
  } catch (const IndexError& e) {
    log.log(Level::kError, e.what());
    return kBadInput;
  } catch (const fs::filesystem_error& e) {
    log.log(Level::kError, e.what());
    return kBadInput;
  } catch (const std::exception& e) {
    log.log(Level::kError, std::string("internal error: ") + e.what());
    return kInternal;
  }
  return kUsage;
}

}  // namespace p4d::cli
