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

#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include "p4d/io.hpp"
#include "p4d/synth.hpp"

namespace p4d {
namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("p4d_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ImageMaskletSet small_set() {
  ImageMaskletSet s;
  s.camera = 2;
  s.window_start = 8;
  s.window_size = 2;
  s.width = 5;
  s.height = 3;
  s.feature_dim = 2;
  for (std::uint32_t id : {4u, 9u}) {
    ImageMasklet m;
    m.local_id = id;
    for (int k = 0; k < 2; ++k) {
      ImageMask im(5, 3);
      im.set(1, static_cast<int>(id % 5));
      im.set(2, k);
      m.masks.push_back(RleMask::Encode(im));
      Feature f(2);
      f << 0.25f * static_cast<float>(id), -1.5f;
      m.features.push_back(f);
    }
    s.instances.push_back(m);
  }
  return s;
}

LabeledSequence small_labels(bool with_class) {
  LabeledSequence seq;
  seq.frames = {{0, 3, 3, 7}, {7, 7, 0}};
  seq.instances[3].feature = Feature::Constant(3, 0.5f);
  seq.instances[7].feature = Feature::Constant(3, -2.0f);
  if (with_class) seq.instances[7].class_id = 4;
  seq.refreshInstances();
  return seq;
}

TEST(PointCloud, SizesAndErrors) {
  EXPECT_EQ(decode_point_cloud(std::string(32, '\0')).size(), 2);
  EXPECT_EQ(decode_point_cloud("").size(), 0);
  EXPECT_THROW(decode_point_cloud(std::string(17, '\0')), FormatError);
  PointFrame f;
  f.points.resize(2, 4);
  f.points << 1, 2, 3, 0, NAN, 0, 0, 0;
  try {
    decode_point_cloud(encode_point_cloud(f));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 16);
  }
}

TEST(PointCloud, RoundTripIsBitExact) {
  SceneSpec spec = acceptance_scene_spec(7);
  spec.n_frames = 1;
  const SyntheticScene s = generate_scene(spec);
  const std::string bytes = encode_point_cloud(s.frames[0]);
  EXPECT_EQ(decode_point_cloud(bytes).points, s.frames[0].points);
  EXPECT_EQ(encode_point_cloud(decode_point_cloud(bytes)), bytes);
}

TEST(Poses, ParseAndRoundTrip) {
  const auto id = decode_poses("1 0 0 0 0 1 0 0 0 0 1 0\n");
  ASSERT_EQ(id.size(), 1u);
  EXPECT_TRUE(id[0].rotation.isIdentity());
  try {
    decode_poses("1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 2);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(decode_poses("2 0 0 0 0 1 0 0 0 0 1 0\n"), FormatError);
  const std::vector<Rigid3d> poses{Rigid3d::FromParts(yaw_rotation(0.3), Vector3d(1.25, -3, 1.7)), Rigid3d::Identity()};
  const auto back = decode_poses(encode_poses(poses));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].rotation, poses[0].rotation);
  EXPECT_EQ(back[0].translation, poses[0].translation);
}

TEST(Poses, SlightlyOffRotationIsProjected) {
  const auto p = decode_poses("1.0000001 0 0 0 0 1 0 0 0 0 1 0\n");
  EXPECT_TRUE(p[0].isValid(1e-12));
}

TEST(Calibration, RoundTrip) {
  const auto cams = surround_cameras();
  const auto back = decode_calibration(encode_calibration(cams));
  ASSERT_EQ(back.size(), cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    EXPECT_EQ(back[i].intrinsics, cams[i].intrinsics);
    EXPECT_EQ(back[i].extrinsic.rotation, cams[i].extrinsic.rotation);
    EXPECT_EQ(back[i].width, cams[i].width);
  }
  EXPECT_THROW(decode_calibration("K0: 1 0 0 0 1 0 0 0 1\n"), FormatError);
  EXPECT_THROW(decode_calibration("cameras: 1\nK0: 1 0 0 0 1 0 0 0 1\n"), FormatError);
}

TEST(MaskletArchive, RoundTripAndHeader) {
  const ImageMaskletSet s = small_set();
  const std::string bytes = encode_masklet_archive(s);
  EXPECT_EQ(bytes.substr(0, 4), "MSKL");
  EXPECT_EQ(decode_masklet_archive(bytes), s);
  EXPECT_EQ(encode_masklet_archive(decode_masklet_archive(bytes)), bytes);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_masklet_archive(bad_version), FormatError);
  std::string bad_runs = bytes;
  bad_runs[28 + 4] = 7;  // first run of the first mask
  EXPECT_THROW(decode_masklet_archive(bad_runs), FormatError);
}

TEST(MaskletArchive, EveryTruncationIsAFormatError) {
  const std::string bytes = encode_masklet_archive(small_set());
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    EXPECT_THROW(decode_masklet_archive(std::string_view(bytes).substr(0, n)), FormatError) << n;
  }
}

TEST(Labels, DirectoryRoundTrip) {
  TempDir dir;
  for (bool with_class : {false, true}) {
    const LabeledSequence seq = small_labels(with_class);
    write_labels(dir.path(), seq);
    EXPECT_EQ(read_labels(dir.path()), seq);
  }
}

TEST(Labels, InstanceTableTruncations) {
  const std::string bytes = encode_instance_table(small_labels(true));
  EXPECT_EQ(decode_instance_table(bytes).first, 2u);
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    EXPECT_THROW(decode_instance_table(std::string_view(bytes).substr(0, n)), FormatError) << n;
  }
}

TEST(Labels, MissingTableIdIsAFormatError) {
  TempDir dir;
  LabeledSequence seq = small_labels(false);
  write_labels(dir.path(), seq);
  const std::vector<InstanceId> bad{0, 5, 0, 0};
  write_file(dir.path() / "labels" / "000000.label", encode_label_frame(bad));
  EXPECT_THROW(read_labels(dir.path()), FormatError);
  EXPECT_THROW(decode_label_frame("abc"), FormatError);
}

TEST(GroundTruthFiles, RoundTrip) {
  TempDir dir;
  SceneSpec spec = acceptance_scene_spec(7);
  spec.n_frames = 2;
  const SyntheticScene s = generate_scene(spec);
  write_ground_truth(dir.path(), s.gt);
  const GroundTruthSequence back = read_ground_truth(dir.path());
  EXPECT_EQ(back.classes, s.gt.classes);
  EXPECT_EQ(back.instances, s.gt.instances);
  EXPECT_EQ(back.vocabulary, s.gt.vocabulary);
  EXPECT_EQ(back.things, s.gt.things);
  write_file(dir.path() / "classes.txt", "1 road stuff\n3 car thing\n");
  EXPECT_THROW(read_ground_truth(dir.path()), FormatError);
}

TEST(Prompts, RoundTripAndTruncation) {
  SceneSpec spec = acceptance_scene_spec();
  const PromptVocabulary v = oracle_prompts(spec);
  const std::string bytes = encode_prompts(v);
  EXPECT_EQ(decode_prompts(bytes), v);
  for (std::size_t n = 0; n < bytes.size(); n += 7) {
    EXPECT_THROW(decode_prompts(std::string_view(bytes).substr(0, n)), FormatError) << n;
  }
}

TEST(Files, MissingFileIsAFormatError) {
  EXPECT_THROW(read_file("/nonexistent/p4d/file"), FormatError);
}

TEST(Config, DefaultsMatchTheReferenceSetup) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.window.k, 8);
  EXPECT_EQ(c.window.s, 4);
  EXPECT_EQ(c.window.eps_list.size(), 6u);
  EXPECT_DOUBLE_EQ(c.window.theta_iom, 0.5);
  EXPECT_EQ(c.stitch.tau, 1);
  EXPECT_EQ(c.mot.algm, "greedy");
  EXPECT_EQ(c.mot.metric, "giou_3d");
  EXPECT_DOUBLE_EQ(c.mot.thres, -0.4);
  EXPECT_EQ(c.mot.max_age, 2);
  EXPECT_DOUBLE_EQ(c.sw_vote, 0.5);
}

TEST(Config, ParsesKeysAndWarnsOnUnknown) {
  const RunConfig c = parse_config(
      "# comment\nwindow.k = 6\ndbscan.eps = 1.0, 0.5\ndbscan.mode = all-frames\nmot.algm = hungarian\nfoo = 1\n");
  EXPECT_EQ(c.window.k, 6);
  EXPECT_EQ(c.window.s, 3);
  EXPECT_EQ(c.window.eps_list, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(c.window.dbscan_mode, DbscanMode::kAllFrames);
  EXPECT_EQ(c.mot.algm, "hungarian");
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("foo"), std::string::npos);
}

TEST(Config, RejectsBadValues) {
  for (const char* text : {"window.k = 0", "window.k = 4\nwindow.s = 5", "flatten.theta = 1.5", "dbscan.eps = 1, -2",
                           "mot.metric = l1", "kalman.r = -1", "window.k = eight", "no equals sign"}) {
    EXPECT_THROW(parse_config(text), ConfigError) << text;
  }
}

}  // namespace
}  // namespace p4d
