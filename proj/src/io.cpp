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

#include "p4d/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/SVD>

namespace p4d {

namespace {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { buf_.append(s); }
  std::string take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string_view raw(std::size_t n) {
    need(n);
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(what_ + ": " + msg, static_cast<std::int64_t>(pos_)); }
  void need(std::size_t n) const {
    if (remaining() < n) fail("truncated, needed " + std::to_string(n) + " more bytes");
  }
  void expectEnd() const {
    if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
  }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

std::vector<double> parse_doubles(std::string_view line, std::size_t expected, const std::string& what, int lineno) {
  const auto toks = split_ws(line);
  if (toks.size() != expected) {
    throw FormatError(what + ": line " + std::to_string(lineno) + " has " + std::to_string(toks.size()) +
                          " numbers, expected " + std::to_string(expected),
                      lineno);
  }
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!parse_number(toks[i], out[i]) || !std::isfinite(out[i])) {
      throw FormatError(what + ": line " + std::to_string(lineno) + ": bad number '" + std::string(toks[i]) + "'", lineno);
    }
  }
  return out;
}

Rigid3d rigid_from_row_major(const std::vector<double>& v) {
  Rigid3d r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.rotation(i, j) = v[static_cast<std::size_t>(4 * i + j)];
    r.translation(i) = v[static_cast<std::size_t>(4 * i + 3)];
  }
  return r;
}

std::string rigid_to_row_major(const Rigid3d& r) {
  std::string out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (!out.empty()) out += ' ';
      out += fmt_double(j < 3 ? r.rotation(i, j) : r.translation(i));
    }
  }
  return out;
}

void write_rle(ByteWriter& w, const RleMask& m) {
  w.u32(static_cast<std::uint32_t>(m.runs.size()));
  for (std::uint32_t r : m.runs) w.u32(r);
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

std::string encode_point_cloud(const PointFrame& frame) {
  ByteWriter w;
  for (Eigen::Index i = 0; i < frame.points.rows(); ++i)
    for (int d = 0; d < 4; ++d) w.f32(static_cast<float>(frame.points(i, d)));
  return w.take();
}

PointFrame decode_point_cloud(std::string_view bytes) {
  if (bytes.size() % 16 != 0) {
    throw FormatError("point cloud: size " + std::to_string(bytes.size()) + " is not a multiple of 16",
                      static_cast<std::int64_t>(bytes.size() - bytes.size() % 16));
  }
  ByteReader r(bytes, "point cloud");
  PointFrame f;
  const auto n = static_cast<Eigen::Index>(bytes.size() / 16);
  f.points.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d < 4; ++d) {
      const float v = r.f32();
      if (d < 3 && std::isnan(v)) throw FormatError("point cloud: NaN coordinate at point " + std::to_string(i), i * 16);
      f.points(i, d) = v;
    }
  }
  return f;
}

PointFrame read_point_cloud(const fs::path& path) { return decode_point_cloud(read_file(path)); }
void write_point_cloud(const fs::path& path, const PointFrame& frame) { write_file(path, encode_point_cloud(frame)); }

std::string encode_poses(std::span<const Rigid3d> poses) {
  std::string out;
  for (const Rigid3d& p : poses) out += rigid_to_row_major(p) + '\n';
  return out;
}

std::vector<Rigid3d> decode_poses(std::string_view text) {
  std::vector<Rigid3d> out;
  int lineno = 0;
  for (std::string_view line : split_lines(text)) {
    ++lineno;
    if (trim(line).empty()) continue;
    Rigid3d p = rigid_from_row_major(parse_doubles(line, 12, "poses", lineno));
    const double dev = (p.rotation.transpose() * p.rotation - Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (dev > 1e-6 || p.rotation.determinant() < 0) {
      throw FormatError("poses: line " + std::to_string(lineno) + " is not a rotation", lineno);
    }
    if (dev > 1e-12) {
      Eigen::JacobiSVD<Matrix3d> svd(p.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
      p.rotation = svd.matrixU() * svd.matrixV().transpose();
    }
    out.push_back(p);
  }
  return out;
}

std::vector<Rigid3d> read_poses(const fs::path& path) { return decode_poses(read_file(path)); }
void write_poses(const fs::path& path, std::span<const Rigid3d> poses) { write_file(path, encode_poses(poses)); }

std::string encode_calibration(std::span<const CameraModel> cams) {
  std::string out = "cameras: " + std::to_string(cams.size()) + '\n';
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const std::string id = std::to_string(i);
    out += "K" + id + ":";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out += ' ' + fmt_double(cams[i].intrinsics(r, c));
    out += "\nT" + id + ": " + rigid_to_row_major(cams[i].extrinsic) + '\n';
    out += "size" + id + ": " + std::to_string(cams[i].width) + ' ' + std::to_string(cams[i].height) + '\n';
  }
  return out;
}

std::vector<CameraModel> decode_calibration(std::string_view text) {
  std::vector<CameraModel> cams;
  std::vector<int> seen;
  int lineno = 0;
  bool have_count = false;
  for (std::string_view line : split_lines(text)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) throw FormatError("calib: line " + std::to_string(lineno) + " lacks ':'", lineno);
    const std::string_view key = trim(line.substr(0, colon));
    const std::string_view rest = line.substr(colon + 1);
    if (key == "cameras") {
      const auto v = parse_doubles(rest, 1, "calib", lineno);
      if (v[0] < 0 || v[0] > 64 || v[0] != std::floor(v[0])) throw FormatError("calib: bad camera count", lineno);
      cams.assign(static_cast<std::size_t>(v[0]), CameraModel{});
      seen.assign(cams.size(), 0);
      have_count = true;
      continue;
    }
    if (!have_count) throw FormatError("calib: 'cameras:' must come first", lineno);
    std::string_view prefix;
    for (std::string_view p : {"size", "K", "T"}) {
      if (key.substr(0, p.size()) == p) {
        prefix = p;
        break;
      }
    }
    std::size_t idx = 0;
    if (prefix.empty() || !parse_number(key.substr(prefix.size()), idx) || idx >= cams.size()) {
      throw FormatError("calib: unknown key '" + std::string(key) + "'", lineno);
    }
    CameraModel& cam = cams[idx];
    if (prefix == "K") {
      const auto v = parse_doubles(rest, 9, "calib", lineno);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.intrinsics(r, c) = v[static_cast<std::size_t>(3 * r + c)];
      seen[idx] |= 1;
    } else if (prefix == "T") {
      cam.extrinsic = rigid_from_row_major(parse_doubles(rest, 12, "calib", lineno));
      seen[idx] |= 2;
    } else {
      const auto v = parse_doubles(rest, 2, "calib", lineno);
      if (v[0] < 0 || v[1] < 0 || v[0] > 65535 || v[1] > 65535) throw FormatError("calib: bad image size", lineno);
      cam.width = static_cast<int>(v[0]);
      cam.height = static_cast<int>(v[1]);
      seen[idx] |= 4;
    }
  }
  if (!have_count) throw FormatError("calib: missing 'cameras:' line", lineno);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    if (seen[i] != 7) throw FormatError("calib: camera " + std::to_string(i) + " is incomplete", lineno);
    if (!cams[i].extrinsic.isValid(1e-6)) throw FormatError("calib: T" + std::to_string(i) + " is not rigid", lineno);
  }
  return cams;
}

std::vector<CameraModel> read_calibration(const fs::path& path) { return decode_calibration(read_file(path)); }
void write_calibration(const fs::path& path, std::span<const CameraModel> cams) {
  write_file(path, encode_calibration(cams));
}

std::string encode_masklet_archive(const ImageMaskletSet& set) {
  set.validate();
  ByteWriter w;
  w.raw("MSKL");
  w.u16(kMaskletVersion);
  w.u16(static_cast<std::uint16_t>(set.camera));
  w.u32(static_cast<std::uint32_t>(set.window_start));
  w.u16(static_cast<std::uint16_t>(set.window_size));
  w.u16(static_cast<std::uint16_t>(set.height));
  w.u16(static_cast<std::uint16_t>(set.width));
  w.u16(static_cast<std::uint16_t>(set.feature_dim));
  w.u32(static_cast<std::uint32_t>(set.instances.size()));
  for (const ImageMasklet& m : set.instances) {
    w.u32(m.local_id);
    for (int k = 0; k < set.window_size; ++k) {
      write_rle(w, m.masks[static_cast<std::size_t>(k)]);
      const Feature& f = m.features[static_cast<std::size_t>(k)];
      for (Eigen::Index d = 0; d < f.size(); ++d) w.f32(f(d));
    }
  }
  return w.take();
}

ImageMaskletSet decode_masklet_archive(std::string_view bytes) {
  ByteReader r(bytes, "masklet archive");
  if (r.raw(4) != "MSKL") r.fail("bad magic");
  const std::uint16_t version = r.u16();
  if (version != kMaskletVersion) r.fail("unsupported version " + std::to_string(version));
  ImageMaskletSet set;
  set.camera = r.u16();
  set.window_start = static_cast<int>(r.u32());
  set.window_size = r.u16();
  set.height = r.u16();
  set.width = r.u16();
  set.feature_dim = r.u16();
  const std::uint32_t count = r.u32();
  const std::uint64_t pixels = static_cast<std::uint64_t>(set.height) * static_cast<std::uint64_t>(set.width);
  // Every instance needs at least a local id and one run count per frame.
  if (static_cast<std::uint64_t>(count) * (4 + 4ULL * set.window_size) > r.remaining()) r.fail("instance count exceeds file size");
  for (std::uint32_t i = 0; i < count; ++i) {
    ImageMasklet m;
    m.local_id = r.u32();
    for (int k = 0; k < set.window_size; ++k) {
      RleMask rle;
      rle.width = set.width;
      rle.height = set.height;
      const std::uint32_t nruns = r.u32();
      r.need(4ULL * nruns);
      std::uint64_t total = 0;
      rle.runs.resize(nruns);
      for (std::uint32_t j = 0; j < nruns; ++j) {
        rle.runs[j] = r.u32();
        total += rle.runs[j];
      }
      if (total != pixels) r.fail("runs sum to " + std::to_string(total) + ", expected " + std::to_string(pixels));
      m.masks.push_back(std::move(rle));
      Feature f(set.feature_dim);
      r.need(4ULL * set.feature_dim);
      for (int d = 0; d < set.feature_dim; ++d) f(d) = r.f32();
      m.features.push_back(std::move(f));
    }
    set.instances.push_back(std::move(m));
  }
  r.expectEnd();
  return set;
}

ImageMaskletSet read_masklet_archive(const fs::path& path) { return decode_masklet_archive(read_file(path)); }
void write_masklet_archive(const fs::path& path, const ImageMaskletSet& set) {
  write_file(path, encode_masklet_archive(set));
}

std::string encode_label_frame(std::span<const InstanceId> ids) {
  ByteWriter w;
  for (InstanceId id : ids) w.u32(id);
  return w.take();
}

std::vector<InstanceId> decode_label_frame(std::string_view bytes) {
  if (bytes.size() % 4 != 0) {
    throw FormatError("label frame: size not a multiple of 4", static_cast<std::int64_t>(bytes.size() - bytes.size() % 4));
  }
  ByteReader r(bytes, "label frame");
  std::vector<InstanceId> out(bytes.size() / 4);
  for (InstanceId& id : out) id = r.u32();
  return out;
}

std::string encode_instance_table(const LabeledSequence& seq) {
  int dim = -1;
  bool any_class = false;
  for (const auto& [id, info] : seq.instances) {
    if (dim < 0) dim = static_cast<int>(info.feature.size());
    if (info.feature.size() != dim) throw ArgumentError("instance table: mixed feature dimensions");
    any_class = any_class || info.class_id.has_value();
  }
  if (dim > 65535) throw ArgumentError("instance table: feature dimension too large");
  ByteWriter w;
  w.raw("INST");
  w.u16(kInstanceTableVersion);
  w.u16(static_cast<std::uint16_t>(std::max(dim, 0)));
  w.u16(any_class ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(seq.frames.size()));
  w.u32(static_cast<std::uint32_t>(seq.instances.size()));
  for (const auto& [id, info] : seq.instances) {
    w.u32(id);
    w.u32(static_cast<std::uint32_t>(info.first_frame));
    w.u32(static_cast<std::uint32_t>(info.last_frame));
    for (Eigen::Index d = 0; d < info.feature.size(); ++d) w.f32(info.feature(d));
    if (any_class) w.u16(info.class_id.value_or(0xFFFF));
  }
  return w.take();
}

std::pair<std::size_t, std::map<InstanceId, InstanceInfo>> decode_instance_table(std::string_view bytes) {
  ByteReader r(bytes, "instance table");
  if (r.raw(4) != "INST") r.fail("bad magic");
  const std::uint16_t version = r.u16();
  if (version != kInstanceTableVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint16_t dim = r.u16();
  const std::uint16_t flags = r.u16();
  if (flags > 1) r.fail("unknown flags");
  const std::uint32_t frames = r.u32();
  const std::uint32_t count = r.u32();
  const std::uint64_t entry = 12ULL + 4ULL * dim + ((flags & 1) ? 2 : 0);
  if (static_cast<std::uint64_t>(count) * entry != r.remaining()) r.need(static_cast<std::uint64_t>(count) * entry);
  std::map<InstanceId, InstanceInfo> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    const InstanceId id = r.u32();
    InstanceInfo info;
    info.first_frame = static_cast<int>(r.u32());
    info.last_frame = static_cast<int>(r.u32());
    info.feature.resize(dim);
    for (int d = 0; d < dim; ++d) info.feature(d) = r.f32();
    if (flags & 1) {
      const std::uint16_t c = r.u16();
      if (c != 0xFFFF) info.class_id = c;
    }
    if (id == kUnlabeled) r.fail("reserved id 0 in the table");
    if (!table.emplace(id, std::move(info)).second) r.fail("duplicate id " + std::to_string(id));
  }
  r.expectEnd();
  return {frames, std::move(table)};
}

std::string frame_name(int t, std::string_view ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", t);
  return std::string(buf) + std::string(ext);
}

LabeledSequence read_labels(const fs::path& dir) {
  auto [frames, table] = decode_instance_table(read_file(dir / "instances.bin"));
  LabeledSequence seq;
  seq.instances = std::move(table);
  std::map<InstanceId, std::uint64_t> counts;
  for (std::size_t t = 0; t < frames; ++t) {
    const fs::path path = dir / "labels" / frame_name(static_cast<int>(t), ".label");
    seq.frames.push_back(decode_label_frame(read_file(path)));
    for (std::size_t p = 0; p < seq.frames.back().size(); ++p) {
      const InstanceId id = seq.frames.back()[p];
      if (id == kUnlabeled) continue;
      if (!seq.instances.count(id)) {
        throw FormatError(path.string() + ": id " + std::to_string(id) + " missing from the instance table",
                          static_cast<std::int64_t>(4 * p));
      }
      ++counts[id];
    }
  }
  for (auto& [id, info] : seq.instances) info.point_count = counts[id];
  return seq;
}

void write_labels(const fs::path& dir, const LabeledSequence& seq) {
  fs::create_directories(dir / "labels");
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    write_file(dir / "labels" / frame_name(static_cast<int>(t), ".label"), encode_label_frame(seq.frames[t]));
  }
  write_file(dir / "instances.bin", encode_instance_table(seq));
}

GroundTruthSequence read_ground_truth(const fs::path& root) {
  GroundTruthSequence gt;
  const fs::path classes = root / "classes.txt";
  const std::string text = read_file(classes);
  int lineno = 0;
  for (std::string_view line : split_lines(text)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto toks = split_ws(line);
    int id = 0;
    if (toks.size() != 3 || !parse_number(toks[0], id) || id != gt.numClasses() + 1 ||
        (toks[2] != "thing" && toks[2] != "stuff")) {
      throw FormatError("classes.txt: line " + std::to_string(lineno) + " must read '<id> <name> thing|stuff' with consecutive ids", lineno);
    }
    gt.vocabulary.emplace_back(toks[1]);
    if (toks[2] == "thing") gt.things.insert(static_cast<ClassId>(id));
  }
  for (int t = 0;; ++t) {
    const fs::path path = root / "gt" / frame_name(t, ".label");
    if (!fs::exists(path)) break;
    const auto raw = decode_label_frame(read_file(path));
    auto& cls = gt.classes.emplace_back(raw.size());
    auto& inst = gt.instances.emplace_back(raw.size());
    for (std::size_t p = 0; p < raw.size(); ++p) {
      cls[p] = static_cast<ClassId>(raw[p] & 0xFFFF);
      inst[p] = raw[p] >> 16;
    }
  }
  return gt;
}

void write_ground_truth(const fs::path& root, const GroundTruthSequence& gt) {
  std::string classes;
  for (int c = 1; c <= gt.numClasses(); ++c) {
    classes += std::to_string(c) + ' ' + gt.vocabulary[static_cast<std::size_t>(c - 1)] + ' ' +
               (gt.isThing(static_cast<ClassId>(c)) ? "thing" : "stuff") + '\n';
  }
  write_file(root / "classes.txt", classes);
  fs::create_directories(root / "gt");
  for (std::size_t t = 0; t < gt.length(); ++t) {
    std::vector<InstanceId> raw(gt.classes[t].size());
    for (std::size_t p = 0; p < raw.size(); ++p) {
      if (gt.instances[t][p] > 0xFFFF) throw ArgumentError("ground truth: instance id exceeds 16 bits");
      raw[p] = gt.classes[t][p] | (gt.instances[t][p] << 16);
    }
    write_file(root / "gt" / frame_name(static_cast<int>(t), ".label"), encode_label_frame(raw));
  }
}

std::string encode_prompts(const PromptVocabulary& vocab) {
  vocab.validate();
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(vocab.dim()));
  w.u32(static_cast<std::uint32_t>(vocab.entries.size()));
  for (const PromptEntry& e : vocab.entries) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.raw(e.name);
    w.u8(e.stuff ? 1 : 0);
    for (Eigen::Index d = 0; d < e.embedding.size(); ++d) w.f32(e.embedding(d));
  }
  return w.take();
}

PromptVocabulary decode_prompts(std::string_view bytes) {
  ByteReader r(bytes, "prompt vocabulary");
  const std::uint32_t dim = r.u32();
  const std::uint32_t count = r.u32();
  if (static_cast<std::uint64_t>(count) * (5ULL + 4ULL * dim) > r.remaining()) r.fail("entry count exceeds file size");
  PromptVocabulary v;
  for (std::uint32_t i = 0; i < count; ++i) {
    PromptEntry e;
    const std::uint32_t len = r.u32();
    e.name = std::string(r.raw(len));
    const std::uint8_t flag = r.u8();
    if (flag > 1) r.fail("bad stuff flag");
    e.stuff = flag == 1;
    r.need(4ULL * dim);
    e.embedding.resize(dim);
    for (std::uint32_t d = 0; d < dim; ++d) e.embedding(d) = r.f32();
    v.entries.push_back(std::move(e));
  }
  r.expectEnd();
  try {
    v.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(e.what());
  }
  return v;
}

PromptVocabulary read_prompts(const fs::path& path) { return decode_prompts(read_file(path)); }
void write_prompts(const fs::path& path, const PromptVocabulary& vocab) { write_file(path, encode_prompts(vocab)); }

fs::path DatasetLayout::scan(int t) const { return root / "scans" / frame_name(t, ".bin"); }

fs::path DatasetLayout::masklets(int camera, int start) const {
  char cam[16];
  std::snprintf(cam, sizeof(cam), "cam%02d", camera);
  return root / "cameras" / cam / "masklets" / frame_name(start, ".mskl");
}

fs::path DatasetLayout::single(int camera, int t) const {
  char cam[16];
  std::snprintf(cam, sizeof(cam), "cam%02d", camera);
  return root / "cameras" / cam / "single" / frame_name(t, ".mskl");
}

std::vector<PointFrame> read_scans(const DatasetLayout& layout) {
  const auto poses = read_poses(layout.poses());
  std::vector<PointFrame> frames;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    PointFrame f = read_point_cloud(layout.scan(static_cast<int>(t)));
    f.timestamp = static_cast<int>(t);
    f.pose = poses[t];
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_scans(const DatasetLayout& layout, std::span<const PointFrame> frames) {
  std::vector<Rigid3d> poses;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    write_point_cloud(layout.scan(static_cast<int>(t)), frames[t]);
    poses.push_back(frames[t].pose);
  }
  write_poses(layout.poses(), poses);
}

namespace {

struct ConfigParser {
  std::map<std::string, std::pair<std::string, int>> values;  // key -> (value, line)

  const std::string* find(const std::string& key) const {
    auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second.first;
  }

  [[noreturn]] void bad(const std::string& key, const std::string& why) const {
    throw ConfigError("config key '" + key + "': " + why);
  }

  void getDouble(const std::string& key, double& out) const {
    if (const std::string* v = find(key)) {
      if (!parse_number(std::string_view(*v), out) || !std::isfinite(out)) bad(key, "expected a number, got '" + *v + "'");
    }
  }
  void getInt(const std::string& key, int& out) const {
    if (const std::string* v = find(key)) {
      if (!parse_number(std::string_view(*v), out)) bad(key, "expected an integer, got '" + *v + "'");
    }
  }
  void getU64(const std::string& key, std::uint64_t& out) const {
    if (const std::string* v = find(key)) {
      if (!parse_number(std::string_view(*v), out)) bad(key, "expected a non-negative integer, got '" + *v + "'");
    }
  }
  void getString(const std::string& key, std::string& out) const {
    if (const std::string* v = find(key)) out = *v;
  }
  void ratio(const std::string& key, double v, bool zero_ok = false) const {
    if (!(zero_ok ? v >= 0.0 : v > 0.0) || v > 1.0) bad(key, zero_ok ? "must lie in [0, 1]" : "must lie in (0, 1]");
  }
};

}  // namespace

RunConfig parse_config(std::string_view text) {
  static const std::set<std::string> known = {
      "window.k",       "window.s",        "flatten.theta",  "fuse.iou",        "dbscan.iou",   "dbscan.eps",
      "dbscan.min_pts", "dbscan.mode",     "ground.iterations", "ground.threshold", "ground.seed", "stitch.tau",
      "stitch.max_cost", "mot.algm",       "mot.metric",     "mot.thres",       "mot.min_hits", "mot.max_age",
      "kalman.q_pos",   "kalman.q_size",   "kalman.q_vel",   "kalman.r",        "kalman.p0",    "sw.vote",
      "vis.max_cost",   "seed"};
  ConfigParser p;
  RunConfig cfg;
  int lineno = 0;
  for (std::string_view line : split_lines(text)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!known.count(key)) {
      cfg.warnings.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    p.values[key] = {value, lineno};
  }

  WindowConfig& w = cfg.window;
  p.getInt("window.k", w.k);
  if (w.k < 1) p.bad("window.k", "must be >= 1");
  w.s = std::max(1, w.k / 2);
  p.getInt("window.s", w.s);
  if (w.s < 1 || w.s > w.k) p.bad("window.s", "must lie in [1, window.k]");
  p.getDouble("flatten.theta", w.theta_iom);
  p.ratio("flatten.theta", w.theta_iom);
  p.getDouble("fuse.iou", w.cam_fuse_iou);
  p.ratio("fuse.iou", w.cam_fuse_iou);
  p.getDouble("dbscan.iou", w.dbscan_iou);
  p.ratio("dbscan.iou", w.dbscan_iou);
  if (const std::string* v = p.find("dbscan.eps")) {
    w.eps_list.clear();
    std::string_view rest(*v);
    while (!rest.empty()) {
      const std::size_t comma = rest.find(',');
      const std::string_view tok = trim(rest.substr(0, comma));
      double e = 0.0;
      if (!parse_number(tok, e) || !(e > 0.0) || !std::isfinite(e)) p.bad("dbscan.eps", "expected positive numbers separated by commas");
      w.eps_list.push_back(e);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (w.eps_list.empty()) p.bad("dbscan.eps", "empty list");
  }
  p.getInt("dbscan.min_pts", w.min_pts);
  if (w.min_pts < 1) p.bad("dbscan.min_pts", "must be >= 1");
  std::string mode = "per-frame";
  p.getString("dbscan.mode", mode);
  if (mode == "per-frame") {
    w.dbscan_mode = DbscanMode::kPerFrame;
  } else if (mode == "all-frames") {
    w.dbscan_mode = DbscanMode::kAllFrames;
  } else {
    p.bad("dbscan.mode", "expected per-frame or all-frames");
  }
  p.getInt("ground.iterations", w.ground.iterations);
  if (w.ground.iterations < 1) p.bad("ground.iterations", "must be >= 1");
  p.getDouble("ground.threshold", w.ground.threshold);
  if (!(w.ground.threshold > 0.0)) p.bad("ground.threshold", "must be > 0");
  p.getU64("ground.seed", w.ground.seed);
  p.getInt("stitch.tau", cfg.stitch.tau);
  if (cfg.stitch.tau < 0) p.bad("stitch.tau", "must be >= 0");
  w.tau = cfg.stitch.tau;
  p.getDouble("stitch.max_cost", cfg.stitch.max_cost);
  if (!(cfg.stitch.max_cost > 0.0)) p.bad("stitch.max_cost", "must be > 0");

  MotParams& m = cfg.mot;
  p.getString("mot.algm", m.algm);
  p.getString("mot.metric", m.metric);
  p.getDouble("mot.thres", m.thres);
  if (m.thres < -1.0 || m.thres > 1.0) p.bad("mot.thres", "must lie in [-1, 1]");
  p.getInt("mot.min_hits", m.min_hits);
  p.getInt("mot.max_age", m.max_age);
  p.getDouble("kalman.q_pos", m.kalman.q_pos);
  p.getDouble("kalman.q_size", m.kalman.q_size);
  p.getDouble("kalman.q_vel", m.kalman.q_vel);
  p.getDouble("kalman.r", m.kalman.r);
  p.getDouble("kalman.p0", m.kalman.p0);
  for (const char* k : {"kalman.q_pos", "kalman.q_size", "kalman.q_vel", "kalman.r"}) {
    double v = 0.0;
    p.getDouble(k, v);
    if (v < 0.0) p.bad(k, "must be >= 0");
  }
  if (!(m.kalman.p0 > 0.0)) p.bad("kalman.p0", "must be > 0");
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config key ") + e.what());
  }
  p.getDouble("sw.vote", cfg.sw_vote);
  p.ratio("sw.vote", cfg.sw_vote, true);
  p.getDouble("vis.max_cost", cfg.vis_max_cost);
  if (!(cfg.vis_max_cost > 0.0)) p.bad("vis.max_cost", "must be > 0");
  p.getU64("seed", cfg.seed);
  return cfg;
}

RunConfig read_config(const fs::path& path) { return parse_config(read_file(path)); }

}  // namespace p4d
