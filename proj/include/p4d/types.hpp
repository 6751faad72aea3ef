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
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace p4d {

typedef Eigen::Vector3d Vector3d;
typedef Eigen::Matrix3d Matrix3d;
typedef Eigen::MatrixXd MatrixXd;
typedef Eigen::VectorXd VectorXd;

// Semantic feature vectors are stored at the precision they are serialized with.
typedef Eigen::VectorXf Feature;

// N x 4 rows of (x, y, z, intensity), row-major as on disk.
typedef Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor> PointMatrix;

typedef std::uint32_t InstanceId;
typedef std::uint16_t ClassId;

constexpr InstanceId kUnlabeled = 0;
constexpr ClassId kUnlabeledClass = 0;

/// Invalid argument to a library operation (shape, range, precondition).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed or truncated file. `offset` is the byte offset (or line number
/// for text formats) where decoding failed, -1 when unknown.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(offset >= 0 ? what + " (at " + std::to_string(offset) + ")" : what),
        offset_(offset) {}
  std::int64_t offset() const { return offset_; }

 private:
  std::int64_t offset_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A data structure violates its invariants.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure that should not happen on valid input.
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace p4d
