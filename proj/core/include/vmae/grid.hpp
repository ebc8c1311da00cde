// Copyright 2026 The vmae Authors
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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vmae {

// All spatial triples in this project are ordered (z, y, x).
using Vec3 = std::array<double, 3>;
using Index3 = std::array<int64_t, 3>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

struct Dims {
  int64_t z = 0;
  int64_t y = 0;
  int64_t x = 0;

  [[nodiscard]] int64_t count() const { return z * y * x; }
  [[nodiscard]] int64_t operator[](int axis) const { return axis == 0 ? z : (axis == 1 ? y : x); }
  [[nodiscard]] Index3 as_index() const { return {z, y, x}; }
  bool operator==(const Dims&) const = default;
};

struct Spacing {
  double z = 0.4;
  double y = 0.4;
  double x = 0.4;

  [[nodiscard]] double operator[](int axis) const { return axis == 0 ? z : (axis == 1 ? y : x); }
  [[nodiscard]] Vec3 as_vec() const { return {z, y, x}; }
  bool operator==(const Spacing&) const = default;
};

/// Dense 3D grid stored z-major (x fastest).
template <class T>
class Grid3 {
 public:
  Grid3() = default;
  explicit Grid3(Dims dims, T fill = T{}) : dims_(dims), data_(static_cast<size_t>(dims.count()), fill) {
    if (dims.z < 0 || dims.y < 0 || dims.x < 0) throw Error("negative grid dimension");
  }

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] size_t size() const { return data_.size(); }

  [[nodiscard]] size_t index(int64_t z, int64_t y, int64_t x) const {
    return static_cast<size_t>((z * dims_.y + y) * dims_.x + x);
  }
  [[nodiscard]] bool contains(int64_t z, int64_t y, int64_t x) const {
    return z >= 0 && y >= 0 && x >= 0 && z < dims_.z && y < dims_.y && x < dims_.x;
  }

  T& operator()(int64_t z, int64_t y, int64_t x) { return data_[index(z, y, x)]; }
  const T& operator()(int64_t z, int64_t y, int64_t x) const { return data_[index(z, y, x)]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  [[nodiscard]] std::span<T> values() { return data_; }
  [[nodiscard]] std::span<const T> values() const { return data_; }
  [[nodiscard]] std::vector<T>& storage() { return data_; }
  [[nodiscard]] const std::vector<T>& storage() const { return data_; }

  bool operator==(const Grid3&) const = default;

 private:
  Dims dims_{};
  std::vector<T> data_;
};

using Volume = Grid3<float>;
using Mask = Grid3<uint8_t>;

/// World coordinate (mm) of the centre of voxel `i` along an axis; voxel i spans [i*s, (i+1)*s).
inline double voxel_center_mm(int64_t i, double spacing) { return (static_cast<double>(i) + 0.5) * spacing; }

}  // namespace vmae
