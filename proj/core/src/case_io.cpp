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

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "vmae/synthvasc.hpp"

namespace vmae {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void write_raw(const fs::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (T v : values) {
      auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
      std::reverse(bytes.begin(), bytes.end());
      out.write(bytes.data(), sizeof(T));
    }
  }
  if (!out) throw FormatError("short write to " + path.string());
}

template <class T>
std::vector<T> read_raw(const fs::path& path, int64_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path.string());
  const auto actual = static_cast<int64_t>(in.tellg());
  const int64_t expected = expected_count * static_cast<int64_t>(sizeof(T));
  if (actual != expected) {
    throw FormatError(path.filename().string() + ": expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(actual));
  }
  in.seekg(0);
  std::vector<T> values(static_cast<size_t>(expected_count));
  in.read(reinterpret_cast<char*>(values.data()), expected);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (T& v : values) {
      auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
      std::reverse(bytes.begin(), bytes.end());
      v = std::bit_cast<T>(bytes);
    }
  }
  return values;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

Dims parse_dims(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("malformed header: dims must be [z,y,x]");
  Dims d{j[0].get<int64_t>(), j[1].get<int64_t>(), j[2].get<int64_t>()};
  if (d.z <= 0 || d.y <= 0 || d.x <= 0) throw FormatError("malformed header: non-positive dims");
  return d;
}

Spacing parse_spacing(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("malformed header: spacing_mm must be [z,y,x]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void write_case(const Case& c, const fs::path& dir) {
  if (c.volume.dims() != c.artery_mask.dims()) throw FormatError("volume and artery mask dims differ");
  fs::create_directories(dir);
  json j;
  j["case_id"] = c.case_id;
  const Dims d = c.volume.dims();
  j["dims"] = {d.z, d.y, d.x};
  j["spacing_mm"] = {c.spacing.z, c.spacing.y, c.spacing.x};
  j["lesions"] = json::array();
  for (const auto& l : c.lesions) {
    j["lesions"].push_back({{"center_mm", l.center_mm}, {"side_mm", l.side_mm}, {"diameter_mm", l.diameter_mm}});
  }
  j["is_healthy"] = c.is_healthy;
  write_json(dir / "case.json", j);
  write_raw<float>(dir / "volume.raw", c.volume.values());
  write_raw<uint8_t>(dir / "artery.raw", c.artery_mask.values());
}

Case read_case(const fs::path& dir) {
  const json j = read_json(dir / "case.json");
  Case c;
  try {
    c.case_id = j.at("case_id").get<std::string>();
    const Dims d = parse_dims(j.at("dims"));
    c.spacing = parse_spacing(j.at("spacing_mm"));
    for (const auto& l : j.at("lesions")) {
      LesionGT gt;
      gt.center_mm = l.at("center_mm").get<Vec3>();
      gt.side_mm = l.at("side_mm").get<double>();
      gt.diameter_mm = l.at("diameter_mm").get<double>();
      c.lesions.push_back(gt);
    }
    c.is_healthy = j.at("is_healthy").get<bool>();
    c.volume = Volume(d);
    c.volume.storage() = read_raw<float>(dir / "volume.raw", d.count());
    c.artery_mask = Mask(d);
    c.artery_mask.storage() = read_raw<uint8_t>(dir / "artery.raw", d.count());
  } catch (const json::exception& e) {
    throw FormatError((dir / "case.json").string() + ": malformed header: " + e.what());
  }
  if (c.is_healthy != c.lesions.empty()) throw FormatError(c.case_id + ": is_healthy disagrees with lesion list");
  return c;
}

void write_distance_map(const DistanceMap& dmap, const fs::path& dir) {
  fs::create_directories(dir);
  const Dims d = dmap.values.dims();
  json j;
  j["dims"] = {d.z, d.y, d.x};
  j["spacing_mm"] = {dmap.spacing.z, dmap.spacing.y, dmap.spacing.x};
  j["has_artery"] = dmap.has_artery;
  j["sign"] = "negative_inside";
  write_json(dir / "distance.json", j);
  std::vector<float> f(dmap.values.size());
  for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(dmap.values[i]);
  write_raw<float>(dir / "distance.raw", std::span<const float>(f));
}

DistanceMap read_distance_map(const fs::path& dir) {
  const json j = read_json(dir / "distance.json");
  DistanceMap m;
  try {
    const Dims d = parse_dims(j.at("dims"));
    m.spacing = parse_spacing(j.at("spacing_mm"));
    m.has_artery = j.at("has_artery").get<bool>();
    const auto f = read_raw<float>(dir / "distance.raw", d.count());
    m.values = Grid3<double>(d);
    for (size_t i = 0; i < f.size(); ++i) m.values[i] = f[i];
  } catch (const json::exception& e) {
    throw FormatError((dir / "distance.json").string() + ": malformed header: " + e.what());
  }
  return m;
}

void write_manifest(const fs::path& manifest, const std::vector<std::string>& relative_dirs) {
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + manifest.string() + " for writing");
  for (const auto& r : relative_dirs) out << r << '\n';
}

std::vector<fs::path> read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("cannot open manifest " + manifest.string());
  std::vector<fs::path> dirs;
  std::string line;
  const fs::path base = manifest.parent_path();
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    dirs.push_back(base / line);
  }
  return dirs;
}

}  // namespace vmae
