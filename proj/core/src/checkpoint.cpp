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

#include "vmae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace vmae::nn {
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'V', 'M', 'A', 'E', 'C', 'K', 'P', 'T'};

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError(path.string() + ": truncated checkpoint");
  return v;
}

bool selected(const std::string& name, const std::vector<std::string>& prefixes) {
  if (prefixes.empty()) return true;
  for (const auto& p : prefixes) {
    if (name.rfind(p, 0) == 0) return true;
  }
  return false;
}

std::string read_string(std::istream& in, uint32_t len, const std::filesystem::path& path) {
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw CheckpointError(path.string() + ": truncated checkpoint");
  return s;
}

CheckpointHeader parse_header(std::istream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError(path.string() + ": not a vmae checkpoint");
  const auto version = get<uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get<uint32_t>(in, path);
  CheckpointHeader h;
  h.raw_json = read_string(in, len, path);
  try {
    const json j = json::parse(h.raw_json);
    h.config = ModelConfig::from_json(j.at("model").dump());
    h.kind = j.value("kind", "");
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, torch::nn::Module& module, const ModelConfig& cfg,
                     const std::string& kind, const std::string& extra_json, const std::vector<std::string>& prefixes) {
  json header;
  header["model"] = json::parse(cfg.to_json());
  header["kind"] = kind;
  if (!extra_json.empty()) header["meta"] = json::parse(extra_json);
  const std::string text = header.dump();

  std::vector<std::pair<std::string, torch::Tensor>> tensors;
  for (const auto& item : module.named_parameters(true)) {
    if (selected(item.key(), prefixes)) tensors.emplace_back(item.key(), item.value());
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(kMagic, 8);
  put<uint32_t>(out, kCheckpointVersion);
  put<uint32_t>(out, static_cast<uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint32_t>(out, static_cast<uint32_t>(t.dim()));
    for (int64_t s : t.sizes()) put<int64_t>(out, s);
    auto data = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    out.write(reinterpret_cast<const char*>(data.data_ptr<float>()), static_cast<std::streamsize>(data.numel() * 4));
  }
  if (!out) throw CheckpointError("short write to " + path.string());
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return parse_header(in, path);
}

CheckpointHeader load_checkpoint(const std::filesystem::path& path, torch::nn::Module& module,
                                 const ModelConfig& expected, const std::vector<std::string>& prefixes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  CheckpointHeader h = parse_header(in, path);
  if (!(h.config == expected)) {
    throw CheckpointError(path.string() + ": model config mismatch: checkpoint has " + h.config.to_json() +
                          ", expected " + expected.to_json());
  }
  std::map<std::string, torch::Tensor> stored;
  const auto n = get<uint32_t>(in, path);
  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = read_string(in, get<uint32_t>(in, path), path);
    const auto ndim = get<uint32_t>(in, path);
    std::vector<int64_t> dims(ndim);
    int64_t numel = 1;
    for (auto& d : dims) {
      d = get<int64_t>(in, path);
      numel *= d;
    }
    auto t = torch::empty(dims, torch::kFloat32);
    in.read(reinterpret_cast<char*>(t.data_ptr<float>()), numel * 4);
    if (!in) throw CheckpointError(path.string() + ": truncated tensor '" + name + "'");
    stored.emplace(name, t);
  }

  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters(true)) {
    if (!selected(item.key(), prefixes)) continue;
    auto it = stored.find(item.key());
    if (it == stored.end()) throw CheckpointError(path.string() + ": missing parameter '" + item.key() + "'");
    if (it->second.sizes() != item.value().sizes()) {
      throw CheckpointError(path.string() + ": shape mismatch for '" + item.key() + "'");
    }
    item.value().copy_(it->second.to(item.value().dtype()));
  }
  return h;
}

}  // namespace vmae::nn
