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

#include "vmae/synthvasc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "vmae/rng.hpp"

namespace vmae {
namespace {

struct Tube {
  std::array<Vec3, 5> control{};
  double radius_start = 0.0;
  double radius_end = 0.0;
  double wobble_freq = 0.0;
  double wobble_phase = 0.0;
  double level = 0.0;

  // Uniform Catmull-Rom spline through the five control points.
  [[nodiscard]] Vec3 point(double t) const {
    t = std::clamp(t, 0.0, 1.0);
    const double u = t * 4.0;
    const int seg = std::min(3, static_cast<int>(u));
    const double s = u - seg;
    const Vec3& p0 = control[std::max(0, seg - 1)];
    const Vec3& p1 = control[seg];
    const Vec3& p2 = control[seg + 1];
    const Vec3& p3 = control[std::min(4, seg + 2)];
    Vec3 out{};
    for (int a = 0; a < 3; ++a) {
      out[a] = 0.5 * ((2.0 * p1[a]) + (-p0[a] + p2[a]) * s + (2.0 * p0[a] - 5.0 * p1[a] + 4.0 * p2[a] - p3[a]) * s * s +
                      (-p0[a] + 3.0 * p1[a] - 3.0 * p2[a] + p3[a]) * s * s * s);
    }
    return out;
  }

  [[nodiscard]] double radius(double t, const Range<double>& bounds) const {
    const double base = radius_start + (radius_end - radius_start) * t;
    const double r = base * (1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * wobble_freq * t + wobble_phase));
    return std::clamp(r, bounds.lo, bounds.hi);
  }

  [[nodiscard]] double polyline_length() const {
    double len = 0.0;
    for (int i = 0; i < 4; ++i) {
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += (control[i + 1][a] - control[i][a]) * (control[i + 1][a] - control[i][a]);
      len += std::sqrt(d2);
    }
    return len;
  }
};

struct Canvas {
  Grid3<float> alpha;
  Grid3<float> level;
  Mask vessel;
};

double min_spacing(const Spacing& s) { return std::min({s.z, s.y, s.x}); }

// Soft sphere stamp: coverage ramps over one voxel around the surface; the mask
// takes voxel centres within the radius.
void stamp_sphere(Canvas& canvas, const Spacing& sp, const Vec3& c, double r, float level, bool into_mask,
                  std::vector<Index3>* inside = nullptr) {
  const Dims d = canvas.alpha.dims();
  const double ramp = min_spacing(sp);
  Index3 lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max<int64_t>(0, static_cast<int64_t>(std::floor((c[a] - r - ramp) / sp[a] - 0.5)));
    hi[a] = std::min<int64_t>(d[a] - 1, static_cast<int64_t>(std::ceil((c[a] + r + ramp) / sp[a] - 0.5)));
  }
  for (int64_t z = lo[0]; z <= hi[0]; ++z) {
    const double dz = voxel_center_mm(z, sp.z) - c[0];
    for (int64_t y = lo[1]; y <= hi[1]; ++y) {
      const double dy = voxel_center_mm(y, sp.y) - c[1];
      for (int64_t x = lo[2]; x <= hi[2]; ++x) {
        const double dx = voxel_center_mm(x, sp.x) - c[2];
        const double dist = std::sqrt(dz * dz + dy * dy + dx * dx);
        const auto cov = static_cast<float>(std::clamp((r - dist) / ramp + 0.5, 0.0, 1.0));
        const size_t i = canvas.alpha.index(z, y, x);
        if (cov > canvas.alpha[i]) {
          canvas.alpha[i] = cov;
          canvas.level[i] = level;
        }
        if (dist <= r) {
          if (into_mask) canvas.vessel[i] = 1;
          if (inside) inside->push_back({z, y, x});
        }
      }
    }
  }
}

Tube random_tube(Rng& rng, const PhantomParams& p, const Vec3& extent) {
  Tube t;
  const int axis = static_cast<int>(rng.uniform_int(0, 2));
  Vec3 start{}, end{};
  for (int a = 0; a < 3; ++a) {
    if (a == axis) {
      start[a] = 0.0;
      end[a] = extent[a];
    } else {
      start[a] = rng.uniform(0.15, 0.85) * extent[a];
      end[a] = rng.uniform(0.15, 0.85) * extent[a];
    }
  }
  if (rng.uniform() < 0.5) std::swap(start, end);
  t.control[0] = start;
  t.control[4] = end;
  for (int i = 1; i < 4; ++i) {
    const double f = i / 4.0;
    for (int a = 0; a < 3; ++a) {
      const double jitter = (a == axis ? 0.08 : 0.25) * extent[a];
      const double v = start[a] + (end[a] - start[a]) * f + rng.uniform(-jitter, jitter);
      t.control[i][a] = std::clamp(v, 0.05 * extent[a], 0.95 * extent[a]);
    }
  }
  t.radius_start = rng.uniform(p.vessel_radius_mm.lo, p.vessel_radius_mm.hi);
  t.radius_end = rng.uniform(p.vessel_radius_mm.lo, p.vessel_radius_mm.hi);
  t.wobble_freq = rng.uniform(0.5, 2.0);
  t.wobble_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  t.level = rng.uniform(p.vessel_intensity.lo, p.vessel_intensity.hi);
  return t;
}

}  // namespace

void PhantomParams::validate(int64_t min_dim) const {
  auto check_range = [](auto r, const char* name) {
    if (r.lo > r.hi) throw ConfigError(std::string("phantom range '") + name + "' is empty");
  };
  check_range(n_vessels, "n_vessels");
  check_range(vessel_radius_mm, "vessel_radius_mm");
  check_range(n_lesions, "n_lesions");
  check_range(lesion_diameter_mm, "lesion_diameter_mm");
  check_range(vessel_intensity, "vessel_intensity");
  if (n_vessels.lo < 1) throw ConfigError("phantom needs at least one vessel");
  if (n_lesions.lo < 0) throw ConfigError("negative lesion count");
  if (vessel_radius_mm.lo <= 0.0 || lesion_diameter_mm.lo <= 0.0) throw ConfigError("radii and diameters must be > 0");
  if (spacing.z <= 0.0 || spacing.y <= 0.0 || spacing.x <= 0.0) throw ConfigError("spacing must be positive");
  if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  for (int a = 0; a < 3; ++a) {
    if (volume_dims[a] < min_dim) {
      throw ConfigError("volume dims must be >= " + std::to_string(min_dim) + " per axis, got " +
                        std::to_string(volume_dims[a]));
    }
  }
}

Case generate_case(const PhantomParams& params, int64_t case_index) {
  params.validate(1);
  const Dims dims = params.volume_dims;
  const Spacing sp = params.spacing;
  const Vec3 extent{dims.z * sp.z, dims.y * sp.y, dims.x * sp.x};
  const double need = 2.0 * params.vessel_radius_mm.hi + (params.n_lesions.hi > 0 ? params.lesion_diameter_mm.hi : 0.0);
  for (int a = 0; a < 3; ++a) {
    if (extent[a] <= need) {
      std::ostringstream msg;
      msg << "volume extent " << extent[a] << " mm on axis " << a << " cannot fit a vessel of radius "
          << params.vessel_radius_mm.hi << " mm with lesions up to " << params.lesion_diameter_mm.hi << " mm";
      throw GenerationError(msg.str());
    }
  }

  Rng rng = Rng::derive(params.seed, {static_cast<uint64_t>(case_index)});
  Canvas canvas{Grid3<float>(dims, 0.0f), Grid3<float>(dims, 0.0f), Mask(dims, 0)};

  const auto n_vessels = static_cast<int>(rng.uniform_int(params.n_vessels.lo, params.n_vessels.hi));
  std::vector<Tube> tubes;
  tubes.reserve(n_vessels);
  const double step = 0.25 * min_spacing(sp);
  for (int v = 0; v < n_vessels; ++v) {
    tubes.push_back(random_tube(rng, params, extent));
    const Tube& t = tubes.back();
    const int samples = std::max(8, static_cast<int>(std::ceil(1.5 * t.polyline_length() / step)));
    for (int s = 0; s <= samples; ++s) {
      const double u = static_cast<double>(s) / samples;
      stamp_sphere(canvas, sp, t.point(u), t.radius(u, params.vessel_radius_mm), static_cast<float>(t.level), true);
    }
  }

  Case out;
  char id[32];
  std::snprintf(id, sizeof(id), "case_%05lld", static_cast<long long>(case_index));
  out.case_id = id;
  out.spacing = sp;

  const auto n_lesions = static_cast<int>(rng.uniform_int(params.n_lesions.lo, params.n_lesions.hi));
  for (int l = 0; l < n_lesions; ++l) {
    const double diameter = rng.uniform(params.lesion_diameter_mm.lo, params.lesion_diameter_mm.hi);
    const double half = 0.5 * diameter + min_spacing(sp);
    bool placed = false;
    for (int attempt = 0; attempt < 400 && !placed; ++attempt) {
      const Tube& t = tubes[static_cast<size_t>(rng.uniform_int(0, n_vessels - 1))];
      const double u = rng.uniform(0.05, 0.95);
      const Vec3 c = t.point(u);
      bool ok = true;
      for (int a = 0; a < 3 && ok; ++a) ok = c[a] - half >= 0.0 && c[a] + half <= extent[a];
      // Prefer thin vessel segments so the sphere protrudes from the lumen.
      if (ok && attempt < 300) ok = t.radius(u, params.vessel_radius_mm) <= 0.4 * diameter;
      for (const auto& other : out.lesions) {
        if (!ok) break;
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) d2 += (other.center_mm[a] - c[a]) * (other.center_mm[a] - c[a]);
        ok = std::sqrt(d2) > 0.5 * (diameter + other.diameter_mm) + 1.0;
      }
      if (!ok) continue;

      std::vector<Index3> voxels;
      const auto level = static_cast<float>(rng.uniform(params.vessel_intensity.lo, params.vessel_intensity.hi));
      stamp_sphere(canvas, sp, c, 0.5 * diameter, level, false, &voxels);
      if (voxels.empty()) continue;
      Index3 lo = voxels.front(), hi = voxels.front();
      for (const auto& v : voxels) {
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], v[a]);
          hi[a] = std::max(hi[a], v[a]);
        }
      }
      LesionGT gt;
      gt.diameter_mm = diameter;
      for (int a = 0; a < 3; ++a) {
        gt.center_mm[a] = 0.5 * static_cast<double>(lo[a] + hi[a] + 1) * sp[a];
        gt.side_mm = std::max(gt.side_mm, static_cast<double>(hi[a] - lo[a] + 1) * sp[a]);
      }
      out.lesions.push_back(gt);
      placed = true;
    }
    if (!placed) {
      throw GenerationError("could not place lesion of diameter " + std::to_string(diameter) + " mm in " + out.case_id);
    }
  }
  out.is_healthy = out.lesions.empty();

  // Smooth background, vessel/lesion compositing, additive noise.
  struct Wave {
    Vec3 freq;
    double phase;
  };
  std::array<Wave, 3> waves{};
  for (auto& w : waves) {
    for (int a = 0; a < 3; ++a) w.freq[a] = rng.uniform(-1.0, 1.0) / 30.0;
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  out.volume = Volume(dims, 0.0f);
  for (int64_t z = 0; z < dims.z; ++z) {
    const double pz = voxel_center_mm(z, sp.z);
    for (int64_t y = 0; y < dims.y; ++y) {
      const double py = voxel_center_mm(y, sp.y);
      for (int64_t x = 0; x < dims.x; ++x) {
        const double px = voxel_center_mm(x, sp.x);
        double bg = params.background_intensity;
        for (const auto& w : waves) {
          bg += 0.03 * std::cos(2.0 * std::numbers::pi * (w.freq[0] * pz + w.freq[1] * py + w.freq[2] * px) + w.phase);
        }
        const size_t i = out.volume.index(z, y, x);
        const double a = canvas.alpha[i];
        double v = bg * (1.0 - a) + canvas.level[i] * a + params.noise_std * rng.normal();
        out.volume[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  out.artery_mask = std::move(canvas.vessel);
  return out;
}

}  // namespace vmae
