// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/data/demo.hpp"

#include <cmath>
#include <numbers>

namespace osdvsr::data {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(std::int64_t ix, std::int64_t iy, std::uint64_t salt) {
  std::uint64_t h = splitmix64(salt);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double octave(double x, double y, double cell, std::uint64_t salt) {
  const double gx = x / cell;
  const double gy = y / cell;
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = smoothstep(gx - fx);
  const double ty = smoothstep(gy - fy);
  const double a = lattice(ix, iy, salt);
  const double b = lattice(ix + 1, iy, salt);
  const double c = lattice(ix, iy + 1, salt);
  const double d = lattice(ix + 1, iy + 1, salt);
  return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
}

}  // namespace

DemoKind parse_demo_kind(const std::string& name) {
  if (name == "static") return DemoKind::kStatic;
  if (name == "shift") return DemoKind::kShift;
  if (name == "rotate") return DemoKind::kRotate;
  throw ConfigError("unknown demo kind '" + name + "' (expected static, shift or rotate)");
}

std::string to_string(DemoKind kind) {
  switch (kind) {
    case DemoKind::kStatic:
      return "static";
    case DemoKind::kShift:
      return "shift";
    case DemoKind::kRotate:
      return "rotate";
  }
  return "?";
}

double value_noise(double x, double y, int channel, std::uint64_t seed) {
  const std::uint64_t salt = splitmix64(seed * 31 + static_cast<std::uint64_t>(channel));
  return 0.6 * octave(x, y, 16.0, salt) + 0.4 * octave(x, y, 8.0, salt ^ 0x5bd1e995ULL);
}

VideoClip make_demo_clip(const DemoSpec& spec) {
  require(spec.height >= 16 && spec.width >= 16, "make_demo_clip: size must be at least 16x16");
  require(spec.frames >= 1, "make_demo_clip: need at least one frame");
  require(spec.channels == 1 || spec.channels == 3, "make_demo_clip: channels must be 1 or 3");
  const double cx = (spec.width - 1) / 2.0;
  const double cy = (spec.height - 1) / 2.0;
  std::vector<Frame> frames;
  for (int t = 0; t < spec.frames; ++t) {
    Grid g(spec.channels, spec.height, spec.width);
    const double theta = spec.rotate_deg * t * std::numbers::pi / 180.0;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        double sx = x;
        double sy = y;
        if (spec.kind == DemoKind::kShift) {
          sx = x - static_cast<double>(t) * spec.shift_x;
          sy = y - static_cast<double>(t) * spec.shift_y;
        } else if (spec.kind == DemoKind::kRotate) {
          sx = cs * (x - cx) + sn * (y - cy) + cx;
          sy = -sn * (x - cx) + cs * (y - cy) + cy;
        }
        for (int c = 0; c < spec.channels; ++c) g.at(c, y, x) = value_noise(sx, sy, c, spec.seed);
      }
    }
    frames.emplace_back(std::move(g), t);
  }
  return VideoClip(std::move(frames), ScaleTag::kHighRes);
}

std::vector<VideoClip> make_demo_set(int count, int frames, int size, std::uint64_t seed) {
  static constexpr int kVelocities[][2] = {{2, 0}, {0, 2}, {-2, 0}, {1, 1}, {0, -1}, {3, 0}, {-1, 2}, {1, 0}};
  std::vector<VideoClip> out;
  for (int i = 0; i < count; ++i) {
    DemoSpec s;
    s.kind = DemoKind::kShift;
    s.frames = frames;
    s.height = size;
    s.width = size;
    s.seed = seed * 1000 + static_cast<std::uint64_t>(i);
    s.shift_x = kVelocities[i % 8][0];
    s.shift_y = kVelocities[i % 8][1];
    out.push_back(make_demo_clip(s));
  }
  return out;
}

}  // namespace osdvsr::data
