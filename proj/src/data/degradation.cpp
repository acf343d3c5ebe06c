// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/data/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace osdvsr::data {

namespace {

constexpr std::array<int, 64> kLuminanceBase = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,  14, 13, 16, 24, 40,  57,
    69, 56, 14, 17, 22,  29,  51,  87,  80, 62, 18, 22, 37,  56,  68,  109, 103, 77, 24, 35, 55,  64,
    81, 104, 113, 92, 49, 64, 78,  87,  103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

Grid resize_step(const Grid& image, int oh, int ow, Interpolation interp) {
  if (oh == image.height() && ow == image.width()) return image;
  if (interp == Interpolation::kArea && image.height() % oh == 0 && image.width() % ow == 0 &&
      image.height() / oh == image.width() / ow) {
    return area_downsample(image, image.height() / oh);
  }
  return resize(image, oh, ow, interp);
}

void clamp01(Grid& g) {
  for (double& v : g.data()) v = std::clamp(v, 0.0, 1.0);
}

// Orthonormal 8-point DCT-II basis, c[u][x].
std::array<std::array<double, 8>, 8> dct_basis() {
  std::array<std::array<double, 8>, 8> c{};
  for (int u = 0; u < 8; ++u) {
    const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int x = 0; x < 8; ++x) c[u][x] = a * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
  }
  return c;
}

}  // namespace

double Range::sample(std::mt19937_64& rng) const {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

DegradationConfig DegradationConfig::identity() {
  DegradationConfig cfg;
  cfg.first = DegradationPass{false, {0.0, 0.0}, {0.25, 0.25}, false, {0.0, 0.0}, false, {100.0, 100.0}};
  cfg.second_pass = false;
  cfg.interpolations = {Interpolation::kArea};
  return cfg;
}

void DegradationConfig::validate() const {
  auto check = [](const DegradationPass& p) {
    require(p.blur_sigma.valid() && p.blur_sigma.lo >= 0.0, "DegradationConfig: bad blur sigma range");
    require(p.scale.valid() && p.scale.lo > 0.0, "DegradationConfig: bad scale range");
    require(p.noise_sigma.valid() && p.noise_sigma.lo >= 0.0, "DegradationConfig: bad noise sigma range");
    require(p.quality.valid() && p.quality.lo >= 1.0 && p.quality.hi <= 100.0,
            "DegradationConfig: quality range must lie in [1, 100]");
  };
  check(first);
  if (second_pass) check(second);
  require(!interpolations.empty(), "DegradationConfig: no interpolation candidates");
}

std::mt19937_64 keyed_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

DegradationParams sample_degradation(const DegradationConfig& cfg, std::uint64_t clip_index) {
  cfg.validate();
  auto rng = keyed_rng({cfg.seed, clip_index, 0x0de9ULL});
  auto pick_interp = [&]() {
    std::uniform_int_distribution<std::size_t> d(0, cfg.interpolations.size() - 1);
    return cfg.interpolations[d(rng)];
  };
  DegradationParams out;
  const int n = cfg.second_pass ? 2 : 1;
  for (int i = 0; i < n; ++i) {
    const DegradationPass& p = i == 0 ? cfg.first : cfg.second;
    PassParams pp;
    pp.blur_sigma = p.blur ? p.blur_sigma.sample(rng) : 0.0;
    pp.scale = p.scale.sample(rng);
    pp.interp = pick_interp();
    pp.noise_sigma = p.noise ? p.noise_sigma.sample(rng) : 0.0;
    pp.quality = p.compress ? static_cast<int>(std::lround(p.quality.sample(rng))) : 0;  // 0: disabled
    out.passes.push_back(pp);
  }
  out.final_interp = pick_interp();
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

Grid gaussian_blur(const Grid& image, double sigma) {
  const auto k = gaussian_kernel(sigma);
  if (k.size() == 1) return image;
  const int r = static_cast<int>(k.size() / 2);
  Grid tmp(image.channels(), image.height(), image.width());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += k[static_cast<std::size_t>(i + r)] * image.at(c, y, reflect(x + i, image.width()));
        tmp.at(c, y, x) = acc;
      }
    }
  }
  Grid out(image.channels(), image.height(), image.width());
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i)
          acc += k[static_cast<std::size_t>(i + r)] * tmp.at(c, reflect(y + i, image.height()), x);
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

std::array<int, 64> quantization_table(int quality) {
  require(quality >= 1 && quality <= 100, "quantization_table: quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> q{};
  for (std::size_t i = 0; i < 64; ++i) q[i] = std::clamp((kLuminanceBase[i] * scale + 50) / 100, 1, 255);
  return q;
}

Grid block_dct_compress(const Grid& image, int quality) {
  const auto q = quantization_table(quality);
  static const auto basis = dct_basis();
  const int h = image.height();
  const int w = image.width();
  const int ph = (h + 7) / 8 * 8;
  const int pw = (w + 7) / 8 * 8;
  Grid out(image.channels(), h, w);
  double block[8][8];
  double coef[8][8];
  double tmp[8][8];
  for (int c = 0; c < image.channels(); ++c) {
    for (int by = 0; by < ph; by += 8) {
      for (int bx = 0; bx < pw; bx += 8) {
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            const int sy = std::min(by + y, h - 1);
            const int sx = std::min(bx + x, w - 1);
            block[y][x] = std::round(std::clamp(image.at(c, sy, sx), 0.0, 1.0) * 255.0) - 128.0;
          }
        }
        // forward: rows then columns
        for (int y = 0; y < 8; ++y)
          for (int u = 0; u < 8; ++u) {
            double a = 0.0;
            for (int x = 0; x < 8; ++x) a += basis[u][x] * block[y][x];
            tmp[y][u] = a;
          }
        for (int v = 0; v < 8; ++v)
          for (int u = 0; u < 8; ++u) {
            double a = 0.0;
            for (int y = 0; y < 8; ++y) a += basis[v][y] * tmp[y][u];
            const double qv = q[static_cast<std::size_t>(v * 8 + u)];
            coef[v][u] = std::round(a / qv) * qv;
          }
        // inverse
        for (int y = 0; y < 8; ++y)
          for (int u = 0; u < 8; ++u) {
            double a = 0.0;
            for (int v = 0; v < 8; ++v) a += basis[v][y] * coef[v][u];
            tmp[y][u] = a;
          }
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            if (by + y >= h || bx + x >= w) continue;
            double a = 0.0;
            for (int u = 0; u < 8; ++u) a += basis[u][x] * tmp[y][u];
            out.at(c, by + y, bx + x) = std::clamp(std::round(a + 128.0), 0.0, 255.0) / 255.0;
          }
        }
      }
    }
  }
  return out;
}

VideoClip degrade_clip(const VideoClip& hr, const DegradationConfig& cfg, std::uint64_t clip_index) {
  require(hr.height() % 4 == 0 && hr.width() % 4 == 0, "degrade_clip: HR dimensions must be divisible by 4");
  const DegradationParams params = sample_degradation(cfg, clip_index);
  const int oh = hr.height() / 4;
  const int ow = hr.width() / 4;
  std::vector<Frame> out;
  out.reserve(hr.size());
  for (const Frame& f : hr.frames()) {
    auto noise_rng = keyed_rng({cfg.seed, clip_index, static_cast<std::uint64_t>(f.index()), 0x4e01ULL});
    Grid g = f.pixels();
    for (const PassParams& p : params.passes) {
      g = gaussian_blur(g, p.blur_sigma);
      const int h = std::max(1, static_cast<int>(std::lround(g.height() * p.scale)));
      const int w = std::max(1, static_cast<int>(std::lround(g.width() * p.scale)));
      g = resize_step(g, h, w, p.interp);
      if (p.noise_sigma > 0.0) {
        std::normal_distribution<double> n(0.0, p.noise_sigma);
        for (double& v : g.data()) v += n(noise_rng);
      }
      clamp01(g);
      if (p.quality > 0) g = block_dct_compress(g, p.quality);
    }
    g = resize_step(g, oh, ow, params.final_interp);
    clamp01(g);
    out.emplace_back(std::move(g), f.index());
  }
  return VideoClip(std::move(out), ScaleTag::kLowRes);
}

}  // namespace osdvsr::data
