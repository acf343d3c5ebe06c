// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/core/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace osdvsr {

namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

double cubic_weight(double t) {
  // Keys kernel with a = -0.5.
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct Tap {
  int index;
  double weight;
};

// One row of a separable resampling matrix.
std::vector<std::vector<Tap>> resample_taps(int in_n, int out_n, Interpolation interp) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out_n));
  const double scale = static_cast<double>(in_n) / out_n;
  for (int o = 0; o < out_n; ++o) {
    auto& row = taps[static_cast<std::size_t>(o)];
    if (interp == Interpolation::kArea) {
      const double lo = o * scale;
      const double hi = (o + 1) * scale;
      for (int i = static_cast<int>(std::floor(lo)); i < static_cast<int>(std::ceil(hi)); ++i) {
        const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
        if (overlap > 0.0) row.push_back({std::clamp(i, 0, in_n - 1), overlap / scale});
      }
      continue;
    }
    const double center = (o + 0.5) * scale - 0.5;
    if (interp == Interpolation::kBilinear) {
      const double base = std::floor(center);
      const double frac = center - base;
      row.push_back({std::clamp(static_cast<int>(base), 0, in_n - 1), 1.0 - frac});
      row.push_back({std::clamp(static_cast<int>(base) + 1, 0, in_n - 1), frac});
    } else {
      const double base = std::floor(center);
      double total = 0.0;
      for (int k = -1; k <= 2; ++k) {
        const double w = cubic_weight(center - (base + k));
        row.push_back({std::clamp(static_cast<int>(base) + k, 0, in_n - 1), w});
        total += w;
      }
      for (auto& t : row) t.weight /= total;
    }
  }
  return taps;
}

}  // namespace

Grid warp(const Grid& image, const FlowField& flow) {
  require(image.height() == flow.height() && image.width() == flow.width(),
          "warp: flow shape does not match image shape");
  const int h = image.height();
  const int w = image.width();
  Grid out(image.channels(), h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp(x + flow.dx(y, x), 0.0, static_cast<double>(w - 1));
      const double sy = std::clamp(y + flow.dy(y, x), 0.0, static_cast<double>(h - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top = (1.0 - fx) * image.at(c, y0, x0) + fx * image.at(c, y0, x1);
        const double bottom = (1.0 - fx) * image.at(c, y1, x0) + fx * image.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

Frame warp(const Frame& frame, const FlowField& flow) {
  return clamp_to_frame(warp(frame.pixels(), flow), frame.index());
}

PixelMask resample_mask(const PixelMask& mask, int factor, ResampleDirection direction) {
  require(factor >= 1, "resample_mask: factor must be >= 1");
  Grid plane(1, mask.height(), mask.width(), std::vector<double>(mask.values().begin(), mask.values().end()));
  if (direction == ResampleDirection::kUp) {
    Grid up = upsample_nearest(plane, factor);
    return PixelMask(up.height(), up.width(), std::move(up.vec()), mask.kind());
  }
  Grid down = area_downsample(pad_reflect_to_multiple(plane, factor), factor);
  if (mask.is_hard()) {
    for (double& v : down.data()) v = v >= 0.5 ? 1.0 : 0.0;
  } else {
    for (double& v : down.data()) v = std::clamp(v, 0.0, 1.0);
  }
  return PixelMask(down.height(), down.width(), std::move(down.vec()), mask.kind());
}

Grid resize(const Grid& image, int out_height, int out_width, Interpolation interp) {
  require(out_height > 0 && out_width > 0, "resize: output size must be positive");
  const auto row_taps = resample_taps(image.height(), out_height, interp);
  const auto col_taps = resample_taps(image.width(), out_width, interp);
  Grid tmp(image.channels(), image.height(), out_width);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < image.height(); ++y) {
      for (int ox = 0; ox < out_width; ++ox) {
        double acc = 0.0;
        for (const Tap& t : col_taps[static_cast<std::size_t>(ox)]) acc += t.weight * image.at(c, y, t.index);
        tmp.at(c, y, ox) = acc;
      }
    }
  }
  Grid out(image.channels(), out_height, out_width);
  for (int c = 0; c < image.channels(); ++c) {
    for (int oy = 0; oy < out_height; ++oy) {
      for (int ox = 0; ox < out_width; ++ox) {
        double acc = 0.0;
        for (const Tap& t : row_taps[static_cast<std::size_t>(oy)]) acc += t.weight * tmp.at(c, t.index, ox);
        out.at(c, oy, ox) = acc;
      }
    }
  }
  return out;
}

Grid area_downsample(const Grid& image, int factor) {
  require(factor >= 1, "area_downsample: factor must be >= 1");
  require(image.height() % factor == 0 && image.width() % factor == 0,
          "area_downsample: dimensions not divisible by factor");
  const int oh = image.height() / factor;
  const int ow = image.width() / factor;
  Grid out(image.channels(), oh, ow);
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int c = 0; c < image.channels(); ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) acc += image.at(c, oy * factor + dy, ox * factor + dx);
        }
        out.at(c, oy, ox) = acc * inv;
      }
    }
  }
  return out;
}

Grid upsample_nearest(const Grid& image, int factor) {
  require(factor >= 1, "upsample_nearest: factor must be >= 1");
  Grid out(image.channels(), image.height() * factor, image.width() * factor);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) out.at(c, y, x) = image.at(c, y / factor, x / factor);
    }
  }
  return out;
}

Grid pad_reflect_to_multiple(const Grid& image, int multiple) {
  require(multiple >= 1, "pad_reflect_to_multiple: multiple must be >= 1");
  const int h = (image.height() + multiple - 1) / multiple * multiple;
  const int w = (image.width() + multiple - 1) / multiple * multiple;
  if (h == image.height() && w == image.width()) return image;
  Grid out(image.channels(), h, w);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      const int sy = reflect_index(y, image.height());
      for (int x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, sy, reflect_index(x, image.width()));
    }
  }
  return out;
}

Grid crop(const Grid& image, int top, int left, int height, int width) {
  require(top >= 0 && left >= 0 && height > 0 && width > 0 && top + height <= image.height() &&
              left + width <= image.width(),
          "crop: window outside image");
  Grid out(image.channels(), height, width);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, top + y, left + x);
    }
  }
  return out;
}

double mean_squared_error(const Grid& a, const Grid& b) {
  require(a.same_shape(b), "mean_squared_error: shape mismatch");
  require(a.size() > 0, "mean_squared_error: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr(const Grid& a, const Grid& b) {
  require(a.same_shape(b), "psnr: shape mismatch");
  const double mse = mean_squared_error(a, b);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

double psnr(const Frame& a, const Frame& b) { return psnr(a.pixels(), b.pixels()); }

}  // namespace osdvsr
