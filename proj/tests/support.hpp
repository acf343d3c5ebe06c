// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: random inputs, a central-difference gradient checker,
// and brute-force scalar oracles written independently of the library code.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "osdvsr/autograd/tensor.hpp"
#include "osdvsr/core/types.hpp"

namespace osdvsr::testing {

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline Grid random_grid(int c, int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  return Grid(c, h, w, random_values(static_cast<std::size_t>(c) * h * w, seed, lo, hi));
}

inline ag::Tensor random_param(const ag::Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return ag::Tensor::parameter(shape, random_values(ag::numel(shape), seed, lo, hi));
}

using ScalarFn = std::function<ag::Tensor(const std::vector<ag::Tensor>&)>;

/// Worst norm-wise relative error, over the leaves, between the analytic
/// gradient and central differences: |g_a - g_fd|_2 / max(|g_a|_2, |g_fd|_2).
/// Leaves whose gradients are both below `floor` in norm count as agreeing.
inline double gradcheck(const ScalarFn& f, std::vector<ag::Tensor> leaves, double h = 1e-6, double floor = 1e-10) {
  for (auto& l : leaves) l.zero_grad();
  const ag::Tensor out = f(leaves);
  out.backward();
  double worst = 0.0;
  for (auto& leaf : leaves) {
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    std::vector<double> numeric(leaf.numel());
    auto vals = leaf.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double up = f(leaves).item();
      vals[i] = keep - h;
      const double down = f(leaves).item();
      vals[i] = keep;
      numeric[i] = (up - down) / (2.0 * h);
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    if (scale < floor) continue;
    worst = std::max(worst, std::sqrt(diff) / scale);
  }
  return worst;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace oracle {

inline double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Bilinear sample at (x + dx, y + dy) with the coordinate clamped inside.
inline Grid warp(const Grid& img, const FlowField& f) {
  Grid out(img.channels(), img.height(), img.width());
  const int H = img.height(), W = img.width();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double sx = clampd(x + f.dx(y, x), 0.0, W - 1.0);
      const double sy = clampd(y + f.dy(y, x), 0.0, H - 1.0);
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double ax = sx - x0, ay = sy - y0;
      for (int c = 0; c < img.channels(); ++c) {
        out.at(c, y, x) = (1 - ay) * ((1 - ax) * img.at(c, y0, x0) + ax * img.at(c, y0, x1)) +
                          ay * ((1 - ax) * img.at(c, y1, x0) + ax * img.at(c, y1, x1));
      }
    }
  }
  return out;
}

inline double psnr(const Grid& a, const Grid& b) {
  double s = 0.0;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x) {
        const double d = a.at(c, y, x) - b.at(c, y, x);
        s += d * d;
      }
  const double mse = s / static_cast<double>(a.size());
  return mse == 0.0 ? 100.0 : 10.0 * std::log10(1.0 / mse);
}

inline double cosine_at(const Grid& a, const Grid& b, int p, int q) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int d = 0; d < a.channels(); ++d) {
    dot += a.at(d, p, q) * b.at(d, p, q);
    na += a.at(d, p, q) * a.at(d, p, q);
    nb += b.at(d, p, q) * b.at(d, p, q);
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double discriminator_loss(const Grid& prev, const Grid& real, const Grid& fake, double tau) {
  double s = 0.0;
  for (int p = 0; p < prev.height(); ++p)
    for (int q = 0; q < prev.width(); ++q) {
      const double er = std::exp(cosine_at(prev, real, p, q) / tau);
      const double ef = std::exp(cosine_at(prev, fake, p, q) / tau);
      s += -std::log(er / (er + ef));
    }
  return s / static_cast<double>(prev.height() * prev.width());
}

inline double generator_loss(const Grid& prev, const Grid& fake) {
  double s = 0.0;
  for (int p = 0; p < prev.height(); ++p)
    for (int q = 0; q < prev.width(); ++q) s += cosine_at(prev, fake, p, q);
  return -s / static_cast<double>(prev.height() * prev.width());
}

inline std::vector<double> focal_modulator(const Grid& prev, const Grid& fake, int n, int H, int W) {
  std::vector<double> s(static_cast<std::size_t>(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) s[static_cast<std::size_t>(y) * W + x] = (1.0 - cosine_at(prev, fake, y / n, x / n)) / 2.0;
  return s;
}

inline double focal_mse(const Grid& pred, const Grid& target, const std::vector<double>& s, double gamma) {
  double total = 0.0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      double e = 0.0;
      for (int c = 0; c < pred.channels(); ++c) e += std::pow(pred.at(c, y, x) - target.at(c, y, x), 2);
      total += std::pow(s[static_cast<std::size_t>(y) * pred.width() + x], gamma) * e / pred.channels();
    }
  return total / static_cast<double>(pred.height() * pred.width());
}

// Full multi-head attention fusion, site by site, with explicit matrices.
// wq, wk: heads x dk x d row-major.
inline Grid attention_fuse(const Grid& prev, const Grid& curr, const Grid& next, const std::vector<double>& mask,
                           const std::vector<double>& wq, const std::vector<double>& wk, int heads, int dk) {
  const int d = curr.channels();
  Grid out(d, curr.height(), curr.width());
  for (int y = 0; y < curr.height(); ++y) {
    for (int x = 0; x < curr.width(); ++x) {
      double X[3][16];
      const Grid* g[3] = {&prev, &curr, &next};
      for (int j = 0; j < 3; ++j)
        for (int c = 0; c < d; ++c) X[j][c] = g[j]->at(c, y, x);
      double Abar[3][3] = {};
      for (int m = 0; m < heads; ++m) {
        double Q[3][16] = {}, K[3][16] = {};
        for (int j = 0; j < 3; ++j)
          for (int e = 0; e < dk; ++e)
            for (int c = 0; c < d; ++c) {
              Q[j][e] += wq[(static_cast<std::size_t>(m) * dk + e) * d + c] * X[j][c];
              K[j][e] += wk[(static_cast<std::size_t>(m) * dk + e) * d + c] * X[j][c];
            }
        for (int r = 0; r < 3; ++r) {
          double l[3], z = 0.0;
          for (int j = 0; j < 3; ++j) {
            l[j] = 0.0;
            for (int e = 0; e < dk; ++e) l[j] += Q[r][e] * K[j][e];
            l[j] = std::exp(l[j] / std::sqrt(static_cast<double>(dk)));
            z += l[j];
          }
          for (int j = 0; j < 3; ++j) Abar[r][j] += l[j] / z / heads;
        }
      }
      const double m = mask[static_cast<std::size_t>(y) * curr.width() + x];
      for (int c = 0; c < d; ++c) {
        double fused = 0.0;
        for (int r = 0; r < 3; ++r)
          for (int j = 0; j < 3; ++j) fused += Abar[r][j] * X[j][c];
        fused /= 3.0;
        out.at(c, y, x) = m * fused + (1.0 - m) * X[1][c];
      }
    }
  }
  return out;
}

inline std::vector<double> warp_confidence(const Grid& curr, const std::vector<Grid>& neighbors, double alpha) {
  std::vector<double> out(curr.plane_size());
  for (int y = 0; y < curr.height(); ++y)
    for (int x = 0; x < curr.width(); ++x) {
      double e = 0.0;
      for (const auto& n : neighbors)
        for (int c = 0; c < curr.channels(); ++c) e += std::abs(n.at(c, y, x) - curr.at(c, y, x));
      out[static_cast<std::size_t>(y) * curr.width() + x] = std::exp(-alpha * e);
    }
  return out;
}

inline double warp_loss(const Grid& pred, const Grid& gt_prev, const Grid& gt_curr, const FlowField& f, double alpha) {
  const Grid w = oracle::warp(gt_prev, f);
  double total = 0.0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      double l1 = 0.0, sq = 0.0;
      for (int c = 0; c < pred.channels(); ++c) {
        l1 += std::abs(gt_curr.at(c, y, x) - w.at(c, y, x));
        sq += std::pow(pred.at(c, y, x) - w.at(c, y, x), 2);
      }
      total += std::exp(-alpha * l1) * sq / pred.channels();
    }
  return total / static_cast<double>(pred.height() * pred.width());
}

inline std::vector<double> gaussian(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k;
  double s = 0.0;
  for (int i = -r; i <= r; ++i) {
    k.push_back(std::exp(-0.5 * i * i / (sigma * sigma)));
    s += k.back();
  }
  for (double& v : k) v /= s;
  return k;
}

}  // namespace oracle
}  // namespace osdvsr::testing
