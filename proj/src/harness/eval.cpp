// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/harness/eval.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "osdvsr/core/frame_io.hpp"
#include "osdvsr/core/geometry.hpp"

namespace osdvsr::harness {

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json metrics_object(const EvalReport& r) {
  nlohmann::json j;
  j["clips"] = nlohmann::json::array();
  for (const auto& c : r.clips) {
    j["clips"].push_back({{"name", c.name},
                          {"frames", c.frames},
                          {"psnr_db", opt(c.psnr_db)},
                          {"warping_error_e3", opt(c.warping_error)}});
  }
  j["aggregate"] = {{"psnr_db", opt(r.mean_psnr_db)}, {"warping_error_e3", opt(r.mean_warping_error)}};
  j["warnings"] = r.warnings;
  j["loss_curve"] = r.loss_curve;
  return j;
}

}  // namespace

double warping_error(const VideoClip& clip, const flow::FlowEstimator& flow, double alpha) {
  require(clip.size() >= 2, "warping_error: need at least two frames");
  require(alpha >= 0.0, "warping_error: alpha must be >= 0");
  double total = 0.0;
  for (std::size_t i = 1; i < clip.size(); ++i) {
    const Frame& prev = clip[i - 1];
    const Frame& curr = clip[i];
    const Grid warped = warp(prev.pixels(), flow.estimate(prev, curr));
    double num = 0.0;
    double den = 0.0;
    for (int y = 0; y < curr.height(); ++y) {
      for (int x = 0; x < curr.width(); ++x) {
        double l1 = 0.0;
        double sq = 0.0;
        for (int c = 0; c < curr.channels(); ++c) {
          const double d = curr.pixels().at(c, y, x) - warped.at(c, y, x);
          l1 += std::abs(d);
          sq += d * d;
        }
        const double m = std::exp(-alpha * l1);
        num += m * sq / curr.channels();
        den += m;
      }
    }
    total += den > 0.0 ? num / den : 0.0;
  }
  return total / static_cast<double>(clip.size() - 1) * kWarpErrorScale;
}

EvalReport evaluate(const std::vector<EvalPair>& pairs, const flow::FlowEstimator& flow, double alpha) {
  EvalReport r;
  double psnr_sum = 0.0;
  double warp_sum = 0.0;
  int psnr_n = 0;
  int warp_n = 0;
  for (const auto& p : pairs) {
    ClipMetrics m;
    m.name = p.name;
    m.frames = static_cast<int>(p.output.size());
    if (p.reference) {
      const VideoClip& ref = *p.reference;
      require(ref.size() == p.output.size(), "evaluate: '" + p.name + "' frame count differs from reference");
      double s = 0.0;
      for (std::size_t i = 0; i < ref.size(); ++i) {
        require(ref[i].pixels().same_shape(p.output[i].pixels()),
                "evaluate: '" + p.name + "' frame shape differs from reference");
        s += psnr(p.output[i], ref[i]);
      }
      m.psnr_db = s / static_cast<double>(ref.size());
      psnr_sum += *m.psnr_db;
      ++psnr_n;
    } else {
      r.warnings.push_back("no reference for '" + p.name + "': PSNR omitted");
    }
    if (p.output.size() >= 2) {
      m.warping_error = warping_error(p.output, flow, alpha);
      warp_sum += *m.warping_error;
      ++warp_n;
    } else {
      r.warnings.push_back("'" + p.name + "' has a single frame: warping error omitted");
    }
    r.clips.push_back(std::move(m));
  }
  if (psnr_n) r.mean_psnr_db = psnr_sum / psnr_n;
  if (warp_n) r.mean_warping_error = warp_sum / warp_n;
  return r;
}

std::string EvalReport::metrics_json() const { return metrics_object(*this).dump(); }

std::string EvalReport::to_json(int indent) const {
  nlohmann::json j = metrics_object(*this);
  j["timings_s"] = timings_s;
  return j.dump(indent);
}

void write_curve_plot(const std::filesystem::path& path, const std::vector<std::vector<double>>& curves, int width,
                      int height) {
  require(width >= 64 && height >= 64, "write_curve_plot: canvas too small");
  Grid img(3, height, width, 1.0);
  double lo = INFINITY;
  double hi = -INFINITY;
  std::size_t len = 0;
  for (const auto& c : curves) {
    for (double v : c) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    len = std::max(len, c.size());
  }
  const int margin = 16;
  // axes
  for (int x = margin; x < width - margin; ++x)
    for (int c = 0; c < 3; ++c) img.at(c, height - margin, x) = 0.0;
  for (int y = margin; y <= height - margin; ++y)
    for (int c = 0; c < 3; ++c) img.at(c, y, margin) = 0.0;
  if (len >= 2 && hi >= lo) {
    if (hi == lo) hi = lo + 1.0;
    static constexpr double kColors[][3] = {{0.1, 0.3, 0.8}, {0.85, 0.3, 0.1}, {0.1, 0.6, 0.2}, {0.5, 0.1, 0.6}};
    const double sx = static_cast<double>(width - 2 * margin - 1) / static_cast<double>(len - 1);
    const double sy = static_cast<double>(height - 2 * margin - 1) / (hi - lo);
    for (std::size_t k = 0; k < curves.size(); ++k) {
      const auto& col = kColors[k % 4];
      const auto& c = curves[k];
      for (std::size_t i = 1; i < c.size(); ++i) {
        if (!std::isfinite(c[i - 1]) || !std::isfinite(c[i])) continue;
        const double x0 = margin + sx * static_cast<double>(i - 1);
        const double x1 = margin + sx * static_cast<double>(i);
        const double y0 = height - margin - sy * (c[i - 1] - lo);
        const double y1 = height - margin - sy * (c[i] - lo);
        const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
        for (int s = 0; s <= steps; ++s) {
          const double t = static_cast<double>(s) / steps;
          const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
          const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
          if (x < 0 || y < 0 || x >= width || y >= height) continue;
          for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = col[ch];
        }
      }
    }
  }
  io::write_png(path, img);
}

}  // namespace osdvsr::harness
