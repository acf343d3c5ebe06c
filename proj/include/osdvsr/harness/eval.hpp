// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osdvsr/core/types.hpp"
#include "osdvsr/flow/flow.hpp"

namespace osdvsr::harness {

/// Multiplier applied to the raw warping error for reporting.
inline constexpr double kWarpErrorScale = 1e3;

/// For each consecutive pair, the confidence-weighted MSE between frame i and
/// frame i-1 warped onto it (flow estimated on the clip itself), weights
/// exp(-alpha * channel-summed L1), normalized by the weight sum; averaged over
/// pairs and multiplied by kWarpErrorScale.
double warping_error(const VideoClip& clip, const flow::FlowEstimator& flow, double alpha = 50.0);

struct ClipMetrics {
  std::string name;
  int frames = 0;
  std::optional<double> psnr_db;  // mean of per-frame PSNR, needs a reference
  std::optional<double> warping_error;
};

struct EvalReport {
  std::vector<ClipMetrics> clips;
  std::optional<double> mean_psnr_db;
  std::optional<double> mean_warping_error;
  std::vector<std::string> warnings;
  std::vector<double> loss_curve;
  std::map<std::string, double> timings_s;

  /// Everything except wall-clock timings, as canonical JSON text.
  [[nodiscard]] std::string metrics_json() const;
  [[nodiscard]] std::string to_json(int indent = 2) const;
};

struct EvalPair {
  std::string name;
  VideoClip output;
  std::optional<VideoClip> reference;
};

/// PSNR where a reference exists (a missing reference is a warning, not an
/// error); warping error on every clip with at least two frames.
EvalReport evaluate(const std::vector<EvalPair>& pairs, const flow::FlowEstimator& flow, double alpha = 50.0);

/// Renders one or more curves into a PNG line plot (white background,
/// min/max autoscaled).
void write_curve_plot(const std::filesystem::path& path, const std::vector<std::vector<double>>& curves,
                      int width = 640, int height = 360);

}  // namespace osdvsr::harness
