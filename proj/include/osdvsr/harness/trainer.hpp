// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "osdvsr/harness/config.hpp"
#include "osdvsr/harness/model.hpp"
#include "osdvsr/harness/optim.hpp"
#include "osdvsr/objectives/objectives.hpp"

namespace osdvsr::harness {

/// One training sample with everything that does not depend on parameters
/// precomputed: LR preparation and ground-truth HR flows (flows_hr[i] maps
/// frame i into frame i - 1; flows_hr[0] is unused).
struct TrainSample {
  VideoClip hr;
  PreparedClip prepared;
  std::vector<FlowField> flows_hr;
};

TrainSample make_train_sample(const VideoClip& hr, const VideoClip& lr, const flow::FlowEstimator& flow,
                              const flow::WarpConfidenceParams& conf);

struct PretrainReport {
  std::vector<double> vae_loss;
  std::vector<double> unet_loss;
  double vae_psnr_db = 0.0;
};

/// Stand-in for loading pretrained weights: fits the VAE as an autoencoder
/// on the HR frames, then the UNet base as an epsilon predictor on the
/// encoded HR latents at random steps. Leaves every parameter trainable.
PretrainReport pretrain(Model& model, const std::vector<VideoClip>& hr_clips, const RunConfig& cfg);

/// Mean PSNR of decode(encode(frame)) over all frames.
double autoencoder_psnr(const Model& model, const std::vector<VideoClip>& clips);

struct GeneratorLosses {
  objectives::LossTerms terms;
  ag::Tensor total;
  objectives::LossComponents values;
};

/// The generator objective for one clip given its predictions (frame 0 gets
/// plain MSE and no adversarial or warp term).
GeneratorLosses generator_losses(const std::vector<ag::Tensor>& preds, const TrainSample& sample, const Model& model,
                                 const objectives::PerceptualFeatureExtractor& extractor, const RunConfig& cfg);

/// Adjacent-frame critic loss for one clip on the given (detached) predictions.
ag::Tensor critic_loss(const std::vector<ag::Tensor>& preds, const TrainSample& sample, const Model& model,
                       double tau);

struct StepResult {
  double disc_loss = 0.0;
  double gen_total = 0.0;
  objectives::LossComponents gen;
  double disc_lr = 0.0;
};

/// Everything that changes during fine-tuning.
struct TrainState {
  Model model;
  RunConfig cfg;
  AdamW gen_opt;
  SgdWarmup disc_opt;
  long long iteration = 0;
  std::shared_ptr<objectives::PerceptualFeatureExtractor> extractor;

  /// Switches the model into the fine-tune regime and builds the optimizers.
  static TrainState begin(Model model, const RunConfig& cfg);
};

/// Called with "discriminator" or "generator" right after that update.
using PhaseObserver = std::function<void(const std::string& phase)>;

/// One discriminator update and one generator update (order and scheme from
/// cfg). Throws PoisonedLossError on a non-finite loss.
StepResult train_step(TrainState& state, const std::vector<const TrainSample*>& batch,
                      const PhaseObserver& observer = {});

struct TrainLog {
  std::vector<double> gen_total;
  std::vector<double> disc_loss;
  std::vector<objectives::LossComponents> components;
  PretrainReport pretrain;
  double pretrain_seconds = 0.0;
  double train_seconds = 0.0;
};

/// Builds the data (demo set or data_root), pretrains, and runs cfg.steps
/// steps with batches drawn deterministically from (seed, iteration).
struct TrainRun {
  TrainState state;
  std::vector<TrainSample> samples;
  std::vector<VideoClip> hr_clips;
  TrainLog log;
};

using ProgressFn = std::function<void(long long step, const StepResult& r)>;

TrainRun run_training(const RunConfig& cfg, const ProgressFn& progress = {});

/// Applies the model to every frame of an LR clip.
VideoClip infer_clip(const VideoClip& lr, const Model& model, const flow::FlowEstimator& flow);

std::unique_ptr<flow::FlowEstimator> make_flow(const RunConfig& cfg);

}  // namespace osdvsr::harness
