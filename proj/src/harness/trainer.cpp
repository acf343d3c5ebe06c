// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/harness/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "osdvsr/afat/afat.hpp"
#include "osdvsr/autograd/ops.hpp"
#include "osdvsr/core/geometry.hpp"
#include "osdvsr/data/dataset.hpp"
#include "osdvsr/data/demo.hpp"

namespace osdvsr::harness {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Sets requires_grad on a list and restores the previous flags on exit.
class GradScope {
 public:
  GradScope(const nets::ParameterList& params, bool flag) : params_(params) {
    for (const auto& p : params_) {
      flags_.push_back(p.tensor.requires_grad());
      ag::Tensor t = p.tensor;
      t.set_requires_grad(flag);
    }
  }
  ~GradScope() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ag::Tensor t = params_[i].tensor;
      t.set_requires_grad(flags_[i]);
    }
  }
  GradScope(const GradScope&) = delete;
  GradScope& operator=(const GradScope&) = delete;

 private:
  nets::ParameterList params_;
  std::vector<bool> flags_;
};

ag::Tensor accumulate(const ag::Tensor& acc, const ag::Tensor& x) { return acc.defined() ? ag::add(acc, x) : x; }

ag::Tensor average(const ag::Tensor& acc, std::size_t n) {
  if (!acc.defined() || n == 0) return {};
  return ag::scale(acc, 1.0 / static_cast<double>(n));
}

std::vector<const Frame*> all_frames(const std::vector<VideoClip>& clips) {
  std::vector<const Frame*> out;
  for (const auto& c : clips)
    for (const auto& f : c.frames()) out.push_back(&f);
  return out;
}

}  // namespace

std::unique_ptr<flow::FlowEstimator> make_flow(const RunConfig& cfg) {
  return std::make_unique<flow::BlockMatchingFlow>(cfg.flow_radius, cfg.flow_block);
}

TrainSample make_train_sample(const VideoClip& hr, const VideoClip& lr, const flow::FlowEstimator& flow,
                              const flow::WarpConfidenceParams& conf) {
  require(hr.size() == lr.size(), "make_train_sample: HR and LR frame counts differ");
  require(hr.height() == 4 * lr.height() && hr.width() == 4 * lr.width(), "make_train_sample: HR must be 4x LR");
  TrainSample s;
  s.hr = hr;
  s.prepared = prepare_clip(lr, flow, conf);
  s.flows_hr.emplace_back(hr.height(), hr.width());
  for (std::size_t i = 1; i < hr.size(); ++i) s.flows_hr.push_back(flow.estimate(hr[i - 1], hr[i]));
  return s;
}

double autoencoder_psnr(const Model& model, const std::vector<VideoClip>& clips) {
  GradScope off(model.parameters(), false);
  double total = 0.0;
  std::size_t n = 0;
  for (const Frame* f : all_frames(clips)) {
    const Grid rec = model.decoder.forward(model.encoder.forward(ag::Tensor::from_grid(f->pixels()))).to_grid();
    total += psnr(rec, f->pixels());
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

PretrainReport pretrain(Model& model, const std::vector<VideoClip>& hr_clips, const RunConfig& cfg) {
  PretrainReport rep;
  const auto frames = all_frames(hr_clips);
  require(!frames.empty(), "pretrain: no frames");
  const auto all = model.parameters();
  nets::set_trainable(all, false);
  const auto batch = static_cast<std::size_t>(cfg.pretrain_batch);

  if (cfg.pretrain_vae_steps > 0) {
    nets::ParameterList params = model.group("encoder_base");
    for (auto& p : model.group("decoder")) params.push_back(p);
    nets::set_trainable(params, true);
    AdamW opt(params, cfg.pretrain_lr, 0.0);
    for (int step = 0; step < cfg.pretrain_vae_steps; ++step) {
      auto rng = data::keyed_rng({cfg.seed, static_cast<std::uint64_t>(step), 0x7ae0ULL});
      std::uniform_int_distribution<std::size_t> pick(0, frames.size() - 1);
      opt.zero_grad();
      ag::Tensor loss;
      for (std::size_t b = 0; b < batch; ++b) {
        const ag::Tensor x = ag::Tensor::from_grid(frames[pick(rng)]->pixels());
        const ag::Tensor rec = model.decoder.forward(model.encoder.forward(x));
        loss = accumulate(loss, ag::mean(ag::square(ag::sub(rec, x))));
      }
      loss = average(loss, batch);
      loss.backward();
      opt.step();
      rep.vae_loss.push_back(loss.item());
    }
    nets::set_trainable(params, false);
  }
  rep.vae_psnr_db = autoencoder_psnr(model, hr_clips);

  if (cfg.pretrain_unet_steps > 0) {
    std::vector<ag::Tensor> latents;
    for (const Frame* f : frames) latents.push_back(model.encoder.forward(ag::Tensor::from_grid(f->pixels())));
    const nets::ParameterList params = model.group("unet_base");
    nets::set_trainable(params, true);
    AdamW opt(params, cfg.pretrain_lr, 0.0);
    const int T = model.schedule.total_steps();
    for (int step = 0; step < cfg.pretrain_unet_steps; ++step) {
      auto rng = data::keyed_rng({cfg.seed, static_cast<std::uint64_t>(step), 0x0e75ULL});
      std::uniform_int_distribution<std::size_t> pick(0, latents.size() - 1);
      std::uniform_int_distribution<int> pick_t(1, T);
      std::normal_distribution<double> normal(0.0, 1.0);
      opt.zero_grad();
      ag::Tensor loss;
      for (std::size_t b = 0; b < batch; ++b) {
        const ag::Tensor& z = latents[pick(rng)];
        const int t = pick_t(rng);
        std::vector<double> e(z.numel());
        for (double& v : e) v = normal(rng);
        const ag::Tensor eps = ag::Tensor::constant(z.shape(), std::move(e));
        const ag::Tensor zt = diffusion::add_noise(z, t, eps, model.schedule);
        loss = accumulate(loss, ag::mean(ag::square(ag::sub(model.unet.forward(zt, t, model.conditioning), eps))));
      }
      loss = average(loss, batch);
      loss.backward();
      opt.step();
      rep.unet_loss.push_back(loss.item());
    }
  }
  model.unet.reset_invocations();
  nets::set_trainable(all, true);
  return rep;
}

GeneratorLosses generator_losses(const std::vector<ag::Tensor>& preds, const TrainSample& sample, const Model& model,
                                 const objectives::PerceptualFeatureExtractor& extractor, const RunConfig& cfg) {
  require(preds.size() == sample.hr.size(), "generator_losses: one prediction per frame required");
  const std::size_t n = preds.size();
  ag::Tensor gan, fmse, lpips, warp;
  for (std::size_t i = 0; i < n; ++i) {
    const Frame& gt = sample.hr[i];
    const ag::Tensor target = ag::Tensor::from_grid(gt.pixels());
    const ag::Tensor& pred = preds[i];
    if (i == 0) {
      const PixelMask ones(gt.height(), gt.width(), 1.0, MaskKind::kSoft);
      fmse = accumulate(fmse, afat::focal_mse(pred, target, ones, 0.0));
    } else {
      const ag::Tensor f_prev = model.discriminator.forward(ag::Tensor::from_grid(sample.hr[i - 1].pixels())).detach();
      const ag::Tensor f_fake = model.discriminator.forward(pred);
      gan = accumulate(gan, afat::generator_adv_loss(f_prev, f_fake));
      const int p = model.discriminator.patch_size();
      const PixelMask s = afat::focal_modulator(afat::PatchFeatureGrid(f_prev.to_grid(), p),
                                                afat::PatchFeatureGrid(f_fake.to_grid(), p), gt.height(), gt.width());
      fmse = accumulate(fmse, afat::focal_mse(pred, target, s, cfg.gamma));
      if (cfg.w_warp > 0.0)
        warp = accumulate(warp, objectives::warp_loss(pred, sample.hr[i - 1], gt, sample.flows_hr[i], cfg.alpha));
    }
    if (cfg.w_lpips > 0.0) lpips = accumulate(lpips, objectives::perceptual_loss(pred, target, extractor));
  }
  GeneratorLosses out;
  out.terms.gan = average(gan, n - 1);
  out.terms.fmse = average(fmse, n);
  out.terms.lpips = average(lpips, n);
  out.terms.warp = average(warp, n - 1);
  const objectives::LossWeights w{cfg.w_gan, cfg.w_fmse, cfg.w_lpips, cfg.w_warp};
  out.total = objectives::total_loss(out.terms, w);
  auto val = [](const ag::Tensor& t) { return t.defined() ? t.item() : 0.0; };
  out.values = {val(out.terms.gan), val(out.terms.fmse), val(out.terms.lpips), val(out.terms.warp)};
  return out;
}

ag::Tensor critic_loss(const std::vector<ag::Tensor>& preds, const TrainSample& sample, const Model& model,
                       double tau) {
  require(preds.size() == sample.hr.size(), "critic_loss: one prediction per frame required");
  ag::Tensor acc;
  for (std::size_t i = 1; i < preds.size(); ++i) {
    const ag::Tensor f_prev = model.discriminator.forward(ag::Tensor::from_grid(sample.hr[i - 1].pixels()));
    const ag::Tensor f_real = model.discriminator.forward(ag::Tensor::from_grid(sample.hr[i].pixels()));
    const ag::Tensor f_fake = model.discriminator.forward(preds[i].detach());
    acc = accumulate(acc, afat::discriminator_loss(f_prev, f_real, f_fake, tau));
  }
  return average(acc, preds.size() - 1);
}

TrainState TrainState::begin(Model model, const RunConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.model = std::move(model);
  s.cfg = cfg;
  s.model.enter_finetune_regime();
  s.gen_opt = AdamW(s.model.generator_trainable(), cfg.gen_lr, cfg.gen_weight_decay, cfg.adam_beta1, cfg.adam_beta2,
                    cfg.adam_eps);
  s.disc_opt = SgdWarmup(s.model.discriminator_params(), cfg.disc_lr, cfg.disc_warmup);
  s.extractor = std::make_shared<objectives::ToyPerceptualExtractor>(s.model.image_channels, cfg.seed + 17);
  return s;
}

StepResult train_step(TrainState& state, const std::vector<const TrainSample*>& batch, const PhaseObserver& observer) {
  require(!batch.empty(), "train_step: empty batch");
  const RunConfig& cfg = state.cfg;
  Model& model = state.model;
  ++state.iteration;
  StepResult result;

  std::vector<std::vector<ag::Tensor>> preds(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t i = 0; i < batch[b]->hr.size(); ++i) preds[b].push_back(generate_frame(model, batch[b]->prepared, i));

  auto disc_backward = [&]() {
    state.disc_opt.zero_grad();
    ag::Tensor loss;
    std::size_t n = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const ag::Tensor l = critic_loss(preds[b], *batch[b], model, cfg.tau);
      if (!l.defined()) continue;
      loss = accumulate(loss, l);
      ++n;
    }
    if (!loss.defined()) return;
    loss = average(loss, n);
    result.disc_loss = loss.item();
    if (!std::isfinite(result.disc_loss)) {
      std::ostringstream os;
      os << "non-finite discriminator loss at step " << state.iteration << ": " << result.disc_loss;
      throw PoisonedLossError(os.str());
    }
    loss.backward();
  };

  auto gen_backward = [&]() {
    GradScope frozen_disc(model.discriminator_params(), false);
    state.gen_opt.zero_grad();
    ag::Tensor total;
    objectives::LossComponents sum;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      GeneratorLosses g;
      try {
        g = generator_losses(preds[b], *batch[b], model, *state.extractor, cfg);
      } catch (const PoisonedLossError& e) {
        throw PoisonedLossError("step " + std::to_string(state.iteration) + ", sample " + std::to_string(b) + ": " +
                                e.what());
      }
      total = accumulate(total, g.total);
      sum.gan += g.values.gan;
      sum.fmse += g.values.fmse;
      sum.lpips += g.values.lpips;
      sum.warp += g.values.warp;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    total = ag::scale(total, inv);
    result.gen_total = total.item();
    result.gen = {sum.gan * inv, sum.fmse * inv, sum.lpips * inv, sum.warp * inv};
    total.backward();
  };

  auto notify = [&](const char* phase) {
    if (observer) observer(phase);
  };

  if (cfg.update_scheme == UpdateScheme::kSimultaneous) {
    disc_backward();
    gen_backward();
    state.disc_opt.step();
    state.gen_opt.step();
    notify("simultaneous");
  } else if (cfg.update_order == UpdateOrder::kDiscriminatorFirst) {
    disc_backward();
    state.disc_opt.step();
    notify("discriminator");
    gen_backward();
    state.gen_opt.step();
    notify("generator");
  } else {
    gen_backward();
    state.gen_opt.step();
    notify("generator");
    disc_backward();
    state.disc_opt.step();
    notify("discriminator");
  }
  result.disc_lr = state.disc_opt.lr_at(state.disc_opt.steps_taken());
  return result;
}

TrainRun run_training(const RunConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  TrainRun run;
  const auto flow = make_flow(cfg);
  const flow::WarpConfidenceParams conf{cfg.alpha, cfg.mu};

  std::vector<VideoClip> lr_clips;
  if (cfg.data_root.empty()) {
    run.hr_clips = data::make_demo_set(cfg.num_clips, cfg.clip_length, cfg.crop, cfg.seed);
    for (std::size_t k = 0; k < run.hr_clips.size(); ++k)
      lr_clips.push_back(data::degrade_clip(run.hr_clips[k], cfg.degradation_cfg, k));
  } else {
    data::DatasetOptions opts;
    opts.clip_length = cfg.clip_length;
    opts.crop = cfg.crop;
    opts.degradation = cfg.degradation_cfg;
    opts.seed = cfg.seed;
    const auto ds = data::ClipDataset::from_directory(cfg.data_root, opts);
    for (std::size_t k = 0; k < ds.size(); ++k) {
      data::Sample s = ds.get(k);
      run.hr_clips.push_back(std::move(s.hr));
      lr_clips.push_back(std::move(s.lr));
    }
  }
  for (std::size_t k = 0; k < run.hr_clips.size(); ++k)
    run.samples.push_back(make_train_sample(run.hr_clips[k], lr_clips[k], *flow, conf));

  auto t0 = std::chrono::steady_clock::now();
  Model model = Model::create(cfg, run.hr_clips.front().channels());
  run.log.pretrain = pretrain(model, run.hr_clips, cfg);
  run.log.pretrain_seconds = seconds_since(t0);

  run.state = TrainState::begin(std::move(model), cfg);
  const std::size_t n = run.samples.size();
  const auto bs = std::min(static_cast<std::size_t>(cfg.batch_size), n);
  const std::size_t per_epoch = (n + bs - 1) / bs;
  const long long total = cfg.steps > 0 ? cfg.steps : static_cast<long long>(cfg.epochs) * static_cast<long long>(per_epoch);

  t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(n);
  for (long long step = 0; step < total; ++step) {
    const auto epoch = static_cast<std::uint64_t>(step) / per_epoch;
    const std::size_t slot = static_cast<std::size_t>(step) % per_epoch;
    if (slot == 0) {
      std::iota(order.begin(), order.end(), 0);
      auto rng = data::keyed_rng({cfg.seed, epoch, 0xba7cULL});
      std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<const TrainSample*> batch;
    for (std::size_t j = 0; j < bs; ++j) batch.push_back(&run.samples[order[(slot * bs + j) % n]]);
    const StepResult r = train_step(run.state, batch);
    run.log.gen_total.push_back(r.gen_total);
    run.log.disc_loss.push_back(r.disc_loss);
    run.log.components.push_back(r.gen);
    if (progress) progress(step + 1, r);
  }
  run.log.train_seconds = seconds_since(t0);
  return run;
}

VideoClip infer_clip(const VideoClip& lr, const Model& model, const flow::FlowEstimator& flow) {
  GradScope off(model.parameters(), false);
  const PreparedClip p = prepare_clip(lr, flow, model.mff.confidence);
  std::vector<Frame> out;
  for (std::size_t i = 0; i < lr.size(); ++i)
    out.push_back(clamp_to_frame(generate_frame(model, p, i).to_grid(), lr[i].index()));
  return VideoClip(std::move(out), ScaleTag::kHighRes);
}

}  // namespace osdvsr::harness
