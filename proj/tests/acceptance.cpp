// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one line per criterion, nonzero exit if any fails.
// Runs three toy trainings (two identical with fusion, one without), which
// takes a few minutes on one core.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "osdvsr/afat/afat.hpp"
#include "osdvsr/autograd/ops.hpp"
#include "osdvsr/core/geometry.hpp"
#include "osdvsr/data/demo.hpp"
#include "osdvsr/diffusion/diffusion.hpp"
#include "osdvsr/harness/eval.hpp"
#include "osdvsr/harness/trainer.hpp"
#include "osdvsr/mff/fusion.hpp"
#include "osdvsr/nets/checkpoint.hpp"
#include "osdvsr/objectives/objectives.hpp"
#include "support.hpp"

using namespace osdvsr;
using namespace osdvsr::testing;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kOracleTol = 1e-9;
constexpr double kGradTol = 1e-4;
constexpr double kRoundTripTol = 1e-9;
constexpr double kOracleBudgetS = 10.0;
constexpr double kGradBudgetS = 60.0;
constexpr double kTrainBudgetS = 600.0;
constexpr double kMinLossDecrease = 0.20;  // 30% target, 10 pp allowance
constexpr int kGradSeeds = 20;

int failures = 0;

void report(int n, bool ok, const char* name, const std::string& detail) {
  std::printf("[PRIMARY] criterion %d: %s %s %s\n", n, ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---- 1: closed-form quantities against brute-force loops -------------------

void criterion_oracles() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name = "-";
  auto track = [&](const char* name, double err) {
    if (err > worst || std::isnan(err)) {
      worst = std::isnan(err) ? INFINITY : err;
      worst_name = name;
    }
  };

  const auto sched = diffusion::NoiseSchedule::cosine(1000, 0.5);
  for (int t = 1; t <= 1000; ++t) track("schedule", std::abs(sched.alpha(t) * sched.alpha(t) + sched.beta(t) * sched.beta(t) - 1));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Grid z = random_grid(4, 8, 8, seed, -1, 1), eps = random_grid(4, 8, 8, seed + 50, -2, 2);
    const int t = 1 + static_cast<int>(seed * 97 % 1000);
    const Grid noisy = diffusion::add_noise(LatentGrid(z), t, LatentGrid(eps), sched).values();
    Grid want(4, 8, 8);
    for (std::size_t i = 0; i < z.size(); ++i) want.vec()[i] = sched.alpha(t) * z.vec()[i] + sched.beta(t) * eps.vec()[i];
    track("add_noise", max_abs_diff(noisy.data(), want.data()));

    const Grid den = diffusion::one_step_denoise(LatentGrid(z), LatentGrid(eps), sched).values();
    for (std::size_t i = 0; i < z.size(); ++i)
      want.vec()[i] = (z.vec()[i] - sched.beta_final() * eps.vec()[i]) / sched.alpha_final();
    track("one_step_denoise", max_abs_diff(den.data(), want.data()));

    const Grid p = random_grid(6, 2, 2, seed + 1, -1, 1), r = random_grid(6, 2, 2, seed + 2, -1, 1),
               f = random_grid(6, 2, 2, seed + 3, -1, 1);
    const afat::PatchFeatureGrid P(p, 4), R(r, 4), F(f, 4);
    for (double tau : {0.1, 1.0, 100.0})
      track("discriminator_loss", std::abs(afat::discriminator_loss(P, R, F, tau) - oracle::discriminator_loss(p, r, f, tau)));
    track("generator_loss", std::abs(afat::generator_adv_loss(P, F) - oracle::generator_loss(p, f)));
    const PixelMask s = afat::focal_modulator(P, F, 8, 7);
    track("focal_modulator", max_abs_diff(s.values(), oracle::focal_modulator(p, f, 4, 8, 7)));
    const Grid a = random_grid(3, 8, 7, seed + 4), b = random_grid(3, 8, 7, seed + 5);
    std::vector<double> sv(s.values().begin(), s.values().end());
    for (double g : {0.0, 1.0, 2.0}) track("focal_mse", std::abs(afat::focal_mse(Frame(a), Frame(b), s, g) - oracle::focal_mse(a, b, sv, g)));

    const Grid img = random_grid(3, 8, 8, seed + 6);
    const FlowField flow(random_grid(2, 8, 8, seed + 7, -3, 3));
    const Grid warped = warp(img, flow);
    track("warp", max_abs_diff(warped.data(), oracle::warp(img, flow).data()));

    const Grid cur = random_grid(3, 8, 8, seed + 8), nb = random_grid(3, 8, 8, seed + 9);
    const std::vector<Frame> nbs{Frame(warped), Frame(nb)};
    const double alpha = 0.5 + static_cast<double>(seed);
    const PixelMask conf = flow::warp_confidence(Frame(cur), nbs, {alpha, 0.4});
    const auto conf_want = oracle::warp_confidence(cur, {warped, nb}, alpha);
    track("warp_confidence", max_abs_diff(conf.values(), conf_want));
    const PixelMask hard = flow::binarize_confidence(conf, 0.4);
    double hard_err = 0.0;
    for (std::size_t i = 0; i < conf_want.size(); ++i) hard_err += std::abs(hard.values()[i] - (conf_want[i] > 0.4 ? 1.0 : 0.0));
    track("hard_mask", hard_err);

    track("warp_loss", std::abs(objectives::warp_loss(Frame(cur), Frame(img), Frame(nb), flow, alpha) -
                                oracle::warp_loss(cur, img, nb, flow, alpha)));

    const Grid zp = random_grid(4, 3, 3, seed + 10, -1, 1), zc = random_grid(4, 3, 3, seed + 11, -1, 1),
               zn = random_grid(4, 3, 3, seed + 12, -1, 1);
    std::vector<double> mask = random_values(9, seed + 13);
    for (double& m : mask) m = m > 0.3 ? 1.0 : 0.0;
    const auto params = mff::FusionParams::init(2, 3, 4, seed + 14, 0.7);
    const mff::FusionInput in{LatentGrid(zp), LatentGrid(zc), LatentGrid(zn),
                              PixelMask(3, 3, mask, MaskKind::kHard)};
    const Grid fused = mff::attention_fuse(in, params).values();
    const auto wq = params.w_query.values(), wk = params.w_key.values();
    track("attention_fuse", max_abs_diff(fused.data(), oracle::attention_fuse(zp, zc, zn, mask, {wq.begin(), wq.end()},
                                                                              {wk.begin(), wk.end()}, 2, 3)
                                                           .data()));

    const auto c = random_values(4, seed + 15, -3, 3);
    const objectives::LossWeights w{1.0, 1.0, 2.0, 2.0};
    track("total_loss", std::abs(objectives::total_loss({c[0], c[1], c[2], c[3]}, w) - (c[0] + c[1] + 2 * c[2] + 2 * c[3])));
  }
  const double secs = seconds_since(t0);
  report(1, worst <= kOracleTol && secs < kOracleBudgetS, "equation_oracles",
         fmt("(worst abs err %.3g in %s, tol %.0e; %.2f s of %.0f s)", worst, worst_name.c_str(), kOracleTol, secs,
             kOracleBudgetS));
}

// ---- 2: analytic against central-difference gradients ----------------------

void criterion_gradients() {
  const auto t0 = Clock::now();
  std::vector<std::pair<const char*, double>> worst;
  auto run = [&](const char* name, const std::function<double(std::uint64_t)>& one) {
    double w = 0.0;
    for (std::uint64_t s = 0; s < kGradSeeds; ++s) w = std::max(w, one(s));
    worst.emplace_back(name, w);
  };
  run("discriminator_loss", [](std::uint64_t s) {
    return gradcheck([](auto& l) { return afat::discriminator_loss(l[0], l[1], l[2], 0.7); },
                     {random_param({4, 2, 2}, s), random_param({4, 2, 2}, s + 30), random_param({4, 2, 2}, s + 60)});
  });
  run("generator_loss", [](std::uint64_t s) {
    return gradcheck([](auto& l) { return afat::generator_adv_loss(l[0], l[1]); },
                     {random_param({4, 2, 2}, s), random_param({4, 2, 2}, s + 40)});
  });
  run("focal_mse", [](std::uint64_t s) {
    const auto target = ag::Tensor::from_grid(random_grid(3, 4, 4, s + 1));
    const PixelMask m(4, 4, random_values(16, s + 2), MaskKind::kSoft);
    return gradcheck([&](auto& l) { return afat::focal_mse(l[0], target, m, 2.0); }, {random_param({3, 4, 4}, s, 0, 1)});
  });
  run("warp_loss", [](std::uint64_t s) {
    const Frame prev(random_grid(3, 6, 6, s + 1)), cur(random_grid(3, 6, 6, s + 2));
    const FlowField f(random_grid(2, 6, 6, s + 3, -1, 1));
    return gradcheck([&](auto& l) { return objectives::warp_loss(l[0], prev, cur, f, 2.0); }, {random_param({3, 6, 6}, s, 0, 1)});
  });
  run("attention_fuse", [](std::uint64_t s) {
    const std::vector<double> mask{1.0, 1.0, 0.0, 1.0};
    const auto w = ag::Tensor::constant({4, 2, 2}, random_values(16, s + 5, -1, 1));
    return gradcheck(
        [&](auto& l) { return ag::sum(ag::mul(mff::attention_fuse(l[0], l[1], l[2], mask, l[3], l[4]), w)); },
        {random_param({4, 2, 2}, s), random_param({4, 2, 2}, s + 1), random_param({4, 2, 2}, s + 2),
         random_param({2, 3, 4}, s + 3, -0.8, 0.8), random_param({2, 3, 4}, s + 4, -0.8, 0.8)});
  });
  run("one_step_denoise", [](std::uint64_t s) {
    const auto sched = diffusion::NoiseSchedule::cosine();
    const auto w = ag::Tensor::constant({2, 2, 2}, random_values(8, s, -1, 1));
    return gradcheck([&](auto& l) { return ag::sum(ag::mul(diffusion::one_step_denoise(l[0], l[1], sched), w)); },
                     {random_param({2, 2, 2}, s + 10), random_param({2, 2, 2}, s + 20)});
  });
  const double secs = seconds_since(t0);
  bool ok = secs < kGradBudgetS;
  std::string detail = "(";
  for (const auto& [name, w] : worst) {
    ok = ok && w <= kGradTol;
    detail += fmt("%s %.2g, ", name, w);
  }
  detail += fmt("tol %.0e, %d seeds each; %.2f s of %.0f s)", kGradTol, kGradSeeds, secs, kGradBudgetS);
  report(2, ok, "gradient_checks", detail);
}

// ---- 3 ---------------------------------------------------------------------

void criterion_round_trip() {
  const auto sched = diffusion::NoiseSchedule::cosine();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LatentGrid z(random_grid(4, 8, 8, seed, -2, 2)), eps(random_grid(4, 8, 8, seed + 100, -3, 3));
    const LatentGrid noisy = diffusion::add_noise(z, sched.total_steps(), eps, sched);
    const Grid back = diffusion::one_step_denoise(noisy, eps, sched).values();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) {
      num += std::pow(back.vec()[i] - z.values().vec()[i], 2);
      den += std::pow(z.values().vec()[i], 2);
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  report(3, worst <= kRoundTripTol, "diffusion_round_trip", fmt("(worst rel err %.3g over 20 seeds, tol %.0e)", worst, kRoundTripTol));
}

// ---- 4 ---------------------------------------------------------------------

void criterion_gating() {
  bool zero_ok = true, same_ok = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Grid zc = random_grid(4, 3, 5, seed, -2, 2);
    const auto params = mff::FusionParams::init(1 + static_cast<int>(seed % 3), 2 + static_cast<int>(seed % 4), 4, seed + 7,
                                                0.5 + static_cast<double>(seed % 5));
    const mff::FusionInput off{LatentGrid(random_grid(4, 3, 5, seed + 1, -2, 2)), LatentGrid(zc),
                               LatentGrid(random_grid(4, 3, 5, seed + 2, -2, 2)), PixelMask(3, 5, 0.0, MaskKind::kHard)};
    zero_ok = zero_ok && mff::attention_fuse(off, params).values() == zc;
    const mff::FusionInput same{LatentGrid(zc), LatentGrid(zc), LatentGrid(zc), PixelMask(3, 5, 1.0, MaskKind::kHard)};
    same_ok = same_ok && mff::attention_fuse(same, params).values() == zc;
  }
  report(4, zero_ok && same_ok, "mff_gating",
         fmt("(zero mask bit-exact: %s; identical tokens bit-exact over 50 draws: %s)", zero_ok ? "yes" : "no",
             same_ok ? "yes" : "no"));
}

// ---- 5 ---------------------------------------------------------------------

void criterion_partition() {
  harness::RunConfig cfg = harness::RunConfig::toy();
  cfg.crop = 32;
  cfg.num_clips = 2;
  cfg.pretrain_vae_steps = 0;
  cfg.pretrain_unet_steps = 0;
  const auto clips = data::make_demo_set(cfg.num_clips, cfg.clip_length, cfg.crop, cfg.seed);
  const auto flow = harness::make_flow(cfg);
  std::vector<harness::TrainSample> samples;
  for (std::size_t k = 0; k < clips.size(); ++k)
    samples.push_back(harness::make_train_sample(clips[k], data::degrade_clip(clips[k], cfg.degradation_cfg, k), *flow,
                                                 {cfg.alpha, cfg.mu}));
  auto state = harness::TrainState::begin(harness::Model::create(cfg), cfg);
  const auto before = nets::group_hashes(state.model.parameters());
  harness::train_step(state, {&samples[0], &samples[1]});
  const auto after = nets::group_hashes(state.model.parameters());
  bool ok = true;
  std::string detail = "(";
  for (const char* g : {"decoder", "encoder_base", "unet_base"}) {
    const bool same = before.at(g) == after.at(g);
    ok = ok && same;
    detail += fmt("%s %s, ", g, same ? "unchanged" : "CHANGED");
  }
  for (const char* g : {"encoder_lora", "unet_lora", "mff", "discriminator"}) {
    const bool moved = before.at(g) != after.at(g);
    ok = ok && moved;
    detail += fmt("%s %s, ", g, moved ? "changed" : "UNCHANGED");
  }
  detail.resize(detail.size() - 2);
  report(5, ok, "parameter_partition", detail + ")");
}

// ---- 6, 7, 10: toy trainings -----------------------------------------------

struct Trained {
  harness::TrainRun run;
  double seconds = 0.0;
  std::uint64_t checkpoint_hash = 0;
  std::string metrics;
  double heldout_warp = 0.0;
};

data::DemoSpec heldout_spec() {
  data::DemoSpec s;
  s.kind = data::DemoKind::kShift;
  s.frames = 5;
  s.seed = 4242;
  return s;
}

Trained train_and_eval(const harness::RunConfig& cfg, const VideoClip& heldout_lr, const VideoClip& heldout_hr) {
  Trained t;
  const auto t0 = Clock::now();
  t.run = harness::run_training(cfg);
  t.seconds = seconds_since(t0);
  std::uint64_t h = 0;
  (void)nets::serialize_checkpoint(cfg.to_text(), t.run.state.model.parameters(), &h);
  t.checkpoint_hash = h;

  const auto flow = harness::make_flow(cfg);
  std::vector<harness::EvalPair> pairs;
  pairs.push_back({"heldout_shift", harness::infer_clip(heldout_lr, t.run.state.model, *flow), heldout_hr});
  for (std::size_t k = 0; k < t.run.samples.size(); ++k)
    pairs.push_back({"train_" + std::to_string(k), harness::infer_clip(t.run.samples[k].prepared.lr, t.run.state.model, *flow),
                     t.run.samples[k].hr});
  auto rep = harness::evaluate(pairs, *flow);
  rep.loss_curve = t.run.log.gen_total;
  t.metrics = rep.metrics_json();
  t.heldout_warp = *rep.clips[0].warping_error;
  return t;
}

double mean(const std::vector<double>& v, std::size_t from, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = from; i < from + n; ++i) s += v[i];
  return s / static_cast<double>(n);
}

void criterion_training(const Trained& a, const harness::RunConfig& cfg) {
  const auto& g = a.run.log.gen_total;
  bool finite = g.size() == static_cast<std::size_t>(cfg.steps);
  for (double v : g) finite = finite && std::isfinite(v);
  for (double v : a.run.log.disc_loss) finite = finite && std::isfinite(v);
  if (g.size() < 20) {
    report(6, false, "toy_training", fmt("(only %zu steps logged)", g.size()));
    return;
  }
  const double first = mean(g, 0, 10), last = mean(g, g.size() - 10, 10);
  const double drop = (first - last) / std::abs(first);

  // Same measure on the non-adversarial part, which is positive throughout.
  std::vector<double> rec;
  for (const auto& c : a.run.log.components) rec.push_back(cfg.w_fmse * c.fmse + cfg.w_lpips * c.lpips + cfg.w_warp * c.warp);
  const double rfirst = mean(rec, 0, 10), rlast = mean(rec, rec.size() - 10, 10);
  const double rdrop = (rfirst - rlast) / std::abs(rfirst);

  const bool ok = finite && a.seconds <= kTrainBudgetS && drop >= kMinLossDecrease && rdrop >= kMinLossDecrease;
  report(6, ok, "toy_training",
         fmt("(%d steps, %d clips %dx%d x%d frames, %.1f s of %.0f s; total loss MA10 %.4f -> %.4f, decrease %.0f%%; "
             "reconstruction terms MA10 %.4f -> %.4f, decrease %.0f%%; need >= %.0f%%; all finite: %s)",
             cfg.steps, cfg.num_clips, cfg.crop, cfg.crop, cfg.clip_length, a.seconds, kTrainBudgetS, first, last,
             100 * drop, rfirst, rlast, 100 * rdrop, 100 * kMinLossDecrease, finite ? "yes" : "no"));
}

// ---- 8 ---------------------------------------------------------------------

void criterion_threshold(const harness::Model& model, const std::vector<VideoClip>& lr_clips, const harness::RunConfig& cfg) {
  const auto flow = harness::make_flow(cfg);
  const std::vector<double> mus{1.0, 0.6, 0.4, 0.0};
  bool monotone = true, exact = true;
  std::string detail = "(fractions";
  for (std::size_t c = 0; c < lr_clips.size(); ++c) {
    std::vector<double> frac;
    for (double mu : mus) {
      const auto prep = harness::prepare_clip(lr_clips[c], *flow, {cfg.alpha, mu});
      double s = 0.0, n = 0.0;
      for (const auto& a : prep.aligned) {
        for (double v : a.hard_mask.values()) s += v;
        n += static_cast<double>(a.hard_mask.values().size());
      }
      frac.push_back(s / n);
      if (mu == 1.0) {
        harness::Model off = model;
        off.use_mff = false;
        for (std::size_t i = 0; i < prep.lr.size(); ++i) {
          const ag::Tensor fused_t = harness::generate_frame(model, prep, i), plain_t = harness::generate_frame(off, prep, i);
          const auto fused = fused_t.values(), plain = plain_t.values();
          exact = exact && std::equal(fused.begin(), fused.end(), plain.begin(), plain.end());
        }
      }
    }
    for (std::size_t k = 1; k < frac.size(); ++k) monotone = monotone && frac[k] >= frac[k - 1];
    detail += fmt(" clip%zu [%.3f %.3f %.3f %.3f]", c, frac[0], frac[1], frac[2], frac[3]);
  }
  detail += fmt(" for mu 1.0/0.6/0.4/0.0; non-increasing in mu: %s; mu=1 equals no-fusion bit-exactly: %s)",
                monotone ? "yes" : "no", exact ? "yes" : "no");
  report(8, monotone && exact, "fusion_threshold", detail);
}

// ---- 9 ---------------------------------------------------------------------

void criterion_one_step(harness::Model model, const harness::RunConfig& cfg) {
  std::vector<Frame> frames;
  for (int i = 0; i < 10; ++i) frames.emplace_back(random_grid(3, 16, 16, 900 + i), i);
  const auto flow = harness::make_flow(cfg);
  model.unet.reset_invocations();
  const VideoClip out = harness::infer_clip(VideoClip(frames, ScaleTag::kLowRes), model, *flow);
  const auto calls = model.unet.invocations();
  report(9, calls == 10 && out.size() == 10, "one_step_inference",
         fmt("(10-frame clip: %llu noise-predictor calls, %zu output frames)", static_cast<unsigned long long>(calls),
             out.size()));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion_oracles();
  criterion_gradients();
  criterion_round_trip();
  criterion_gating();
  criterion_partition();

  harness::RunConfig cfg = harness::RunConfig::toy();
  const VideoClip heldout_hr = data::make_demo_clip(heldout_spec());
  const VideoClip heldout_lr = data::degrade_clip(heldout_hr, cfg.degradation_cfg, 999);

  std::printf("training run A (fusion on)...\n");
  std::fflush(stdout);
  const Trained a = train_and_eval(cfg, heldout_lr, heldout_hr);
  criterion_training(a, cfg);

  std::printf("training run C (fusion off)...\n");
  std::fflush(stdout);
  harness::RunConfig off_cfg = cfg;
  off_cfg.use_mff = false;
  const Trained c = train_and_eval(off_cfg, heldout_lr, heldout_hr);
  report(7, a.heldout_warp <= c.heldout_warp, "temporal_consistency",
         fmt("(held-out shift clip warping error x1e3: with fusion %.4f, without %.4f)", a.heldout_warp, c.heldout_warp));

  std::vector<VideoClip> lr_clips{heldout_lr};
  for (std::size_t k = 0; k < 3 && k < a.run.samples.size(); ++k) lr_clips.push_back(a.run.samples[k].prepared.lr);
  criterion_threshold(a.run.state.model, lr_clips, cfg);
  criterion_one_step(a.run.state.model, cfg);

  std::printf("training run B (repeat of A)...\n");
  std::fflush(stdout);
  const Trained b = train_and_eval(cfg, heldout_lr, heldout_hr);
  const bool same_ckpt = a.checkpoint_hash == b.checkpoint_hash;
  const bool same_report = a.metrics == b.metrics;
  report(10, same_ckpt && same_report, "determinism",
         fmt("(checkpoint hash %016llx vs %016llx; eval reports %s, %zu bytes)",
             static_cast<unsigned long long>(a.checkpoint_hash), static_cast<unsigned long long>(b.checkpoint_hash),
             same_report ? "identical" : "DIFFER", a.metrics.size()));

  std::printf("acceptance: %d failed, %.1f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
