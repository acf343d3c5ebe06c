// SPDX-License-Identifier: Apache-2.0
//
// osdvsr: train / upscale / eval / demo-data.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "osdvsr/core/frame_io.hpp"
#include "osdvsr/data/demo.hpp"
#include "osdvsr/harness/eval.hpp"
#include "osdvsr/harness/trainer.hpp"
#include "osdvsr/nets/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace osdvsr;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kConfig = 3, kIo = 4, kContract = 5, kTraining = 6 };

int fail(const char* category, const std::string& msg, int code) {
  std::cerr << "error[" << category << "]: " << msg << "\n";
  return code;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

bool has_frames(const fs::path& dir) {
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") return true;
  return false;
}

// A directory of frames is one clip; a directory of directories is many.
std::vector<std::pair<std::string, fs::path>> clip_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  if (has_frames(root)) return {{root.filename().string(), root}};
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) out.emplace_back(e.path().filename().string(), e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError("no frames or clip directories under " + root.string());
  return out;
}

int cmd_train(const std::string& config_path, const std::string& out_override) {
  harness::RunConfig cfg = harness::load_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  std::printf("training: %d steps, batch %d, mff %s, seed %llu\n", cfg.steps, cfg.batch_size, cfg.use_mff ? "on" : "off",
              static_cast<unsigned long long>(cfg.seed));
  auto run = harness::run_training(cfg, [&](long long step, const harness::StepResult& r) {
    if (cfg.log_every > 0 && step % cfg.log_every == 0)
      std::printf("step %5lld  G %.6f  D %.6f  (gan %.4f fmse %.5f lpips %.4f warp %.5f)  lr_D %.2e\n", step,
                  r.gen_total, r.disc_loss, r.gen.gan, r.gen.fmse, r.gen.lpips, r.gen.warp, r.disc_lr);
  });
  const std::uint64_t h = nets::write_checkpoint(out / "checkpoint.osd", cfg.to_text(), run.state.model.parameters());
  write_text(out / "config.txt", cfg.to_text());

  nlohmann::json j;
  j["checkpoint"] = (out / "checkpoint.osd").string();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  j["checkpoint_hash"] = hex;
  j["pretrain"] = {{"vae_psnr_db", run.log.pretrain.vae_psnr_db},
                   {"vae_steps", run.log.pretrain.vae_loss.size()},
                   {"unet_steps", run.log.pretrain.unet_loss.size()}};
  j["loss_curve"] = run.log.gen_total;
  j["disc_loss_curve"] = run.log.disc_loss;
  j["timings_s"] = {{"pretrain", run.log.pretrain_seconds}, {"train", run.log.train_seconds}};
  write_text(out / "train_report.json", j.dump(2));
  harness::write_curve_plot(out / "loss.png", {run.log.gen_total, run.log.disc_loss});
  std::printf("checkpoint %s (hash %s)\n", (out / "checkpoint.osd").c_str(), hex);
  return kOk;
}

int cmd_upscale(const fs::path& in, const fs::path& out, const fs::path& ckpt_path) {
  const nets::Checkpoint ckpt = nets::read_checkpoint(ckpt_path);
  const harness::RunConfig cfg = harness::parse_config(ckpt.config_text);
  const VideoClip lr = io::read_clip_dir(in, ScaleTag::kLowRes);
  harness::Model model = harness::Model::create(cfg, lr.channels());
  nets::load_parameters(ckpt, model.parameters());
  const auto flow = harness::make_flow(cfg);
  model.unet.reset_invocations();
  const VideoClip hr = harness::infer_clip(lr, model, *flow);
  io::write_clip_dir(out, hr);
  std::printf("upscaled %zu frames %dx%d -> %dx%d, noise-predictor calls %llu\n", lr.size(), lr.width(), lr.height(),
              hr.width(), hr.height(), static_cast<unsigned long long>(model.unet.invocations()));
  return kOk;
}

int cmd_eval(const fs::path& pred, const std::optional<fs::path>& ref, const fs::path& report,
             const std::optional<fs::path>& plot, double alpha) {
  std::vector<harness::EvalPair> pairs;
  const auto pred_dirs = clip_dirs(pred);
  const bool single = pred_dirs.size() == 1 && pred_dirs.front().second == pred;
  for (const auto& [name, dir] : pred_dirs) {
    harness::EvalPair p;
    p.name = name;
    p.output = io::read_clip_dir(dir, ScaleTag::kHighRes);
    if (ref) {
      const fs::path r = single ? *ref : *ref / name;
      if (fs::is_directory(r)) p.reference = io::read_clip_dir(r, ScaleTag::kHighRes);
    }
    pairs.push_back(std::move(p));
  }
  const flow::BlockMatchingFlow flow;
  harness::EvalReport rep = harness::evaluate(pairs, flow, alpha);
  write_text(report, rep.to_json());
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& c : rep.clips) {
    std::printf("%-24s frames %3d  psnr %s  E*warp %s\n", c.name.c_str(), c.frames,
                c.psnr_db ? std::to_string(*c.psnr_db).c_str() : "-",
                c.warping_error ? std::to_string(*c.warping_error).c_str() : "-");
  }
  if (plot) {
    std::vector<double> w;
    for (const auto& c : rep.clips) w.push_back(c.warping_error.value_or(0.0));
    harness::write_curve_plot(*plot, {w});
  }
  return kOk;
}

int cmd_demo(const std::string& kind, const fs::path& out, int frames, int size, std::uint64_t seed,
             const std::optional<fs::path>& lr_out, const std::string& degradation) {
  data::DemoSpec spec;
  spec.kind = data::parse_demo_kind(kind);
  spec.frames = frames;
  spec.height = size;
  spec.width = size;
  spec.seed = seed;
  const VideoClip hr = data::make_demo_clip(spec);
  io::write_clip_dir(out, hr);
  std::printf("wrote %d %s frames (%dx%d) to %s\n", frames, kind.c_str(), size, size, out.c_str());
  if (lr_out) {
    data::DegradationConfig cfg = harness::degradation_preset(degradation);
    cfg.seed = seed;
    io::write_clip_dir(*lr_out, data::degrade_clip(hr, cfg, 0));
    std::printf("wrote degraded LR frames (%dx%d) to %s\n", size / 4, size / 4, lr_out->c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-step diffusion video super-resolution (toy scale)"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "pretrain stand-ins, then fine-tune adapters, fusion and critic");
  std::string config_path;
  std::string train_out;
  train->add_option("--config", config_path, "key = value run config")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "output directory (overrides out_dir)");

  auto* upscale = app.add_subcommand("upscale", "4x upscale a directory of LR frames");
  std::string up_in, up_out, up_ckpt;
  upscale->add_option("--in", up_in, "LR frame directory")->required()->check(CLI::ExistingDirectory);
  upscale->add_option("--out", up_out, "HR output directory")->required();
  upscale->add_option("--checkpoint", up_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "PSNR and warping error report");
  std::string ev_pred, ev_ref, ev_report, ev_plot;
  double ev_alpha = 50.0;
  eval->add_option("--pred", ev_pred, "predicted clip dir (or dir of clip dirs)")->required();
  eval->add_option("--ref", ev_ref, "reference clip dir, same layout");
  eval->add_option("--report", ev_report, "JSON report path")->required();
  eval->add_option("--plot", ev_plot, "optional PNG of per-clip warping error");
  eval->add_option("--alpha", ev_alpha, "warp-confidence sharpness");

  auto* demo = app.add_subcommand("demo-data", "write a procedural clip");
  std::string demo_kind = "shift";
  std::string demo_out, demo_lr, demo_deg = "light";
  int demo_frames = 5;
  int demo_size = 64;
  std::uint64_t demo_seed = 0;
  demo->add_option("--kind", demo_kind, "static | shift | rotate");
  demo->add_option("--out", demo_out, "output directory")->required();
  demo->add_option("--frames", demo_frames, "frame count");
  demo->add_option("--size", demo_size, "square frame size");
  demo->add_option("--seed", demo_seed, "texture seed");
  demo->add_option("--lr-out", demo_lr, "also write a degraded LR copy here");
  demo->add_option("--degradation", demo_deg, "realesrgan | light | identity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kUsage);
  }

  try {
    if (*train) return cmd_train(config_path, train_out);
    if (*upscale) return cmd_upscale(up_in, up_out, up_ckpt);
    if (*eval)
      return cmd_eval(ev_pred, ev_ref.empty() ? std::nullopt : std::optional<fs::path>(ev_ref), ev_report,
                      ev_plot.empty() ? std::nullopt : std::optional<fs::path>(ev_plot), ev_alpha);
    if (*demo)
      return cmd_demo(demo_kind, demo_out, demo_frames, demo_size, demo_seed,
                      demo_lr.empty() ? std::nullopt : std::optional<fs::path>(demo_lr), demo_deg);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), kConfig);
  } catch (const IoError& e) {
    return fail("io", e.what(), kIo);
  } catch (const PoisonedLossError& e) {
    return fail("training", e.what(), kTraining);
  } catch (const ContractViolation& e) {
    return fail("contract", e.what(), kContract);
  } catch (const SingularScheduleError& e) {
    return fail("contract", e.what(), kContract);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kInternal);
  }
  return kOk;
}
