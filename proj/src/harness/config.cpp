// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace osdvsr::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

data::Range to_range(const std::string& key, const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) {
    const double x = to_double(key, v);
    return {x, x};
  }
  return {to_double(key, trim(v.substr(0, comma))), to_double(key, trim(v.substr(comma + 1)))};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const data::Range& r) { return fmt(r.lo) + "," + fmt(r.hi); }

const char* interp_name(Interpolation i) {
  switch (i) {
    case Interpolation::kArea:
      return "area";
    case Interpolation::kBilinear:
      return "bilinear";
    case Interpolation::kBicubic:
      return "bicubic";
  }
  return "?";
}

Interpolation parse_interp(const std::string& key, const std::string& v) {
  if (v == "area") return Interpolation::kArea;
  if (v == "bilinear") return Interpolation::kBilinear;
  if (v == "bicubic") return Interpolation::kBicubic;
  throw ConfigError("key '" + key + "': unknown interpolation '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

void add_pass_keys(std::map<std::string, Setter>& m, const std::string& prefix, bool second) {
  auto pass = [second](RunConfig& c) -> data::DegradationPass& {
    return second ? c.degradation_cfg.second : c.degradation_cfg.first;
  };
  m[prefix + ".blur"] = [pass](RunConfig& c, auto& k, auto& v) { pass(c).blur = to_bool(k, v); };
  m[prefix + ".blur_sigma"] = [pass](RunConfig& c, auto& k, auto& v) { pass(c).blur_sigma = to_range(k, v); };
  m[prefix + ".scale"] = [pass](RunConfig& c, auto& k, auto& v) { pass(c).scale = to_range(k, v); };
  m[prefix + ".noise"] = [pass](RunConfig& c, auto& k, auto& v) { pass(c).noise = to_bool(k, v); };
  m[prefix + ".noise_sigma"] = [pass](RunConfig& c, auto& k, auto& v) { pass(c).noise_sigma = to_range(k, v); };
  m[prefix + ".compress"] = [pass](RunConfig& c, auto& k, auto& v) { pass(c).compress = to_bool(k, v); };
  m[prefix + ".quality"] = [pass](RunConfig& c, auto& k, auto& v) { pass(c).quality = to_range(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
#define OSD_INT(name) m[#name] = [](RunConfig& c, auto& k, auto& v) { c.name = static_cast<int>(to_int(k, v)); }
#define OSD_DBL(name) m[#name] = [](RunConfig& c, auto& k, auto& v) { c.name = to_double(k, v); }
    m["seed"] = [](RunConfig& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); };
    OSD_INT(batch_size);
    OSD_INT(epochs);
    OSD_INT(steps);
    OSD_INT(log_every);
    OSD_DBL(gen_lr);
    OSD_DBL(gen_weight_decay);
    OSD_DBL(adam_beta1);
    OSD_DBL(adam_beta2);
    OSD_DBL(adam_eps);
    OSD_DBL(disc_lr);
    OSD_INT(disc_warmup);
    OSD_DBL(tau);
    OSD_DBL(mu);
    OSD_DBL(gamma);
    OSD_DBL(alpha);
    OSD_DBL(w_gan);
    OSD_DBL(w_fmse);
    OSD_DBL(w_lpips);
    OSD_DBL(w_warp);
    OSD_INT(lora_rank);
    OSD_INT(latent_channels);
    OSD_INT(mff_heads);
    OSD_INT(mff_key_dim);
    OSD_DBL(mff_init_std);
    OSD_INT(disc_dim);
    OSD_INT(timesteps);
    OSD_DBL(alpha_final);
    OSD_INT(flow_radius);
    OSD_INT(flow_block);
    OSD_INT(pretrain_vae_steps);
    OSD_INT(pretrain_unet_steps);
    OSD_DBL(pretrain_lr);
    OSD_INT(pretrain_batch);
    OSD_INT(num_clips);
    OSD_INT(clip_length);
    OSD_INT(crop);
#undef OSD_INT
#undef OSD_DBL
    m["use_mff"] = [](RunConfig& c, auto& k, auto& v) { c.use_mff = to_bool(k, v); };
    m["data_root"] = [](RunConfig& c, auto&, auto& v) { c.data_root = v; };
    m["out_dir"] = [](RunConfig& c, auto&, auto& v) { c.out_dir = v; };
    m["update_scheme"] = [](RunConfig& c, auto& k, auto& v) {
      if (v == "alternating") c.update_scheme = UpdateScheme::kAlternating;
      else if (v == "simultaneous") c.update_scheme = UpdateScheme::kSimultaneous;
      else throw ConfigError("key '" + k + "': expected alternating or simultaneous");
    };
    m["update_order"] = [](RunConfig& c, auto& k, auto& v) {
      if (v == "discriminator_first") c.update_order = UpdateOrder::kDiscriminatorFirst;
      else if (v == "generator_first") c.update_order = UpdateOrder::kGeneratorFirst;
      else throw ConfigError("key '" + k + "': expected discriminator_first or generator_first");
    };
    m["deg.second_pass"] = [](RunConfig& c, auto& k, auto& v) { c.degradation_cfg.second_pass = to_bool(k, v); };
    m["deg.seed"] = [](RunConfig& c, auto& k, auto& v) {
      c.degradation_cfg.seed = static_cast<std::uint64_t>(to_int(k, v));
    };
    m["deg.interpolations"] = [](RunConfig& c, auto& k, auto& v) {
      std::vector<Interpolation> list;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) list.push_back(parse_interp(k, trim(item)));
      c.degradation_cfg.interpolations = list;
    };
    add_pass_keys(m, "deg1", false);
    add_pass_keys(m, "deg2", true);
    return m;
  }();
  return table;
}

}  // namespace

data::DegradationConfig degradation_preset(const std::string& name) {
  if (name == "realesrgan") return data::DegradationConfig{};
  if (name == "identity") return data::DegradationConfig::identity();
  if (name == "light") {
    data::DegradationConfig cfg;
    cfg.first = data::DegradationPass{true, {0.2, 1.0}, {0.25, 0.25}, true, {0.0, 2.0 / 255.0}, false, {95.0, 95.0}};
    cfg.second_pass = false;
    cfg.interpolations = {Interpolation::kArea, Interpolation::kBilinear};
    return cfg;
  }
  throw ConfigError("unknown degradation preset '" + name + "' (expected realesrgan, identity or light)");
}

RunConfig RunConfig::toy() {
  RunConfig c;
  c.batch_size = 2;
  c.steps = 200;
  c.gen_lr = 1e-3;
  c.gen_weight_decay = 1e-8;
  c.disc_lr = 5e-4;
  c.disc_warmup = 50;
  c.lora_rank = 4;
  c.pretrain_vae_steps = 400;
  c.pretrain_unet_steps = 200;
  c.num_clips = 8;
  c.clip_length = 3;
  c.crop = 64;
  c.degradation = "light";
  c.degradation_cfg = degradation_preset("light");
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1 && steps < 1) fail("either epochs or steps must be positive");
  if (steps < 0) fail("steps must be >= 0");
  if (!(gen_lr > 0.0) || !(disc_lr > 0.0) || !(pretrain_lr > 0.0)) fail("learning rates must be positive");
  if (gen_weight_decay < 0.0) fail("gen_weight_decay must be >= 0");
  if (disc_warmup < 0) fail("disc_warmup must be >= 0");
  if (steps > 0 && disc_warmup > steps) fail("disc_warmup must not exceed the total number of steps");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (gamma < 0.0 || alpha < 0.0) fail("gamma and alpha must be >= 0");
  if (mu < 0.0 || mu > 1.0) fail("mu must lie in [0, 1]");
  if (w_gan < 0.0 || w_fmse < 0.0 || w_lpips < 0.0 || w_warp < 0.0) fail("loss weights must be >= 0");
  if (lora_rank < 1 || mff_heads < 1 || mff_key_dim < 1 || latent_channels < 1) fail("model sizes must be >= 1");
  if (disc_dim < 4) fail("disc_dim must be >= 4");
  if (timesteps < 1) fail("timesteps must be >= 1");
  if (!(alpha_final > 0.0) || alpha_final > 1.0) fail("alpha_final must lie in (0, 1]");
  if (clip_length < 1 || num_clips < 1) fail("clip_length and num_clips must be >= 1");
  if (crop < 16 || crop % 16 != 0) fail("crop must be a positive multiple of 16");
  if (pretrain_vae_steps < 0 || pretrain_unet_steps < 0 || pretrain_batch < 1) fail("bad pretraining settings");
  try {
    degradation_cfg.validate();
  } catch (const ContractViolation& e) {
    fail(e.what());
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n"
     << "batch_size = " << batch_size << "\n"
     << "epochs = " << epochs << "\n"
     << "steps = " << steps << "\n"
     << "log_every = " << log_every << "\n"
     << "gen_lr = " << fmt(gen_lr) << "\n"
     << "gen_weight_decay = " << fmt(gen_weight_decay) << "\n"
     << "adam_beta1 = " << fmt(adam_beta1) << "\n"
     << "adam_beta2 = " << fmt(adam_beta2) << "\n"
     << "adam_eps = " << fmt(adam_eps) << "\n"
     << "disc_lr = " << fmt(disc_lr) << "\n"
     << "disc_warmup = " << disc_warmup << "\n"
     << "update_scheme = " << (update_scheme == UpdateScheme::kAlternating ? "alternating" : "simultaneous") << "\n"
     << "update_order = "
     << (update_order == UpdateOrder::kDiscriminatorFirst ? "discriminator_first" : "generator_first") << "\n"
     << "tau = " << fmt(tau) << "\n"
     << "mu = " << fmt(mu) << "\n"
     << "gamma = " << fmt(gamma) << "\n"
     << "alpha = " << fmt(alpha) << "\n"
     << "w_gan = " << fmt(w_gan) << "\n"
     << "w_fmse = " << fmt(w_fmse) << "\n"
     << "w_lpips = " << fmt(w_lpips) << "\n"
     << "w_warp = " << fmt(w_warp) << "\n"
     << "lora_rank = " << lora_rank << "\n"
     << "latent_channels = " << latent_channels << "\n"
     << "mff_heads = " << mff_heads << "\n"
     << "mff_key_dim = " << mff_key_dim << "\n"
     << "mff_init_std = " << fmt(mff_init_std) << "\n"
     << "use_mff = " << (use_mff ? "true" : "false") << "\n"
     << "disc_dim = " << disc_dim << "\n"
     << "timesteps = " << timesteps << "\n"
     << "alpha_final = " << fmt(alpha_final) << "\n"
     << "flow_radius = " << flow_radius << "\n"
     << "flow_block = " << flow_block << "\n"
     << "pretrain_vae_steps = " << pretrain_vae_steps << "\n"
     << "pretrain_unet_steps = " << pretrain_unet_steps << "\n"
     << "pretrain_lr = " << fmt(pretrain_lr) << "\n"
     << "pretrain_batch = " << pretrain_batch << "\n"
     << "data_root = " << data_root << "\n"
     << "num_clips = " << num_clips << "\n"
     << "clip_length = " << clip_length << "\n"
     << "crop = " << crop << "\n"
     << "out_dir = " << out_dir << "\n"
     << "degradation = " << degradation << "\n";
  const auto& d = degradation_cfg;
  auto pass = [&os](const char* p, const data::DegradationPass& x) {
    os << p << ".blur = " << (x.blur ? "true" : "false") << "\n"
       << p << ".blur_sigma = " << fmt(x.blur_sigma) << "\n"
       << p << ".scale = " << fmt(x.scale) << "\n"
       << p << ".noise = " << (x.noise ? "true" : "false") << "\n"
       << p << ".noise_sigma = " << fmt(x.noise_sigma) << "\n"
       << p << ".compress = " << (x.compress ? "true" : "false") << "\n"
       << p << ".quality = " << fmt(x.quality) << "\n";
  };
  pass("deg1", d.first);
  pass("deg2", d.second);
  os << "deg.second_pass = " << (d.second_pass ? "true" : "false") << "\n";
  os << "deg.seed = " << d.seed << "\n";
  os << "deg.interpolations = ";
  for (std::size_t i = 0; i < d.interpolations.size(); ++i) os << (i ? "," : "") << interp_name(d.interpolations[i]);
  os << "\n";
  return os.str();
}

RunConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string preset = "full";
  std::string degradation;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset") {
      preset = value;
    } else if (key == "degradation") {
      degradation = value;
    } else if (!setters().count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } else {
      entries.emplace_back(key, value);
    }
  }
  RunConfig cfg;
  if (preset == "toy") cfg = RunConfig::toy();
  else if (preset != "full") throw ConfigError("unknown preset '" + preset + "' (expected toy or full)");
  if (!degradation.empty()) {
    cfg.degradation = degradation;
    cfg.degradation_cfg = degradation_preset(degradation);
  }
  for (const auto& [k, v] : entries) setters().at(k)(cfg, k, v);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace osdvsr::harness
