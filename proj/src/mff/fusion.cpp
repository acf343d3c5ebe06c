// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/mff/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "osdvsr/core/geometry.hpp"

namespace osdvsr::mff {

namespace {

// Attention state for one spatial site. tokens is 3 x d (row-major),
// heads x 3 x 3 softmax outputs, plus the per-slot mixing weights
// w_j = (1/3) sum_r mean_m A_m[r][j].
struct SiteAttention {
  std::vector<double> tokens;
  std::vector<double> queries;  // heads x 3 x dk
  std::vector<double> keys;     // heads x 3 x dk
  std::vector<double> attn;     // heads x 3 x 3
  std::array<double, 3> slot_weight{};
};

SiteAttention site_forward(const std::array<const double*, 3>& planes, std::size_t site, std::size_t plane_stride,
                           int d, int heads, int dk, const double* wq, const double* wk) {
  SiteAttention s;
  s.tokens.resize(static_cast<std::size_t>(3 * d));
  for (int j = 0; j < 3; ++j) {
    for (int c = 0; c < d; ++c) s.tokens[static_cast<std::size_t>(j * d + c)] = planes[j][c * plane_stride + site];
  }
  s.queries.assign(static_cast<std::size_t>(heads * 3 * dk), 0.0);
  s.keys.assign(static_cast<std::size_t>(heads * 3 * dk), 0.0);
  s.attn.assign(static_cast<std::size_t>(heads * 9), 0.0);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  for (int m = 0; m < heads; ++m) {
    const double* wqm = wq + static_cast<std::size_t>(m) * dk * d;
    const double* wkm = wk + static_cast<std::size_t>(m) * dk * d;
    double* q = s.queries.data() + static_cast<std::size_t>(m) * 3 * dk;
    double* k = s.keys.data() + static_cast<std::size_t>(m) * 3 * dk;
    for (int j = 0; j < 3; ++j) {
      for (int e = 0; e < dk; ++e) {
        double qa = 0.0, ka = 0.0;
        for (int c = 0; c < d; ++c) {
          qa += wqm[e * d + c] * s.tokens[static_cast<std::size_t>(j * d + c)];
          ka += wkm[e * d + c] * s.tokens[static_cast<std::size_t>(j * d + c)];
        }
        q[j * dk + e] = qa;
        k[j * dk + e] = ka;
      }
    }
    double* a = s.attn.data() + static_cast<std::size_t>(m) * 9;
    for (int r = 0; r < 3; ++r) {
      double logits[3];
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int e = 0; e < dk; ++e) dot += q[r * dk + e] * k[j * dk + e];
        logits[j] = dot * inv_sqrt_dk;
      }
      const double mx = std::max({logits[0], logits[1], logits[2]});
      double z = 0.0;
      for (int j = 0; j < 3; ++j) z += (a[r * 3 + j] = std::exp(logits[j] - mx));
      for (int j = 0; j < 3; ++j) a[r * 3 + j] /= z;
    }
  }
  for (int j = 0; j < 3; ++j) {
    double acc = 0.0;
    for (int m = 0; m < heads; ++m) {
      for (int r = 0; r < 3; ++r) acc += s.attn[static_cast<std::size_t>(m * 9 + r * 3 + j)];
    }
    s.slot_weight[static_cast<std::size_t>(j)] = acc / (3.0 * heads);
  }
  return s;
}

void check_shapes(const ag::Tensor& prev, const ag::Tensor& curr, const ag::Tensor& next, std::span<const double> mask,
                  const ag::Tensor& wq, const ag::Tensor& wk) {
  require(curr.shape().size() == 3, "attention_fuse: latents must be (d, h, w)");
  require(prev.shape() == curr.shape() && next.shape() == curr.shape(), "attention_fuse: latent shapes differ");
  require(mask.size() == static_cast<std::size_t>(curr.dim(1)) * curr.dim(2),
          "attention_fuse: mask shape differs from latent spatial shape");
  require(wq.shape().size() == 3 && wq.shape() == wk.shape() && wq.dim(2) == curr.dim(0),
          "attention_fuse: projections must be (heads, key_dim, d)");
  for (const auto* t : {&prev, &curr, &next}) {
    for (double v : t->values()) require(std::isfinite(v), "attention_fuse: non-finite latent value");
  }
}

ag::Tensor to_tensor(const LatentGrid& z) { return ag::Tensor::from_grid(z.values()); }

}  // namespace

FusionParams FusionParams::init(int num_heads, int key_dim, int latent_dim, std::uint64_t seed, double stddev) {
  require(num_heads >= 1 && key_dim >= 1 && latent_dim >= 1, "FusionParams: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  const std::size_t n = static_cast<std::size_t>(num_heads) * key_dim * latent_dim;
  std::vector<double> q(n), k(n);
  for (double& v : q) v = normal(rng);
  for (double& v : k) v = normal(rng);
  FusionParams p;
  p.num_heads = num_heads;
  p.key_dim = key_dim;
  p.latent_dim = latent_dim;
  p.w_query = ag::Tensor::parameter({num_heads, key_dim, latent_dim}, std::move(q));
  p.w_key = ag::Tensor::parameter({num_heads, key_dim, latent_dim}, std::move(k));
  return p;
}

void FusionParams::validate() const {
  require(num_heads >= 1, "FusionParams: num_heads must be >= 1");
  require(w_query.defined() && w_key.defined(), "FusionParams: projections not initialised");
  const ag::Shape expected{num_heads, key_dim, latent_dim};
  require(w_query.shape() == expected && w_key.shape() == expected, "FusionParams: projection shape mismatch");
  confidence.validate();
}

void FusionInput::validate() const {
  require(z_prev_warped.values().same_shape(z_curr.values()) && z_next_warped.values().same_shape(z_curr.values()),
          "FusionInput: latent shapes differ");
  require(hard_mask_latent.height() == z_curr.height() && hard_mask_latent.width() == z_curr.width(),
          "FusionInput: mask shape differs from latent spatial shape");
  require(hard_mask_latent.is_hard(), "FusionInput: mask must be hard");
}

std::vector<AttentionMatrix> attention_weights(const FusionInput& input, const FusionParams& params, int y, int x) {
  input.validate();
  params.validate();
  const Grid& c = input.z_curr.values();
  require(y >= 0 && y < c.height() && x >= 0 && x < c.width(), "attention_weights: site out of range");
  const std::array<const double*, 3> planes{input.z_prev_warped.values().data().data(), c.data().data(),
                                            input.z_next_warped.values().data().data()};
  const auto s = site_forward(planes, static_cast<std::size_t>(y) * c.width() + x, c.plane_size(), c.channels(),
                              params.num_heads, params.key_dim, params.w_query.values().data(),
                              params.w_key.values().data());
  std::vector<AttentionMatrix> out(static_cast<std::size_t>(params.num_heads));
  for (int m = 0; m < params.num_heads; ++m) {
    for (int r = 0; r < 3; ++r) {
      for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(m)][r][j] = s.attn[static_cast<std::size_t>(m * 9 + r * 3 + j)];
    }
  }
  return out;
}

std::array<std::vector<double>, 3> attended_tokens(const FusionInput& input, const FusionParams& params, int y,
                                                   int x) {
  const auto heads = attention_weights(input, params, y, x);
  const int d = input.z_curr.channels();
  const std::array<const Grid*, 3> grids{&input.z_prev_warped.values(), &input.z_curr.values(),
                                         &input.z_next_warped.values()};
  std::array<std::vector<double>, 3> out;
  for (int r = 0; r < 3; ++r) {
    out[static_cast<std::size_t>(r)].assign(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < 3; ++j) {
      double a = 0.0;
      for (const auto& h : heads) a += h[r][j];
      a /= static_cast<double>(heads.size());
      for (int c = 0; c < d; ++c) out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] += a * grids[j]->at(c, y, x);
    }
  }
  return out;
}

ag::Tensor attention_fuse(const ag::Tensor& prev, const ag::Tensor& curr, const ag::Tensor& next,
                          std::span<const double> mask, const ag::Tensor& w_query, const ag::Tensor& w_key) {
  check_shapes(prev, curr, next, mask, w_query, w_key);
  const int d = curr.dim(0);
  const std::size_t sites = static_cast<std::size_t>(curr.dim(1)) * curr.dim(2);
  const int heads = w_query.dim(0);
  const int dk = w_query.dim(1);
  const std::array<const double*, 3> planes{prev.values().data(), curr.values().data(), next.values().data()};
  std::vector<double> mask_copy(mask.begin(), mask.end());

  std::vector<double> out(curr.numel());
  for (std::size_t s = 0; s < sites; ++s) {
    const double m = mask_copy[s];
    if (m == 0.0) {
      for (int c = 0; c < d; ++c) out[c * sites + s] = planes[1][c * sites + s];
      continue;
    }
    const auto att = site_forward(planes, s, sites, d, heads, dk, w_query.values().data(), w_key.values().data());
    for (int c = 0; c < d; ++c) {
      const double x0 = planes[0][c * sites + s];
      const double x1 = planes[1][c * sites + s];
      const double x2 = planes[2][c * sites + s];
      // Written relative to the current token: since the slot weights sum to
      // one this equals sum_j w_j x_j, and is exact when all tokens agree.
      const double fused = x1 + att.slot_weight[0] * (x0 - x1) + att.slot_weight[2] * (x2 - x1);
      out[c * sites + s] = m == 1.0 ? fused : m * fused + (1.0 - m) * x1;
    }
  }

  return ag::make_result(
      curr.shape(), std::move(out), {prev, curr, next, w_query, w_key},
      [d, sites, heads, dk, mask_copy = std::move(mask_copy)](ag::Node& self) {
        auto grad_of = [&self](std::size_t i) -> std::vector<double>* {
          const auto& p = self.parents[i];
          return (p && p->requires_grad) ? &p->grad_buffer() : nullptr;
        };
        std::array<std::vector<double>*, 3> gx{grad_of(0), grad_of(1), grad_of(2)};
        auto* gwq = grad_of(3);
        auto* gwk = grad_of(4);
        const std::array<const double*, 3> planes{self.parents[0]->value.data(), self.parents[1]->value.data(),
                                                  self.parents[2]->value.data()};
        const double* wq = self.parents[3]->value.data();
        const double* wk = self.parents[4]->value.data();
        const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

        for (std::size_t s = 0; s < sites; ++s) {
          const double m = mask_copy[s];
          if (m != 1.0 && gx[1]) {
            for (int c = 0; c < d; ++c) (*gx[1])[c * sites + s] += (1.0 - m) * self.grad[c * sites + s];
          }
          if (m == 0.0) continue;
          const auto att = site_forward(planes, s, sites, d, heads, dk, wq, wk);

          // d(out)/d(fused) = m; fused = sum_j w_j x_j.
          std::vector<double> g(static_cast<std::size_t>(d));
          for (int c = 0; c < d; ++c) g[static_cast<std::size_t>(c)] = m * self.grad[c * sites + s];
          std::array<double, 3> dw{};
          for (int j = 0; j < 3; ++j) {
            for (int c = 0; c < d; ++c) {
              dw[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(c)] * att.tokens[static_cast<std::size_t>(j * d + c)];
            }
          }
          // Token gradient, accumulated in a local 3 x d buffer.
          std::vector<double> dtok(static_cast<std::size_t>(3 * d), 0.0);
          for (int j = 0; j < 3; ++j) {
            for (int c = 0; c < d; ++c) {
              dtok[static_cast<std::size_t>(j * d + c)] += att.slot_weight[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(c)];
            }
          }
          for (int mh = 0; mh < heads; ++mh) {
            const double* a = att.attn.data() + static_cast<std::size_t>(mh) * 9;
            const double* q = att.queries.data() + static_cast<std::size_t>(mh) * 3 * dk;
            const double* k = att.keys.data() + static_cast<std::size_t>(mh) * 3 * dk;
            double dlogit[3][3];
            for (int r = 0; r < 3; ++r) {
              double da[3];
              double dot = 0.0;
              for (int j = 0; j < 3; ++j) {
                da[j] = dw[static_cast<std::size_t>(j)] / (3.0 * heads);
                dot += da[j] * a[r * 3 + j];
              }
              for (int j = 0; j < 3; ++j) dlogit[r][j] = a[r * 3 + j] * (da[j] - dot) * inv_sqrt_dk;
            }
            std::vector<double> dq(static_cast<std::size_t>(3 * dk), 0.0), dkey(static_cast<std::size_t>(3 * dk), 0.0);
            for (int r = 0; r < 3; ++r) {
              for (int j = 0; j < 3; ++j) {
                for (int e = 0; e < dk; ++e) {
                  dq[static_cast<std::size_t>(r * dk + e)] += dlogit[r][j] * k[j * dk + e];
                  dkey[static_cast<std::size_t>(j * dk + e)] += dlogit[r][j] * q[r * dk + e];
                }
              }
            }
            const double* wqm = wq + static_cast<std::size_t>(mh) * dk * d;
            const double* wkm = wk + static_cast<std::size_t>(mh) * dk * d;
            for (int j = 0; j < 3; ++j) {
              for (int e = 0; e < dk; ++e) {
                const double gq = dq[static_cast<std::size_t>(j * dk + e)];
                const double gk = dkey[static_cast<std::size_t>(j * dk + e)];
                for (int c = 0; c < d; ++c) {
                  const double xv = att.tokens[static_cast<std::size_t>(j * d + c)];
                  dtok[static_cast<std::size_t>(j * d + c)] += gq * wqm[e * d + c] + gk * wkm[e * d + c];
                  if (gwq) (*gwq)[(static_cast<std::size_t>(mh) * dk + e) * d + c] += gq * xv;
                  if (gwk) (*gwk)[(static_cast<std::size_t>(mh) * dk + e) * d + c] += gk * xv;
                }
              }
            }
          }
          for (int j = 0; j < 3; ++j) {
            if (!gx[static_cast<std::size_t>(j)]) continue;
            for (int c = 0; c < d; ++c) (*gx[static_cast<std::size_t>(j)])[c * sites + s] += dtok[static_cast<std::size_t>(j * d + c)];
          }
        }
      });
}

LatentGrid attention_fuse(const FusionInput& input, const FusionParams& params) {
  input.validate();
  params.validate();
  const ag::Tensor out = attention_fuse(to_tensor(input.z_prev_warped), to_tensor(input.z_curr),
                                        to_tensor(input.z_next_warped), input.hard_mask_latent.values(),
                                        params.w_query.detach(), params.w_key.detach());
  return LatentGrid(out.to_grid(), input.z_curr.source_frame_index());
}

AlignedNeighbors align_neighbors(const VideoClip& clip, std::size_t i, const flow::FlowEstimator& flow,
                                 const flow::WarpConfidenceParams& conf, int vae_factor) {
  require(i < clip.size(), "align_neighbors: frame index out of range");
  require(vae_factor >= 1, "align_neighbors: vae_factor must be >= 1");
  conf.validate();
  const Frame& current = clip[i];
  std::vector<Frame> present;
  Frame prev = current;
  Frame next = current;
  if (i > 0) {
    prev = warp(clip[i - 1], flow.estimate(clip[i - 1], current)).with_index(current.index());
    present.push_back(prev);
  }
  if (i + 1 < clip.size()) {
    next = warp(clip[i + 1], flow.estimate(clip[i + 1], current)).with_index(current.index());
    present.push_back(next);
  }
  PixelMask soft = present.empty()
                       ? PixelMask(current.height(), current.width(), 1.0, MaskKind::kSoft)
                       : flow::warp_confidence(current, present, conf);
  PixelMask hard = flow::binarize_confidence(soft, conf.mu);
  if (present.empty()) hard = PixelMask(current.height(), current.width(), 1.0, MaskKind::kHard);
  PixelMask latent = resample_mask(hard, vae_factor, ResampleDirection::kDown);
  return AlignedNeighbors{std::move(prev), current, std::move(next), std::move(soft), std::move(hard),
                          std::move(latent)};
}

FusionInput build_fusion_input(const VideoClip& clip, std::size_t i, const EncodeFn& encoder,
                               const flow::FlowEstimator& flow, const flow::WarpConfidenceParams& conf,
                               int vae_factor) {
  AlignedNeighbors aligned = align_neighbors(clip, i, flow, conf, vae_factor);
  const int idx = clip[i].index();
  FusionInput input{LatentGrid(encoder(aligned.prev_warped).values(), idx),
                    LatentGrid(encoder(aligned.current).values(), idx),
                    LatentGrid(encoder(aligned.next_warped).values(), idx), std::move(aligned.hard_mask_latent)};
  input.validate();
  return input;
}

}  // namespace osdvsr::mff
