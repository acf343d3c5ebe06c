// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/autograd/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace osdvsr::ag {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

std::vector<double>* grad_of(Node& self, std::size_t i) {
  const auto& p = self.parents[i];
  if (!p || !p->requires_grad) return nullptr;
  return &p->grad_buffer();
}

const std::vector<double>& value_of(Node& self, std::size_t i) { return self.parents[i]->value; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.numel());
  const auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {a}, [deriv](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    const auto& x = value_of(self, 0);
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += self.grad[i] * deriv(x[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      const auto& bv = value_of(self, 1);
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = grad_of(self, 1)) {
      const auto& av = value_of(self, 0);
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor silu(const Tensor& a) {
  return unary(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor mul_plane(const Tensor& x, const Tensor& plane) {
  require(x.shape().size() == 3, "mul_plane: x must be (C, H, W)");
  const int c = x.dim(0);
  const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  require(plane.numel() == hw, "mul_plane: plane size does not match x");
  std::vector<double> out(x.numel());
  for (int k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < hw; ++i) out[k * hw + i] = x.values()[k * hw + i] * plane.values()[i];
  }
  return make_result(x.shape(), std::move(out), {x, plane}, [c, hw](Node& self) {
    const auto& xv = value_of(self, 0);
    const auto& pv = value_of(self, 1);
    if (auto* g = grad_of(self, 0)) {
      for (int k = 0; k < c; ++k) {
        for (std::size_t i = 0; i < hw; ++i) (*g)[k * hw + i] += self.grad[k * hw + i] * pv[i];
      }
    }
    if (auto* g = grad_of(self, 1)) {
      for (int k = 0; k < c; ++k) {
        for (std::size_t i = 0; i < hw; ++i) (*g)[i] += self.grad[k * hw + i] * xv[k * hw + i];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result({1}, {acc}, {a}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (double& v : *g) v += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  require(a.numel() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean_channels(const Tensor& a) {
  require(a.shape().size() >= 2, "mean_channels: needs at least 2 axes");
  const int c = a.dim(0);
  const std::size_t rest = a.numel() / static_cast<std::size_t>(c);
  Shape out_shape(a.shape().begin() + 1, a.shape().end());
  std::vector<double> out(rest, 0.0);
  for (int k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < rest; ++i) out[i] += a.values()[k * rest + i];
  }
  for (double& v : out) v /= c;
  return make_result(std::move(out_shape), std::move(out), {a}, [c, rest](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (int k = 0; k < c; ++k) {
        for (std::size_t i = 0; i < rest; ++i) (*g)[k * rest + i] += self.grad[i] / c;
      }
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.numel(), "reshape: element count mismatch");
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 2 && b.shape().size() == 2 && a.dim(1) == b.dim(0), "matmul: incompatible shapes");
  const int m = a.dim(0);
  const int k = a.dim(1);
  const int n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  MapMatrix(out.data(), m, n).noalias() = ConstMapMatrix(a.values().data(), m, k) * ConstMapMatrix(b.values().data(), k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    ConstMapMatrix g(self.grad.data(), m, n);
    if (auto* ga = grad_of(self, 0)) {
      MapMatrix(ga->data(), m, k).noalias() += g * ConstMapMatrix(value_of(self, 1).data(), k, n).transpose();
    }
    if (auto* gb = grad_of(self, 1)) {
      MapMatrix(gb->data(), k, n).noalias() += ConstMapMatrix(value_of(self, 0).data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require(a.shape().size() == 2, "transpose: expects a matrix");
  const int m = a.dim(0);
  const int n = a.dim(1);
  std::vector<double> out(a.numel());
  MapMatrix(out.data(), n, m) = ConstMapMatrix(a.values().data(), m, n).transpose();
  return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (auto* g = grad_of(self, 0)) MapMatrix(g->data(), m, n) += ConstMapMatrix(self.grad.data(), n, m).transpose();
  });
}

Tensor softmax_rows(const Tensor& a) {
  require(a.shape().size() == 2, "softmax_rows: expects a matrix");
  const int m = a.dim(0);
  const int n = a.dim(1);
  std::vector<double> out(a.numel());
  for (int r = 0; r < m; ++r) {
    const double* row = a.values().data() + static_cast<std::size_t>(r) * n;
    double* o = out.data() + static_cast<std::size_t>(r) * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += (o[j] = std::exp(row[j] - mx));
    for (int j = 0; j < n; ++j) o[j] /= z;
  }
  return make_result({m, n}, std::move(out), {a}, [m, n](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (int r = 0; r < m; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * n;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += self.grad[off + j] * self.value[off + j];
      for (int j = 0; j < n; ++j) (*g)[off + j] += self.value[off + j] * (self.grad[off + j] - dot);
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  require(x.shape().size() == 3, "conv2d: x must be (C, H, W)");
  require(weight.shape().size() == 4 && weight.dim(1) == x.dim(0) && weight.dim(2) == weight.dim(3),
          "conv2d: weight must be (O, C, k, k) with C matching x");
  require(stride >= 1 && padding >= 0, "conv2d: invalid stride/padding");
  const int c = x.dim(0);
  const int h = x.dim(1);
  const int w = x.dim(2);
  const int o = weight.dim(0);
  const int k = weight.dim(2);
  const int ho = (h + 2 * padding - k) / stride + 1;
  const int wo = (w + 2 * padding - k) / stride + 1;
  require(ho > 0 && wo > 0, "conv2d: input smaller than kernel");
  if (bias.defined()) require(bias.numel() == static_cast<std::size_t>(o), "conv2d: bias size mismatch");

  const int rows = c * k * k;
  const int cols = ho * wo;
  auto im2col = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows) * cols, 0.0);
  const auto xv = x.values();
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = im2col->data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= h) continue;
          const double* src = xv.data() + (static_cast<std::size_t>(ci) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - padding + kx;
            if (ix >= 0 && ix < w) dst[oy * wo + ox] = src[ix];
          }
        }
      }
    }
  }

  std::vector<double> out(static_cast<std::size_t>(o) * cols);
  MapMatrix out_m(out.data(), o, cols);
  out_m.noalias() = ConstMapMatrix(weight.values().data(), o, rows) * ConstMapMatrix(im2col->data(), rows, cols);
  if (bias.defined()) {
    for (int oc = 0; oc < o; ++oc) out_m.row(oc).array() += bias.values()[static_cast<std::size_t>(oc)];
  }

  return make_result({o, ho, wo}, std::move(out), {x, weight, bias},
                     [=](Node& self) {
                       ConstMapMatrix g(self.grad.data(), o, cols);
                       if (auto* gw = grad_of(self, 1)) {
                         MapMatrix(gw->data(), o, rows).noalias() +=
                             g * ConstMapMatrix(im2col->data(), rows, cols).transpose();
                       }
                       if (self.parents.size() > 2) {
                         if (auto* gb = grad_of(self, 2)) {
                           for (int oc = 0; oc < o; ++oc) (*gb)[static_cast<std::size_t>(oc)] += g.row(oc).sum();
                         }
                       }
                       auto* gx = grad_of(self, 0);
                       if (!gx) return;
                       RowMatrix dcols = ConstMapMatrix(value_of(self, 1).data(), o, rows).transpose() * g;
                       for (int ci = 0; ci < c; ++ci) {
                         for (int ky = 0; ky < k; ++ky) {
                           for (int kx = 0; kx < k; ++kx) {
                             const double* src = dcols.data() + static_cast<std::size_t>((ci * k + ky) * k + kx) * cols;
                             for (int oy = 0; oy < ho; ++oy) {
                               const int iy = oy * stride - padding + ky;
                               if (iy < 0 || iy >= h) continue;
                               double* dst = gx->data() + (static_cast<std::size_t>(ci) * h + iy) * w;
                               for (int ox = 0; ox < wo; ++ox) {
                                 const int ix = ox * stride - padding + kx;
                                 if (ix >= 0 && ix < w) dst[ix] += src[oy * wo + ox];
                               }
                             }
                           }
                         }
                       }
                     });
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  require(x.shape().size() == 3 && factor >= 1, "upsample_nearest: expects (C, H, W) and factor >= 1");
  const int c = x.dim(0);
  const int h = x.dim(1);
  const int w = x.dim(2);
  const int oh = h * factor;
  const int ow = w * factor;
  std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
  for (int ci = 0; ci < c; ++ci) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        out[(static_cast<std::size_t>(ci) * oh + y) * ow + xx] =
            x.values()[(static_cast<std::size_t>(ci) * h + y / factor) * w + xx / factor];
      }
    }
  }
  return make_result({c, oh, ow}, std::move(out), {x}, [=](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (int ci = 0; ci < c; ++ci) {
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          (*g)[(static_cast<std::size_t>(ci) * h + y / factor) * w + xx / factor] +=
              self.grad[(static_cast<std::size_t>(ci) * oh + y) * ow + xx];
        }
      }
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 3 && b.shape().size() == 3 && a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat_channels: spatial shapes differ");
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.numel();
  return make_result({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(out), {a, b}, [na](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[na + i];
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require(x.shape().size() == 3 && bias.numel() == static_cast<std::size_t>(x.dim(0)),
          "add_channel_bias: bias must have one entry per channel");
  const int c = x.dim(0);
  const std::size_t hw = x.numel() / static_cast<std::size_t>(c);
  std::vector<double> out(x.values().begin(), x.values().end());
  for (int k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < hw; ++i) out[k * hw + i] += bias.values()[static_cast<std::size_t>(k)];
  }
  return make_result(x.shape(), std::move(out), {x, bias}, [c, hw](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (int k = 0; k < c; ++k) {
        for (std::size_t i = 0; i < hw; ++i) (*g)[static_cast<std::size_t>(k)] += self.grad[k * hw + i];
      }
    }
  });
}

Tensor cosine_similarity_channels(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "cosine_similarity_channels");
  require(a.shape().size() == 3, "cosine_similarity_channels: expects (D, P, Q)");
  const int d = a.dim(0);
  const std::size_t pq = static_cast<std::size_t>(a.dim(1)) * a.dim(2);
  std::vector<double> out(pq);
  for (std::size_t i = 0; i < pq; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < d; ++k) {
      const double av = a.values()[k * pq + i];
      const double bv = b.values()[k * pq + i];
      dot += av * bv;
      na += av * av;
      nb += bv * bv;
    }
    require(na != 0.0 && nb != 0.0, "cosine similarity undefined for a zero-norm feature vector");
    out[i] = dot / std::sqrt(na * nb);
  }
  return make_result({a.dim(1), a.dim(2)}, std::move(out), {a, b}, [d, pq](Node& self) {
    const auto& av = value_of(self, 0);
    const auto& bv = value_of(self, 1);
    auto* ga = grad_of(self, 0);
    auto* gb = grad_of(self, 1);
    for (std::size_t i = 0; i < pq; ++i) {
      double na2 = 0.0, nb2 = 0.0;
      for (int k = 0; k < d; ++k) {
        na2 += av[k * pq + i] * av[k * pq + i];
        nb2 += bv[k * pq + i] * bv[k * pq + i];
      }
      const double inv = 1.0 / std::sqrt(na2 * nb2);
      const double cs = self.value[i];
      const double g = self.grad[i];
      for (int k = 0; k < d; ++k) {
        const std::size_t j = k * pq + i;
        if (ga) (*ga)[j] += g * (bv[j] * inv - cs * av[j] / na2);
        if (gb) (*gb)[j] += g * (av[j] * inv - cs * bv[j] / nb2);
      }
    }
  });
}

Tensor normalize_channels(const Tensor& x, double eps) {
  require(x.shape().size() == 3, "normalize_channels: expects (C, H, W)");
  const int c = x.dim(0);
  const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<double> out(x.numel());
  std::vector<double> norms(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    double ss = 0.0;
    for (int k = 0; k < c; ++k) ss += x.values()[k * hw + i] * x.values()[k * hw + i];
    norms[i] = std::sqrt(ss);
    for (int k = 0; k < c; ++k) out[k * hw + i] = x.values()[k * hw + i] / (norms[i] + eps);
  }
  return make_result(x.shape(), std::move(out), {x}, [c, hw, eps, norms = std::move(norms)](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    const auto& xv = value_of(self, 0);
    for (std::size_t i = 0; i < hw; ++i) {
      const double r = norms[i];
      const double n = r + eps;
      double gx = 0.0;
      for (int k = 0; k < c; ++k) gx += self.grad[k * hw + i] * xv[k * hw + i];
      const double coef = r > 0.0 ? gx / (n * n * r) : 0.0;
      for (int k = 0; k < c; ++k) (*g)[k * hw + i] += self.grad[k * hw + i] / n - xv[k * hw + i] * coef;
    }
  });
}

}  // namespace osdvsr::ag
