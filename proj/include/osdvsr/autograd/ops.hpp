// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "osdvsr/autograd/tensor.hpp"

namespace osdvsr::ag {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor silu(const Tensor& a);
/// Gradient passes only where lo < a < hi.
Tensor clamp(const Tensor& a, double lo, double hi);

/// x: (C, H, W), plane: (H, W) or (1, H, W). Multiplies every channel.
Tensor mul_plane(const Tensor& x, const Tensor& plane);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean over the first axis: (C, ...) -> (...).
Tensor mean_channels(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);

/// Single-image 2D convolution. x: (C, H, W); weight: (O, C, k, k);
/// bias: (O) or undefined. Zero padding.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding);

Tensor upsample_nearest(const Tensor& x, int factor);
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// x: (C, H, W) + b: (C) broadcast over the plane.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

/// Cosine similarity along the first axis: (D, P, Q) x (D, P, Q) -> (P, Q).
/// Throws ContractViolation on a zero-norm feature vector.
Tensor cosine_similarity_channels(const Tensor& a, const Tensor& b);

/// Unit-normalizes each spatial feature vector of (C, H, W) along C, with a
/// small eps added to the norm.
Tensor normalize_channels(const Tensor& x, double eps = 1e-10);

}  // namespace osdvsr::ag
