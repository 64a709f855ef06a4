#pragma once

#include <span>
#include <vector>

#include "wzjscc/tensor.hpp"

// Differentiable operations over NCHW tensors.
namespace wzjscc::nn {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// a + c for a constant array c (no gradient flows into c).
Tensor add_constant(const Tensor& a, std::span<const double> c);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// 2-D cross-correlation. w: (out, in, k, k); bias: (out, 1, 1, 1) or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);
/// x: (n, in, 1, 1); w: (out, in, 1, 1); bias: (out, 1, 1, 1).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor concat_channels(std::span<const Tensor> parts);
Tensor global_avg_pool(const Tensor& x);
/// x: (n, c, h, w) scaled by gate (n, c, 1, 1).
Tensor channel_gate(const Tensor& x, const Tensor& gate);
Tensor upsample_nearest2x(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// Per batch item: v ↦ sqrt(k·p_avg)·v/‖v‖ where the item's 2k reals are
/// read as k complex symbols through the split-half packing.
Tensor power_normalize(const Tensor& x, double p_avg);

/// Per (n, h, w): divide the channel vector by sqrt(Σ_c x² + eps).
Tensor unit_normalize_channels(const Tensor& x, double eps);

/// Mean over all elements, shape (1,1,1,1).
Tensor mean(const Tensor& x);
/// Mean over each batch item, shape (n,1,1,1).
Tensor mean_per_item(const Tensor& x);
/// mean((a - b)²) over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

} // namespace wzjscc::nn
