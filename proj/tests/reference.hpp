#pragma once

#include "feater/blocks.hpp"
#include "feater/tensor.hpp"

// Serial reference implementations used as oracles by the tests and as the
// baseline in the benchmark. Straight-line nested loops, written directly
// from the operation definitions; nothing here calls the library kernels or
// the graph.
namespace feater::reference {

// Naive triple-loop product, batched like the library kernel.
Tensor matmul(const Tensor& a, const Tensor& b);

// Direct exp/sum per last-dim slice (no max-subtraction).
Tensor softmax_lastdim(const Tensor& x);

// Direct mean/variance normalization over the trailing norm_axes axes with
// scalar, suffix-shaped or prefix-shaped gain/bias.
Tensor layer_norm(const Tensor& x, std::size_t norm_axes, const Tensor& gain, const Tensor& bias,
                  double eps);

// Per-pixel matrix-vector product over channels.
Tensor conv_channel_1x1(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Literal multi-head scaled-dot-product attention over [n, d] tokens,
// projection included.
Tensor vanilla_msa(const Tensor& x, const VanillaBlockParams& p);

// Whole vanilla block, pre-norm residual structure, evaluated monolithically.
Tensor vanilla_block(const Tensor& x, const VanillaBlockParams& p);

// Width-axis and height-axis attention streams over [n, h, w].
Tensor attention_w(const Tensor& x, const FeatERBlockParams& p);
Tensor attention_h(const Tensor& x, const FeatERBlockParams& p);

// Two-layer per-pixel channel FFN with GELU.
Tensor feater_ffn(const Tensor& x, const FeatERBlockParams& p);

// Whole feature-map block evaluated monolithically.
Tensor feater_block(const Tensor& x, const FeatERBlockParams& p);

}  // namespace feater::reference
