#pragma once

#include <cstddef>
#include <string_view>

#include "feater/costmodel.hpp"
#include "feater/tensor.hpp"

namespace feater {

// Dense kernels, OpenMP-parallel over independent output elements so results
// are bit-identical for any thread count. Each forward has an explicit
// backward that accumulates (+=) into caller-provided gradient tensors.
// A serial reference implementation of the same contracts lives with the
// tests and the benchmark.

// Batched matrix product: a [*, p, q] x b [*, q, r] -> [*, p, r], identical
// leading batch dims. Records p*q*r MACs per batch slice when macs is given.
Tensor matmul_batched(const Tensor& a, const Tensor& b, MacCounter* macs = nullptr,
                      std::string_view label = "matmul");
void matmul_batched_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out,
                             Tensor& grad_a, Tensor& grad_b);

// x [*, q] times one shared weight [q, r] plus optional bias [r]; the weight
// is applied along the last axis of every slice. Records (numel/q)*q*r MACs.
Tensor apply_lastdim(const Tensor& x, const Tensor& weight, const Tensor* bias = nullptr,
                     MacCounter* macs = nullptr, std::string_view label = "linear");
void apply_lastdim_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                            Tensor& grad_x, Tensor& grad_weight, Tensor* grad_bias);

// Numerically stabilized softmax over the last axis.
Tensor softmax_lastdim(const Tensor& x);
void softmax_lastdim_backward(const Tensor& y, const Tensor& grad_out, Tensor& grad_x);

// Normalize over the trailing norm_axes axes (zero mean, unit variance per
// slice), then affine. gain/bias are either scalars, shaped like the
// normalized suffix, or shaped like the leading prefix (per-slice affine).
Tensor layer_norm(const Tensor& x, std::size_t norm_axes, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
void layer_norm_backward(const Tensor& x, std::size_t norm_axes, const Tensor& gain, double eps,
                         const Tensor& grad_out, Tensor& grad_x, Tensor& grad_gain,
                         Tensor& grad_bias);

// Per-pixel channel mix: x [n_in, h, w], weight [n_out, n_in], bias [n_out]
// -> [n_out, h, w]. Records n_out*n_in*h*w MACs.
Tensor conv_channel_1x1(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        MacCounter* macs = nullptr, std::string_view label = "conv1x1");
void conv_channel_1x1_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                               Tensor& grad_x, Tensor& grad_weight, Tensor& grad_bias);

// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);
void gelu_backward(const Tensor& x, const Tensor& grad_out, Tensor& grad_x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

// Copy with two axes swapped; backward is the same swap on the gradient.
Tensor swap_axes(const Tensor& x, std::size_t axis_a, std::size_t axis_b);

Tensor slice_lastdim(const Tensor& x, std::size_t offset, std::size_t length);
void slice_lastdim_backward(const Tensor& grad_out, std::size_t offset, std::size_t last_extent,
                            Tensor& grad_x);

// Mean over all entries of the squared difference.
double mean_squared_error(const Tensor& a, const Tensor& b);

}  // namespace feater
