#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "feater/costmodel.hpp"
#include "feater/kernels.hpp"
#include "feater/tensor.hpp"

namespace feater {

using VarId = std::size_t;
inline constexpr VarId kNoVar = std::numeric_limits<VarId>::max();

// Recorded computation: every op appends a node holding its forward value,
// and backward() replays the sequence in reverse through the explicit
// per-operation backward kernels, accumulating gradients. Creation order is
// the topological order. A graph optionally owns a MacCounter so a forward
// pass can be instrumented.
class Graph {
 public:
  Graph() = default;
  explicit Graph(bool count_macs) { if (count_macs) enable_mac_counting(); }

  void enable_mac_counting() { macs_.emplace(); }
  bool mac_counting_enabled() const { return macs_.has_value(); }
  // Throws StateError when the pass ran without counting enabled.
  CostReport mac_report() const;

  VarId leaf(Tensor value, bool requires_grad = false);

  VarId matmul(VarId a, VarId b, std::string_view label = "matmul");
  VarId apply_lastdim(VarId x, VarId weight, VarId bias = kNoVar,
                      std::string_view label = "linear");
  VarId conv_channel_1x1(VarId x, VarId weight, VarId bias, std::string_view label = "conv1x1");
  VarId softmax_lastdim(VarId x);
  VarId layer_norm(VarId x, std::size_t norm_axes, VarId gain, VarId bias, double eps = 1e-5);
  VarId gelu(VarId x);
  VarId add(VarId a, VarId b);
  VarId scale(VarId x, double s);
  VarId swap_axes(VarId x, std::size_t axis_a, std::size_t axis_b);
  VarId reshape(VarId x, std::vector<std::size_t> shape);
  VarId slice_lastdim(VarId x, std::size_t offset, std::size_t length);
  VarId concat_lastdim(const std::vector<VarId>& parts);
  // Mean squared error between two same-shaped vars; value has shape [1].
  VarId mse(VarId a, VarId b);
  // Sum over all entries; value has shape [1].
  VarId sum_all(VarId x);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients for every node.
  // loss must be scalar (one element).
  void backward(VarId loss);

  const Tensor& value(VarId id) const;
  // Gradient of the last backward() loss wrt this var. StateError before
  // backward has run.
  const Tensor& grad(VarId id) const;
  double scalar_value(VarId id) const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kMatmul,
    kApplyLastdim,
    kConv1x1,
    kSoftmax,
    kLayerNorm,
    kGelu,
    kAdd,
    kScale,
    kSwapAxes,
    kReshape,
    kSliceLastdim,
    kConcatLastdim,
    kMse,
    kSumAll,
  };

  struct Node {
    Op op = Op::kLeaf;
    std::vector<VarId> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::size_t arg0 = 0, arg1 = 0;  // axes, offsets, norm_axes
    double scalar_arg = 0.0;         // scale factor or eps
  };

  VarId push(Node node);
  const Node& node(VarId id) const;
  bool any_requires(const std::vector<VarId>& ids) const;
  MacCounter* counter() { return macs_ ? &*macs_ : nullptr; }
  void backward_node(Node& n);

  std::vector<Node> nodes_;
  std::optional<MacCounter> macs_;
  bool backward_ran_ = false;
};

}  // namespace feater
