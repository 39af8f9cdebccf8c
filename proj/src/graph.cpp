#include "feater/graph.hpp"

#include <algorithm>

#include "feater/errors.hpp"

namespace feater {

namespace {

void accumulate(Tensor& dst, const Tensor& src) {
  double* pd = dst.data();
  const double* ps = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) pd[i] += ps[i];
}

}  // namespace

CostReport Graph::mac_report() const {
  if (!macs_) throw StateError("MAC counting was not enabled for this pass");
  return macs_->report();
}

VarId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

const Graph::Node& Graph::node(VarId id) const {
  if (id >= nodes_.size()) throw ParameterError("unknown var id " + std::to_string(id));
  return nodes_[id];
}

bool Graph::any_requires(const std::vector<VarId>& ids) const {
  return std::any_of(ids.begin(), ids.end(),
                     [&](VarId id) { return id != kNoVar && node(id).requires_grad; });
}

VarId Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

VarId Graph::matmul(VarId a, VarId b, std::string_view label) {
  Node n;
  n.op = Op::kMatmul;
  n.inputs = {a, b};
  n.value = matmul_batched(node(a).value, node(b).value, counter(), label);
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

VarId Graph::apply_lastdim(VarId x, VarId weight, VarId bias, std::string_view label) {
  Node n;
  n.op = Op::kApplyLastdim;
  n.inputs = {x, weight, bias};
  const Tensor* b = bias == kNoVar ? nullptr : &node(bias).value;
  n.value = feater::apply_lastdim(node(x).value, node(weight).value, b, counter(), label);
  n.requires_grad = any_requires({x, weight}) || (bias != kNoVar && node(bias).requires_grad);
  return push(std::move(n));
}

VarId Graph::conv_channel_1x1(VarId x, VarId weight, VarId bias, std::string_view label) {
  Node n;
  n.op = Op::kConv1x1;
  n.inputs = {x, weight, bias};
  n.value =
      feater::conv_channel_1x1(node(x).value, node(weight).value, node(bias).value, counter(),
                               label);
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

VarId Graph::softmax_lastdim(VarId x) {
  Node n;
  n.op = Op::kSoftmax;
  n.inputs = {x};
  n.value = feater::softmax_lastdim(node(x).value);
  n.requires_grad = node(x).requires_grad;
  return push(std::move(n));
}

VarId Graph::layer_norm(VarId x, std::size_t norm_axes, VarId gain, VarId bias, double eps) {
  Node n;
  n.op = Op::kLayerNorm;
  n.inputs = {x, gain, bias};
  n.arg0 = norm_axes;
  n.scalar_arg = eps;
  n.value = feater::layer_norm(node(x).value, norm_axes, node(gain).value, node(bias).value, eps);
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

VarId Graph::gelu(VarId x) {
  Node n;
  n.op = Op::kGelu;
  n.inputs = {x};
  n.value = feater::gelu(node(x).value);
  n.requires_grad = node(x).requires_grad;
  return push(std::move(n));
}

VarId Graph::add(VarId a, VarId b) {
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a, b};
  n.value = feater::add(node(a).value, node(b).value);
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

VarId Graph::scale(VarId x, double s) {
  Node n;
  n.op = Op::kScale;
  n.inputs = {x};
  n.scalar_arg = s;
  n.value = feater::scale(node(x).value, s);
  n.requires_grad = node(x).requires_grad;
  return push(std::move(n));
}

VarId Graph::swap_axes(VarId x, std::size_t axis_a, std::size_t axis_b) {
  Node n;
  n.op = Op::kSwapAxes;
  n.inputs = {x};
  n.arg0 = axis_a;
  n.arg1 = axis_b;
  n.value = feater::swap_axes(node(x).value, axis_a, axis_b);
  n.requires_grad = node(x).requires_grad;
  return push(std::move(n));
}

VarId Graph::reshape(VarId x, std::vector<std::size_t> shape) {
  const Tensor& v = node(x).value;
  // The Tensor constructor rejects a shape whose product differs from the
  // data length, so this covers the element-count check.
  Tensor reshaped(std::move(shape), std::vector<double>(v.values()));
  Node n;
  n.op = Op::kReshape;
  n.inputs = {x};
  n.value = std::move(reshaped);
  n.requires_grad = node(x).requires_grad;
  return push(std::move(n));
}

VarId Graph::slice_lastdim(VarId x, std::size_t offset, std::size_t length) {
  Node n;
  n.op = Op::kSliceLastdim;
  n.inputs = {x};
  n.arg0 = offset;
  n.arg1 = length;
  n.value = feater::slice_lastdim(node(x).value, offset, length);
  n.requires_grad = node(x).requires_grad;
  return push(std::move(n));
}

VarId Graph::concat_lastdim(const std::vector<VarId>& parts) {
  if (parts.empty()) throw ParameterError("concat_lastdim: no parts");
  if (parts.size() == 1) return parts.front();
  const Tensor& first = node(parts.front()).value;
  std::size_t total_last = 0;
  for (VarId id : parts) {
    const Tensor& t = node(id).value;
    if (t.rank() != first.rank() ||
        !std::equal(t.shape().begin(), t.shape().end() - 1, first.shape().begin())) {
      throw DimensionError("concat_lastdim: incompatible part " + shape_to_string(t.shape()) +
                           " vs " + shape_to_string(first.shape()));
    }
    total_last += t.shape().back();
  }
  std::vector<std::size_t> out_shape(first.shape());
  out_shape.back() = total_last;
  Tensor out(out_shape);
  const std::size_t outer = out.size() / total_last;
  std::size_t offset = 0;
  for (VarId id : parts) {
    const Tensor& t = node(id).value;
    const std::size_t len = t.shape().back();
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = t.data() + o * len;
      double* dst = out.data() + o * total_last + offset;
      for (std::size_t i = 0; i < len; ++i) dst[i] = src[i];
    }
    offset += len;
  }
  Node n;
  n.op = Op::kConcatLastdim;
  n.inputs = parts;
  n.value = std::move(out);
  n.requires_grad = any_requires(parts);
  return push(std::move(n));
}

VarId Graph::mse(VarId a, VarId b) {
  Node n;
  n.op = Op::kMse;
  n.inputs = {a, b};
  n.value = Tensor::scalar(mean_squared_error(node(a).value, node(b).value));
  n.requires_grad = any_requires(n.inputs);
  return push(std::move(n));
}

VarId Graph::sum_all(VarId x) {
  const Tensor& v = node(x).value;
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += v[i];
  Node n;
  n.op = Op::kSumAll;
  n.inputs = {x};
  n.value = Tensor::scalar(total);
  n.requires_grad = node(x).requires_grad;
  return push(std::move(n));
}

void Graph::backward(VarId loss) {
  const Node& loss_node = node(loss);
  if (loss_node.value.size() != 1) {
    throw ParameterError("backward: loss must be scalar, got shape " +
                         shape_to_string(loss_node.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor(n.value.shape());
  nodes_[loss].grad[0] = 1.0;
  for (std::size_t i = loss + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.op != Op::kLeaf && n.requires_grad) backward_node(n);
  }
  backward_ran_ = true;
}

void Graph::backward_node(Node& n) {
  auto in_value = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  auto in_grad = [&](std::size_t i) -> Tensor& { return nodes_[n.inputs[i]].grad; };
  switch (n.op) {
    case Op::kMatmul:
      matmul_batched_backward(in_value(0), in_value(1), n.grad, in_grad(0), in_grad(1));
      break;
    case Op::kApplyLastdim: {
      Tensor* gb = n.inputs[2] == kNoVar ? nullptr : &nodes_[n.inputs[2]].grad;
      apply_lastdim_backward(in_value(0), in_value(1), n.grad, in_grad(0), in_grad(1), gb);
      break;
    }
    case Op::kConv1x1:
      conv_channel_1x1_backward(in_value(0), in_value(1), n.grad, in_grad(0), in_grad(1),
                                in_grad(2));
      break;
    case Op::kSoftmax:
      softmax_lastdim_backward(n.value, n.grad, in_grad(0));
      break;
    case Op::kLayerNorm:
      layer_norm_backward(in_value(0), n.arg0, in_value(1), n.scalar_arg, n.grad, in_grad(0),
                          in_grad(1), in_grad(2));
      break;
    case Op::kGelu:
      gelu_backward(in_value(0), n.grad, in_grad(0));
      break;
    case Op::kAdd:
      accumulate(in_grad(0), n.grad);
      accumulate(in_grad(1), n.grad);
      break;
    case Op::kScale:
      accumulate(in_grad(0), feater::scale(n.grad, n.scalar_arg));
      break;
    case Op::kSwapAxes:
      accumulate(in_grad(0), feater::swap_axes(n.grad, n.arg0, n.arg1));
      break;
    case Op::kReshape: {
      Tensor g(in_value(0).shape(), std::vector<double>(n.grad.values()));
      accumulate(in_grad(0), g);
      break;
    }
    case Op::kSliceLastdim:
      slice_lastdim_backward(n.grad, n.arg0, in_value(0).shape().back(), in_grad(0));
      break;
    case Op::kConcatLastdim: {
      const std::size_t total_last = n.value.shape().back();
      const std::size_t outer = n.value.size() / total_last;
      std::size_t offset = 0;
      for (VarId id : n.inputs) {
        Tensor& gi = nodes_[id].grad;
        const std::size_t len = nodes_[id].value.shape().back();
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = n.grad.data() + o * total_last + offset;
          double* dst = gi.data() + o * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
        offset += len;
      }
      break;
    }
    case Op::kMse: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const double g = n.grad[0] * 2.0 / static_cast<double>(a.size());
      Tensor& ga = in_grad(0);
      Tensor& gb = in_grad(1);
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = g * (a[i] - b[i]);
        ga[i] += d;
        gb[i] -= d;
      }
      break;
    }
    case Op::kSumAll: {
      Tensor& gx = in_grad(0);
      const double g = n.grad[0];
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
      break;
    }
    case Op::kLeaf:
      break;
  }
}

const Tensor& Graph::value(VarId id) const { return node(id).value; }

const Tensor& Graph::grad(VarId id) const {
  if (!backward_ran_) throw StateError("grad requested before backward ran");
  return node(id).grad;
}

double Graph::scalar_value(VarId id) const {
  const Tensor& v = node(id).value;
  if (v.size() != 1) {
    throw ParameterError("scalar_value: var has shape " + shape_to_string(v.shape()));
  }
  return v[0];
}

}  // namespace feater
