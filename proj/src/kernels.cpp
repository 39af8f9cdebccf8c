#include "feater/kernels.hpp"

#include <cmath>
#include <cstdint>

#include "feater/errors.hpp"

namespace feater {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Work threshold below which the parallel-for overhead is not worth paying.
constexpr std::int64_t kParCutoff = 1 << 14;

void require_nonempty(const Tensor& t, const char* op) {
  if (t.empty()) throw DimensionError(std::string(op) + ": empty tensor");
}

std::size_t batch_count(const Tensor& t) {
  std::size_t b = 1;
  for (std::size_t i = 0; i + 2 < t.rank(); ++i) b *= t.shape()[i];
  return b;
}

// How gain/bias index the normalized slices of layer_norm.
enum class AffineMode { kScalar, kSuffix, kPrefix };

AffineMode affine_mode(const Tensor& x, std::size_t norm_axes, const Tensor& gain,
                       const Tensor& bias) {
  require_same_shape(gain, bias, "layer_norm gain/bias");
  if (gain.size() == 1) return AffineMode::kScalar;
  std::vector<std::size_t> prefix(x.shape().begin(), x.shape().end() - norm_axes);
  std::vector<std::size_t> suffix(x.shape().end() - norm_axes, x.shape().end());
  if (gain.shape() == suffix) return AffineMode::kSuffix;
  if (gain.shape() == prefix) return AffineMode::kPrefix;
  throw DimensionError("layer_norm: gain shape " + shape_to_string(gain.shape()) +
                       " broadcasts against neither " + shape_to_string(prefix) + " nor " +
                       shape_to_string(suffix) + " of input " + shape_to_string(x.shape()));
}

}  // namespace

Tensor matmul_batched(const Tensor& a, const Tensor& b, MacCounter* macs,
                      std::string_view label) {
  require_nonempty(a, "matmul");
  require_nonempty(b, "matmul");
  if (a.rank() < 2 || b.rank() < 2 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()) ||
      a.shape()[a.rank() - 1] != b.shape()[b.rank() - 2]) {
    throw DimensionError("matmul: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  const std::size_t p = a.shape()[a.rank() - 2];
  const std::size_t q = a.shape()[a.rank() - 1];
  const std::size_t r = b.shape()[b.rank() - 1];
  const std::size_t batches = batch_count(a);

  std::vector<std::size_t> out_shape(a.shape());
  out_shape[out_shape.size() - 1] = r;
  Tensor out(out_shape);

  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const std::int64_t rows = static_cast<std::int64_t>(batches * p);
  const std::int64_t work = rows * static_cast<std::int64_t>(q * r);
#pragma omp parallel for if (work > kParCutoff)
  for (std::int64_t row = 0; row < rows; ++row) {
    const std::size_t batch = static_cast<std::size_t>(row) / p;
    const std::size_t i = static_cast<std::size_t>(row) % p;
    const double* arow = pa + (batch * p + i) * q;
    const double* bmat = pb + batch * q * r;
    double* orow = po + (batch * p + i) * r;
    for (std::size_t j = 0; j < r; ++j) orow[j] = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      const double av = arow[k];
      const double* brow = bmat + k * r;
      for (std::size_t j = 0; j < r; ++j) orow[j] += av * brow[j];
    }
  }
  if (macs) macs->add(label, static_cast<std::uint64_t>(batches) * p * q * r);
  return out;
}

void matmul_batched_backward(const Tensor& a, const Tensor& b, const Tensor& grad_out,
                             Tensor& grad_a, Tensor& grad_b) {
  const std::size_t p = a.shape()[a.rank() - 2];
  const std::size_t q = a.shape()[a.rank() - 1];
  const std::size_t r = b.shape()[b.rank() - 1];
  const std::size_t batches = batch_count(a);
  const double* pa = a.data();
  const double* pb = b.data();
  const double* pg = grad_out.data();

  // dA = dY * B^T
  double* pga = grad_a.data();
  const std::int64_t rows = static_cast<std::int64_t>(batches * p);
#pragma omp parallel for if (rows * static_cast<std::int64_t>(q * r) > kParCutoff)
  for (std::int64_t row = 0; row < rows; ++row) {
    const std::size_t batch = static_cast<std::size_t>(row) / p;
    const std::size_t i = static_cast<std::size_t>(row) % p;
    const double* grow = pg + (batch * p + i) * r;
    const double* bmat = pb + batch * q * r;
    double* garow = pga + (batch * p + i) * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double* brow = bmat + k * r;
      double acc = 0.0;
      for (std::size_t j = 0; j < r; ++j) acc += grow[j] * brow[j];
      garow[k] += acc;
    }
  }

  // dB = A^T * dY, per batch slice
  double* pgb = grad_b.data();
  const std::int64_t brows = static_cast<std::int64_t>(batches * q);
#pragma omp parallel for if (brows * static_cast<std::int64_t>(p * r) > kParCutoff)
  for (std::int64_t brow = 0; brow < brows; ++brow) {
    const std::size_t batch = static_cast<std::size_t>(brow) / q;
    const std::size_t k = static_cast<std::size_t>(brow) % q;
    const double* amat = pa + batch * p * q;
    const double* gmat = pg + batch * p * r;
    double* gbrow = pgb + (batch * q + k) * r;
    for (std::size_t i = 0; i < p; ++i) {
      const double av = amat[i * q + k];
      const double* grow = gmat + i * r;
      for (std::size_t j = 0; j < r; ++j) gbrow[j] += av * grow[j];
    }
  }
}

Tensor apply_lastdim(const Tensor& x, const Tensor& weight, const Tensor* bias, MacCounter* macs,
                     std::string_view label) {
  require_nonempty(x, "apply_lastdim");
  if (weight.rank() != 2 || x.shape().back() != weight.shape()[0]) {
    throw DimensionError("apply_lastdim: shape mismatch " + shape_to_string(x.shape()) + " vs " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t q = weight.shape()[0];
  const std::size_t r = weight.shape()[1];
  if (bias && (bias->rank() != 1 || bias->shape()[0] != r)) {
    throw DimensionError("apply_lastdim: bias shape " + shape_to_string(bias->shape()) +
                         " does not match output width " + std::to_string(r));
  }
  const std::size_t outer = x.size() / q;

  std::vector<std::size_t> out_shape(x.shape());
  out_shape.back() = r;
  Tensor out(out_shape);
  const double* px = x.data();
  const double* pw = weight.data();
  const double* pbias = bias ? bias->data() : nullptr;
  double* po = out.data();
#pragma omp parallel for if (static_cast<std::int64_t>(outer * q * r) > kParCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(outer); ++o) {
    const double* xrow = px + o * q;
    double* orow = po + o * r;
    if (pbias) {
      for (std::size_t j = 0; j < r; ++j) orow[j] = pbias[j];
    } else {
      for (std::size_t j = 0; j < r; ++j) orow[j] = 0.0;
    }
    for (std::size_t k = 0; k < q; ++k) {
      const double xv = xrow[k];
      const double* wrow = pw + k * r;
      for (std::size_t j = 0; j < r; ++j) orow[j] += xv * wrow[j];
    }
  }
  if (macs) macs->add(label, static_cast<std::uint64_t>(outer) * q * r);
  return out;
}

void apply_lastdim_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                            Tensor& grad_x, Tensor& grad_weight, Tensor* grad_bias) {
  const std::size_t q = weight.shape()[0];
  const std::size_t r = weight.shape()[1];
  const std::size_t outer = x.size() / q;
  const double* px = x.data();
  const double* pw = weight.data();
  const double* pg = grad_out.data();

  double* pgx = grad_x.data();
#pragma omp parallel for if (static_cast<std::int64_t>(outer * q * r) > kParCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(outer); ++o) {
    const double* grow = pg + o * r;
    double* gxrow = pgx + o * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double* wrow = pw + k * r;
      double acc = 0.0;
      for (std::size_t j = 0; j < r; ++j) acc += grow[j] * wrow[j];
      gxrow[k] += acc;
    }
  }

  double* pgw = grad_weight.data();
#pragma omp parallel for if (static_cast<std::int64_t>(outer * q * r) > kParCutoff)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(q); ++k) {
    double* gwrow = pgw + k * r;
    for (std::size_t o = 0; o < outer; ++o) {
      const double xv = px[o * q + k];
      const double* grow = pg + o * r;
      for (std::size_t j = 0; j < r; ++j) gwrow[j] += xv * grow[j];
    }
  }

  if (grad_bias) {
    double* pgb = grad_bias->data();
    for (std::size_t o = 0; o < outer; ++o) {
      const double* grow = pg + o * r;
      for (std::size_t j = 0; j < r; ++j) pgb[j] += grow[j];
    }
  }
}

Tensor softmax_lastdim(const Tensor& x) {
  require_nonempty(x, "softmax");
  const std::size_t inner = x.shape().back();
  const std::size_t outer = x.size() / inner;
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
#pragma omp parallel for if (static_cast<std::int64_t>(outer * inner) > kParCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(outer); ++o) {
    const double* row = px + o * inner;
    double* orow = po + o * inner;
    double mx = row[0];
    for (std::size_t i = 1; i < inner; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      orow[i] = std::exp(row[i] - mx);
      sum += orow[i];
    }
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < inner; ++i) orow[i] *= inv;
  }
  return out;
}

void softmax_lastdim_backward(const Tensor& y, const Tensor& grad_out, Tensor& grad_x) {
  const std::size_t inner = y.shape().back();
  const std::size_t outer = y.size() / inner;
  const double* py = y.data();
  const double* pg = grad_out.data();
  double* pgx = grad_x.data();
#pragma omp parallel for if (static_cast<std::int64_t>(outer * inner) > kParCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(outer); ++o) {
    const double* yrow = py + o * inner;
    const double* grow = pg + o * inner;
    double* gxrow = pgx + o * inner;
    double dot = 0.0;
    for (std::size_t i = 0; i < inner; ++i) dot += yrow[i] * grow[i];
    for (std::size_t i = 0; i < inner; ++i) gxrow[i] += yrow[i] * (grow[i] - dot);
  }
}

Tensor layer_norm(const Tensor& x, std::size_t norm_axes, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require_nonempty(x, "layer_norm");
  if (eps <= 0.0) throw ParameterError("layer_norm: eps must be positive");
  if (norm_axes == 0 || norm_axes > x.rank()) {
    throw ParameterError("layer_norm: norm_axes must be in [1, rank]");
  }
  const AffineMode mode = affine_mode(x, norm_axes, gain, bias);
  std::size_t inner = 1;
  for (std::size_t i = x.rank() - norm_axes; i < x.rank(); ++i) inner *= x.shape()[i];
  const std::size_t outer = x.size() / inner;

  Tensor out(x.shape());
  const double* px = x.data();
  const double* pgain = gain.data();
  const double* pbias = bias.data();
  double* po = out.data();
#pragma omp parallel for if (static_cast<std::int64_t>(outer * inner) > kParCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(outer); ++o) {
    const double* row = px + o * inner;
    double* orow = po + o * inner;
    double mean = 0.0;
    for (std::size_t i = 0; i < inner; ++i) mean += row[i];
    mean /= static_cast<double>(inner);
    double var = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double d = row[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(inner);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < inner; ++i) {
      const double nhat = (row[i] - mean) * inv_std;
      double g, b;
      switch (mode) {
        case AffineMode::kScalar: g = pgain[0]; b = pbias[0]; break;
        case AffineMode::kSuffix: g = pgain[i]; b = pbias[i]; break;
        default: g = pgain[o]; b = pbias[o]; break;
      }
      orow[i] = nhat * g + b;
    }
  }
  return out;
}

void layer_norm_backward(const Tensor& x, std::size_t norm_axes, const Tensor& gain, double eps,
                         const Tensor& grad_out, Tensor& grad_x, Tensor& grad_gain,
                         Tensor& grad_bias) {
  const AffineMode mode = affine_mode(x, norm_axes, gain, gain);
  std::size_t inner = 1;
  for (std::size_t i = x.rank() - norm_axes; i < x.rank(); ++i) inner *= x.shape()[i];
  const std::size_t outer = x.size() / inner;
  const double* px = x.data();
  const double* pgain = gain.data();
  const double* pg = grad_out.data();
  double* pgx = grad_x.data();
  double* pgg = grad_gain.data();
  double* pgb = grad_bias.data();

  // grad wrt x is per-slice independent; gain/bias grads are accumulated
  // serially to keep summation order fixed.
#pragma omp parallel for if (static_cast<std::int64_t>(outer * inner) > kParCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(outer); ++o) {
    const double* row = px + o * inner;
    const double* grow = pg + o * inner;
    double* gxrow = pgx + o * inner;
    double mean = 0.0;
    for (std::size_t i = 0; i < inner; ++i) mean += row[i];
    mean /= static_cast<double>(inner);
    double var = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double d = row[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(inner);
    const double inv_std = 1.0 / std::sqrt(var + eps);

    double sum_gh = 0.0, sum_gh_nhat = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double g = mode == AffineMode::kScalar ? pgain[0]
                       : mode == AffineMode::kSuffix ? pgain[i]
                                                     : pgain[o];
      const double gh = grow[i] * g;
      const double nhat = (row[i] - mean) * inv_std;
      sum_gh += gh;
      sum_gh_nhat += gh * nhat;
    }
    const double inv_n = 1.0 / static_cast<double>(inner);
    for (std::size_t i = 0; i < inner; ++i) {
      const double g = mode == AffineMode::kScalar ? pgain[0]
                       : mode == AffineMode::kSuffix ? pgain[i]
                                                     : pgain[o];
      const double gh = grow[i] * g;
      const double nhat = (row[i] - mean) * inv_std;
      gxrow[i] += inv_std * (gh - inv_n * sum_gh - nhat * inv_n * sum_gh_nhat);
    }
  }

  for (std::size_t o = 0; o < outer; ++o) {
    const double* row = px + o * inner;
    const double* grow = pg + o * inner;
    double mean = 0.0;
    for (std::size_t i = 0; i < inner; ++i) mean += row[i];
    mean /= static_cast<double>(inner);
    double var = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double d = row[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(inner);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < inner; ++i) {
      const double nhat = (row[i] - mean) * inv_std;
      switch (mode) {
        case AffineMode::kScalar:
          pgg[0] += grow[i] * nhat;
          pgb[0] += grow[i];
          break;
        case AffineMode::kSuffix:
          pgg[i] += grow[i] * nhat;
          pgb[i] += grow[i];
          break;
        default:
          pgg[o] += grow[i] * nhat;
          pgb[o] += grow[i];
          break;
      }
    }
  }
}

Tensor conv_channel_1x1(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        MacCounter* macs, std::string_view label) {
  require_nonempty(x, "conv_channel_1x1");
  if (x.rank() != 3) {
    throw DimensionError("conv_channel_1x1: input must be [n, h, w], got " +
                         shape_to_string(x.shape()));
  }
  if (weight.rank() != 2 || weight.shape()[1] != x.shape()[0]) {
    throw DimensionError("conv_channel_1x1: channel mismatch " + shape_to_string(x.shape()) +
                         " vs weight " + shape_to_string(weight.shape()));
  }
  const std::size_t n_out = weight.shape()[0];
  const std::size_t n_in = weight.shape()[1];
  if (bias.rank() != 1 || bias.shape()[0] != n_out) {
    throw DimensionError("conv_channel_1x1: bias shape " + shape_to_string(bias.shape()) +
                         " does not match output channels " + std::to_string(n_out));
  }
  const std::size_t pixels = x.shape()[1] * x.shape()[2];

  Tensor out({n_out, x.shape()[1], x.shape()[2]});
  const double* px = x.data();
  const double* pw = weight.data();
  const double* pb = bias.data();
  double* po = out.data();
#pragma omp parallel for if (static_cast<std::int64_t>(n_out * n_in * pixels) > kParCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(n_out); ++o) {
    double* omap = po + o * pixels;
    const double bv = pb[o];
    for (std::size_t p = 0; p < pixels; ++p) omap[p] = bv;
    for (std::size_t i = 0; i < n_in; ++i) {
      const double wv = pw[o * n_in + i];
      const double* imap = px + i * pixels;
      for (std::size_t p = 0; p < pixels; ++p) omap[p] += wv * imap[p];
    }
  }
  if (macs) macs->add(label, static_cast<std::uint64_t>(n_out) * n_in * pixels);
  return out;
}

void conv_channel_1x1_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                               Tensor& grad_x, Tensor& grad_weight, Tensor& grad_bias) {
  const std::size_t n_out = weight.shape()[0];
  const std::size_t n_in = weight.shape()[1];
  const std::size_t pixels = x.shape()[1] * x.shape()[2];
  const double* px = x.data();
  const double* pw = weight.data();
  const double* pg = grad_out.data();

  double* pgx = grad_x.data();
#pragma omp parallel for if (static_cast<std::int64_t>(n_out * n_in * pixels) > kParCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n_in); ++i) {
    double* gxmap = pgx + i * pixels;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double wv = pw[o * n_in + i];
      const double* gmap = pg + o * pixels;
      for (std::size_t p = 0; p < pixels; ++p) gxmap[p] += wv * gmap[p];
    }
  }

  double* pgw = grad_weight.data();
  double* pgb = grad_bias.data();
#pragma omp parallel for if (static_cast<std::int64_t>(n_out * n_in * pixels) > kParCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(n_out); ++o) {
    const double* gmap = pg + o * pixels;
    for (std::size_t i = 0; i < n_in; ++i) {
      const double* imap = px + i * pixels;
      double acc = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) acc += gmap[p] * imap[p];
      pgw[o * n_in + i] += acc;
    }
    double bacc = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) bacc += gmap[p];
    pgb[o] += bacc;
  }
}

Tensor gelu(const Tensor& x) {
  require_nonempty(x, "gelu");
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for if (n > kParCutoff)
  for (std::int64_t i = 0; i < n; ++i) {
    po[i] = 0.5 * px[i] * (1.0 + std::erf(px[i] * kInvSqrt2));
  }
  return out;
}

void gelu_backward(const Tensor& x, const Tensor& grad_out, Tensor& grad_x) {
  const double* px = x.data();
  const double* pg = grad_out.data();
  double* pgx = grad_x.data();
  const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for if (n > kParCutoff)
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = px[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    pgx[i] += pg[i] * (cdf + v * pdf);
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_nonempty(a, "add");
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const std::int64_t n = static_cast<std::int64_t>(a.size());
#pragma omp parallel for if (n > kParCutoff)
  for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  return out;
}

Tensor scale(const Tensor& x, double s) {
  require_nonempty(x, "scale");
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for if (n > kParCutoff)
  for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] * s;
  return out;
}

Tensor swap_axes(const Tensor& x, std::size_t axis_a, std::size_t axis_b) {
  require_nonempty(x, "swap_axes");
  if (axis_a >= x.rank() || axis_b >= x.rank()) {
    throw ParameterError("swap_axes: axis out of range for rank " + std::to_string(x.rank()));
  }
  if (axis_a == axis_b) return x;

  std::vector<std::size_t> out_shape(x.shape());
  std::swap(out_shape[axis_a], out_shape[axis_b]);
  Tensor out(out_shape);

  // Strides of the input as seen through the output index order.
  const std::size_t rank = x.rank();
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank - 1; i > 0; --i) {
    in_strides[i - 1] = in_strides[i] * x.shape()[i];
  }
  std::vector<std::size_t> strides(in_strides);
  std::swap(strides[axis_a], strides[axis_b]);

  const double* px = x.data();
  double* po = out.data();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    po[flat] = px[src];
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      src += strides[ax];
      if (idx[ax] < out_shape[ax]) break;
      src -= strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

Tensor slice_lastdim(const Tensor& x, std::size_t offset, std::size_t length) {
  require_nonempty(x, "slice_lastdim");
  const std::size_t last = x.shape().back();
  if (length == 0 || offset > last || length > last - offset) {
    throw DimensionError("slice_lastdim: " + std::to_string(length) + " values at offset " +
                         std::to_string(offset) + " exceed extent " + std::to_string(last));
  }
  std::vector<std::size_t> out_shape(x.shape());
  out_shape.back() = length;
  Tensor out(out_shape);
  const std::size_t outer = x.size() / last;
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = px + o * last + offset;
    double* dst = po + o * length;
    for (std::size_t i = 0; i < length; ++i) dst[i] = src[i];
  }
  return out;
}

void slice_lastdim_backward(const Tensor& grad_out, std::size_t offset, std::size_t last_extent,
                            Tensor& grad_x) {
  const std::size_t length = grad_out.shape().back();
  const std::size_t outer = grad_out.size() / length;
  const double* pg = grad_out.data();
  double* pgx = grad_x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = pg + o * length;
    double* dst = pgx + o * last_extent + offset;
    for (std::size_t i = 0; i < length; ++i) dst[i] += src[i];
  }
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  require_nonempty(a, "mean_squared_error");
  require_same_shape(a, b, "mean_squared_error");
  const double* pa = a.data();
  const double* pb = b.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = pa[i] - pb[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace feater
