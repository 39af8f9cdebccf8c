#include "reference.hpp"

#include <cmath>
#include <vector>

namespace feater::reference {

namespace {

double gelu_scalar(double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); }

// q/k/v are [tokens, features] for one batch slice; attention across tokens,
// heads splitting the features. Writes into out [tokens, features].
void attend_slice(const std::vector<std::vector<double>>& q,
                  const std::vector<std::vector<double>>& k,
                  const std::vector<std::vector<double>>& v, std::size_t heads,
                  std::vector<std::vector<double>>& out) {
  const std::size_t tokens = q.size();
  const std::size_t features = q[0].size();
  const std::size_t fh = features / heads;
  for (std::size_t head = 0; head < heads; ++head) {
    const std::size_t off = head * fh;
    for (std::size_t i = 0; i < tokens; ++i) {
      std::vector<double> weights(tokens);
      double total = 0.0;
      for (std::size_t j = 0; j < tokens; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < fh; ++c) dot += q[i][off + c] * k[j][off + c];
        weights[j] = std::exp(dot / std::sqrt(static_cast<double>(fh)));
        total += weights[j];
      }
      for (std::size_t c = 0; c < fh; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < tokens; ++j) acc += (weights[j] / total) * v[j][off + c];
        out[i][off + c] = acc;
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t p = a.shape()[a.rank() - 2];
  const std::size_t q = a.shape()[a.rank() - 1];
  const std::size_t r = b.shape()[b.rank() - 1];
  std::size_t batches = 1;
  for (std::size_t i = 0; i + 2 < a.rank(); ++i) batches *= a.shape()[i];
  std::vector<std::size_t> out_shape(a.shape());
  out_shape.back() = r;
  Tensor out(out_shape);
  for (std::size_t s = 0; s < batches; ++s) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        double acc = 0.0;
        for (std::size_t m = 0; m < q; ++m) {
          acc += a.data()[(s * p + i) * q + m] * b.data()[(s * q + m) * r + j];
        }
        out.data()[(s * p + i) * r + j] = acc;
      }
    }
  }
  return out;
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t inner = x.shape().back();
  const std::size_t outer = x.size() / inner;
  Tensor out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    double total = 0.0;
    for (std::size_t i = 0; i < inner; ++i) total += std::exp(x.data()[o * inner + i]);
    for (std::size_t i = 0; i < inner; ++i) {
      out.data()[o * inner + i] = std::exp(x.data()[o * inner + i]) / total;
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, std::size_t norm_axes, const Tensor& gain, const Tensor& bias,
                  double eps) {
  std::size_t inner = 1;
  for (std::size_t i = x.rank() - norm_axes; i < x.rank(); ++i) inner *= x.shape()[i];
  const std::size_t outer = x.size() / inner;
  Tensor out(x.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    double mean = 0.0;
    for (std::size_t i = 0; i < inner; ++i) mean += x.data()[o * inner + i];
    mean /= static_cast<double>(inner);
    double var = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      const double d = x.data()[o * inner + i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(inner);
    for (std::size_t i = 0; i < inner; ++i) {
      double g = 1.0, b = 0.0;
      if (gain.size() == 1) {
        g = gain[0];
        b = bias[0];
      } else if (gain.size() == inner) {
        g = gain[i];
        b = bias[i];
      } else {
        g = gain[o];
        b = bias[o];
      }
      out.data()[o * inner + i] =
          (x.data()[o * inner + i] - mean) / std::sqrt(var + eps) * g + b;
    }
  }
  return out;
}

Tensor conv_channel_1x1(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const std::size_t n_in = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const std::size_t n_out = weight.shape()[0];
  Tensor out({n_out, h, w});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t o = 0; o < n_out; ++o) {
        double acc = bias[o];
        for (std::size_t i = 0; i < n_in; ++i) acc += weight.at2(o, i) * x.at3(i, r, c);
        out.at3(o, r, c) = acc;
      }
    }
  }
  return out;
}

Tensor vanilla_msa(const Tensor& x, const VanillaBlockParams& p) {
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  auto project = [&](const Tensor& w, const Tensor& b) {
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        double acc = b[j];
        for (std::size_t m = 0; m < d; ++m) acc += x.at2(i, m) * w.at2(m, j);
        out[i][j] = acc;
      }
    }
    return out;
  };
  const Tensor no_bias({d});
  const auto q = project(p.wq, p.bq);
  const auto k = project(p.wk, no_bias);
  const auto v = project(p.wv, p.bv);
  std::vector<std::vector<double>> attn(n, std::vector<double>(d));
  attend_slice(q, k, v, p.heads, attn);
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = p.proj_b[j];
      for (std::size_t m = 0; m < d; ++m) acc += attn[i][m] * p.proj_w.at2(m, j);
      out.at2(i, j) = acc;
    }
  }
  return out;
}

Tensor vanilla_block(const Tensor& x, const VanillaBlockParams& p) {
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  const double eps = kLayerNormEps;
  const Tensor ln1 = reference::layer_norm(x, 1, p.ln1_gain, p.ln1_bias, eps);
  const Tensor msa = reference::vanilla_msa(ln1, p);
  Tensor u({n, d});
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = x[i] + msa[i];
  const Tensor ln2 = reference::layer_norm(u, 1, p.ln2_gain, p.ln2_bias, eps);
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> hidden(2 * d);
    for (std::size_t j = 0; j < 2 * d; ++j) {
      double acc = p.mlp_b1[j];
      for (std::size_t m = 0; m < d; ++m) acc += ln2.at2(i, m) * p.mlp_w1.at2(m, j);
      hidden[j] = gelu_scalar(acc);
    }
    for (std::size_t j = 0; j < d; ++j) {
      double acc = p.mlp_b2[j];
      for (std::size_t m = 0; m < 2 * d; ++m) acc += hidden[m] * p.mlp_w2.at2(m, j);
      out.at2(i, j) = u.at2(i, j) + acc;
    }
  }
  return out;
}

Tensor attention_w(const Tensor& x, const FeatERBlockParams& p) {
  const std::size_t n = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  Tensor out({n, h, w});
  for (std::size_t r = 0; r < h; ++r) {
    // Project the row r of every channel along the width axis.
    auto project = [&](const Tensor& wt, const Tensor& b) {
      std::vector<std::vector<double>> m(n, std::vector<double>(w));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < w; ++c) {
          double acc = b[c];
          for (std::size_t m2 = 0; m2 < w; ++m2) acc += x.at3(i, r, m2) * wt.at2(m2, c);
          m[i][c] = acc;
        }
      }
      return m;
    };
    const Tensor no_bias({w});
    const auto q = project(p.wq_w, p.bq_w);
    const auto k = project(p.wk_w, no_bias);
    const auto v = project(p.wv_w, p.bv_w);
    std::vector<std::vector<double>> attn(n, std::vector<double>(w));
    attend_slice(q, k, v, p.heads, attn);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < w; ++c) out.at3(i, r, c) = attn[i][c];
    }
  }
  return out;
}

Tensor attention_h(const Tensor& x, const FeatERBlockParams& p) {
  const std::size_t n = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  Tensor out({n, h, w});
  for (std::size_t c = 0; c < w; ++c) {
    // Column c of every channel, attended along the height axis.
    auto project = [&](const Tensor& wt, const Tensor& b) {
      std::vector<std::vector<double>> m(n, std::vector<double>(h));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < h; ++r) {
          double acc = b[r];
          for (std::size_t m2 = 0; m2 < h; ++m2) acc += x.at3(i, m2, c) * wt.at2(m2, r);
          m[i][r] = acc;
        }
      }
      return m;
    };
    const Tensor no_bias({h});
    const auto q = project(p.wq_h, p.bq_h);
    const auto k = project(p.wk_h, no_bias);
    const auto v = project(p.wv_h, p.bv_h);
    std::vector<std::vector<double>> attn(n, std::vector<double>(h));
    attend_slice(q, k, v, p.heads, attn);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < h; ++r) out.at3(i, r, c) = attn[i][r];
    }
  }
  return out;
}

Tensor feater_ffn(const Tensor& x, const FeatERBlockParams& p) {
  const std::size_t n = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  Tensor out({n, h, w});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      std::vector<double> hidden(2 * n);
      for (std::size_t o = 0; o < 2 * n; ++o) {
        double acc = p.ffn_b1[o];
        for (std::size_t i = 0; i < n; ++i) acc += p.ffn_w1.at2(o, i) * x.at3(i, r, c);
        hidden[o] = gelu_scalar(acc);
      }
      for (std::size_t o = 0; o < n; ++o) {
        double acc = p.ffn_b2[o];
        for (std::size_t i = 0; i < 2 * n; ++i) acc += p.ffn_w2.at2(o, i) * hidden[i];
        out.at3(o, r, c) = acc;
      }
    }
  }
  return out;
}

Tensor feater_block(const Tensor& x, const FeatERBlockParams& p) {
  const std::size_t n = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const Tensor ln1 = reference::layer_norm(x, 2, p.ln1_gain, p.ln1_bias, kLayerNormEps);
  const Tensor aw = reference::attention_w(ln1, p);
  const Tensor ah = reference::attention_h(ln1, p);
  Tensor streams({n, h, w});
  for (std::size_t i = 0; i < streams.size(); ++i) streams[i] = aw[i] + ah[i];
  const Tensor projected = reference::conv_channel_1x1(streams, p.proj_w, p.proj_b);
  Tensor u({n, h, w});
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = projected[i] + x[i];
  const Tensor ln2 = reference::layer_norm(u, 2, p.ln2_gain, p.ln2_bias, kLayerNormEps);
  const Tensor ffn = reference::feater_ffn(ln2, p);
  Tensor out({n, h, w});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u[i] + ffn[i];
  return out;
}

}  // namespace feater::reference
