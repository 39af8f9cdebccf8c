#include "feater/blocks.hpp"

#include <cmath>
#include <fstream>

#include "feater/errors.hpp"

#include "json.hpp"

namespace feater {

namespace {

Tensor uniform_fanin(std::vector<std::size_t> shape, std::size_t fan_in, RngStream rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_range(-bound, bound);
  return t;
}

// softmax(q k^T / sqrt(f/heads)) v along the second-to-last (token) axis,
// heads splitting the trailing feature axis.
VarId scaled_attention(Graph& g, VarId q, VarId k, VarId v, std::size_t heads,
                       std::string_view logits_label, std::string_view apply_label) {
  const Tensor& qv = g.value(q);
  const std::size_t f = qv.shape().back();
  if (heads == 0 || f % heads != 0) {
    throw ParameterError("attention: feature extent " + std::to_string(f) +
                         " not divisible by head count " + std::to_string(heads));
  }
  const std::size_t fh = f / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(fh));
  const std::size_t last = qv.rank() - 1;

  std::vector<VarId> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t t = 0; t < heads; ++t) {
    const std::size_t off = t * fh;
    const VarId qh = heads == 1 ? q : g.slice_lastdim(q, off, fh);
    const VarId kh = heads == 1 ? k : g.slice_lastdim(k, off, fh);
    const VarId vh = heads == 1 ? v : g.slice_lastdim(v, off, fh);
    const VarId logits =
        g.scale(g.matmul(qh, g.swap_axes(kh, last - 1, last), logits_label), inv_sqrt);
    head_outputs.push_back(g.matmul(g.softmax_lastdim(logits), vh, apply_label));
  }
  return g.concat_lastdim(head_outputs);
}

void require_token_matrix(const Tensor& x, std::size_t d) {
  if (x.rank() != 2 || x.shape()[1] != d) {
    throw DimensionError("token matrix " + shape_to_string(x.shape()) +
                         " does not match embedding dim " + std::to_string(d));
  }
}

void require_stack_matches(const Tensor& x, std::size_t n, std::size_t h, std::size_t w) {
  validate_feature_map_stack(x);
  if (x.shape()[0] != n || x.shape()[1] != h || x.shape()[2] != w) {
    throw DimensionError("feature map stack " + shape_to_string(x.shape()) +
                         " does not match params [" + std::to_string(n) + ", " +
                         std::to_string(h) + ", " + std::to_string(w) + "]");
  }
}

template <typename Params, typename Fn>
Tensor run_plain(const Tensor& x, const Params& p, Fn&& fn) {
  Graph g;
  const VarId xid = g.leaf(x, false);
  const auto vars = bind_block(g, p, false);
  return g.value(fn(g, xid, vars));
}

}  // namespace

std::string arch_name(Arch arch) { return arch == Arch::kVanilla ? "vanilla" : "feater"; }

Arch arch_from_name(const std::string& name) {
  if (name == "vanilla") return Arch::kVanilla;
  if (name == "feater") return Arch::kFeatER;
  throw ParameterError("unknown architecture: " + name);
}

void validate_feature_map_stack(const Tensor& x) {
  if (x.rank() != 3 || x.shape()[1] < 2 || x.shape()[2] < 2) {
    throw DimensionError("feature map stack must be [n, h>=2, w>=2], got " +
                         shape_to_string(x.shape()));
  }
}

TokenMatrix flatten_stack(const FeatureMapStack& x) {
  validate_feature_map_stack(x);
  return Tensor({x.shape()[0], x.shape()[1] * x.shape()[2]}, std::vector<double>(x.values()));
}

FeatureMapStack unflatten_tokens(const TokenMatrix& t, std::size_t h, std::size_t w) {
  if (t.rank() != 2) {
    throw DimensionError("unflatten_tokens: expected [n, d], got " + shape_to_string(t.shape()));
  }
  if (t.shape()[1] != h * w) {
    throw DimensionError("unflatten_tokens: d = " + std::to_string(t.shape()[1]) +
                         " but h*w = " + std::to_string(h * w));
  }
  return Tensor({t.shape()[0], h, w}, std::vector<double>(t.values()));
}

VanillaBlockParams VanillaBlockParams::init(std::size_t d, std::size_t heads,
                                            const RngStream& rng) {
  if (d == 0) throw ParameterError("vanilla block: d must be positive");
  if (heads == 0 || d % heads != 0) {
    throw ParameterError("vanilla block: d = " + std::to_string(d) +
                         " not divisible by heads = " + std::to_string(heads));
  }
  VanillaBlockParams p;
  p.heads = heads;
  p.wq = uniform_fanin({d, d}, d, rng.substream("wq"));
  p.wk = uniform_fanin({d, d}, d, rng.substream("wk"));
  p.wv = uniform_fanin({d, d}, d, rng.substream("wv"));
  p.bq = Tensor({d});
  p.bv = Tensor({d});
  p.proj_w = uniform_fanin({d, d}, d, rng.substream("proj_w"));
  p.proj_b = Tensor({d});
  p.mlp_w1 = uniform_fanin({d, 2 * d}, d, rng.substream("mlp_w1"));
  p.mlp_b1 = Tensor({2 * d});
  p.mlp_w2 = uniform_fanin({2 * d, d}, 2 * d, rng.substream("mlp_w2"));
  p.mlp_b2 = Tensor({d});
  p.ln1_gain = Tensor::full({d}, 1.0);
  p.ln1_bias = Tensor({d});
  p.ln2_gain = Tensor::full({d}, 1.0);
  p.ln2_bias = Tensor({d});
  return p;
}

std::vector<std::pair<std::string, Tensor*>> VanillaBlockParams::named_tensors() {
  return {{"wq", &wq},           {"wk", &wk},           {"wv", &wv},
          {"bq", &bq},           {"bv", &bv},
          {"proj_w", &proj_w},   {"proj_b", &proj_b},   {"mlp_w1", &mlp_w1},
          {"mlp_b1", &mlp_b1},   {"mlp_w2", &mlp_w2},   {"mlp_b2", &mlp_b2},
          {"ln1_gain", &ln1_gain}, {"ln1_bias", &ln1_bias}, {"ln2_gain", &ln2_gain},
          {"ln2_bias", &ln2_bias}};
}

std::vector<std::pair<std::string, const Tensor*>> VanillaBlockParams::named_tensors() const {
  auto mutable_list = const_cast<VanillaBlockParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, t] : mutable_list) out.emplace_back(name, t);
  return out;
}

FeatERBlockParams FeatERBlockParams::init(std::size_t n, std::size_t h, std::size_t w,
                                          std::size_t heads, const RngStream& rng) {
  if (n == 0 || h < 2 || w < 2) {
    throw ParameterError("feater block: need n >= 1, h >= 2, w >= 2");
  }
  if (heads == 0 || w % heads != 0 || h % heads != 0) {
    throw ParameterError("feater block: h and w must both be divisible by heads = " +
                         std::to_string(heads));
  }
  FeatERBlockParams p;
  p.heads = heads;
  p.wq_w = uniform_fanin({w, w}, w, rng.substream("wq_w"));
  p.wk_w = uniform_fanin({w, w}, w, rng.substream("wk_w"));
  p.wv_w = uniform_fanin({w, w}, w, rng.substream("wv_w"));
  p.bq_w = Tensor({w});
  p.bv_w = Tensor({w});
  p.wq_h = uniform_fanin({h, h}, h, rng.substream("wq_h"));
  p.wk_h = uniform_fanin({h, h}, h, rng.substream("wk_h"));
  p.wv_h = uniform_fanin({h, h}, h, rng.substream("wv_h"));
  p.bq_h = Tensor({h});
  p.bv_h = Tensor({h});
  p.proj_w = uniform_fanin({n, n}, n, rng.substream("proj_w"));
  p.proj_b = Tensor({n});
  p.ffn_w1 = uniform_fanin({2 * n, n}, n, rng.substream("ffn_w1"));
  p.ffn_b1 = Tensor({2 * n});
  p.ffn_w2 = uniform_fanin({n, 2 * n}, 2 * n, rng.substream("ffn_w2"));
  p.ffn_b2 = Tensor({n});
  p.ln1_gain = Tensor::full({n}, 1.0);
  p.ln1_bias = Tensor({n});
  p.ln2_gain = Tensor::full({n}, 1.0);
  p.ln2_bias = Tensor({n});
  return p;
}

std::vector<std::pair<std::string, Tensor*>> FeatERBlockParams::named_tensors() {
  return {{"wq_w", &wq_w},       {"wk_w", &wk_w},       {"wv_w", &wv_w},
          {"bq_w", &bq_w},       {"bv_w", &bv_w},
          {"wq_h", &wq_h},       {"wk_h", &wk_h},       {"wv_h", &wv_h},
          {"bq_h", &bq_h},       {"bv_h", &bv_h},
          {"proj_w", &proj_w},   {"proj_b", &proj_b},   {"ffn_w1", &ffn_w1},
          {"ffn_b1", &ffn_b1},   {"ffn_w2", &ffn_w2},   {"ffn_b2", &ffn_b2},
          {"ln1_gain", &ln1_gain}, {"ln1_bias", &ln1_bias}, {"ln2_gain", &ln2_gain},
          {"ln2_bias", &ln2_bias}};
}

std::vector<std::pair<std::string, const Tensor*>> FeatERBlockParams::named_tensors() const {
  auto mutable_list = const_cast<FeatERBlockParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, t] : mutable_list) out.emplace_back(name, t);
  return out;
}

VanillaBlockVars bind_block(Graph& g, const VanillaBlockParams& p, bool requires_grad) {
  VanillaBlockVars v;
  v.heads = p.heads;
  v.wq = g.leaf(p.wq, requires_grad);
  v.wk = g.leaf(p.wk, requires_grad);
  v.wv = g.leaf(p.wv, requires_grad);
  v.bq = g.leaf(p.bq, requires_grad);
  v.bv = g.leaf(p.bv, requires_grad);
  v.proj_w = g.leaf(p.proj_w, requires_grad);
  v.proj_b = g.leaf(p.proj_b, requires_grad);
  v.mlp_w1 = g.leaf(p.mlp_w1, requires_grad);
  v.mlp_b1 = g.leaf(p.mlp_b1, requires_grad);
  v.mlp_w2 = g.leaf(p.mlp_w2, requires_grad);
  v.mlp_b2 = g.leaf(p.mlp_b2, requires_grad);
  v.ln1_gain = g.leaf(p.ln1_gain, requires_grad);
  v.ln1_bias = g.leaf(p.ln1_bias, requires_grad);
  v.ln2_gain = g.leaf(p.ln2_gain, requires_grad);
  v.ln2_bias = g.leaf(p.ln2_bias, requires_grad);
  return v;
}

FeatERBlockVars bind_block(Graph& g, const FeatERBlockParams& p, bool requires_grad) {
  FeatERBlockVars v;
  v.heads = p.heads;
  v.wq_w = g.leaf(p.wq_w, requires_grad);
  v.wk_w = g.leaf(p.wk_w, requires_grad);
  v.wv_w = g.leaf(p.wv_w, requires_grad);
  v.bq_w = g.leaf(p.bq_w, requires_grad);
  v.bv_w = g.leaf(p.bv_w, requires_grad);
  v.wq_h = g.leaf(p.wq_h, requires_grad);
  v.wk_h = g.leaf(p.wk_h, requires_grad);
  v.wv_h = g.leaf(p.wv_h, requires_grad);
  v.bq_h = g.leaf(p.bq_h, requires_grad);
  v.bv_h = g.leaf(p.bv_h, requires_grad);
  v.proj_w = g.leaf(p.proj_w, requires_grad);
  v.proj_b = g.leaf(p.proj_b, requires_grad);
  v.ffn_w1 = g.leaf(p.ffn_w1, requires_grad);
  v.ffn_b1 = g.leaf(p.ffn_b1, requires_grad);
  v.ffn_w2 = g.leaf(p.ffn_w2, requires_grad);
  v.ffn_b2 = g.leaf(p.ffn_b2, requires_grad);
  v.ln1_gain = g.leaf(p.ln1_gain, requires_grad);
  v.ln1_bias = g.leaf(p.ln1_bias, requires_grad);
  v.ln2_gain = g.leaf(p.ln2_gain, requires_grad);
  v.ln2_bias = g.leaf(p.ln2_bias, requires_grad);
  return v;
}

VanillaBlockVars vanilla_vars_from_ids(const std::vector<VarId>& ids, std::size_t heads) {
  if (ids.size() != 15) {
    throw ConfigError("vanilla block needs 15 parameter tensors, got " +
                      std::to_string(ids.size()));
  }
  VanillaBlockVars v;
  v.heads = heads;
  v.wq = ids[0];
  v.wk = ids[1];
  v.wv = ids[2];
  v.bq = ids[3];
  v.bv = ids[4];
  v.proj_w = ids[5];
  v.proj_b = ids[6];
  v.mlp_w1 = ids[7];
  v.mlp_b1 = ids[8];
  v.mlp_w2 = ids[9];
  v.mlp_b2 = ids[10];
  v.ln1_gain = ids[11];
  v.ln1_bias = ids[12];
  v.ln2_gain = ids[13];
  v.ln2_bias = ids[14];
  return v;
}

FeatERBlockVars feater_vars_from_ids(const std::vector<VarId>& ids, std::size_t heads) {
  if (ids.size() != 20) {
    throw ConfigError("feater block needs 20 parameter tensors, got " +
                      std::to_string(ids.size()));
  }
  FeatERBlockVars v;
  v.heads = heads;
  v.wq_w = ids[0];
  v.wk_w = ids[1];
  v.wv_w = ids[2];
  v.bq_w = ids[3];
  v.bv_w = ids[4];
  v.wq_h = ids[5];
  v.wk_h = ids[6];
  v.wv_h = ids[7];
  v.bq_h = ids[8];
  v.bv_h = ids[9];
  v.proj_w = ids[10];
  v.proj_b = ids[11];
  v.ffn_w1 = ids[12];
  v.ffn_b1 = ids[13];
  v.ffn_w2 = ids[14];
  v.ffn_b2 = ids[15];
  v.ln1_gain = ids[16];
  v.ln1_bias = ids[17];
  v.ln2_gain = ids[18];
  v.ln2_bias = ids[19];
  return v;
}

VarId vanilla_msa(Graph& g, VarId x, const VanillaBlockVars& p) {
  require_token_matrix(g.value(x), g.value(p.wq).shape()[0]);
  const VarId q = g.apply_lastdim(x, p.wq, p.bq, "qkv");
  const VarId k = g.apply_lastdim(x, p.wk, kNoVar, "qkv");
  const VarId v = g.apply_lastdim(x, p.wv, p.bv, "qkv");
  const VarId attn = scaled_attention(g, q, k, v, p.heads, "attn_logits", "attn_apply");
  return g.apply_lastdim(attn, p.proj_w, p.proj_b, "projection");
}

TokenMatrix vanilla_msa(const TokenMatrix& x, const VanillaBlockParams& p) {
  return run_plain(x, p, [](Graph& g, VarId xid, const VanillaBlockVars& v) {
    return vanilla_msa(g, xid, v);
  });
}

VarId vanilla_block_forward(Graph& g, VarId x, const VanillaBlockVars& p) {
  const VarId ln1 = g.layer_norm(x, 1, p.ln1_gain, p.ln1_bias, kLayerNormEps);
  const VarId u = g.add(x, vanilla_msa(g, ln1, p));
  const VarId ln2 = g.layer_norm(u, 1, p.ln2_gain, p.ln2_bias, kLayerNormEps);
  VarId m = g.apply_lastdim(ln2, p.mlp_w1, p.mlp_b1, "mlp_fc1");
  m = g.gelu(m);
  m = g.apply_lastdim(m, p.mlp_w2, p.mlp_b2, "mlp_fc2");
  return g.add(u, m);
}

TokenMatrix vanilla_block_forward(const TokenMatrix& x, const VanillaBlockParams& p) {
  return run_plain(x, p, [](Graph& g, VarId xid, const VanillaBlockVars& v) {
    return vanilla_block_forward(g, xid, v);
  });
}

VarId attention_w(Graph& g, VarId x, const FeatERBlockVars& p) {
  const Tensor& xv = g.value(x);
  validate_feature_map_stack(xv);
  if (xv.shape()[2] != g.value(p.wq_w).shape()[0]) {
    throw DimensionError("attention_w: stack " + shape_to_string(xv.shape()) +
                         " does not match W_w " + shape_to_string(g.value(p.wq_w).shape()));
  }
  const VarId q = g.apply_lastdim(x, p.wq_w, p.bq_w, "w_stream_qkv");
  const VarId k = g.apply_lastdim(x, p.wk_w, kNoVar, "w_stream_qkv");
  const VarId v = g.apply_lastdim(x, p.wv_w, p.bv_w, "w_stream_qkv");
  // Batch over the h rows: [n, h, w] -> [h, n, w]; attention across channels.
  const VarId attn = scaled_attention(g, g.swap_axes(q, 0, 1), g.swap_axes(k, 0, 1),
                                      g.swap_axes(v, 0, 1), p.heads, "attn_logits", "attn_apply");
  return g.swap_axes(attn, 0, 1);
}

FeatureMapStack attention_w(const FeatureMapStack& x, const FeatERBlockParams& p) {
  return run_plain(x, p, [](Graph& g, VarId xid, const FeatERBlockVars& v) {
    return attention_w(g, xid, v);
  });
}

VarId attention_h(Graph& g, VarId x, const FeatERBlockVars& p) {
  const Tensor& xv = g.value(x);
  validate_feature_map_stack(xv);
  if (xv.shape()[1] != g.value(p.wq_h).shape()[0]) {
    throw DimensionError("attention_h: stack " + shape_to_string(xv.shape()) +
                         " does not match W_h " + shape_to_string(g.value(p.wq_h).shape()));
  }
  const VarId xt = g.swap_axes(x, 1, 2);  // [n, w, h]
  const VarId q = g.apply_lastdim(xt, p.wq_h, p.bq_h, "h_stream_qkv");
  const VarId k = g.apply_lastdim(xt, p.wk_h, kNoVar, "h_stream_qkv");
  const VarId v = g.apply_lastdim(xt, p.wv_h, p.bv_h, "h_stream_qkv");
  // Batch over the w columns: [n, w, h] -> [w, n, h].
  const VarId attn = scaled_attention(g, g.swap_axes(q, 0, 1), g.swap_axes(k, 0, 1),
                                      g.swap_axes(v, 0, 1), p.heads, "attn_logits", "attn_apply");
  // Back to [n, w, h], then to [n, h, w].
  return g.swap_axes(g.swap_axes(attn, 0, 1), 1, 2);
}

FeatureMapStack attention_h(const FeatureMapStack& x, const FeatERBlockParams& p) {
  return run_plain(x, p, [](Graph& g, VarId xid, const FeatERBlockVars& v) {
    return attention_h(g, xid, v);
  });
}

VarId feater_ffn(Graph& g, VarId x, const FeatERBlockVars& p) {
  const Tensor& xv = g.value(x);
  if (xv.rank() != 3 || xv.shape()[0] != g.value(p.ffn_w1).shape()[1]) {
    throw DimensionError("feater_ffn: stack " + shape_to_string(xv.shape()) +
                         " does not match conv " + shape_to_string(g.value(p.ffn_w1).shape()));
  }
  VarId hchan = g.conv_channel_1x1(x, p.ffn_w1, p.ffn_b1, "ffn_conv1");
  hchan = g.gelu(hchan);
  return g.conv_channel_1x1(hchan, p.ffn_w2, p.ffn_b2, "ffn_conv2");
}

FeatureMapStack feater_ffn(const FeatureMapStack& x, const FeatERBlockParams& p) {
  return run_plain(x, p, [](Graph& g, VarId xid, const FeatERBlockVars& v) {
    return feater_ffn(g, xid, v);
  });
}

VarId feater_block_forward(Graph& g, VarId x, const FeatERBlockVars& p) {
  const VarId ln1 = g.layer_norm(x, 2, p.ln1_gain, p.ln1_bias, kLayerNormEps);
  const VarId a = g.add(attention_w(g, ln1, p), attention_h(g, ln1, p));
  const VarId projected = g.conv_channel_1x1(a, p.proj_w, p.proj_b, "projection");
  const VarId u = g.add(projected, x);
  const VarId ln2 = g.layer_norm(u, 2, p.ln2_gain, p.ln2_bias, kLayerNormEps);
  return g.add(u, feater_ffn(g, ln2, p));
}

FeatureMapStack feater_block_forward(const FeatureMapStack& x, const FeatERBlockParams& p) {
  require_stack_matches(x, p.channels(), p.height(), p.width());
  return run_plain(x, p, [](Graph& g, VarId xid, const FeatERBlockVars& v) {
    return feater_block_forward(g, xid, v);
  });
}

StackParams init_stack(const BlockStackConfig& cfg) {
  if (cfg.depth == 0) throw ConfigError("stack depth must be >= 1");
  if (cfg.init_scheme != "uniform_fanin") {
    throw ConfigError("unknown init scheme: " + cfg.init_scheme);
  }
  StackParams params;
  params.arch = cfg.arch;
  const RngStream rng = RngStream(cfg.seed).substream("init");
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const RngStream block_rng = rng.substream("block" + std::to_string(i));
    if (cfg.arch == Arch::kVanilla) {
      params.vanilla.push_back(VanillaBlockParams::init(cfg.d, cfg.heads, block_rng));
    } else {
      params.feater.push_back(FeatERBlockParams::init(cfg.n, cfg.h, cfg.w, cfg.heads, block_rng));
    }
  }
  return params;
}

StackVars bind_stack(Graph& g, const StackParams& params, bool requires_grad) {
  StackVars vars;
  vars.arch = params.arch;
  for (const auto& p : params.vanilla) vars.vanilla.push_back(bind_block(g, p, requires_grad));
  for (const auto& p : params.feater) vars.feater.push_back(bind_block(g, p, requires_grad));
  return vars;
}

VarId stack_forward(Graph& g, VarId x, const BlockStackConfig& cfg, const StackVars& vars) {
  const std::size_t bound = vars.arch == Arch::kVanilla ? vars.vanilla.size() : vars.feater.size();
  if (bound != cfg.depth) {
    throw ConfigError("stack depth " + std::to_string(cfg.depth) + " but " +
                      std::to_string(bound) + " parameter blocks");
  }
  VarId cur = x;
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    cur = vars.arch == Arch::kVanilla ? vanilla_block_forward(g, cur, vars.vanilla[i])
                                      : feater_block_forward(g, cur, vars.feater[i]);
  }
  return cur;
}

Tensor stack_forward(const Tensor& x, const BlockStackConfig& cfg, const StackParams& params) {
  if (params.depth() != cfg.depth) {
    throw ConfigError("stack depth " + std::to_string(cfg.depth) + " but " +
                      std::to_string(params.depth()) + " parameter blocks");
  }
  Graph g;
  const VarId xid = g.leaf(x, false);
  const StackVars vars = bind_stack(g, params, false);
  return g.value(stack_forward(g, xid, cfg, vars));
}

void save_checkpoint(const std::filesystem::path& dir, const BlockStackConfig& cfg,
                     const StackParams& params) {
  std::filesystem::create_directories(dir);
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t i = 0; i < params.depth(); ++i) {
    nlohmann::json tensors = nlohmann::json::object();
    auto named = params.arch == Arch::kVanilla ? params.vanilla[i].named_tensors()
                                               : params.feater[i].named_tensors();
    for (const auto& [name, tensor] : named) {
      const std::string file = "block" + std::to_string(i) + "." + name + ".ftr";
      tensor->save(dir / file);
      tensors[name] = file;
    }
    blocks.push_back({{"index", i}, {"tensors", tensors}});
  }
  nlohmann::json manifest = {{"format", "feater-checkpoint-v1"},
                             {"arch", arch_name(params.arch)},
                             {"depth", params.depth()},
                             {"heads", cfg.heads},
                             {"n", cfg.n},
                             {"h", cfg.h},
                             {"w", cfg.w},
                             {"d", cfg.d},
                             {"seed", cfg.seed},
                             {"blocks", blocks}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

std::pair<BlockStackConfig, StackParams> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot read manifest in " + dir.string());
  nlohmann::json manifest;
  in >> manifest;

  BlockStackConfig cfg;
  cfg.arch = arch_from_name(manifest.at("arch").get<std::string>());
  cfg.depth = manifest.at("depth").get<std::size_t>();
  cfg.heads = manifest.at("heads").get<std::size_t>();
  cfg.n = manifest.at("n").get<std::size_t>();
  cfg.h = manifest.at("h").get<std::size_t>();
  cfg.w = manifest.at("w").get<std::size_t>();
  cfg.d = manifest.at("d").get<std::size_t>();
  cfg.seed = manifest.at("seed").get<std::uint64_t>();

  StackParams params;
  params.arch = cfg.arch;
  if (cfg.arch == Arch::kVanilla) {
    params.vanilla.resize(cfg.depth);
  } else {
    params.feater.resize(cfg.depth);
  }
  for (const auto& block : manifest.at("blocks")) {
    const std::size_t i = block.at("index").get<std::size_t>();
    if (i >= cfg.depth) throw IoError("manifest block index out of range");
    auto named = cfg.arch == Arch::kVanilla ? params.vanilla[i].named_tensors()
                                            : params.feater[i].named_tensors();
    for (auto& [name, tensor] : named) {
      const std::string file = block.at("tensors").at(name).get<std::string>();
      *tensor = Tensor::load(dir / file);
    }
    if (cfg.arch == Arch::kVanilla) {
      params.vanilla[i].heads = cfg.heads;
    } else {
      params.feater[i].heads = cfg.heads;
    }
  }
  return {cfg, params};
}

}  // namespace feater
