#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "feater/graph.hpp"
#include "feater/rng.hpp"
#include "feater/tensor.hpp"

namespace feater {

// [n, h, w]: n feature maps over an h x w grid. Both block architectures
// preserve this shape end to end.
using FeatureMapStack = Tensor;
// [n, d]: n tokens with embedding dimension d; d = h*w when produced by
// flatten_stack.
using TokenMatrix = Tensor;

enum class Arch { kVanilla, kFeatER };

std::string arch_name(Arch arch);
Arch arch_from_name(const std::string& name);

// Requires rank 3 with n >= 1, h >= 2, w >= 2.
void validate_feature_map_stack(const Tensor& x);

// Row-major flattening of each map: [n, h, w] -> [n, h*w]. Exact inverse of
// unflatten_tokens.
TokenMatrix flatten_stack(const FeatureMapStack& x);
FeatureMapStack unflatten_tokens(const TokenMatrix& t, std::size_t h, std::size_t w);

// ---- Vanilla transformer block over flattened tokens ----

struct VanillaBlockParams {
  Tensor wq, wk, wv;              // [d, d]
  Tensor bq, bv;                  // [d]; K carries no bias (softmax
                                  // cancels a per-row constant shift)
  Tensor proj_w;                  // [d, d]
  Tensor proj_b;                  // [d]
  Tensor mlp_w1;                  // [d, 2d]
  Tensor mlp_b1;                  // [2d]
  Tensor mlp_w2;                  // [2d, d]
  Tensor mlp_b2;                  // [d]
  Tensor ln1_gain, ln1_bias;      // [d]
  Tensor ln2_gain, ln2_bias;      // [d]
  std::size_t heads = 1;

  std::size_t dim() const { return wq.shape()[0]; }
  // Weights uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero,
  // norm gain 1 / bias 0. d must be divisible by heads.
  static VanillaBlockParams init(std::size_t d, std::size_t heads, const RngStream& rng);
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
};

// ---- Feature-map block: attention decomposed along w and h ----

struct FeatERBlockParams {
  Tensor wq_w, wk_w, wv_w;        // [w, w]
  Tensor bq_w, bv_w;              // [w]; K has no bias
  Tensor wq_h, wk_h, wv_h;        // [h, h]
  Tensor bq_h, bv_h;              // [h]
  Tensor proj_w;                  // [n, n] channel conv
  Tensor proj_b;                  // [n]
  Tensor ffn_w1;                  // [2n, n]
  Tensor ffn_b1;                  // [2n]
  Tensor ffn_w2;                  // [n, 2n]
  Tensor ffn_b2;                  // [n]
  Tensor ln1_gain, ln1_bias;      // [n], per-channel affine over the grid
  Tensor ln2_gain, ln2_bias;      // [n]
  std::size_t heads = 1;

  std::size_t channels() const { return proj_w.shape()[0]; }
  std::size_t height() const { return wq_h.shape()[0]; }
  std::size_t width() const { return wq_w.shape()[0]; }
  // w and h must both be divisible by heads.
  static FeatERBlockParams init(std::size_t n, std::size_t h, std::size_t w, std::size_t heads,
                                const RngStream& rng);
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
};

// Parameter leaves bound into a graph, mirroring the param structs.
struct VanillaBlockVars {
  VarId wq, wk, wv, bq, bv, proj_w, proj_b;
  VarId mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  VarId ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  std::size_t heads = 1;
};
struct FeatERBlockVars {
  VarId wq_w, wk_w, wv_w, bq_w, bv_w;
  VarId wq_h, wk_h, wv_h, bq_h, bv_h;
  VarId proj_w, proj_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  VarId ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  std::size_t heads = 1;
};

VanillaBlockVars bind_block(Graph& g, const VanillaBlockParams& p, bool requires_grad);
FeatERBlockVars bind_block(Graph& g, const FeatERBlockParams& p, bool requires_grad);

// Rebuilds the vars struct from leaf ids given in named_tensors() order;
// used to wire externally bound parameter groups (gradient checks, CLI).
VanillaBlockVars vanilla_vars_from_ids(const std::vector<VarId>& ids, std::size_t heads);
FeatERBlockVars feater_vars_from_ids(const std::vector<VarId>& ids, std::size_t heads);

inline constexpr double kLayerNormEps = 1e-5;

// Multi-head self-attention over the n tokens, projection included:
// softmax(Q K^T / sqrt(d/heads)) V per head, heads concatenated, times W_proj.
VarId vanilla_msa(Graph& g, VarId x, const VanillaBlockVars& p);
TokenMatrix vanilla_msa(const TokenMatrix& x, const VanillaBlockParams& p);

// Pre-norm residual block: u = x + MSA(LN1(x)); out = u + MLP(LN2(u)).
VarId vanilla_block_forward(Graph& g, VarId x, const VanillaBlockVars& p);
TokenMatrix vanilla_block_forward(const TokenMatrix& x, const VanillaBlockParams& p);

// Width-axis attention stream: Q/K/V maps along w, attention across the n
// channels batched over the h rows. Output keeps [n, h, w].
VarId attention_w(Graph& g, VarId x, const FeatERBlockVars& p);
FeatureMapStack attention_w(const FeatureMapStack& x, const FeatERBlockParams& p);

// Height-axis mirror: runs on [n, w, h] and is transposed back.
VarId attention_h(Graph& g, VarId x, const FeatERBlockVars& p);
FeatureMapStack attention_h(const FeatureMapStack& x, const FeatERBlockParams& p);

// Channel conv n -> 2n, GELU, channel conv 2n -> n.
VarId feater_ffn(Graph& g, VarId x, const FeatERBlockVars& p);
FeatureMapStack feater_ffn(const FeatureMapStack& x, const FeatERBlockParams& p);

// a = attention_w(LN1(x)) + attention_h(LN1(x)); u = proj(a) + x;
// out = u + FFN(LN2(u)).
VarId feater_block_forward(Graph& g, VarId x, const FeatERBlockVars& p);
FeatureMapStack feater_block_forward(const FeatureMapStack& x, const FeatERBlockParams& p);

// ---- Stacks ----

struct BlockStackConfig {
  std::size_t depth = 1;
  Arch arch = Arch::kFeatER;
  std::size_t n = 0, h = 0, w = 0;  // feature-map shape (feater)
  std::size_t d = 0;                // embedding dim (vanilla)
  std::size_t heads = 1;
  std::string init_scheme = "uniform_fanin";
  std::uint64_t seed = 0;
};

struct StackParams {
  Arch arch = Arch::kFeatER;
  std::vector<VanillaBlockParams> vanilla;
  std::vector<FeatERBlockParams> feater;

  std::size_t depth() const { return arch == Arch::kVanilla ? vanilla.size() : feater.size(); }
};

struct StackVars {
  Arch arch = Arch::kFeatER;
  std::vector<VanillaBlockVars> vanilla;
  std::vector<FeatERBlockVars> feater;
};

StackParams init_stack(const BlockStackConfig& cfg);
StackVars bind_stack(Graph& g, const StackParams& params, bool requires_grad);

// Sequential composition of cfg.depth blocks. Throws ConfigError when the
// params list does not match cfg.depth.
VarId stack_forward(Graph& g, VarId x, const BlockStackConfig& cfg, const StackVars& vars);
Tensor stack_forward(const Tensor& x, const BlockStackConfig& cfg, const StackParams& params);

// Checkpoint: manifest.json mapping block index -> tensor files named
// block{i}.{param_name}.ftr in the flat binary tensor format.
void save_checkpoint(const std::filesystem::path& dir, const BlockStackConfig& cfg,
                     const StackParams& params);
std::pair<BlockStackConfig, StackParams> load_checkpoint(const std::filesystem::path& dir);

}  // namespace feater
