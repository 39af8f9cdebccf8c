#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feater/blocks.hpp"
#include "feater/rng.hpp"
#include "feater/tensor.hpp"

#include "json.hpp"

namespace feater {

enum class FillPolicy { kZeros };

std::string fill_policy_name(FillPolicy fill);
FillPolicy fill_policy_from_name(const std::string& name);

// Which channels of an [n, h, w] stack get masked out before reconstruction.
// m = round(ratio * n), indices distinct, sorted, in [0, n).
struct MaskPlan {
  std::size_t n = 0;
  double ratio = 0.0;
  std::vector<std::size_t> indices;
  FillPolicy fill = FillPolicy::kZeros;

  std::size_t masked_count() const { return indices.size(); }
  nlohmann::json to_json() const;
  static MaskPlan from_json(const nlohmann::json& j);
};

// Draws m = round(ratio*n) channel indices uniformly without replacement.
// ratio must lie in [0, 1) and round(ratio*n) must stay below n.
MaskPlan make_mask_plan(std::size_t n, double ratio, RngStream& rng);

// Masked channels replaced per fill policy (zeros); unmasked channels are
// bit-identical to the input.
FeatureMapStack apply_mask(const FeatureMapStack& x, const MaskPlan& plan);

// Mean over all n*h*w entries of the squared difference.
double reconstruction_loss(const FeatureMapStack& recon, const FeatureMapStack& target);

enum class ReconMode { kTrain, kEval };

struct ReconResult {
  FeatureMapStack output;
  std::optional<double> loss;  // absent in eval mode
};

// Train: output = stack(apply_mask(x)), loss = MSE(output, x) over the whole
// stack. Eval: output = stack(x), no masking, no loss. Train mode without a
// plan is a configuration error.
ReconResult reconstruction_forward(const FeatureMapStack& x, const BlockStackConfig& cfg,
                                   const StackParams& stack, const MaskPlan* plan,
                                   ReconMode mode);

// Graph-composable train-mode forward for optimization: the mask is applied
// to the input data before it enters the graph, so gradients flow to the
// stack parameters only. Returns (output var, reconstruction loss var).
std::pair<VarId, VarId> reconstruction_train_graph(Graph& g, const FeatureMapStack& x,
                                                   const BlockStackConfig& cfg,
                                                   const StackVars& vars, const MaskPlan& plan);

}  // namespace feater
