#include "feater/reconstruct.hpp"

#include <algorithm>
#include <cmath>

#include "feater/errors.hpp"
#include "feater/kernels.hpp"

namespace feater {

std::string fill_policy_name(FillPolicy fill) {
  (void)fill;
  return "zeros";
}

FillPolicy fill_policy_from_name(const std::string& name) {
  if (name == "zeros") return FillPolicy::kZeros;
  throw ParameterError("unsupported fill policy: " + name);
}

nlohmann::json MaskPlan::to_json() const {
  return {{"n", n},
          {"ratio", ratio},
          {"m", masked_count()},
          {"indices", indices},
          {"fill", fill_policy_name(fill)}};
}

MaskPlan MaskPlan::from_json(const nlohmann::json& j) {
  MaskPlan plan;
  plan.n = j.at("n").get<std::size_t>();
  plan.ratio = j.at("ratio").get<double>();
  plan.indices = j.at("indices").get<std::vector<std::size_t>>();
  plan.fill = fill_policy_from_name(j.at("fill").get<std::string>());
  if (j.at("m").get<std::size_t>() != plan.indices.size()) {
    throw ParameterError("mask plan: m does not match index count");
  }
  for (std::size_t idx : plan.indices) {
    if (idx >= plan.n) throw ParameterError("mask plan: index out of range");
  }
  return plan;
}

MaskPlan make_mask_plan(std::size_t n, double ratio, RngStream& rng) {
  if (n < 2) throw ParameterError("make_mask_plan: need n >= 2");
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ParameterError("make_mask_plan: ratio must be in [0, 1)");
  }
  const std::size_t m = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)));
  if (m >= n) {
    throw ParameterError("make_mask_plan: round(ratio*n) = " + std::to_string(m) +
                         " would mask every channel");
  }
  MaskPlan plan;
  plan.n = n;
  plan.ratio = ratio;
  // Partial Fisher-Yates: first m entries of a shuffled [0, n).
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(pool[i], pool[j]);
    plan.indices.push_back(pool[i]);
  }
  std::sort(plan.indices.begin(), plan.indices.end());
  return plan;
}

FeatureMapStack apply_mask(const FeatureMapStack& x, const MaskPlan& plan) {
  validate_feature_map_stack(x);
  if (plan.n != x.shape()[0]) {
    throw DimensionError("apply_mask: plan is for n = " + std::to_string(plan.n) +
                         " but stack has " + std::to_string(x.shape()[0]) + " channels");
  }
  FeatureMapStack out = x;
  const std::size_t pixels = x.shape()[1] * x.shape()[2];
  for (std::size_t idx : plan.indices) {
    if (idx >= plan.n) throw DimensionError("apply_mask: channel index out of range");
    double* map = out.data() + idx * pixels;
    for (std::size_t p = 0; p < pixels; ++p) map[p] = 0.0;
  }
  return out;
}

double reconstruction_loss(const FeatureMapStack& recon, const FeatureMapStack& target) {
  return mean_squared_error(recon, target);
}

ReconResult reconstruction_forward(const FeatureMapStack& x, const BlockStackConfig& cfg,
                                   const StackParams& stack, const MaskPlan* plan,
                                   ReconMode mode) {
  if (mode == ReconMode::kEval) {
    return {stack_forward(x, cfg, stack), std::nullopt};
  }
  if (!plan) throw ConfigError("reconstruction_forward: train mode requires a mask plan");
  const FeatureMapStack masked = apply_mask(x, *plan);
  FeatureMapStack output = stack_forward(masked, cfg, stack);
  const double loss = reconstruction_loss(output, x);
  return {std::move(output), loss};
}

std::pair<VarId, VarId> reconstruction_train_graph(Graph& g, const FeatureMapStack& x,
                                                   const BlockStackConfig& cfg,
                                                   const StackVars& vars, const MaskPlan& plan) {
  const VarId masked = g.leaf(apply_mask(x, plan), false);
  const VarId original = g.leaf(x, false);
  const VarId output = stack_forward(g, masked, cfg, vars);
  return {output, g.mse(output, original)};
}

}  // namespace feater
