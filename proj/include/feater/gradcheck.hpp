#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "feater/graph.hpp"
#include "feater/tensor.hpp"

#include "json.hpp"

namespace feater {

// Builds a scalar loss on the graph from the bound parameter leaves. The
// build must be deterministic: it is re-evaluated many times under
// finite-difference perturbations.
using ScalarBuildFn = std::function<VarId(Graph&, const std::vector<VarId>& params)>;

struct GradCheckGroup {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double eps = 0.0;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

// Central finite differences (f(p+eps) - f(p-eps)) / (2 eps) against the
// reverse-mode gradient, entry by entry. Groups larger than 4096 entries are
// checked on a seeded random subsample of 64 entries. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
// Throws ParameterError for eps <= 0 and NumericError on NaN gradients.
GradCheckReport grad_check(const ScalarBuildFn& build, std::vector<Tensor> params,
                           const std::vector<std::string>& group_names, double eps,
                           double tolerance = 1e-5, std::uint64_t subsample_seed = 0);

}  // namespace feater
