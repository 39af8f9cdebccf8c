#include "feater/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "feater/errors.hpp"
#include "feater/rng.hpp"

namespace feater {

namespace {

constexpr std::size_t kSubsampleThreshold = 4096;
constexpr std::size_t kSubsampleCount = 64;
constexpr double kRelFloor = 1e-12;

double evaluate(const ScalarBuildFn& build, const std::vector<Tensor>& params) {
  Graph g;
  std::vector<VarId> ids;
  ids.reserve(params.size());
  for (const Tensor& p : params) ids.push_back(g.leaf(p, false));
  return g.scalar_value(build(g, ids));
}

std::vector<std::size_t> entries_to_check(std::size_t count, RngStream rng) {
  std::vector<std::size_t> entries;
  if (count <= kSubsampleThreshold) {
    entries.resize(count);
    for (std::size_t i = 0; i < count; ++i) entries[i] = i;
    return entries;
  }
  // Partial Fisher-Yates over [0, count) for a without-replacement sample.
  std::vector<std::size_t> pool(count);
  for (std::size_t i = 0; i < count; ++i) pool[i] = i;
  for (std::size_t i = 0; i < kSubsampleCount; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(count - i));
    std::swap(pool[i], pool[j]);
    entries.push_back(pool[i]);
  }
  return entries;
}

}  // namespace

nlohmann::json GradCheckReport::to_json() const {
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& g : groups) {
    groups_json.push_back({{"name", g.name},
                           {"max_rel_error", g.max_rel_error},
                           {"entries_checked", g.entries_checked}});
  }
  return {{"groups", groups_json},
          {"eps", eps},
          {"tolerance", tolerance},
          {"max_rel_error", max_rel_error},
          {"pass", pass}};
}

GradCheckReport grad_check(const ScalarBuildFn& build, std::vector<Tensor> params,
                           const std::vector<std::string>& group_names, double eps,
                           double tolerance, std::uint64_t subsample_seed) {
  if (eps <= 0.0) throw ParameterError("grad_check: eps must be positive");
  if (group_names.size() != params.size()) {
    throw ConfigError("grad_check: " + std::to_string(params.size()) + " parameter groups but " +
                      std::to_string(group_names.size()) + " names");
  }

  // Analytic gradients from one recorded forward + backward.
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<VarId> ids;
    for (const Tensor& p : params) ids.push_back(g.leaf(p, true));
    const VarId loss = build(g, ids);
    g.backward(loss);
    for (VarId id : ids) {
      analytic.push_back(g.grad(id));
      if (!analytic.back().all_finite()) {
        throw NumericError("grad_check: non-finite reverse-mode gradient");
      }
    }
  }

  GradCheckReport report;
  report.eps = eps;
  report.tolerance = tolerance;
  RngStream rng = RngStream(subsample_seed).substream("gradcheck");

  for (std::size_t gi = 0; gi < params.size(); ++gi) {
    GradCheckGroup group;
    group.name = group_names[gi];
    const auto entries =
        entries_to_check(params[gi].size(), rng.substream(group_names[gi]));
    group.entries_checked = entries.size();
    for (std::size_t e : entries) {
      const double saved = params[gi][e];
      params[gi][e] = saved + eps;
      const double f_plus = evaluate(build, params);
      params[gi][e] = saved - eps;
      const double f_minus = evaluate(build, params);
      params[gi][e] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      if (!std::isfinite(numeric)) {
        throw NumericError("grad_check: non-finite finite-difference gradient");
      }
      const double a = analytic[gi][e];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kRelFloor});
      group.max_rel_error = std::max(group.max_rel_error, rel);
    }
    report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
    report.groups.push_back(std::move(group));
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace feater
