#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace feater {

class Graph;
struct VanillaBlockParams;
struct FeatERBlockParams;

struct CostRow {
  std::string label;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
};

// Per-layer multiply-accumulate and parameter counts. Totals are computed
// from the rows, so they equal the row sums by construction. Counts are
// exact integers; one MAC = one multiply + one add. Softmax, normalization,
// activations, plain additions and biases contribute no MACs.
struct CostReport {
  std::vector<CostRow> rows;

  std::uint64_t total_macs() const;
  std::uint64_t total_params() const;

  nlohmann::json to_json() const;
  static CostReport from_json(const nlohmann::json& j);
  // Aligned plain-text table.
  std::string to_table() const;
};

// Accumulates MACs during an instrumented pass, aggregated by label in
// first-seen order. Each recorded pass owns its own counter.
class MacCounter {
 public:
  void add(std::string_view label, std::uint64_t macs);
  CostReport report() const;
  std::uint64_t total() const { return total_; }

 private:
  std::vector<CostRow> rows_;
  std::uint64_t total_ = 0;
};

// Closed-form MAC count of one vanilla transformer block on [n, d] tokens:
// 8nd^2 + 2n^2 d, broken down per layer.
CostReport macs_vanilla_block(std::size_t n, std::size_t d);

// Closed-form MAC count of one feature-map block on [n, h, w]:
// 3nhw(w+h) + 9n^2 hw, broken down per layer.
CostReport macs_feater_block(std::size_t n, std::size_t h, std::size_t w);

// MACs actually recorded by a graph built with counting enabled.
// Throws StateError when the graph ran without counting.
CostReport count_macs_instrumented(const Graph& g);

// Parameter counts per layer, from the actual tensor shapes. Weight matrices
// get one row per layer; biases and norm parameters land in a single
// separate row labelled kBiasNormRowLabel.
inline constexpr std::string_view kBiasNormRowLabel = "biases_and_norms";
CostReport count_params(const VanillaBlockParams& p);
CostReport count_params(const FeatERBlockParams& p);
// Sum of the weight rows (everything except the bias/norm row).
std::uint64_t weight_param_subtotal(const CostReport& report);

// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

}  // namespace feater
