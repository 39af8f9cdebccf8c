#include "feater/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "feater/blocks.hpp"
#include "feater/errors.hpp"
#include "feater/graph.hpp"

namespace feater {

std::uint64_t CostReport::total_macs() const {
  std::uint64_t total = 0;
  for (const auto& r : rows) total += r.macs;
  return total;
}

std::uint64_t CostReport::total_params() const {
  std::uint64_t total = 0;
  for (const auto& r : rows) total += r.params;
  return total;
}

nlohmann::json CostReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) rows_json.push_back({r.label, r.macs, r.params});
  return {{"rows", rows_json}, {"total_macs", total_macs()}, {"total_params", total_params()}};
}

CostReport CostReport::from_json(const nlohmann::json& j) {
  CostReport report;
  for (const auto& r : j.at("rows")) {
    report.rows.push_back({r.at(0).get<std::string>(), r.at(1).get<std::uint64_t>(),
                           r.at(2).get<std::uint64_t>()});
  }
  return report;
}

std::string CostReport::to_table() const {
  std::size_t label_width = 5;  // "total"
  for (const auto& r : rows) label_width = std::max(label_width, r.label.size());
  std::ostringstream os;
  auto line = [&](const std::string& label, std::uint64_t macs, std::uint64_t params) {
    os << label;
    for (std::size_t i = label.size(); i < label_width + 2; ++i) os << ' ';
    std::string m = std::to_string(macs), p = std::to_string(params);
    for (std::size_t i = m.size(); i < 16; ++i) os << ' ';
    os << m << "  ";
    for (std::size_t i = p.size(); i < 12; ++i) os << ' ';
    os << p << '\n';
  };
  os << "layer";
  for (std::size_t i = 5; i < label_width + 2; ++i) os << ' ';
  os << "            MACs        params\n";
  for (const auto& r : rows) line(r.label, r.macs, r.params);
  line("total", total_macs(), total_params());
  return os.str();
}

void MacCounter::add(std::string_view label, std::uint64_t macs) {
  total_ += macs;
  for (auto& r : rows_) {
    if (r.label == label) {
      r.macs += macs;
      return;
    }
  }
  rows_.push_back({std::string(label), macs, 0});
}

CostReport MacCounter::report() const {
  CostReport report;
  report.rows = rows_;
  return report;
}

CostReport macs_vanilla_block(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0) throw ParameterError("macs_vanilla_block: extents must be positive");
  std::uint64_t N = n, D = d;
  CostReport report;
  report.rows.push_back({"qkv", 3 * N * D * D, 3 * D * D});
  report.rows.push_back({"attn_logits", N * N * D, 0});
  report.rows.push_back({"attn_apply", N * N * D, 0});
  report.rows.push_back({"projection", N * D * D, D * D});
  report.rows.push_back({"mlp_fc1", 2 * N * D * D, 2 * D * D});
  report.rows.push_back({"mlp_fc2", 2 * N * D * D, 2 * D * D});
  return report;
}

CostReport macs_feater_block(std::size_t n, std::size_t h, std::size_t w) {
  if (n == 0 || h == 0 || w == 0) {
    throw ParameterError("macs_feater_block: extents must be positive");
  }
  std::uint64_t N = n, H = h, W = w;
  CostReport report;
  report.rows.push_back({"w_stream_qkv", 3 * N * H * W * W, 3 * W * W});
  report.rows.push_back({"h_stream_qkv", 3 * N * H * H * W, 3 * H * H});
  report.rows.push_back({"attn_matmuls", 4 * N * N * H * W, 0});
  report.rows.push_back({"projection", N * N * H * W, N * N});
  report.rows.push_back({"ffn_conv1", 2 * N * N * H * W, 2 * N * N});
  report.rows.push_back({"ffn_conv2", 2 * N * N * H * W, 2 * N * N});
  return report;
}

CostReport count_macs_instrumented(const Graph& g) {
  return g.mac_report();
}

CostReport count_params(const VanillaBlockParams& p) {
  CostReport report;
  report.rows.push_back({"qkv", 0, p.wq.size() + p.wk.size() + p.wv.size()});
  report.rows.push_back({"projection", 0, p.proj_w.size()});
  report.rows.push_back({"mlp_fc1", 0, p.mlp_w1.size()});
  report.rows.push_back({"mlp_fc2", 0, p.mlp_w2.size()});
  report.rows.push_back({std::string(kBiasNormRowLabel), 0,
                         p.bq.size() + p.bv.size() + p.proj_b.size() +
                             p.mlp_b1.size() + p.mlp_b2.size() + p.ln1_gain.size() +
                             p.ln1_bias.size() + p.ln2_gain.size() + p.ln2_bias.size()});
  return report;
}

CostReport count_params(const FeatERBlockParams& p) {
  CostReport report;
  report.rows.push_back({"w_stream_qkv", 0, p.wq_w.size() + p.wk_w.size() + p.wv_w.size()});
  report.rows.push_back({"h_stream_qkv", 0, p.wq_h.size() + p.wk_h.size() + p.wv_h.size()});
  report.rows.push_back({"projection", 0, p.proj_w.size()});
  report.rows.push_back({"ffn_conv1", 0, p.ffn_w1.size()});
  report.rows.push_back({"ffn_conv2", 0, p.ffn_w2.size()});
  report.rows.push_back({std::string(kBiasNormRowLabel), 0,
                         p.bq_w.size() + p.bv_w.size() + p.bq_h.size() +
                             p.bv_h.size() + p.proj_b.size() + p.ffn_b1.size() +
                             p.ffn_b2.size() + p.ln1_gain.size() + p.ln1_bias.size() +
                             p.ln2_gain.size() + p.ln2_bias.size()});
  return report;
}

std::uint64_t weight_param_subtotal(const CostReport& report) {
  std::uint64_t total = 0;
  for (const auto& r : report.rows) {
    if (r.label != kBiasNormRowLabel) total += r.params;
  }
  return total;
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ParameterError("fit_loglog_slope: need at least two points");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    if (x <= 0 || y <= 0) throw ParameterError("fit_loglog_slope: points must be positive");
    sx += std::log(x);
    sy += std::log(y);
  }
  double mx = sx / static_cast<double>(points.size());
  double my = sy / static_cast<double>(points.size());
  double sxy = 0, sxx = 0;
  for (const auto& [x, y] : points) {
    double dx = std::log(x) - mx;
    sxy += dx * (std::log(y) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace feater
