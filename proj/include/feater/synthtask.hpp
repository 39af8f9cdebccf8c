#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feater/blocks.hpp"
#include "feater/reconstruct.hpp"
#include "feater/rng.hpp"
#include "feater/tensor.hpp"

#include "json.hpp"

namespace feater {

struct Point2 {
  double x = 0.0;  // column, pixel units
  double y = 0.0;  // row, pixel units
};

// Ground truth for a synthetic scene: K joints on an h x w grid, each
// rendered as an unnormalized Gaussian peak.
struct HeatmapSpec {
  std::vector<Point2> joints;  // coordinates in [0, w) x [0, h)
  double sigma = 2.0;          // Gaussian std in pixels
  std::size_t h = 0, w = 0;

  std::size_t joint_count() const { return joints.size(); }
};

struct PoseEstimate {
  std::vector<Point2> joints;
  std::vector<double> confidence;  // peak value per joint

  std::size_t joint_count() const { return joints.size(); }
};

// sigma = 2 px on a 64x48-ish grid, scaled with the short side, floored at 1.
double default_heatmap_sigma(std::size_t h, std::size_t w);

// Map k at pixel (r, c) = exp(-((c-x_k)^2 + (r-y_k)^2) / (2 sigma^2)).
// Peak value is 1 when the joint sits on the pixel grid.
FeatureMapStack gaussian_heatmap_render(const HeatmapSpec& spec);

// Additive white Gaussian noise plus an integer-pixel translation of each
// map by offsets uniform in [-jitter, +jitter], zero-padded.
FeatureMapStack corrupt_heatmaps(const FeatureMapStack& x, double noise_sigma, std::size_t jitter,
                                 RngStream& rng);

double heatmap_mse_loss(const FeatureMapStack& pred, const FeatureMapStack& gt);

// (1/K) sum_k ||j_k - gt_k||_1; dimension-generic over the 2D points here.
double l1_pose_loss(const PoseEstimate& estimate, const PoseEstimate& gt);

// Per map, the coordinates of the maximum value; ties broken by the smallest
// row-major index. Confidence is the peak value.
PoseEstimate decode_argmax_pose(const FeatureMapStack& x);

double mean_decode_error_px(const PoseEstimate& estimate, const std::vector<Point2>& gt);

struct TrainConfig {
  std::size_t steps = 300;
  std::optional<double> learning_rate;  // default: 0.25 for sgd, 2e-4 for adam
  std::uint64_t seed = 0;
  double mask_ratio = 0.3;
  double w1 = 0.01, w2 = 0.01, w3 = 0.005;  // loss weights; w1/w2 apply to
                                            // terms outside this task
  std::size_t depth = 2;
  std::size_t n = 4, h = 16, w = 16;  // n doubles as the joint count K
  std::size_t heads = 1;
  double sigma = 0.0;        // 0 -> default_heatmap_sigma(h, w)
  double noise_sigma = 0.05;
  std::size_t jitter = 1;
  bool resample = true;      // fresh corruption + mask every step
  std::string optimizer = "sgd";

  double resolved_learning_rate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  void validate() const;  // throws ConfigError
};

struct TrainStepRecord {
  std::size_t step = 0;
  double total_loss = 0.0;
  double heatmap_loss = 0.0;
  double recon_loss = 0.0;
};

struct TrainRecord {
  std::vector<TrainStepRecord> steps;  // cfg.steps + 1 entries; last is the
                                       // post-training state
  double initial_decode_error_px = 0.0;
  double final_decode_error_px = 0.0;
  BlockStackConfig stack_cfg;
  StackParams final_params;
  std::vector<Point2> joints;

  double initial_total_loss() const { return steps.front().total_loss; }
  double final_total_loss() const { return steps.back().total_loss; }
  double final_recon_loss() const { return steps.back().recon_loss; }
  // One JSON object per line: {step, total_loss, heatmap_loss, recon_loss}.
  std::string to_jsonl() const;
};

// Gradient descent on a feature-map block stack mapping corrupted heatmaps
// back to clean ones, with channel masking active and the reconstruction
// term weighted by w3: total = heatmap MSE + w3 * reconstruction MSE.
// Deterministic given the config.
TrainRecord train_toy(const TrainConfig& cfg);

struct AblationRow {
  double ratio = 0.0;
  double decode_err_px = 0.0;
  double recon_loss = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // ascending by ratio
  // Header: ratio,decode_err_px,recon_loss
  std::string to_csv() const;
};

// One train_toy run per ratio with the shared base config seed. Runs execute
// concurrently up to jobs threads; the table order is by ratio regardless.
AblationTable ablate_mask_ratio(const std::vector<double>& ratios, const TrainConfig& base,
                                std::size_t jobs = 1);

}  // namespace feater
