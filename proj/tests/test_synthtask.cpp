#include "doctest.h"

#include <cmath>

#include "feater/errors.hpp"
#include "feater/gradcheck.hpp"
#include "feater/synthtask.hpp"
#include "helpers.hpp"

using namespace feater;
using testutil::bit_equal;
using testutil::random_tensor;

TEST_CASE("gaussian heatmaps peak at the joint and decay analytically") {
  HeatmapSpec spec;
  spec.h = 16;
  spec.w = 20;
  spec.sigma = 2.0;
  spec.joints = {{7.0, 5.0}, {12.0, 9.0}};
  FeatureMapStack maps = gaussian_heatmap_render(spec);
  CHECK(maps.shape() == std::vector<std::size_t>{2, 16, 20});
  CHECK(maps.at3(0, 5, 7) == 1.0);
  CHECK(maps.at3(1, 9, 12) == 1.0);
  // one sigma away along the row
  CHECK(maps.at3(0, 5, 9) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  // 5 sigma away: exp(-12.5)
  CHECK(maps.at3(0, 15, 7) < 4e-6);

  HeatmapSpec bad = spec;
  bad.joints[0].x = 25.0;
  CHECK_THROWS_AS(gaussian_heatmap_render(bad), ParameterError);
  bad = spec;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(gaussian_heatmap_render(bad), ParameterError);
}

TEST_CASE("render and decode round trip on random integer joints") {
  RngStream rng(70);
  for (int trial = 0; trial < 20; ++trial) {
    HeatmapSpec spec;
    spec.h = 12 + rng.next_below(10);
    spec.w = 12 + rng.next_below(10);
    spec.sigma = rng.uniform_range(1.0, 4.0);
    const std::size_t k = 1 + rng.next_below(5);
    for (std::size_t i = 0; i < k; ++i) {
      spec.joints.push_back({static_cast<double>(rng.next_below(spec.w)),
                             static_cast<double>(rng.next_below(spec.h))});
    }
    const PoseEstimate pose = decode_argmax_pose(gaussian_heatmap_render(spec));
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(pose.joints[i].x == spec.joints[i].x);
      CHECK(pose.joints[i].y == spec.joints[i].y);
      CHECK(pose.confidence[i] == 1.0);
    }
  }
}

TEST_CASE("decode ties break to the smallest row-major index") {
  Tensor constant = Tensor::full({1, 3, 4}, 0.5);
  PoseEstimate pose = decode_argmax_pose(constant);
  CHECK(pose.joints[0].x == 0.0);
  CHECK(pose.joints[0].y == 0.0);

  Tensor two_peaks({1, 3, 4});
  two_peaks.at3(0, 1, 2) = 3.0;  // row-major index 6
  two_peaks.at3(0, 2, 1) = 3.0;  // row-major index 9
  pose = decode_argmax_pose(two_peaks);
  CHECK(pose.joints[0].x == 2.0);
  CHECK(pose.joints[0].y == 1.0);
}

TEST_CASE("corruption is deterministic and statistically sane") {
  RngStream rng(71);
  Tensor x = random_tensor({4, 50, 50}, rng);

  RngStream clean_rng(1);
  CHECK(bit_equal(corrupt_heatmaps(x, 0.0, 0, clean_rng), x));

  RngStream a(2), b(2);
  CHECK(bit_equal(corrupt_heatmaps(x, 0.1, 2, a), corrupt_heatmaps(x, 0.1, 2, b)));

  // noise-only: residual std within 10% of the nominal sigma
  RngStream noise_rng(3);
  const double sigma = 0.2;
  Tensor noisy = corrupt_heatmaps(x, sigma, 0, noise_rng);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = noisy[i] - x[i];
    sum += d;
    sq += d * d;
  }
  const double mean = sum / static_cast<double>(x.size());
  const double std_dev = std::sqrt(sq / static_cast<double>(x.size()) - mean * mean);
  CHECK(x.size() >= 10000);
  CHECK(std::abs(std_dev - sigma) < 0.1 * sigma);

  // jitter-only: each map is a translate of the original
  RngStream jit_rng(4);
  Tensor shifted = corrupt_heatmaps(x, 0.0, 1, jit_rng);
  CHECK(shifted.shape() == x.shape());
  CHECK(shifted.all_finite());
}

TEST_CASE("pose and heatmap losses") {
  RngStream rng(72);
  Tensor gt = random_tensor({3, 5, 5}, rng);
  CHECK(heatmap_mse_loss(gt, gt) == 0.0);
  Tensor off = gt;
  for (std::size_t i = 0; i < off.size(); ++i) off[i] += 2.0;
  CHECK(heatmap_mse_loss(off, gt) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(heatmap_mse_loss(gt, random_tensor({3, 5, 4}, rng)), DimensionError);

  PoseEstimate a, b;
  for (int i = 0; i < 4; ++i) {
    a.joints.push_back({double(i), double(2 * i)});
    b.joints.push_back({double(i), double(2 * i)});
  }
  CHECK(l1_pose_loss(a, b) == 0.0);
  b.joints[2].x += 1.0;
  CHECK(l1_pose_loss(a, b) == doctest::Approx(0.25).epsilon(1e-12));  // 1/K with K = 4

  double direct = 0.0;
  PoseEstimate ra, rb;
  for (int i = 0; i < 5; ++i) {
    Point2 p1{rng.uniform_range(0, 10), rng.uniform_range(0, 10)};
    Point2 p2{rng.uniform_range(0, 10), rng.uniform_range(0, 10)};
    ra.joints.push_back(p1);
    rb.joints.push_back(p2);
    direct += std::abs(p1.x - p2.x) + std::abs(p1.y - p2.y);
  }
  CHECK(l1_pose_loss(ra, rb) == doctest::Approx(direct / 5.0).epsilon(1e-12));

  PoseEstimate short_pose;
  short_pose.joints.push_back({0, 0});
  CHECK_THROWS_AS(l1_pose_loss(ra, short_pose), DimensionError);
}

TEST_CASE("zero-step training only evaluates") {
  TrainConfig cfg;
  cfg.steps = 0;
  cfg.n = 4;
  cfg.h = 8;
  cfg.w = 8;
  cfg.depth = 1;
  cfg.seed = 2;
  TrainRecord record = train_toy(cfg);
  CHECK(record.steps.size() == 1);
  CHECK(record.final_total_loss() == record.initial_total_loss());

  // params unchanged from the seeded init
  StackParams fresh = init_stack(record.stack_cfg);
  CHECK(bit_equal(record.final_params.feater[0].wq_w, fresh.feater[0].wq_w));
}

TEST_CASE("zero learning rate with a fixed batch repeats the same loss") {
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.learning_rate = 0.0;
  cfg.resample = false;
  cfg.n = 4;
  cfg.h = 8;
  cfg.w = 8;
  cfg.depth = 1;
  cfg.seed = 3;
  TrainRecord record = train_toy(cfg);
  REQUIRE(record.steps.size() == 101);
  for (const auto& s : record.steps) {
    CHECK(s.total_loss == record.steps[0].total_loss);
    CHECK(s.recon_loss == record.steps[0].recon_loss);
  }
}

TEST_CASE("training runs are bit-reproducible") {
  TrainConfig cfg;
  cfg.steps = 12;
  cfg.n = 4;
  cfg.h = 8;
  cfg.w = 8;
  cfg.depth = 1;
  cfg.seed = 4;
  TrainRecord a = train_toy(cfg);
  TrainRecord b = train_toy(cfg);
  CHECK(a.to_jsonl() == b.to_jsonl());
  CHECK(a.final_decode_error_px == b.final_decode_error_px);
  CHECK(bit_equal(a.final_params.feater[0].ffn_w1, b.final_params.feater[0].ffn_w1));
}

TEST_CASE("short training already reduces the loss") {
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.n = 4;
  cfg.h = 8;
  cfg.w = 8;
  cfg.depth = 1;
  cfg.seed = 0;
  TrainRecord record = train_toy(cfg);
  CHECK(record.final_total_loss() < record.initial_total_loss());
}

TEST_CASE("adam mode trains deterministically") {
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.optimizer = "adam";
  cfg.n = 4;
  cfg.h = 8;
  cfg.w = 8;
  cfg.depth = 1;
  cfg.seed = 5;
  CHECK(cfg.resolved_learning_rate() == doctest::Approx(2e-4));
  TrainRecord a = train_toy(cfg);
  TrainRecord b = train_toy(cfg);
  CHECK(a.to_jsonl() == b.to_jsonl());
}

TEST_CASE("train config json round trip and validation") {
  TrainConfig cfg;
  cfg.steps = 7;
  cfg.mask_ratio = 0.25;
  cfg.learning_rate = 0.5;
  const nlohmann::json j = cfg.to_json();
  TrainConfig back = TrainConfig::from_json(j);
  CHECK(back.steps == 7);
  CHECK(back.mask_ratio == 0.25);
  CHECK(back.resolved_learning_rate() == 0.5);

  nlohmann::json bad = j;
  bad["mask_ratio"] = 1.5;
  CHECK_THROWS_AS(TrainConfig::from_json(bad), ConfigError);
  bad = j;
  bad["optimizer"] = "lbfgs";
  CHECK_THROWS_AS(TrainConfig::from_json(bad), ConfigError);
  bad = j;
  bad["depth"] = 0;
  CHECK_THROWS_AS(TrainConfig::from_json(bad), ConfigError);
}

TEST_CASE("full toy objective gradient at desk extents") {
  const std::size_t n = 2, h = 8, w = 8;
  TrainConfig cfg;
  cfg.n = n;
  cfg.h = h;
  cfg.w = w;
  cfg.depth = 1;
  cfg.seed = 3;

  BlockStackConfig stack_cfg;
  stack_cfg.depth = 1;
  stack_cfg.arch = Arch::kFeatER;
  stack_cfg.n = n;
  stack_cfg.h = h;
  stack_cfg.w = w;
  stack_cfg.seed = 3;
  StackParams params = init_stack(stack_cfg);

  HeatmapSpec spec;
  spec.h = h;
  spec.w = w;
  spec.sigma = default_heatmap_sigma(h, w);
  spec.joints = {{3.0, 4.0}, {5.0, 2.0}};
  const FeatureMapStack clean = gaussian_heatmap_render(spec);
  RngStream corrupt_rng = RngStream(3).substream("corrupt");
  const FeatureMapStack corrupted = corrupt_heatmaps(clean, 0.05, 1, corrupt_rng);
  RngStream mask_rng = RngStream(3).substream("mask");
  const MaskPlan plan = make_mask_plan(n, 0.4, mask_rng);

  std::vector<Tensor> values;
  std::vector<std::string> names;
  for (const auto& [name, t] : params.feater[0].named_tensors()) {
    values.push_back(*t);
    names.push_back(name);
  }
  const auto build = [&](Graph& g, const std::vector<VarId>& ids) {
    StackVars vars;
    vars.arch = Arch::kFeatER;
    vars.feater = {feater_vars_from_ids(ids, 1)};
    auto [output, recon] = reconstruction_train_graph(g, corrupted, stack_cfg, vars, plan);
    const VarId heat = g.mse(output, g.leaf(clean, false));
    return g.add(heat, g.scale(recon, cfg.w3));
  };
  const auto report = grad_check(build, values, names, 3e-5, 1e-5);
  CHECK(report.pass);
}

TEST_CASE("mask ratio ablation table mechanics") {
  TrainConfig base;
  base.steps = 4;
  base.n = 4;
  base.h = 8;
  base.w = 8;
  base.depth = 1;
  base.seed = 6;

  AblationTable single = ablate_mask_ratio({0.3}, base);
  CHECK(single.rows.size() == 1);
  CHECK(single.rows[0].ratio == 0.3);

  AblationTable three = ablate_mask_ratio({0.5, 0.1, 0.3}, base);
  REQUIRE(three.rows.size() == 3);
  CHECK(three.rows[0].ratio == 0.1);
  CHECK(three.rows[1].ratio == 0.3);
  CHECK(three.rows[2].ratio == 0.5);

  AblationTable dup = ablate_mask_ratio({0.2, 0.2}, base);
  CHECK(dup.rows[0].decode_err_px == dup.rows[1].decode_err_px);
  CHECK(dup.rows[0].recon_loss == dup.rows[1].recon_loss);

  AblationTable parallel = ablate_mask_ratio({0.5, 0.1, 0.3}, base, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(parallel.rows[i].decode_err_px == three.rows[i].decode_err_px);
  }

  const std::string csv = dup.to_csv();
  CHECK(csv.rfind("ratio,decode_err_px,recon_loss\n", 0) == 0);

  CHECK_THROWS_AS(ablate_mask_ratio({}, base), ParameterError);
  CHECK_THROWS_AS(ablate_mask_ratio({1.2}, base), ParameterError);
}
