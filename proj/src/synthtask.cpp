#include "feater/synthtask.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <sstream>
#include <thread>

#include "feater/errors.hpp"
#include "feater/kernels.hpp"

namespace feater {

namespace {

constexpr double kSgdDefaultLr = 0.25;
constexpr double kAdamDefaultLr = 2e-4;

void validate_spec(const HeatmapSpec& spec) {
  if (spec.joint_count() == 0) throw ParameterError("heatmap spec: need at least one joint");
  if (!(spec.sigma > 0.0)) throw ParameterError("heatmap spec: sigma must be positive");
  if (spec.h < 2 || spec.w < 2) throw ParameterError("heatmap spec: grid must be at least 2x2");
  for (const Point2& j : spec.joints) {
    if (!(j.x >= 0.0) || j.x >= static_cast<double>(spec.w) || !(j.y >= 0.0) ||
        j.y >= static_cast<double>(spec.h)) {
      throw ParameterError("heatmap spec: joint (" + std::to_string(j.x) + ", " +
                           std::to_string(j.y) + ") outside grid");
    }
  }
}

std::vector<Point2> random_integer_joints(std::size_t count, std::size_t h, std::size_t w,
                                          RngStream rng) {
  const std::size_t margin = std::min<std::size_t>(2, (std::min(h, w) - 1) / 2);
  std::vector<Point2> joints(count);
  for (auto& j : joints) {
    j.x = static_cast<double>(margin + rng.next_below(w - 2 * margin));
    j.y = static_cast<double>(margin + rng.next_below(h - 2 * margin));
  }
  return joints;
}

// Flat parameter/gradient walk, in the named-tensor order block by block.
std::vector<Tensor*> stack_tensor_list(StackParams& params) {
  std::vector<Tensor*> out;
  for (auto& block : params.vanilla) {
    for (auto& [name, t] : block.named_tensors()) out.push_back(t);
  }
  for (auto& block : params.feater) {
    for (auto& [name, t] : block.named_tensors()) out.push_back(t);
  }
  return out;
}

// Var ids in the same flat order as stack_tensor_list.
std::vector<VarId> stack_var_list(const StackVars& vars) {
  std::vector<VarId> out;
  for (const auto& v : vars.vanilla) {
    out.insert(out.end(), {v.wq, v.wk, v.wv, v.bq, v.bv, v.proj_w, v.proj_b, v.mlp_w1,
                           v.mlp_b1, v.mlp_w2, v.mlp_b2, v.ln1_gain, v.ln1_bias, v.ln2_gain,
                           v.ln2_bias});
  }
  for (const auto& v : vars.feater) {
    out.insert(out.end(), {v.wq_w, v.wk_w, v.wv_w, v.bq_w, v.bv_w, v.wq_h, v.wk_h,
                           v.wv_h, v.bq_h, v.bv_h, v.proj_w, v.proj_b, v.ffn_w1,
                           v.ffn_b1, v.ffn_w2, v.ffn_b2, v.ln1_gain, v.ln1_bias, v.ln2_gain,
                           v.ln2_bias});
  }
  return out;
}

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
};

}  // namespace

double default_heatmap_sigma(std::size_t h, std::size_t w) {
  return std::max(1.0, 2.0 * static_cast<double>(std::min(h, w)) / 48.0);
}

FeatureMapStack gaussian_heatmap_render(const HeatmapSpec& spec) {
  validate_spec(spec);
  const std::size_t k = spec.joint_count();
  FeatureMapStack out({k, spec.h, spec.w});
  const double inv_two_sigma2 = 1.0 / (2.0 * spec.sigma * spec.sigma);
  for (std::size_t map = 0; map < k; ++map) {
    const Point2 joint = spec.joints[map];
    for (std::size_t r = 0; r < spec.h; ++r) {
      for (std::size_t c = 0; c < spec.w; ++c) {
        const double dx = static_cast<double>(c) - joint.x;
        const double dy = static_cast<double>(r) - joint.y;
        out.at3(map, r, c) = std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
      }
    }
  }
  return out;
}

FeatureMapStack corrupt_heatmaps(const FeatureMapStack& x, double noise_sigma, std::size_t jitter,
                                 RngStream& rng) {
  validate_feature_map_stack(x);
  if (noise_sigma < 0.0) throw ParameterError("corrupt_heatmaps: noise_sigma must be >= 0");
  const std::size_t n = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  FeatureMapStack out({n, h, w});
  for (std::size_t map = 0; map < n; ++map) {
    long dy = 0, dx = 0;
    if (jitter > 0) {
      dy = static_cast<long>(rng.next_below(2 * jitter + 1)) - static_cast<long>(jitter);
      dx = static_cast<long>(rng.next_below(2 * jitter + 1)) - static_cast<long>(jitter);
    }
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const long sr = static_cast<long>(r) - dy;
        const long sc = static_cast<long>(c) - dx;
        double v = 0.0;
        if (sr >= 0 && sr < static_cast<long>(h) && sc >= 0 && sc < static_cast<long>(w)) {
          v = x.at3(map, static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
        }
        if (noise_sigma > 0.0) v += rng.normal(0.0, noise_sigma);
        out.at3(map, r, c) = v;
      }
    }
  }
  return out;
}

double heatmap_mse_loss(const FeatureMapStack& pred, const FeatureMapStack& gt) {
  return mean_squared_error(pred, gt);
}

double l1_pose_loss(const PoseEstimate& estimate, const PoseEstimate& gt) {
  if (estimate.joint_count() != gt.joint_count()) {
    throw DimensionError("l1_pose_loss: joint counts differ, " +
                         std::to_string(estimate.joint_count()) + " vs " +
                         std::to_string(gt.joint_count()));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < estimate.joint_count(); ++k) {
    sum += std::abs(estimate.joints[k].x - gt.joints[k].x) +
           std::abs(estimate.joints[k].y - gt.joints[k].y);
  }
  return sum / static_cast<double>(estimate.joint_count());
}

PoseEstimate decode_argmax_pose(const FeatureMapStack& x) {
  validate_feature_map_stack(x);
  const std::size_t n = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  PoseEstimate pose;
  pose.joints.resize(n);
  pose.confidence.resize(n);
  for (std::size_t map = 0; map < n; ++map) {
    const double* base = x.data() + map * h * w;
    std::size_t best = 0;
    for (std::size_t i = 1; i < h * w; ++i) {
      if (base[i] > base[best]) best = i;
    }
    pose.joints[map] = {static_cast<double>(best % w), static_cast<double>(best / w)};
    pose.confidence[map] = base[best];
  }
  return pose;
}

double mean_decode_error_px(const PoseEstimate& estimate, const std::vector<Point2>& gt) {
  if (estimate.joint_count() != gt.size()) {
    throw DimensionError("decode error: joint counts differ");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const double dx = estimate.joints[k].x - gt[k].x;
    const double dy = estimate.joints[k].y - gt[k].y;
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return sum / static_cast<double>(gt.size());
}

double TrainConfig::resolved_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return optimizer == "adam" ? kAdamDefaultLr : kSgdDefaultLr;
}

void TrainConfig::validate() const {
  if (depth == 0) throw ConfigError("train config: depth must be >= 1");
  if (n < 2 || h < 2 || w < 2) throw ConfigError("train config: need n >= 2 and grid >= 2x2");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
    throw ConfigError("train config: mask_ratio must be in [0, 1)");
  }
  if (learning_rate && *learning_rate < 0.0) {
    throw ConfigError("train config: learning rate must be >= 0");
  }
  if (optimizer != "sgd" && optimizer != "adam") {
    throw ConfigError("train config: unknown optimizer " + optimizer);
  }
  if (sigma < 0.0 || noise_sigma < 0.0) {
    throw ConfigError("train config: sigma and noise_sigma must be >= 0");
  }
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"steps", steps},
                      {"seed", seed},
                      {"mask_ratio", mask_ratio},
                      {"w1", w1},
                      {"w2", w2},
                      {"w3", w3},
                      {"depth", depth},
                      {"n", n},
                      {"h", h},
                      {"w", w},
                      {"heads", heads},
                      {"sigma", sigma},
                      {"noise_sigma", noise_sigma},
                      {"jitter", jitter},
                      {"resample", resample},
                      {"optimizer", optimizer}};
  if (learning_rate) j["learning_rate"] = *learning_rate;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("steps", cfg.steps);
  get("seed", cfg.seed);
  get("mask_ratio", cfg.mask_ratio);
  get("w1", cfg.w1);
  get("w2", cfg.w2);
  get("w3", cfg.w3);
  get("depth", cfg.depth);
  get("n", cfg.n);
  get("h", cfg.h);
  get("w", cfg.w);
  get("heads", cfg.heads);
  get("sigma", cfg.sigma);
  get("noise_sigma", cfg.noise_sigma);
  get("jitter", cfg.jitter);
  get("resample", cfg.resample);
  get("optimizer", cfg.optimizer);
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.validate();
  return cfg;
}

std::string TrainRecord::to_jsonl() const {
  std::ostringstream os;
  for (const auto& s : steps) {
    nlohmann::json line = {{"step", s.step},
                           {"total_loss", s.total_loss},
                           {"heatmap_loss", s.heatmap_loss},
                           {"recon_loss", s.recon_loss}};
    os << line.dump() << '\n';
  }
  return os.str();
}

TrainRecord train_toy(const TrainConfig& cfg) {
  cfg.validate();
  const RngStream root(cfg.seed);

  HeatmapSpec spec;
  spec.h = cfg.h;
  spec.w = cfg.w;
  spec.sigma = cfg.sigma > 0.0 ? cfg.sigma : default_heatmap_sigma(cfg.h, cfg.w);
  spec.joints = random_integer_joints(cfg.n, cfg.h, cfg.w, root.substream("joints"));
  const FeatureMapStack clean = gaussian_heatmap_render(spec);

  BlockStackConfig stack_cfg;
  stack_cfg.depth = cfg.depth;
  stack_cfg.arch = Arch::kFeatER;
  stack_cfg.n = cfg.n;
  stack_cfg.h = cfg.h;
  stack_cfg.w = cfg.w;
  stack_cfg.heads = cfg.heads;
  stack_cfg.seed = cfg.seed;
  StackParams params = init_stack(stack_cfg);

  RngStream corrupt_rng = root.substream("corrupt");
  RngStream mask_rng = root.substream("mask");
  RngStream eval_rng = root.substream("eval");
  const FeatureMapStack eval_input =
      corrupt_heatmaps(clean, cfg.noise_sigma, cfg.jitter, eval_rng);

  const FeatureMapStack fixed_input =
      cfg.resample ? FeatureMapStack()
                   : corrupt_heatmaps(clean, cfg.noise_sigma, cfg.jitter, corrupt_rng);
  const MaskPlan fixed_plan =
      cfg.resample ? MaskPlan() : make_mask_plan(cfg.n, cfg.mask_ratio, mask_rng);

  TrainRecord record;
  record.stack_cfg = stack_cfg;
  record.joints = spec.joints;
  record.initial_decode_error_px = mean_decode_error_px(
      decode_argmax_pose(stack_forward(eval_input, stack_cfg, params)), spec.joints);

  const double lr = cfg.resolved_learning_rate();
  AdamState adam;
  const bool use_adam = cfg.optimizer == "adam";

  for (std::size_t s = 0; s <= cfg.steps; ++s) {
    const FeatureMapStack input =
        cfg.resample ? corrupt_heatmaps(clean, cfg.noise_sigma, cfg.jitter, corrupt_rng)
                     : fixed_input;
    const MaskPlan plan =
        cfg.resample ? make_mask_plan(cfg.n, cfg.mask_ratio, mask_rng) : fixed_plan;

    Graph g;
    StackVars vars = bind_stack(g, params, s < cfg.steps);
    auto [output, recon_loss] = reconstruction_train_graph(g, input, stack_cfg, vars, plan);
    const VarId heat_loss = g.mse(output, g.leaf(clean, false));
    const VarId total = g.add(heat_loss, g.scale(recon_loss, cfg.w3));

    record.steps.push_back({s, g.scalar_value(total), g.scalar_value(heat_loss),
                            g.scalar_value(recon_loss)});
    if (s == cfg.steps) break;  // last entry records the post-training state

    g.backward(total);
    const std::vector<VarId> var_ids = stack_var_list(vars);
    const std::vector<Tensor*> tensors = stack_tensor_list(params);
    if (use_adam) {
      if (adam.m.empty()) {
        adam.m.resize(tensors.size());
        adam.v.resize(tensors.size());
        for (std::size_t i = 0; i < tensors.size(); ++i) {
          adam.m[i].assign(tensors[i]->size(), 0.0);
          adam.v[i].assign(tensors[i]->size(), 0.0);
        }
      }
      ++adam.t;
      const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam.t));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam.t));
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        const Tensor& grad = g.grad(var_ids[i]);
        for (std::size_t e = 0; e < tensors[i]->size(); ++e) {
          adam.m[i][e] = beta1 * adam.m[i][e] + (1.0 - beta1) * grad[e];
          adam.v[i][e] = beta2 * adam.v[i][e] + (1.0 - beta2) * grad[e] * grad[e];
          (*tensors[i])[e] -=
              lr * (adam.m[i][e] / bc1) / (std::sqrt(adam.v[i][e] / bc2) + adam_eps);
        }
      }
    } else {
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        const Tensor& grad = g.grad(var_ids[i]);
        for (std::size_t e = 0; e < tensors[i]->size(); ++e) {
          (*tensors[i])[e] -= lr * grad[e];
        }
      }
    }
  }

  record.final_decode_error_px = mean_decode_error_px(
      decode_argmax_pose(stack_forward(eval_input, stack_cfg, params)), spec.joints);
  record.final_params = std::move(params);
  return record;
}

std::string AblationTable::to_csv() const {
  // Shortest round-trip formatting so the values re-parse exactly.
  auto fmt = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  std::string out = "ratio,decode_err_px,recon_loss\n";
  for (const auto& r : rows) {
    out += fmt(r.ratio) + ',' + fmt(r.decode_err_px) + ',' + fmt(r.recon_loss) + '\n';
  }
  return out;
}

AblationTable ablate_mask_ratio(const std::vector<double>& ratios, const TrainConfig& base,
                                std::size_t jobs) {
  if (ratios.empty()) throw ParameterError("ablate_mask_ratio: empty ratio list");
  for (double r : ratios) {
    if (!(r >= 0.0 && r < 1.0)) {
      throw ParameterError("ablate_mask_ratio: ratio " + std::to_string(r) + " outside [0, 1)");
    }
  }
  std::vector<double> ordered(ratios);
  std::sort(ordered.begin(), ordered.end());

  AblationTable table;
  table.rows.resize(ordered.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, ordered.size()));
  std::vector<std::thread> threads;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < ordered.size(); i = next.fetch_add(1)) {
      TrainConfig cfg = base;
      cfg.mask_ratio = ordered[i];
      const TrainRecord record = train_toy(cfg);
      table.rows[i] = {ordered[i], record.final_decode_error_px, record.final_recon_loss()};
    }
  };
  if (workers == 1) {
    worker();
  } else {
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return table;
}

}  // namespace feater
