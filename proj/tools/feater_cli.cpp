// Command-line front end: cost reports, gradient checks, toy training, the
// masking-ratio sweep and feature-map dumps. All outputs are JSON/CSV so
// scripts and CI can consume them. Exit codes: 0 success, 1 runtime or I/O
// failure, 2 usage error.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "feater/blocks.hpp"
#include "feater/costmodel.hpp"
#include "feater/errors.hpp"
#include "feater/gradcheck.hpp"
#include "feater/reconstruct.hpp"
#include "feater/synthtask.hpp"

namespace fs = std::filesystem;
using namespace feater;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::optional<std::uint64_t> seed_override_from_env() {
  const char* raw = std::getenv("FEATER_SEED");
  if (!raw || !*raw) return std::nullopt;
  std::string s(raw);
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw ConfigError("FEATER_SEED must be a decimal integer, got '" + s + "'");
    }
  }
  return std::stoull(s);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

struct CostOptions {
  std::string arch;
  std::size_t n = 0, height = 0, width = 0, dim = 0, depth = 1;
  std::string out;
  bool pretty = false;
};

int run_cost(const CostOptions& opt) {
  const Arch arch = arch_from_name(opt.arch);
  CostReport block;
  nlohmann::json j;
  if (arch == Arch::kFeatER) {
    if (opt.dim != 0 || opt.height == 0 || opt.width == 0) {
      throw CLI::ValidationError("cost", "feater needs --height and --width (not --dim)");
    }
    block = macs_feater_block(opt.n, opt.height, opt.width);
    j["n"] = opt.n;
    j["h"] = opt.height;
    j["w"] = opt.width;
  } else {
    if (opt.dim != 0 && (opt.height != 0 || opt.width != 0)) {
      throw CLI::ValidationError("cost", "--dim and --height/--width are mutually exclusive");
    }
    std::size_t d = opt.dim;
    if (d == 0 && opt.height != 0 && opt.width != 0) d = opt.height * opt.width;
    if (d == 0) {
      throw CLI::ValidationError("cost", "vanilla needs --dim or --height with --width");
    }
    block = macs_vanilla_block(opt.n, d);
    j["n"] = opt.n;
    j["d"] = d;
  }
  j["arch"] = opt.arch;
  j["depth"] = opt.depth;
  j["block"] = block.to_json();
  j["total_macs"] = block.total_macs() * opt.depth;
  j["total_params"] = block.total_params() * opt.depth;

  std::string text = j.dump(2) + "\n";
  if (opt.pretty) {
    char gmacs[64];
    // decimal units: 1 G = 1e9
    std::snprintf(gmacs, sizeof(gmacs), "~ %.2f G MACs per block\n",
                  static_cast<double>(block.total_macs()) / 1e9);
    text += "\n" + block.to_table() + gmacs;
  }
  if (opt.out.empty()) {
    std::cout << text;
  } else {
    write_text(opt.out, text);
    std::cout << "wrote " << opt.out << "\n";
  }
  return kExitOk;
}

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::string arch = "feater";
  std::size_t n = 4, height = 8, width = 8;
  double eps = 3e-5;
};

int run_gradcheck(const GradCheckOptions& opt) {
  const Arch arch = arch_from_name(opt.arch);
  constexpr double tolerance = 1e-5;
  RngStream rng(opt.seed);
  GradCheckReport report;

  if (arch == Arch::kFeatER) {
    FeatERBlockParams params =
        FeatERBlockParams::init(opt.n, opt.height, opt.width, 1, rng.substream("params"));
    RngStream data_rng = rng.substream("data");
    Tensor x({opt.n, opt.height, opt.width});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = data_rng.uniform_range(-1.0, 1.0);
    Tensor target(x.shape());
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = data_rng.uniform_range(-1.0, 1.0);

    std::vector<Tensor> values;
    std::vector<std::string> names;
    for (const auto& [name, t] : params.named_tensors()) {
      values.push_back(*t);
      names.push_back(name);
    }
    const auto build = [&](Graph& g, const std::vector<VarId>& ids) {
      return g.mse(feater_block_forward(g, g.leaf(x, false), feater_vars_from_ids(ids, 1)),
                   g.leaf(target, false));
    };
    report = grad_check(build, values, names, opt.eps, tolerance, opt.seed);
  } else {
    const std::size_t d = opt.height * opt.width;
    VanillaBlockParams params = VanillaBlockParams::init(d, 1, rng.substream("params"));
    RngStream data_rng = rng.substream("data");
    Tensor x({opt.n, d});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = data_rng.uniform_range(-1.0, 1.0);
    Tensor target(x.shape());
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = data_rng.uniform_range(-1.0, 1.0);

    std::vector<Tensor> values;
    std::vector<std::string> names;
    for (const auto& [name, t] : params.named_tensors()) {
      values.push_back(*t);
      names.push_back(name);
    }
    const auto build = [&](Graph& g, const std::vector<VarId>& ids) {
      return g.mse(vanilla_block_forward(g, g.leaf(x, false), vanilla_vars_from_ids(ids, 1)),
                   g.leaf(target, false));
    };
    report = grad_check(build, values, names, opt.eps, tolerance, opt.seed);
  }

  std::cout << report.to_json().dump(2) << "\n";
  return report.pass ? kExitOk : kExitRuntime;
}

struct TrainOptions {
  std::string config;
  std::string out;
};

int run_train(const TrainOptions& opt) {
  std::ifstream in(opt.config);
  if (!in) throw IoError("cannot read config: " + opt.config);
  nlohmann::json j;
  in >> j;
  TrainConfig cfg = TrainConfig::from_json(j);
  if (const auto seed = seed_override_from_env()) cfg.seed = *seed;

  const TrainRecord record = train_toy(cfg);

  const fs::path out_dir(opt.out);
  fs::create_directories(out_dir);
  write_text(out_dir / "record.jsonl", record.to_jsonl());
  save_checkpoint(out_dir / "checkpoint", record.stack_cfg, record.final_params);

  nlohmann::json summary = {{"initial_total_loss", record.initial_total_loss()},
                            {"final_total_loss", record.final_total_loss()},
                            {"initial_decode_error_px", record.initial_decode_error_px},
                            {"final_decode_error_px", record.final_decode_error_px},
                            {"steps", cfg.steps},
                            {"seed", cfg.seed},
                            {"config", cfg.to_json()}};
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");

  std::cout << "wrote " << (out_dir / "record.jsonl").string() << "\n"
            << "wrote " << (out_dir / "checkpoint" / "manifest.json").string() << "\n"
            << "wrote " << (out_dir / "summary.json").string() << "\n"
            << "final total loss " << record.final_total_loss() << " (initial "
            << record.initial_total_loss() << ")\n";
  return kExitOk;
}

struct AblateOptions {
  std::string ratios;
  std::string config;
  std::string out;
  std::size_t jobs = 1;
};

std::vector<double> parse_ratio_list(const std::string& text) {
  std::vector<double> ratios;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    if (item.empty()) throw CLI::ValidationError("ablate", "empty entry in --ratios");
    std::size_t used = 0;
    double value;
    try {
      value = std::stod(item, &used);
    } catch (const std::exception&) {
      throw CLI::ValidationError("ablate", "bad ratio '" + item + "'");
    }
    if (used != item.size()) throw CLI::ValidationError("ablate", "bad ratio '" + item + "'");
    if (!(value >= 0.0 && value < 1.0)) {
      throw CLI::ValidationError("ablate", "ratio " + item + " outside [0, 1)");
    }
    ratios.push_back(value);
    pos = comma + 1;
  }
  if (ratios.empty()) throw CLI::ValidationError("ablate", "--ratios is empty");
  return ratios;
}

int run_ablate(const AblateOptions& opt) {
  const std::vector<double> ratios = parse_ratio_list(opt.ratios);
  std::ifstream in(opt.config);
  if (!in) throw IoError("cannot read config: " + opt.config);
  nlohmann::json j;
  in >> j;
  TrainConfig base = TrainConfig::from_json(j);
  if (const auto seed = seed_override_from_env()) base.seed = *seed;

  const AblationTable table = ablate_mask_ratio(ratios, base, opt.jobs);
  write_text(opt.out, table.to_csv());
  std::cout << "wrote " << opt.out << "\n";
  return kExitOk;
}

struct DumpOptions {
  std::string input;
  std::string format = "csv";
  std::string out;
};

void dump_channel_csv(const fs::path& path, const Tensor& x, std::size_t channel) {
  const std::size_t h = x.shape()[x.rank() - 2];
  const std::size_t w = x.shape()[x.rank() - 1];
  const double* base = x.data() + channel * h * w;
  auto fmt = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  std::string text;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (c) text += ',';
      text += fmt(base[r * w + c]);
    }
    text += '\n';
  }
  write_text(path, text);
}

void dump_channel_pgm(const fs::path& path, const Tensor& x, std::size_t channel) {
  const std::size_t h = x.shape()[x.rank() - 2];
  const std::size_t w = x.shape()[x.rank() - 1];
  const double* base = x.data() + channel * h * w;
  double lo = base[0], hi = base[0];
  for (std::size_t i = 1; i < h * w; ++i) {
    lo = std::min(lo, base[i]);
    hi = std::max(hi, base[i]);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << w << " " << h << "\n255\n";
  const double span = hi - lo;
  for (std::size_t i = 0; i < h * w; ++i) {
    const double scaled = span > 0.0 ? (base[i] - lo) / span * 255.0 : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

int run_dump(const DumpOptions& opt) {
  if (opt.format != "csv" && opt.format != "pgm") {
    throw CLI::ValidationError("dump", "--format must be csv or pgm");
  }
  const Tensor x = Tensor::load(opt.input);
  if (x.rank() != 3 && x.rank() != 2) {
    throw DimensionError("dump expects an [n, h, w] or [h, w] tensor, got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t channels = x.rank() == 3 ? x.shape()[0] : 1;
  const fs::path out_dir(opt.out);
  fs::create_directories(out_dir);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    char name[32];
    std::snprintf(name, sizeof(name), "channel_%03zu.%s", ch, opt.format.c_str());
    const fs::path path = out_dir / name;
    if (opt.format == "csv") {
      dump_channel_csv(path, x, ch);
    } else {
      dump_channel_pgm(path, x, ch);
    }
    std::cout << "wrote " << path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feature-map transformer toolkit"};
  app.require_subcommand(1);

  CostOptions cost;
  CLI::App* cost_cmd = app.add_subcommand("cost", "analytical MAC/parameter report");
  cost_cmd->add_option("--arch", cost.arch, "feater or vanilla")->required();
  cost_cmd->add_option("--n", cost.n, "channel / token count")->required();
  cost_cmd->add_option("--height", cost.height, "feature map height");
  cost_cmd->add_option("--width", cost.width, "feature map width");
  cost_cmd->add_option("--dim", cost.dim, "embedding dim (vanilla)");
  cost_cmd->add_option("--depth", cost.depth, "block count for stack totals");
  cost_cmd->add_option("--out", cost.out, "write JSON here instead of stdout");
  cost_cmd->add_flag("--pretty", cost.pretty, "append an aligned text table");

  GradCheckOptions gc;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc_cmd->add_option("--seed", gc.seed, "rng seed")->required();
  gc_cmd->add_option("--arch", gc.arch, "feater or vanilla")->required();
  gc_cmd->add_option("--n", gc.n, "channel / token count")->required();
  gc_cmd->add_option("--height", gc.height, "feature map height")->required();
  gc_cmd->add_option("--width", gc.width, "feature map width")->required();
  gc_cmd->add_option("--eps", gc.eps, "finite difference step");

  TrainOptions train;
  CLI::App* train_cmd = app.add_subcommand("train", "toy heatmap refinement training");
  train_cmd->add_option("--config", train.config, "JSON training config")->required();
  train_cmd->add_option("--out", train.out, "output directory")->required();

  AblateOptions ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "masking-ratio sweep");
  ablate_cmd->add_option("--ratios", ablate.ratios, "comma-separated ratios in [0,1)")
      ->required();
  ablate_cmd->add_option("--config", ablate.config, "JSON training config")->required();
  ablate_cmd->add_option("--out", ablate.out, "output CSV path")->required();
  ablate_cmd->add_option("--jobs", ablate.jobs, "concurrent runs (default 1)");

  DumpOptions dump;
  CLI::App* dump_cmd = app.add_subcommand("dump", "export feature map channels");
  dump_cmd->add_option("--input", dump.input, "tensor file (.ftr)")->required();
  dump_cmd->add_option("--format", dump.format, "csv or pgm");
  dump_cmd->add_option("--out", dump.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (cost_cmd->parsed()) return run_cost(cost);
    if (gc_cmd->parsed()) return run_gradcheck(gc);
    if (train_cmd->parsed()) return run_train(train);
    if (ablate_cmd->parsed()) return run_ablate(ablate);
    if (dump_cmd->parsed()) return run_dump(dump);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
