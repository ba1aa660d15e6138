// prcnn: generate | train | eval | infer

#include "prcnn/checkpoint.hpp"
#include "prcnn/config.hpp"
#include "prcnn/errors.hpp"
#include "prcnn/network.hpp"
#include "prcnn/pipeline.hpp"
#include "prcnn/synthdata.hpp"
#include "prcnn/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace prcnn;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<int, int> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  std::size_t a = 0, b = 0;
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(s, &a);
      if (a != s.size()) throw UsageError("");
      return {v, v};
    }
    const std::string lo = s.substr(0, dots), hi = s.substr(dots + 2);
    const int l = std::stoi(lo, &a), h = std::stoi(hi, &b);
    if (a != lo.size() || b != hi.size()) throw UsageError("");
    return {l, h};
  } catch (const std::exception&) {
    throw UsageError("--persons expects MIN..MAX, got '" + s + "'");
  }
}

std::set<int> parse_id_list(const std::string& s) {
  std::set<int> ids;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t n = 0;
      const int v = std::stoi(item, &n);
      if (n != item.size() || v < 0) throw UsageError("");
      ids.insert(v);
    } catch (const std::exception&) {
      throw UsageError("--drop-sensors expects comma-separated sensor ids, got '" + s + "'");
    }
  }
  return ids;
}

void require_writable_parent(const fs::path& file) {
  const fs::path dir = fs::absolute(file).parent_path();
  if (!fs::is_directory(dir)) throw UsageError("output directory does not exist: " + dir.string());
}

fs::path sidecar_config(const fs::path& ckpt) { return fs::path(ckpt).concat(".cfg"); }

Config checkpoint_config(const fs::path& ckpt, const std::string& config_path, const std::vector<std::string>& overrides) {
  const fs::path p = config_path.empty() ? sidecar_config(ckpt) : fs::path(config_path);
  if (!fs::exists(p)) throw UsageError("config not found: " + p.string() + " (pass --config)");
  return load_config(p, overrides);
}

nn::ParameterMap<float> load_compatible(const fs::path& ckpt, const Config& cfg) {
  nn::ParameterMap<float> w = load_checkpoint(ckpt);
  const auto layout = weight_layout(cfg.model);
  if (w.size() != layout.size()) throw ConfigError(ckpt.string() + ": checkpoint does not match the model configuration");
  for (const auto& [name, shape] : layout) {
    auto it = w.find(name);
    if (it == w.end() || it->second.shape != shape)
      throw ConfigError(ckpt.string() + ": weight '" + name + "' missing or mis-shaped for this configuration");
  }
  return w;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Person detection as bounding cylinders and per-person joint regression on fused point clouds.\n"
               "Environment: PRCNN_THREADS caps worker threads."};
  app.require_subcommand(1, 1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic multi-camera dataset");
  GenerateOptions gopt;
  std::string gen_out, persons = "1..3", gen_config;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--frames", gopt.frames, "Number of frames")->capture_default_str();
  gen->add_option("--persons", persons, "Persons per frame as MIN..MAX (0..4)")->capture_default_str();
  gen->add_option("--cameras", gopt.cameras, "Number of cameras")->capture_default_str();
  gen->add_option("--dropout", gopt.dropout, "Per-sensor drop probability at generation time")->capture_default_str();
  gen->add_option("--seed", gopt.seed, "Random seed")->capture_default_str();
  gen->add_option("--budget", gopt.budget, "Points per camera per frame")->capture_default_str();
  gen->add_option("--noise", gopt.noise_sigma, "Gaussian noise sigma in meters")->capture_default_str();
  gen->add_option("--config", gen_config, "Config file to take the workspace from");

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_data, tr_out, tr_mode;
  std::vector<std::string> tr_set;
  int tr_epochs = -1;
  long long tr_seed = -1;
  tr->add_option("--config", tr_config, "Config file")->required();
  tr->add_option("--data", tr_data, "Dataset directory or manifest")->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--mode", tr_mode, "end_to_end or staged (overrides train.mode)");
  tr->add_option("--epochs", tr_epochs, "Overrides train.epochs");
  tr->add_option("--seed", tr_seed, "Overrides train.seed");
  tr->add_option("--set", tr_set, "Config override key=value (repeatable)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_report, ev_drop, ev_config;
  std::vector<std::string> ev_set;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset directory or manifest")->required();
  ev->add_option("--report", ev_report, "Report JSON output")->required();
  ev->add_option("--drop-sensors", ev_drop, "Comma-separated sensor ids removed before fusion");
  ev->add_option("--config", ev_config, "Config file (default: <ckpt>.cfg)");
  ev->add_option("--set", ev_set, "Config override key=value (repeatable)");

  // infer
  auto* in = app.add_subcommand("infer", "Detect persons and joints in one frame");
  std::string in_ckpt, in_frame, in_out, in_config;
  std::vector<std::string> in_set;
  in->add_option("--ckpt", in_ckpt, "Checkpoint")->required();
  in->add_option("--frame", in_frame, "Frame manifest")->required();
  in->add_option("--out", in_out, "Output JSON")->required();
  in->add_option("--config", in_config, "Config file (default: <ckpt>.cfg)");
  in->add_option("--set", in_set, "Config override key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      std::tie(gopt.min_persons, gopt.max_persons) = parse_range(persons);
      if (!gen_config.empty()) gopt.workspace = load_config(gen_config).workspace;
      gopt.validate();
      const DatasetSummary s = write_dataset(gopt, gen_out);
      std::printf("frames %d\npersons %d\npoints %ld\nmanifest %s\n", s.frames, s.persons, s.points,
                  s.manifest.string().c_str());
    } else if (tr->parsed()) {
      std::vector<std::string> overrides = tr_set;
      if (!tr_mode.empty()) overrides.push_back("train.mode=" + tr_mode);
      if (tr_epochs >= 0) overrides.push_back("train.epochs=" + std::to_string(tr_epochs));
      if (tr_seed >= 0) overrides.push_back("train.seed=" + std::to_string(tr_seed));
      const Config cfg = load_config(tr_config, overrides);
      const Dataset data = load_dataset(tr_data, cfg);
      require_writable_parent(tr_out);
      const TrainOutputs outs = train_outputs(tr_out, cfg.train.mode);
      save_config(cfg, sidecar_config(tr_out));
      train(data, cfg, &outs, [](const EpochLog& e) {
        std::fprintf(stderr, "epoch %d [%s] cls %.5f reg %.5f joints %.5f total %.5f\n", e.epoch, e.phase.c_str(),
                     e.loss_cls, e.loss_reg, e.loss_joints, e.total);
      });
      std::printf("checkpoint %s\n", outs.checkpoint.string().c_str());
      if (cfg.train.mode == TrainMode::kStaged)
        std::printf("detector %s\nregressor %s\n", outs.detector_checkpoint.string().c_str(),
                    outs.regressor_checkpoint.string().c_str());
      std::printf("log %s\n", outs.log.string().c_str());
    } else if (ev->parsed()) {
      const std::set<int> drop = ev_drop.empty() ? std::set<int>{} : parse_id_list(ev_drop);
      const Config cfg = checkpoint_config(ev_ckpt, ev_config, ev_set);
      const auto weights = load_compatible(ev_ckpt, cfg);
      const Dataset data = load_dataset(ev_data, cfg);
      require_writable_parent(ev_report);
      const EvalReport r = evaluate(weights, cfg, data, drop);
      write_json(report_to_json(r), ev_report);
      std::printf("ap %s\nmean_dist_cm %s\nmean_acc_pct %s\n", r.ap ? std::to_string(*r.ap).c_str() : "absent",
                  r.mean_dist_cm ? std::to_string(*r.mean_dist_cm).c_str() : "absent",
                  r.mean_acc_pct ? std::to_string(*r.mean_acc_pct).c_str() : "absent");
    } else if (in->parsed()) {
      const Config cfg = checkpoint_config(in_ckpt, in_config, in_set);
      const auto weights = load_compatible(in_ckpt, cfg);
      require_writable_parent(in_out);
      write_json(infer_manifest(weights, cfg, in_frame), in_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
