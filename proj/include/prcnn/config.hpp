#pragma once

#include "prcnn/geometry.hpp"
#include "prcnn/network.hpp"
#include "prcnn/nn/adam.hpp"
#include "prcnn/pointcloud.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace prcnn {

enum class TrainMode { kEndToEnd, kStaged };

std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);  // ConfigError unless end_to_end|staged

struct TrainConfig {
  double lambda = 1.0;   // regression weight in the detection loss
  double lambda2 = 1.0;  // joint-regression weight in the total loss
  int batch_size = 4;
  int epochs = 200;
  std::uint64_t seed = 1;
  int n_inst = 32;
  double camera_dropout = 0.2;
  TrainMode mode = TrainMode::kEndToEnd;
  nn::AdamConfig adam;
};

struct InferenceConfig {
  double score_threshold = 0.5;
  double nms_iou = 0.3;
};

struct EvalConfig {
  double iou_threshold = 0.5;
  double acc_threshold_cm = 10.0;
};

struct Config {
  Workspace workspace;
  double filter_cell = kDefaultFilterCell;
  JointSchema joints = JointSchema::cmu();
  ModelConfig model;  // grid, T and joint count follow workspace/points_per_voxel/joints
  TrainConfig train;
  InferenceConfig infer;
  EvalConfig eval;

  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

// "key = value" lines; '#' starts a comment. Duplicate keys and malformed lines are errors.
KeyValues parse_key_values(std::istream& is, const std::string& source);

// "key=value" strings applied on top of `kv`; unknown keys are rejected.
void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides);

// Every schema key must be present and no others.
Config config_from_key_values(const KeyValues& kv);
KeyValues config_to_key_values(const Config& c);

std::vector<std::string> config_keys();

Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
void save_config(const Config& c, const std::filesystem::path& path);
std::string config_to_text(const Config& c);

}  // namespace prcnn
