#include "prcnn/config.hpp"

#include "prcnn/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace prcnn {

std::string to_string(TrainMode m) { return m == TrainMode::kEndToEnd ? "end_to_end" : "staged"; }

TrainMode parse_train_mode(const std::string& s) {
  if (s == "end_to_end") return TrainMode::kEndToEnd;
  if (s == "staged") return TrainMode::kStaged;
  throw ConfigError("mode must be end_to_end or staged, got '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

Eigen::Vector3d to_vec3(const std::string& key, const std::string& v) {
  const auto w = words(v);
  if (w.size() != 3) throw ConfigError("config key '" + key + "': expected three numbers");
  return {to_double(key, w[0]), to_double(key, w[1]), to_double(key, w[2])};
}

std::vector<int> to_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& w : words(v)) out.push_back(int(to_int(key, w)));
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

std::string vec3(const Eigen::Vector3d& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

JointSchema to_joints(const std::string& v) {
  if (v == "cmu") return JointSchema::cmu();
  if (v == "mvor") return JointSchema::mvor();
  JointSchema s{words(v)};
  if (s.names.empty()) throw ConfigError("config key 'joints': empty joint list");
  return s;
}

std::string joints_text(const JointSchema& s) {
  if (s == JointSchema::cmu()) return "cmu";
  if (s == JointSchema::mvor()) return "mvor";
  std::string out;
  for (const auto& n : s.names) out += (out.empty() ? "" : " ") + n;
  return out;
}

// One entry per schema key: how to read it into a Config and how to print it back.
struct Field {
  const char* key;
  std::function<void(Config&, const std::string&, const std::string&)> read;
  std::function<std::string(const Config&)> write;
};

#define PRCNN_DOUBLE(KEY, MEMBER) \
  Field{KEY, [](Config& c, const std::string& k, const std::string& v) { c.MEMBER = to_double(k, v); }, \
        [](const Config& c) { return fmt(c.MEMBER); }}
#define PRCNN_INT(KEY, MEMBER) \
  Field{KEY, [](Config& c, const std::string& k, const std::string& v) { c.MEMBER = decltype(c.MEMBER)(to_int(k, v)); }, \
        [](const Config& c) { return std::to_string(c.MEMBER); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{"workspace.origin", [](Config& c, const std::string& k, const std::string& v) { c.workspace.origin = to_vec3(k, v); },
            [](const Config& c) { return vec3(c.workspace.origin); }},
      // extent and voxel size are combined into the workspace after all keys are read
      Field{"workspace.extent", [](Config&, const std::string&, const std::string&) {},
            [](const Config& c) { return vec3(c.workspace.extent()); }},
      Field{"workspace.voxel_size", [](Config&, const std::string&, const std::string&) {},
            [](const Config& c) { return vec3(c.workspace.voxel_size); }},
      PRCNN_DOUBLE("preprocess.filter_cell", filter_cell),
      PRCNN_INT("preprocess.points_per_voxel", model.points_per_voxel),
      Field{"joints", [](Config& c, const std::string&, const std::string& v) { c.joints = to_joints(v); },
            [](const Config& c) { return joints_text(c.joints); }},
      PRCNN_INT("model.vfe1", model.vfe1_out),
      PRCNN_INT("model.vfe2", model.vfe2_out),
      PRCNN_INT("model.fc", model.fc_out),
      PRCNN_INT("model.unet_depth", model.unet_depth),
      PRCNN_INT("model.unet_growth", model.unet_growth),
      PRCNN_INT("model.unet_layers", model.unet_layers),
      PRCNN_INT("model.unet_channels", model.unet_channels),
      Field{"model.point_mlp", [](Config& c, const std::string& k, const std::string& v) { c.model.point_mlp = to_ints(k, v); },
            [](const Config& c) { return join(c.model.point_mlp); }},
      Field{"model.global_mlp", [](Config& c, const std::string& k, const std::string& v) { c.model.global_mlp = to_ints(k, v); },
            [](const Config& c) { return join(c.model.global_mlp); }},
      PRCNN_INT("instance.min_points", model.min_instance_points),
      PRCNN_INT("instance.max_points", model.max_instance_points),
      Field{"train.mode", [](Config& c, const std::string&, const std::string& v) { c.train.mode = parse_train_mode(v); },
            [](const Config& c) { return to_string(c.train.mode); }},
      PRCNN_DOUBLE("train.lambda", train.lambda),
      PRCNN_DOUBLE("train.lambda2", train.lambda2),
      PRCNN_INT("train.batch_size", train.batch_size),
      PRCNN_INT("train.epochs", train.epochs),
      Field{"train.seed",
            [](Config& c, const std::string& k, const std::string& v) {
              const long long s = to_int(k, v);
              if (s < 0) throw ConfigError("config key 'train.seed' must be non-negative");
              c.train.seed = std::uint64_t(s);
            },
            [](const Config& c) { return std::to_string(c.train.seed); }},
      PRCNN_INT("train.n_inst", train.n_inst),
      PRCNN_DOUBLE("train.camera_dropout", train.camera_dropout),
      PRCNN_DOUBLE("optim.lr", train.adam.lr),
      PRCNN_DOUBLE("optim.beta1", train.adam.beta1),
      PRCNN_DOUBLE("optim.beta2", train.adam.beta2),
      PRCNN_DOUBLE("optim.eps", train.adam.eps),
      PRCNN_DOUBLE("infer.score_threshold", infer.score_threshold),
      PRCNN_DOUBLE("infer.nms_iou", infer.nms_iou),
      PRCNN_DOUBLE("eval.iou_threshold", eval.iou_threshold),
      PRCNN_DOUBLE("eval.acc_threshold_cm", eval.acc_threshold_cm),
  };
  return f;
}

#undef PRCNN_DOUBLE
#undef PRCNN_INT

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& f : fields()) k.push_back(f.key);
  return k;
}

void Config::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  workspace.validate();
  if (!(filter_cell > 0.0)) fail("preprocess.filter_cell must be positive");
  if (joints.names.empty()) fail("joints must not be empty");
  model.validate();
  if (model.grid != workspace.counts) fail("model grid does not match the workspace grid");
  if (model.joint_count != int(joints.size())) fail("model joint count does not match the joint list");
  if (model.min_instance_points < 1 || model.max_instance_points < model.min_instance_points)
    fail("instance.min_points / instance.max_points must satisfy 1 <= min <= max");
  if (!(train.lambda >= 0.0) || !(train.lambda2 >= 0.0)) fail("train.lambda and train.lambda2 must be >= 0");
  if (train.batch_size < 1) fail("train.batch_size must be >= 1");
  if (train.epochs < 0) fail("train.epochs must be >= 0");
  if (train.n_inst < 1) fail("train.n_inst must be >= 1");
  if (!(train.camera_dropout >= 0.0 && train.camera_dropout <= 1.0)) fail("train.camera_dropout must be in [0, 1]");
  if (!(train.adam.lr > 0.0)) fail("optim.lr must be positive");
  if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0) || !(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0))
    fail("optim.beta1 / optim.beta2 must be in [0, 1)");
  if (!(train.adam.eps > 0.0)) fail("optim.eps must be positive");
  if (!(infer.score_threshold >= 0.0 && infer.score_threshold <= 1.0)) fail("infer.score_threshold must be in [0, 1]");
  if (!(infer.nms_iou >= 0.0 && infer.nms_iou <= 1.0)) fail("infer.nms_iou must be in [0, 1]");
  if (!(eval.iou_threshold >= 0.0 && eval.iou_threshold < 1.0)) fail("eval.iou_threshold must be in [0, 1)");
  if (!(eval.acc_threshold_cm > 0.0)) fail("eval.acc_threshold_cm must be positive");
}

KeyValues parse_key_values(std::istream& is, const std::string& source) {
  KeyValues kv;
  std::string line;
  for (int n = 1; std::getline(is, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(n);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
  const auto keys = config_keys();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = trim(o.substr(0, eq));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError("unknown config key '" + key + "'");
    kv[key] = trim(o.substr(eq + 1));
  }
}

Config config_from_key_values(const KeyValues& kv) {
  const auto keys = config_keys();
  for (const auto& [k, v] : kv)
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("unknown config key '" + k + "'");
  for (const auto& k : keys)
    if (!kv.count(k)) throw ConfigError("missing config key '" + k + "'");

  Config c;
  for (const auto& f : fields()) f.read(c, f.key, kv.at(f.key));
  // The workspace is made from extent / voxel size together.
  const Eigen::Vector3d extent = to_vec3("workspace.extent", kv.at("workspace.extent"));
  const Eigen::Vector3d voxel = to_vec3("workspace.voxel_size", kv.at("workspace.voxel_size"));
  c.workspace = Workspace::make(c.workspace.origin, extent, voxel);
  c.model.grid = c.workspace.counts;
  c.model.joint_count = int(c.joints.size());
  c.validate();
  return c;
}

KeyValues config_to_key_values(const Config& c) {
  KeyValues kv;
  for (const auto& f : fields()) kv[f.key] = f.write(c);
  return kv;
}

std::string config_to_text(const Config& c) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.write(c) + "\n";
  return out;
}

Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  KeyValues kv = parse_key_values(is, path.string());
  apply_overrides(kv, overrides);
  return config_from_key_values(kv);
}

void save_config(const Config& c, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os << config_to_text(c);
  if (!os) throw FormatError("failed writing " + path.string());
}

}  // namespace prcnn
