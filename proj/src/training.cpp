#include "prcnn/training.hpp"

#include "prcnn/checkpoint.hpp"
#include "prcnn/errors.hpp"
#include "prcnn/network.hpp"
#include "prcnn/rng.hpp"
#include "prcnn/synthdata.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace prcnn {

namespace fs = std::filesystem;

nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch},           {"phase", e.phase},
          {"loss_cls", e.loss_cls},     {"loss_reg", e.loss_reg},
          {"loss_joints", e.loss_joints}, {"total", e.total}};
}

TrainOutputs train_outputs(const fs::path& out, TrainMode mode) {
  TrainOutputs o;
  o.checkpoint = out;
  o.log = fs::path(out).concat(".log.jsonl");
  if (mode == TrainMode::kStaged) {
    const fs::path stem = out.parent_path() / out.stem();
    o.detector_checkpoint = fs::path(stem).concat(".detector.prcw");
    o.regressor_checkpoint = fs::path(stem).concat(".regressor.prcw");
  }
  return o;
}

namespace {

struct Phase {
  std::string name;
  bool detector = false;
  bool regressor = false;
};

void save_atomic(const nn::ParameterMap<float>& w, const fs::path& path) {
  const fs::path tmp = fs::path(path).concat(".tmp");
  save_checkpoint(w, tmp);
  fs::rename(tmp, path);
}

nn::ParameterMap<float> subset(const nn::ParameterMap<float>& w, bool regressor) {
  nn::ParameterMap<float> out;
  for (const auto& [name, t] : w)
    if (is_regressor_weight(name) == regressor) out.emplace(name, t);
  return out;
}

class Trainer {
 public:
  Trainer(const Dataset& data, const Config& cfg) : data_(data), cfg_(cfg) {
    weights_ = init_weights<float>(cfg.model, cfg.train.seed);
  }

  EpochLog run_epoch(int epoch, const Phase& phase) {
    const std::uint64_t seed = cfg_.train.seed, ep = std::uint64_t(epoch);
    std::vector<std::size_t> order(data_.frames.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    auto order_rng = keyed_rng({seed, ep, tag(Stream::kBatchOrder)});
    std::shuffle(order.begin(), order.end(), order_rng);

    EpochLog log;
    log.phase = phase.name;
    const std::size_t bs = std::size_t(cfg_.train.batch_size);
    std::size_t batches = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += bs, ++b) {
      const std::vector<std::size_t> batch(order.begin() + long(start),
                                           order.begin() + long(std::min(order.size(), start + bs)));
      step(ep, std::uint64_t(b), batch, phase, log);
      ++batches;
    }
    const double n = double(std::max<std::size_t>(batches, 1));
    log.loss_cls /= n;
    log.loss_reg /= n;
    log.loss_joints /= n;
    log.total /= n;
    return log;
  }

  const nn::ParameterMap<float>& weights() const { return weights_; }

 private:
  PreparedFrame prepare(const FrameData& f, std::uint64_t ep) const {
    const std::uint64_t seed = cfg_.train.seed, fid = std::uint64_t(f.frame_id);
    std::vector<PointCloud> clouds = f.clouds;
    if (cfg_.train.camera_dropout > 0.0 && !clouds.empty()) {
      auto rng = keyed_rng({seed, ep, fid, tag(Stream::kDropout)});
      clouds = apply_dropout(clouds, cfg_.train.camera_dropout, rng);
    }
    const std::uint64_t shuffle_seed = keyed_rng({seed, ep, fid, tag(Stream::kShuffle)})();
    return prepare_frame(f, clouds, cfg_, shuffle_seed);
  }

  void step(std::uint64_t ep, std::uint64_t b, const std::vector<std::size_t>& batch, const Phase& phase, EpochLog& log) {
    const std::uint64_t seed = cfg_.train.seed;
    std::vector<PreparedFrame> frames;
    for (std::size_t i : batch) frames.push_back(prepare(data_.frames[i], ep));

    nn::Tape<float> tape;
    const Bound<float> w = bind_weights(tape, weights_, [&](const std::string& name) {
      return is_regressor_weight(name) ? phase.regressor : phase.detector;
    });

    std::optional<DetectionLoss<float>> det;
    if (phase.detector) {
      std::vector<nn::Var<float>> scores, regs;
      std::vector<std::uint8_t> labels, occupied;
      const Eigen::Index nv = cfg_.workspace.voxel_count();
      Eigen::Matrix4Xd targets(4, nv * Eigen::Index(frames.size()));
      for (std::size_t k = 0; k < frames.size(); ++k) {
        const auto out = detect(tape, frames[k].voxels, w, cfg_.model);
        scores.push_back(out.heads.scores);
        regs.push_back(out.heads.cylinders);
        labels.insert(labels.end(), frames[k].targets.labels.begin(), frames[k].targets.labels.end());
        for (int c : frames[k].voxels.count_per_voxel) occupied.push_back(c > 0);
        targets.middleCols(Eigen::Index(k) * nv, nv) = frames[k].targets.reg;
      }
      auto rng = keyed_rng({seed, ep, b, tag(Stream::kSampling)});
      const auto sample = sample_training_voxels(labels, occupied, rng);
      det = detection_loss(voxel_rows(scores), voxel_rows(regs), labels, targets, sample, cfg_.train.lambda);
    }

    nn::Var<float> joints = detail::constant_zero(tape);
    if (phase.regressor && cfg_.train.lambda2 > 0.0) {
      std::vector<TrainingInstance> pool;
      for (const auto& f : frames)
        for (std::size_t p = 0; p < f.truth.persons.size(); ++p) {
          auto rng = keyed_rng({seed, ep, std::uint64_t(f.frame_id), std::uint64_t(p), tag(Stream::kCrop)});
          auto inst = make_training_instance(f.cloud, f.truth.persons[p], f.truth.cylinders[p], cfg_, rng);
          if (inst && inst->present_count() > 0) pool.push_back(std::move(*inst));
        }
      std::vector<std::size_t> chosen(pool.size());
      std::iota(chosen.begin(), chosen.end(), std::size_t(0));
      if (chosen.size() > std::size_t(cfg_.train.n_inst)) {
        auto rng = keyed_rng({seed, ep, b, tag(Stream::kInstances)});
        std::shuffle(chosen.begin(), chosen.end(), rng);
        chosen.resize(std::size_t(cfg_.train.n_inst));
        std::sort(chosen.begin(), chosen.end());
      }
      std::vector<nn::Var<float>> preds;
      std::vector<nn::Tensor<float>> targets;
      std::vector<std::vector<bool>> present;
      for (std::size_t i : chosen) {
        preds.push_back(pointnet_regress<float>(tape, pool[i].points, w, cfg_.model));
        targets.push_back(pool[i].joints);
        present.push_back(pool[i].present);
      }
      joints = joint_loss(tape, preds, targets, present);
    }

    nn::Var<float> total = det ? total_loss(*det, joints, cfg_.train.lambda2)
                               : nn::scale(joints, float(cfg_.train.lambda2));
    if (det) {
      log.loss_cls += det->cls.value().data[0];
      log.loss_reg += det->reg.value().data[0];
    }
    log.loss_joints += joints.value().data[0];
    log.total += total.value().data[0];

    tape.backward(total);
    nn::adam_step(weights_, collect_gradients(tape, w), adam_, cfg_.train.adam);
  }

  const Dataset& data_;
  const Config& cfg_;
  nn::ParameterMap<float> weights_;
  nn::AdamState<float> adam_;
};

}  // namespace

TrainResult train(const Dataset& data, const Config& cfg, const TrainOutputs* outputs,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (!(data.manifest.joints == cfg.joints))
    throw ConfigError("dataset joint list does not match the configured joints");
  if (data.frames.empty()) throw ContractError("train: empty dataset");

  std::ofstream log_file;
  if (outputs) {
    log_file.open(outputs->log, std::ios::trunc);
    if (!log_file) throw FormatError("cannot open for writing: " + outputs->log.string());
  }

  std::vector<Phase> phases;
  if (cfg.train.mode == TrainMode::kEndToEnd)
    phases.push_back({"joint", true, true});
  else
    phases = {{"detector", true, false}, {"regressor", false, true}};

  Trainer trainer(data, cfg);
  TrainResult result;
  int global_epoch = 0;
  for (const Phase& phase : phases) {
    for (int e = 1; e <= cfg.train.epochs; ++e) {
      EpochLog log = trainer.run_epoch(e, phase);
      log.epoch = ++global_epoch;
      if (outputs) {
        save_atomic(trainer.weights(), outputs->checkpoint);
        if (phase.name == "detector") save_atomic(subset(trainer.weights(), false), outputs->detector_checkpoint);
        if (phase.name == "regressor") save_atomic(subset(trainer.weights(), true), outputs->regressor_checkpoint);
        log_file << to_json(log).dump() << '\n' << std::flush;
      }
      if (on_epoch) on_epoch(log);
      result.log.push_back(log);
    }
  }
  // Zero-epoch runs still leave loadable checkpoints behind.
  if (outputs && global_epoch == 0) {
    save_atomic(trainer.weights(), outputs->checkpoint);
    if (cfg.train.mode == TrainMode::kStaged) {
      save_atomic(subset(trainer.weights(), false), outputs->detector_checkpoint);
      save_atomic(subset(trainer.weights(), true), outputs->regressor_checkpoint);
    }
  }
  result.weights = trainer.weights();
  return result;
}

}  // namespace prcnn
