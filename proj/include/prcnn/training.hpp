#pragma once

#include "prcnn/config.hpp"
#include "prcnn/nn.hpp"
#include "prcnn/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace prcnn {

template <typename S>
struct DetectionLoss {
  nn::Var<S> cls;    // mean cross-entropy over the sample
  nn::Var<S> reg;    // smooth-L1 over sampled positives / sample size
  nn::Var<S> total;  // cls + lambda * reg
};

namespace detail {

template <typename S>
nn::Var<S> constant_zero(nn::Tape<S>& tape) {
  return tape.leaf(nn::Tensor<S>(nn::Shape{1}));
}

}  // namespace detail

// L = 1/N sum CE(v_i, v_i*) + lambda/N sum v_i* smooth_l1(b_i - b_i*), N = |sample|.
// scores: (V, 2) logits, reg: (V, 4) over the concatenated batch voxels; labels and
// reg_targets are indexed the same way (reg_targets only read at positives).
template <typename S>
DetectionLoss<S> detection_loss(nn::Var<S> scores, nn::Var<S> reg, std::span<const std::uint8_t> labels,
                                const Eigen::Matrix4Xd& reg_targets, const std::vector<Eigen::Index>& sample,
                                double lambda) {
  if (sample.empty()) throw ContractError("detection_loss: empty voxel sample");
  const nn::Index v = scores.dim(0);
  if (scores.dim(1) != 2 || reg.dim(0) != v || reg.dim(1) != 4 || nn::Index(labels.size()) != v ||
      reg_targets.cols() != v)
    throw DimensionError("detection_loss: scores, regression, labels and targets disagree");
  std::vector<int> lab;
  std::vector<nn::Index> pos;
  for (Eigen::Index i : sample) {
    if (i < 0 || i >= v) throw ContractError("detection_loss: sample index out of range");
    lab.push_back(labels[std::size_t(i)]);
    if (labels[std::size_t(i)]) pos.push_back(i);
  }
  nn::Tape<S>& tape = *scores.tape;
  DetectionLoss<S> out;
  out.cls = nn::cross_entropy(nn::gather_rows(scores, std::vector<nn::Index>(sample.begin(), sample.end())), lab);
  if (pos.empty()) {
    out.reg = detail::constant_zero(tape);
  } else {
    nn::Tensor<S> target(nn::Shape{nn::Index(pos.size()), 4});
    for (std::size_t k = 0; k < pos.size(); ++k)
      for (int c = 0; c < 4; ++c) target.data[nn::Index(k) * 4 + c] = S(reg_targets(c, pos[k]));
    out.reg = nn::scale(nn::smooth_l1(nn::gather_rows(reg, pos), target), S(1.0 / double(sample.size())));
  }
  out.total = nn::add(out.cls, nn::scale(out.reg, S(lambda)));
  return out;
}

// (1 / N_joints) sum_k sum_present ||j_k - j_k*||^2; N_joints counts present joints over all
// instances. Zero (and gradient-free) without instances.
template <typename S>
nn::Var<S> joint_loss(nn::Tape<S>& tape, const std::vector<nn::Var<S>>& preds, const std::vector<nn::Tensor<S>>& targets,
                      const std::vector<std::vector<bool>>& present) {
  if (preds.size() != targets.size() || preds.size() != present.size())
    throw DimensionError("joint_loss: one target and mask per prediction required");
  std::size_t n_joints = 0;
  for (const auto& m : present) n_joints += std::size_t(std::count(m.begin(), m.end(), true));
  if (preds.empty() || n_joints == 0) return detail::constant_zero(tape);
  nn::Var<S> acc = nn::masked_squared_error(preds[0], targets[0], present[0]);
  for (std::size_t k = 1; k < preds.size(); ++k)
    acc = nn::add(acc, nn::masked_squared_error(preds[k], targets[k], present[k]));
  return nn::scale(acc, S(1.0 / double(n_joints)));
}

template <typename S>
nn::Var<S> total_loss(const DetectionLoss<S>& det, nn::Var<S> joints, double lambda2) {
  return nn::add(det.total, nn::scale(joints, S(lambda2)));
}

// Scores/regression volumes of a batch flattened to (B * N_v, C) rows, frame-major.
template <typename S>
nn::Var<S> voxel_rows(const std::vector<nn::Var<S>>& volumes) {
  std::vector<nn::Var<S>> flat;
  for (const auto& v : volumes) {
    const nn::Index c = v.dim(0);
    flat.push_back(nn::reshape(v, nn::Shape{c, v.value().size() / c}));
  }
  return nn::transpose(flat.size() == 1 ? flat[0] : nn::concat<S>(flat, 1));
}

struct EpochLog {
  int epoch = 0;
  std::string phase;  // "joint", "detector" or "regressor"
  double loss_cls = 0.0;
  double loss_reg = 0.0;
  double loss_joints = 0.0;
  double total = 0.0;
};

nlohmann::json to_json(const EpochLog& e);

struct TrainOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path detector_checkpoint;   // staged mode only
  std::filesystem::path regressor_checkpoint;  // staged mode only
  std::filesystem::path log;
};

struct TrainResult {
  nn::ParameterMap<float> weights;
  std::vector<EpochLog> log;
};

// Checkpoint and log paths derived from the --out path.
TrainOutputs train_outputs(const std::filesystem::path& out, TrainMode mode);

// End-to-end: every epoch minimises the total loss over all weights. Staged: `epochs`
// epochs of the detection loss on the detector, then `epochs` epochs of the joint loss
// on the regressor with the detector frozen. Teacher forcing: crops come from
// ground-truth cylinders. With `outputs`, checkpoints are rewritten after every
// epoch and the log is appended as JSON lines.
TrainResult train(const Dataset& data, const Config& cfg, const TrainOutputs* outputs = nullptr,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace prcnn
