#pragma once

#include "prcnn/nn/tensor.hpp"

#include <cmath>
#include <map>
#include <string>

namespace prcnn::nn {

template <typename S>
using ParameterMap = std::map<std::string, Tensor<S>>;

template <typename S>
using GradientMap = std::map<std::string, typename Tensor<S>::Vector>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
struct AdamState {
  std::map<std::string, Eigen::VectorXd> m, v;
  std::map<std::string, long> steps;
};

// Bias-corrected Adam update of every parameter that has an entry in `grads`.
template <typename S>
void adam_step(ParameterMap<S>& params, const GradientMap<S>& grads, AdamState<S>& state,
               const AdamConfig& cfg) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw DimensionError("adam_step: unknown parameter " + name);
    auto& p = it->second.data;
    if (g.size() != p.size()) throw DimensionError("adam_step: gradient shape mismatch for " + name);
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() == 0) {
      m = Eigen::VectorXd::Zero(p.size());
      v = Eigen::VectorXd::Zero(p.size());
    }
    const long t = ++state.steps[name];
    const Eigen::VectorXd gd = g.template cast<double>();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gd;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gd.cwiseProduct(gd);
    const double c1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(t));
    const Eigen::ArrayXd step = cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
    p = (p.template cast<double>().array() - step).matrix().template cast<S>();
  }
}

}  // namespace prcnn::nn
