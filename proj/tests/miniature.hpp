// Miniature model fixture for gradient checks: 2x2x2 grid, T = 4, J = 2.
#pragma once

#include "test_util.hpp"

#include "prcnn/network.hpp"
#include "prcnn/voxelizer.hpp"

#include <stdexcept>

namespace testutil {

struct Miniature {
  prcnn::ModelConfig cfg = prcnn::ModelConfig::miniature();
  prcnn::Workspace ws = prcnn::Workspace::make({0, 0, 0}, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});
  prcnn::VoxelizedFrame frame;
  std::vector<Eigen::Matrix3Xd> instances;  // sphere-frame point sets
  prcnn::nn::ParameterMap<double> weights;
};

// A tiny network easily has relu units that are off for every input, which makes a
// finite-difference check vacuous for the weights behind them. Weights are redrawn
// until every one of them receives gradient from all four outputs.
inline Miniature live_miniature(std::uint64_t seed) {
  using namespace prcnn;
  Miniature m;
  std::mt19937_64 rng(seed);
  m.frame = build_voxel_tensor(random_cloud(rng, 24, {0, 0, 0}, {0.5, 0.5, 0.5}), m.ws, m.cfg.points_per_voxel, seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), bias(-0.05, 0.2);
  for (int n : {5, 7}) {
    Eigen::Matrix3Xd p(3, n);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
    m.instances.push_back(p);
  }
  for (int attempt = 0; attempt < 500; ++attempt) {
    m.weights = init_weights<double>(m.cfg, seed * 1000 + std::uint64_t(attempt));
    for (auto& [name, t] : m.weights)
      if (name.back() == 'b')
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = bias(rng);
    nn::Tape<double> tape;
    const auto b = bind_weights(tape, m.weights);
    const auto d = detect(tape, m.frame, b, m.cfg);
    auto out = nn::add(nn::add(nn::sum(d.volume), nn::sum(d.heads.scores)), nn::sum(d.heads.cylinders));
    for (const auto& p : m.instances) out = nn::add(out, nn::sum(pointnet_regress<double>(tape, p, b, m.cfg)));
    tape.backward(out);
    bool live = true;
    for (const auto& [name, g] : collect_gradients(tape, b)) live = live && (g.array() != 0.0).any();
    if (live) return m;
  }
  throw std::runtime_error("no live miniature weights found");
}

}  // namespace testutil
