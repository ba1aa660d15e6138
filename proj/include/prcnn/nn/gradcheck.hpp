#pragma once

#include "prcnn/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace prcnn::nn {

struct GradCheckOptions {
  double epsilon = 1e-6;
  int directions = 4;
  std::uint64_t seed = 0x5eed;
  // Denominator floor of the relative error; gradients smaller than this are compared absolutely.
  double floor = 1e-3;
};

// Compares reverse-mode directional derivatives against central differences.
// `op(tape, vars)` builds any-shaped output from leaf vars bound to `inputs`; the
// output is reduced with a fixed random projection. Inputs whose `check` flag is
// false are held constant. Returns the maximum relative error.
template <class Op>
double finite_difference_check(Op&& op, const std::vector<Tensor<double>>& inputs,
                               const GradCheckOptions& opt = {}, std::vector<bool> check = {}) {
  if (check.empty()) check.assign(inputs.size(), true);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;

  Tensor<double> projection;
  auto evaluate = [&](const std::vector<Tensor<double>>& xs, bool with_grad,
                      std::vector<Eigen::VectorXd>* grads) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (std::size_t i = 0; i < xs.size(); ++i) vars.push_back(tape.leaf(xs[i], with_grad && check[i]));
    Var<double> out = op(tape, vars);
    if (projection.size() == 0) {
      projection = Tensor<double>(out.shape());
      for (Index i = 0; i < projection.size(); ++i) projection.data[i] = normal(rng);
    }
    Var<double> loss = weighted_sum(out, projection);
    if (grads) {
      tape.backward(loss);
      for (const auto& v : vars) grads->push_back(tape.grad(v));
    }
    return loss.value().data[0];
  };

  std::vector<Eigen::VectorXd> analytic;
  evaluate(inputs, true, &analytic);

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!check[i]) continue;
    for (int d = 0; d < opt.directions; ++d) {
      Eigen::VectorXd u(inputs[i].size());
      for (Index k = 0; k < u.size(); ++k) u[k] = normal(rng);
      auto plus = inputs, minus = inputs;
      plus[i].data += opt.epsilon * u;
      minus[i].data -= opt.epsilon * u;
      const double numeric = (evaluate(plus, false, nullptr) - evaluate(minus, false, nullptr)) /
                             (2.0 * opt.epsilon);
      const double exact = analytic[i].dot(u);
      const double denom = std::max({opt.floor, std::abs(numeric), std::abs(exact)});
      worst = std::max(worst, std::abs(numeric - exact) / denom);
    }
  }
  return worst;
}

}  // namespace prcnn::nn
