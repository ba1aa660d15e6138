#pragma once

#include "prcnn/nn/tape.hpp"

#include <cmath>
#include <memory>

namespace prcnn::nn {

// Mean over rows of -log softmax(logits)[label]; logits are (N, K).
template <typename S>
Var<S> cross_entropy(Var<S> logits, std::vector<int> labels) {
  if (logits.value().rank() != 2) throw DimensionError("cross_entropy: logits must be (N, K)");
  const Index n = logits.dim(0), k = logits.dim(1);
  if (Index(labels.size()) != n) throw DimensionError("cross_entropy: one label per row required");
  if (n == 0) throw ContractError("cross_entropy: empty batch");
  const auto z = logits.value().matrix().template cast<double>();
  Eigen::MatrixXd prob(n, k);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int label = labels[std::size_t(i)];
    if (label < 0 || label >= k) throw ContractError("cross_entropy: label out of range");
    const double m = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - m).exp().matrix();
    const double se = e.sum();
    prob.row(i) = e / se;
    total += -(z(i, label) - m - std::log(se));
  }
  Tensor<S> out(Shape{1});
  out.data[0] = S(total / double(n));
  auto saved = std::make_shared<const Eigen::MatrixXd>(std::move(prob));
  auto lab = std::make_shared<const std::vector<int>>(std::move(labels));
  return logits.tape->record(std::move(out), {logits}, [logits, saved, lab, n, k](Tape<S>& t, std::size_t self) {
    const double gy = double(t.output_grad(self)[0]) / double(n);
    Eigen::Map<RowMatrix<S>> g(t.grad_accumulator(logits.id).data(), n, k);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < k; ++j)
        g(i, j) += S(gy * ((*saved)(i, j) - (j == (*lab)[std::size_t(i)] ? 1.0 : 0.0)));
  });
}

inline double smooth_l1_value(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

// Sum over elements of R(pred - target), R(d) = 0.5 d^2 if |d| < 1 else |d| - 0.5.
template <typename S>
Var<S> smooth_l1(Var<S> pred, const Tensor<S>& target) {
  if (pred.shape() != target.shape)
    throw DimensionError("smooth_l1: shape mismatch " + to_string(pred.shape()) + " vs " +
                         to_string(target.shape));
  const auto d = std::make_shared<const Eigen::VectorXd>(
      (pred.value().data.template cast<double>() - target.data.template cast<double>()));
  double total = 0.0;
  for (Index i = 0; i < d->size(); ++i) total += smooth_l1_value((*d)[i]);
  Tensor<S> out(Shape{1});
  out.data[0] = S(total);
  return pred.tape->record(std::move(out), {pred}, [pred, d](Tape<S>& t, std::size_t self) {
    const double gy = double(t.output_grad(self)[0]);
    auto& g = t.grad_accumulator(pred.id);
    for (Index i = 0; i < d->size(); ++i) {
      const double di = (*d)[i];
      const double slope = std::abs(di) < 1.0 ? di : (di > 0 ? 1.0 : -1.0);
      g[i] += S(gy * slope);
    }
  });
}

// Mean of squared differences.
template <typename S>
Var<S> mse(Var<S> pred, const Tensor<S>& target) {
  if (pred.shape() != target.shape)
    throw DimensionError("mse: shape mismatch " + to_string(pred.shape()) + " vs " +
                         to_string(target.shape));
  const Index n = pred.value().size();
  if (n == 0) throw ContractError("mse: empty input");
  const auto d = std::make_shared<const Eigen::VectorXd>(
      pred.value().data.template cast<double>() - target.data.template cast<double>());
  Tensor<S> out(Shape{1});
  out.data[0] = S(d->squaredNorm() / double(n));
  return pred.tape->record(std::move(out), {pred}, [pred, d, n](Tape<S>& t, std::size_t self) {
    const double gy = double(t.output_grad(self)[0]);
    t.grad_accumulator(pred.id) += ((2.0 * gy / double(n)) * *d).template cast<S>();
  });
}

// Sum of squared differences over the rows of (R, C) tensors whose mask entry is set.
template <typename S>
Var<S> masked_squared_error(Var<S> pred, const Tensor<S>& target, std::vector<bool> row_mask) {
  if (pred.shape() != target.shape || pred.value().rank() < 1 ||
      Index(row_mask.size()) != pred.dim(0))
    throw DimensionError("masked_squared_error: shape mismatch");
  const Index r = pred.dim(0), c = pred.value().matrix().cols();
  auto d = std::make_shared<Eigen::MatrixXd>(
      pred.value().matrix(r, c).template cast<double>() - target.matrix(r, c).template cast<double>());
  for (Index i = 0; i < r; ++i)
    if (!row_mask[std::size_t(i)]) d->row(i).setZero();
  Tensor<S> out(Shape{1});
  out.data[0] = S(d->squaredNorm());
  return pred.tape->record(std::move(out), {pred}, [pred, d, r, c](Tape<S>& t, std::size_t self) {
    const double gy = double(t.output_grad(self)[0]);
    Eigen::Map<RowMatrix<S>> g(t.grad_accumulator(pred.id).data(), r, c);
    g += (2.0 * gy * *d).template cast<S>();
  });
}

}  // namespace prcnn::nn
