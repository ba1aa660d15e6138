#pragma once

#include "prcnn/errors.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace prcnn::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index(1), std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

template <typename S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense row-major N-d array.
template <typename S>
struct Tensor {
  using Scalar = S;
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  Shape shape;
  Vector data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(Vector::Zero(numel(shape))) {}
  Tensor(Shape s, Vector d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel(shape))
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + to_string(shape));
  }

  Index size() const { return data.size(); }
  int rank() const { return int(shape.size()); }
  Index dim(int axis) const { return shape.at(std::size_t(axis < 0 ? axis + rank() : axis)); }

  // Leading dimension as rows, everything else as columns.
  Eigen::Map<RowMatrix<S>> matrix() { return matrix(shape.empty() ? 1 : shape[0], cols_after_first()); }
  Eigen::Map<const RowMatrix<S>> matrix() const {
    return matrix(shape.empty() ? 1 : shape[0], cols_after_first());
  }
  Eigen::Map<RowMatrix<S>> matrix(Index rows, Index cols) { return {data.data(), rows, cols}; }
  Eigen::Map<const RowMatrix<S>> matrix(Index rows, Index cols) const {
    return {data.data(), rows, cols};
  }

  template <typename T>
  Tensor<T> cast() const {
    return Tensor<T>(shape, data.template cast<T>());
  }

  static Tensor uniform(Shape s, S lo, S hi, std::mt19937_64& rng) {
    Tensor t(std::move(s));
    std::uniform_real_distribution<double> dist{double(lo), double(hi)};
    for (Index i = 0; i < t.size(); ++i) t.data[i] = S(dist(rng));
    return t;
  }

  static Tensor from(Shape s, std::initializer_list<S> values) {
    Vector d(Index(values.size()));
    Index i = 0;
    for (S v : values) d[i++] = v;
    return Tensor(std::move(s), std::move(d));
  }

 private:
  Index cols_after_first() const {
    if (shape.empty()) return 1;
    return numel(Shape(shape.begin() + 1, shape.end()));
  }
};

}  // namespace prcnn::nn
