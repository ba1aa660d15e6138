#pragma once

#include "prcnn/nn/tape.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <span>

namespace prcnn::nn {

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " +
                         to_string(b));
}

inline int normalize_axis(int axis, int rank, const char* op) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank)
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  return a;
}

// (outer, extent, inner) view of a shape around one axis.
inline std::array<Index, 3> split_axis(const Shape& s, int axis) {
  Index outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[std::size_t(i)];
  for (std::size_t i = std::size_t(axis) + 1; i < s.size(); ++i) inner *= s[i];
  return {outer, s[std::size_t(axis)], inner};
}

}  // namespace detail

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  Tensor<S> out(a.shape(), a.value().data + b.value().data);
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    const auto& gy = t.output_grad(self);
    if (t.requires_grad(a)) t.grad_accumulator(a.id) += gy;
    if (t.requires_grad(b)) t.grad_accumulator(b.id) += gy;
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<S> out(a.shape(), a.value().data - b.value().data);
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    const auto& gy = t.output_grad(self);
    if (t.requires_grad(a)) t.grad_accumulator(a.id) += gy;
    if (t.requires_grad(b)) t.grad_accumulator(b.id) -= gy;
  });
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<S> out(a.shape(), a.value().data.cwiseProduct(b.value().data));
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, std::size_t self) {
    const auto& gy = t.output_grad(self);
    if (t.requires_grad(a)) t.grad_accumulator(a.id) += gy.cwiseProduct(t.value(b).data);
    if (t.requires_grad(b)) t.grad_accumulator(b.id) += gy.cwiseProduct(t.value(a).data);
  });
}

template <typename S>
Var<S> scale(Var<S> a, S factor) {
  Tensor<S> out(a.shape(), a.value().data * factor);
  return a.tape->record(std::move(out), {a}, [a, factor](Tape<S>& t, std::size_t self) {
    t.grad_accumulator(a.id) += t.output_grad(self) * factor;
  });
}

template <typename S>
Var<S> sum(Var<S> a) {
  const double total = a.value().data.template cast<double>().sum();
  Tensor<S> out(Shape{1});
  out.data[0] = S(total);
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, std::size_t self) {
    t.grad_accumulator(a.id).array() += t.output_grad(self)[0];
  });
}

// Sum of x weighted by a constant tensor of the same shape.
template <typename S>
Var<S> weighted_sum(Var<S> a, const Tensor<S>& weights) {
  detail::require_same_shape(a.shape(), weights.shape, "weighted_sum");
  Tensor<S> out(Shape{1});
  out.data[0] = S(a.value().data.template cast<double>().dot(weights.data.template cast<double>()));
  auto w = std::make_shared<const typename Tensor<S>::Vector>(weights.data);
  return a.tape->record(std::move(out), {a}, [a, w](Tape<S>& t, std::size_t self) {
    t.grad_accumulator(a.id) += *w * t.output_grad(self)[0];
  });
}

template <typename S>
Var<S> reshape(Var<S> a, Shape shape) {
  if (numel(shape) != a.value().size())
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  Tensor<S> out(std::move(shape), a.value().data);
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, std::size_t self) {
    t.grad_accumulator(a.id) += t.output_grad(self);
  });
}

template <typename S>
Var<S> relu(Var<S> a) {
  Tensor<S> out(a.shape(), a.value().data.cwiseMax(S(0)));
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, std::size_t self) {
    const auto& x = t.value(a).data;
    t.grad_accumulator(a.id) += (x.array() > S(0)).select(t.output_grad(self), S(0)).matrix();
  });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  Tensor<S> out(a.shape(), (S(1) / (S(1) + (-a.value().data.array()).exp())).matrix());
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, std::size_t self) {
    const auto& y = t.value(self).data.array();
    t.grad_accumulator(a.id) += (t.output_grad(self).array() * y * (S(1) - y)).matrix();
  });
}

// y = x W + b over the last axis of x.
template <typename S>
Var<S> affine(Var<S> x, Var<S> w, Var<S> b) {
  const auto& xs = x.shape();
  if (xs.empty() || w.value().rank() != 2 || b.value().rank() != 1 || xs.back() != w.dim(0) ||
      w.dim(1) != b.dim(0))
    throw DimensionError("affine: incompatible shapes x" + to_string(xs) + " W" +
                         to_string(w.shape()) + " b" + to_string(b.shape()));
  const Index k = w.dim(0), m = w.dim(1), n = x.value().size() / k;
  Shape os = xs;
  os.back() = m;
  Tensor<S> out(os);
  auto y = out.matrix(n, m);
  y.noalias() = x.value().matrix(n, k) * w.value().matrix();
  y.rowwise() += b.value().data.transpose();
  return x.tape->record(std::move(out), {x, w, b}, [x, w, b, n, k, m](Tape<S>& t, std::size_t self) {
    Eigen::Map<const RowMatrix<S>> gy(t.output_grad(self).data(), n, m);
    if (t.requires_grad(x)) {
      Eigen::Map<RowMatrix<S>> gx(t.grad_accumulator(x.id).data(), n, k);
      gx.noalias() += gy * t.value(w).matrix().transpose();
    }
    if (t.requires_grad(w)) {
      Eigen::Map<RowMatrix<S>> gw(t.grad_accumulator(w.id).data(), k, m);
      gw.noalias() += t.value(x).matrix(n, k).transpose() * gy;
    }
    if (t.requires_grad(b)) t.grad_accumulator(b.id) += gy.colwise().sum().transpose();
  });
}

template <typename S>
Var<S> transpose(Var<S> a) {
  if (a.value().rank() != 2) throw DimensionError("transpose: expects a matrix");
  const Index r = a.dim(0), c = a.dim(1);
  Tensor<S> out(Shape{c, r});
  out.matrix() = a.value().matrix().transpose();
  return a.tape->record(std::move(out), {a}, [a, r, c](Tape<S>& t, std::size_t self) {
    Eigen::Map<const RowMatrix<S>> gy(t.output_grad(self).data(), c, r);
    Eigen::Map<RowMatrix<S>> ga(t.grad_accumulator(a.id).data(), r, c);
    ga += gy.transpose();
  });
}

template <typename S>
Var<S> concat(const std::vector<Var<S>>& xs, int axis) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = xs.front().shape();
  const int ax = detail::normalize_axis(axis, int(first.size()), "concat");
  Shape os = first;
  os[std::size_t(ax)] = 0;
  for (const auto& v : xs) {
    const Shape& s = v.shape();
    if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (int(i) != ax && s[i] != first[i])
        throw DimensionError("concat: shape mismatch " + to_string(s) + " vs " + to_string(first));
    os[std::size_t(ax)] += s[std::size_t(ax)];
  }
  const auto [outer, total, inner] = detail::split_axis(os, ax);
  Tensor<S> out(os);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& v : xs) {
    offsets.push_back(off);
    const Index block = v.dim(ax) * inner;
    for (Index o = 0; o < outer; ++o)
      out.data.segment(o * total * inner + off, block) = v.value().data.segment(o * block, block);
    off += block;
  }
  return xs.front().tape->record(
      std::move(out), xs,
      [xs, offsets, ax, outer = outer, total = total, inner = inner](Tape<S>& t, std::size_t self) {
        const auto& gy = t.output_grad(self);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          if (!t.requires_grad(xs[i])) continue;
          const Index block = t.value(xs[i]).dim(ax) * inner;
          auto& g = t.grad_accumulator(xs[i].id);
          for (Index o = 0; o < outer; ++o)
            g.segment(o * block, block) += gy.segment(o * total * inner + offsets[i], block);
        }
      });
}

// Maximum along one axis, which is removed. Gradient goes to the first maximal index.
template <typename S>
Var<S> max_over_axis(Var<S> a, int axis) {
  const Shape& s = a.shape();
  const int ax = detail::normalize_axis(axis, int(s.size()), "max_over_axis");
  const auto [outer, n, inner] = detail::split_axis(s, ax);
  if (n == 0) throw DimensionError("max_over_axis: empty axis");
  Shape os = s;
  os.erase(os.begin() + ax);
  Tensor<S> out(os);
  auto arg = std::make_shared<std::vector<Index>>(std::size_t(outer * inner));
  const auto& x = a.value().data;
  for (Index o = 0; o < outer; ++o) {
    for (Index i = 0; i < inner; ++i) {
      Index best = 0;
      S bv = x[o * n * inner + i];
      for (Index j = 1; j < n; ++j) {
        const S v = x[(o * n + j) * inner + i];
        if (v > bv) {
          bv = v;
          best = j;
        }
      }
      out.data[o * inner + i] = bv;
      (*arg)[std::size_t(o * inner + i)] = (o * n + best) * inner + i;
    }
  }
  return a.tape->record(std::move(out), {a}, [a, arg](Tape<S>& t, std::size_t self) {
    const auto& gy = t.output_grad(self);
    auto& g = t.grad_accumulator(a.id);
    for (std::size_t k = 0; k < arg->size(); ++k) g[(*arg)[k]] += gy[Index(k)];
  });
}

// Row-wise maximum per segment: x is (P, C), segment[p] in [0, n_segments).
// Empty segments produce zeros and receive no gradient.
template <typename S>
Var<S> segment_max(Var<S> x, std::shared_ptr<const std::vector<Index>> segment, Index n_segments) {
  const Index p = x.dim(0);
  if (Index(segment->size()) != p) throw DimensionError("segment_max: one segment id per row required");
  const Index c = x.value().matrix().cols();
  const auto xm = x.value().matrix(p, c);
  Tensor<S> out(Shape{n_segments, c});
  auto y = out.matrix();
  y.setConstant(-std::numeric_limits<S>::infinity());
  auto arg = std::make_shared<std::vector<Index>>(std::size_t(n_segments * c), Index(-1));
  for (Index r = 0; r < p; ++r) {
    const Index sgm = (*segment)[std::size_t(r)];
    if (sgm < 0 || sgm >= n_segments) throw DimensionError("segment_max: segment id out of range");
    for (Index j = 0; j < c; ++j) {
      if (xm(r, j) > y(sgm, j)) {
        y(sgm, j) = xm(r, j);
        (*arg)[std::size_t(sgm * c + j)] = r;
      }
    }
  }
  for (Index k = 0; k < n_segments * c; ++k)
    if ((*arg)[std::size_t(k)] < 0) out.data[k] = S(0);
  return x.tape->record(std::move(out), {x}, [x, arg, c](Tape<S>& t, std::size_t self) {
    const auto& gy = t.output_grad(self);
    auto& g = t.grad_accumulator(x.id);
    for (std::size_t k = 0; k < arg->size(); ++k) {
      const Index r = (*arg)[k];
      if (r >= 0) g[r * c + Index(k) % c] += gy[Index(k)];
    }
  });
}

// Rows of x (leading axis) selected by index, repeats allowed.
template <typename S>
Var<S> gather_rows(Var<S> x, std::shared_ptr<const std::vector<Index>> rows) {
  const Index r = x.dim(0);
  const Index c = x.value().matrix().cols();
  Shape os = x.shape();
  os[0] = Index(rows->size());
  Tensor<S> out(os);
  auto y = out.matrix(os[0], c);
  const auto xm = x.value().matrix(r, c);
  for (std::size_t i = 0; i < rows->size(); ++i) {
    const Index src = (*rows)[i];
    if (src < 0 || src >= r) throw DimensionError("gather_rows: index out of range");
    y.row(Index(i)) = xm.row(src);
  }
  return x.tape->record(std::move(out), {x}, [x, rows, r, c](Tape<S>& t, std::size_t self) {
    Eigen::Map<const RowMatrix<S>> gy(t.output_grad(self).data(), Index(rows->size()), c);
    Eigen::Map<RowMatrix<S>> g(t.grad_accumulator(x.id).data(), r, c);
    for (std::size_t i = 0; i < rows->size(); ++i) g.row((*rows)[i]) += gy.row(Index(i));
  });
}

template <typename S>
Var<S> gather_rows(Var<S> x, std::vector<Index> rows) {
  return gather_rows(x, std::make_shared<const std::vector<Index>>(std::move(rows)));
}

}  // namespace prcnn::nn
