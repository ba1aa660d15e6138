#pragma once

#include "prcnn/nn/tape.hpp"

namespace prcnn::nn {

struct Conv3dGeometry {
  Index channels = 0, depth = 0, height = 0, width = 0;
  Index kernel = 1, stride = 1, padding = 0;

  static Index output_extent(Index in, Index kernel, Index stride, Index padding) {
    const Index span = in + 2 * padding - kernel;
    if (span < 0 || stride <= 0 || span % stride != 0)
      throw ConfigError("conv3d: non-integral output size for input " + std::to_string(in) +
                        ", kernel " + std::to_string(kernel) + ", stride " +
                        std::to_string(stride) + ", padding " + std::to_string(padding));
    return span / stride + 1;
  }
  Index out_depth() const { return output_extent(depth, kernel, stride, padding); }
  Index out_height() const { return output_extent(height, kernel, stride, padding); }
  Index out_width() const { return output_extent(width, kernel, stride, padding); }
  Index out_voxels() const { return out_depth() * out_height() * out_width(); }
  Index patch() const { return channels * kernel * kernel * kernel; }
  bool pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

namespace detail {

// cols(r, q): r = ((c*k + kd)*k + kh)*k + kw, q = output voxel.
template <typename S>
void im2col(const S* x, const Conv3dGeometry& g, RowMatrix<S>& cols) {
  const Index od = g.out_depth(), oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  cols.setZero(g.patch(), od * oh * ow);
  for (Index c = 0; c < g.channels; ++c)
    for (Index kd = 0; kd < k; ++kd)
      for (Index kh = 0; kh < k; ++kh)
        for (Index kw = 0; kw < k; ++kw) {
          S* row = cols.row(((c * k + kd) * k + kh) * k + kw).data();
          for (Index d = 0; d < od; ++d) {
            const Index id = d * g.stride - g.padding + kd;
            if (id < 0 || id >= g.depth) continue;
            for (Index h = 0; h < oh; ++h) {
              const Index ih = h * g.stride - g.padding + kh;
              if (ih < 0 || ih >= g.height) continue;
              const S* src = x + ((c * g.depth + id) * g.height + ih) * g.width;
              S* dst = row + (d * oh + h) * ow;
              for (Index w = 0; w < ow; ++w) {
                const Index iw = w * g.stride - g.padding + kw;
                if (iw >= 0 && iw < g.width) dst[w] = src[iw];
              }
            }
          }
        }
}

template <typename S>
void col2im_add(const RowMatrix<S>& cols, const Conv3dGeometry& g, S* dx) {
  const Index od = g.out_depth(), oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  for (Index c = 0; c < g.channels; ++c)
    for (Index kd = 0; kd < k; ++kd)
      for (Index kh = 0; kh < k; ++kh)
        for (Index kw = 0; kw < k; ++kw) {
          const S* row = cols.row(((c * k + kd) * k + kh) * k + kw).data();
          for (Index d = 0; d < od; ++d) {
            const Index id = d * g.stride - g.padding + kd;
            if (id < 0 || id >= g.depth) continue;
            for (Index h = 0; h < oh; ++h) {
              const Index ih = h * g.stride - g.padding + kh;
              if (ih < 0 || ih >= g.height) continue;
              S* dst = dx + ((c * g.depth + id) * g.height + ih) * g.width;
              const S* src = row + (d * oh + h) * ow;
              for (Index w = 0; w < ow; ++w) {
                const Index iw = w * g.stride - g.padding + kw;
                if (iw >= 0 && iw < g.width) dst[iw] += src[w];
              }
            }
          }
        }
}

}  // namespace detail

// Cross-correlation of x (C, D, H, W) with weight (C_out, C, k, k, k) plus bias (C_out).
template <typename S>
Var<S> conv3d(Var<S> x, Var<S> weight, Var<S> bias, Index stride = 1, Index padding = 0) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 4 || ws.size() != 5 || ws[1] != xs[0] || ws[2] != ws[3] || ws[3] != ws[4] ||
      bias.value().rank() != 1 || bias.dim(0) != ws[0])
    throw DimensionError("conv3d: incompatible shapes x" + to_string(xs) + " w" + to_string(ws) +
                         " b" + to_string(bias.shape()));
  const Conv3dGeometry g{xs[0], xs[1], xs[2], xs[3], ws[2], stride, padding};
  const Index c_out = ws[0];
  const Index q = g.out_voxels();
  Tensor<S> out(Shape{c_out, g.out_depth(), g.out_height(), g.out_width()});
  auto y = out.matrix(c_out, q);
  const auto wm = weight.value().matrix(c_out, g.patch());
  if (g.pointwise()) {
    y.noalias() = wm * x.value().matrix(g.channels, q);
  } else {
    RowMatrix<S> cols;
    detail::im2col(x.value().data.data(), g, cols);
    y.noalias() = wm * cols;
  }
  y.colwise() += bias.value().data;
  return x.tape->record(
      std::move(out), {x, weight, bias}, [x, weight, bias, g, c_out, q](Tape<S>& t, std::size_t self) {
        Eigen::Map<const RowMatrix<S>> gy(t.output_grad(self).data(), c_out, q);
        const auto wm = t.value(weight).matrix(c_out, g.patch());
        if (g.pointwise()) {
          const auto xm = t.value(x).matrix(g.channels, q);
          if (t.requires_grad(weight)) {
            Eigen::Map<RowMatrix<S>> gw(t.grad_accumulator(weight.id).data(), c_out, g.patch());
            gw.noalias() += gy * xm.transpose();
          }
          if (t.requires_grad(x)) {
            Eigen::Map<RowMatrix<S>> gx(t.grad_accumulator(x.id).data(), g.channels, q);
            gx.noalias() += wm.transpose() * gy;
          }
        } else {
          if (t.requires_grad(weight)) {
            RowMatrix<S> cols;
            detail::im2col(t.value(x).data.data(), g, cols);
            Eigen::Map<RowMatrix<S>> gw(t.grad_accumulator(weight.id).data(), c_out, g.patch());
            gw.noalias() += gy * cols.transpose();
          }
          if (t.requires_grad(x)) {
            RowMatrix<S> gcols = wm.transpose() * gy;
            detail::col2im_add(gcols, g, t.grad_accumulator(x.id).data());
          }
        }
        if (t.requires_grad(bias)) t.grad_accumulator(bias.id) += gy.rowwise().sum();
      });
}

// Nearest-neighbour upsampling of (C, D, H, W) by an integer factor on each spatial axis.
template <typename S>
Var<S> upsample_nearest3d(Var<S> x, Index factor) {
  const Shape& xs = x.shape();
  if (xs.size() != 4) throw DimensionError("upsample_nearest3d: expects (C, D, H, W)");
  if (factor < 1) throw ConfigError("upsample_nearest3d: factor must be >= 1");
  const Index c = xs[0], d = xs[1], h = xs[2], w = xs[3];
  const Index od = d * factor, oh = h * factor, ow = w * factor;
  Tensor<S> out(Shape{c, od, oh, ow});
  auto src_index = [=](Index ch, Index i, Index j, Index k) {
    return ((ch * d + i / factor) * h + j / factor) * w + k / factor;
  };
  Index at = 0;
  const auto& xd = x.value().data;
  for (Index ch = 0; ch < c; ++ch)
    for (Index i = 0; i < od; ++i)
      for (Index j = 0; j < oh; ++j)
        for (Index k = 0; k < ow; ++k) out.data[at++] = xd[src_index(ch, i, j, k)];
  return x.tape->record(std::move(out), {x}, [x, c, od, oh, ow, src_index](Tape<S>& t, std::size_t self) {
    const auto& gy = t.output_grad(self);
    auto& g = t.grad_accumulator(x.id);
    Index at = 0;
    for (Index ch = 0; ch < c; ++ch)
      for (Index i = 0; i < od; ++i)
        for (Index j = 0; j < oh; ++j)
          for (Index k = 0; k < ow; ++k) g[src_index(ch, i, j, k)] += gy[at++];
  });
}

}  // namespace prcnn::nn
