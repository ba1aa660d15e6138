#pragma once

#include "prcnn/nn.hpp"
#include "prcnn/voxelizer.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace prcnn {

struct ModelConfig {
  int points_per_voxel = kDefaultPointsPerVoxel;
  Eigen::Vector3i grid = Eigen::Vector3i(16, 8, 12);
  int vfe1_out = 32;
  int vfe2_out = 64;
  int fc_out = 64;
  int unet_depth = 2;
  int unet_growth = 16;
  int unet_layers = 2;     // conv layers per dense block
  int unet_channels = 64;  // channels after each downsampling
  std::vector<int> point_mlp = {64, 128, 1024};
  std::vector<int> global_mlp = {512, 256};
  int joint_count = 11;
  int cylinder_params = 4;
  int min_instance_points = 32;
  int max_instance_points = 1024;

  // Throws ConfigError when widths or grid cannot be realised.
  void validate() const;

  // 2x2x2 grid, T = 4, J = 2, a few channels per layer; used for exhaustive gradient checks.
  static ModelConfig miniature();
};

inline void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (points_per_voxel <= 0) fail("points_per_voxel must be positive");
  if ((grid.array() <= 0).any()) fail("grid counts must be positive");
  if (vfe1_out <= 0 || vfe1_out % 2) fail("vfe1_out must be positive and even");
  if (vfe2_out <= 0 || vfe2_out % 2) fail("vfe2_out must be positive and even");
  if (fc_out <= 0 || unet_growth <= 0 || unet_layers <= 0 || unet_channels <= 0)
    fail("channel widths must be positive");
  if (unet_depth < 0) fail("unet_depth must be non-negative");
  const int div = 1 << unet_depth;
  if (grid.x() % div || grid.y() % div || grid.z() % div)
    fail("grid (" + std::to_string(grid.x()) + ", " + std::to_string(grid.y()) + ", " +
         std::to_string(grid.z()) + ") not divisible by 2^depth = " + std::to_string(div));
  if (point_mlp.empty()) fail("point_mlp must not be empty");
  if (joint_count < 1) fail("joint_count must be >= 1");
  if (cylinder_params != 4) fail("cylinder_params must be 4");
  if (min_instance_points < 1 || max_instance_points < min_instance_points)
    fail("instance point bounds invalid");
}

inline ModelConfig ModelConfig::miniature() {
  ModelConfig c;
  c.points_per_voxel = 4;
  c.grid = Eigen::Vector3i(2, 2, 2);
  c.vfe1_out = 4;
  c.vfe2_out = 6;
  c.fc_out = 4;
  c.unet_depth = 1;
  c.unet_growth = 2;
  c.unet_channels = 3;
  c.point_mlp = {4, 6};
  c.global_mlp = {5};
  c.joint_count = 2;
  c.min_instance_points = 1;
  c.max_instance_points = 64;
  return c;
}

template <typename S>
using Bound = std::map<std::string, nn::Var<S>>;

namespace detail {

template <typename S>
nn::Var<S> param(const Bound<S>& bound, const std::string& name) {
  auto it = bound.find(name);
  if (it == bound.end()) throw ConfigError("missing model weight '" + name + "'");
  return it->second;
}

inline std::string unet_conv(int level, int layer) {
  return "unet.enc" + std::to_string(level) + ".conv" + std::to_string(layer);
}

inline int unet_level_input(const ModelConfig& c, int level) { return level == 0 ? c.fc_out : c.unet_channels; }
inline int unet_level_output(const ModelConfig& c, int level) {
  return unet_level_input(c, level) + c.unet_layers * c.unet_growth;
}

// Lexicographic order of rows of a row-major (n, width) block.
template <typename S>
bool row_less(const S* a, const S* b, int width) {
  for (int i = 0; i < width; ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return false;
}

// Element gather: out[i] = x[index[i]], or 0 where index[i] < 0.
template <typename S>
nn::Var<S> take(nn::Var<S> x, std::shared_ptr<const std::vector<nn::Index>> index, nn::Shape shape) {
  if (nn::numel(shape) != nn::Index(index->size())) throw DimensionError("take: index/shape mismatch");
  nn::Tensor<S> out(std::move(shape));
  const auto& xd = x.value().data;
  for (std::size_t i = 0; i < index->size(); ++i)
    if ((*index)[i] >= 0) out.data[nn::Index(i)] = xd[(*index)[i]];
  return x.tape->record(std::move(out), {x}, [x, index](nn::Tape<S>& t, std::size_t self) {
    const auto& gy = t.output_grad(self);
    auto& g = t.grad_accumulator(x.id);
    for (std::size_t i = 0; i < index->size(); ++i)
      if ((*index)[i] >= 0) g[(*index)[i]] += gy[nn::Index(i)];
  });
}

}  // namespace detail

// Names and shapes of every weight tensor, in a stable order.
inline std::vector<std::pair<std::string, nn::Shape>> weight_layout(const ModelConfig& c) {
  using nn::Index;
  std::vector<std::pair<std::string, nn::Shape>> out;
  auto dense = [&](const std::string& n, int in, int o) {
    out.push_back({n + ".W", {Index(in), Index(o)}});
    out.push_back({n + ".b", {Index(o)}});
  };
  auto conv = [&](const std::string& n, int in, int o, int k) {
    out.push_back({n + ".w", {Index(o), Index(in), Index(k), Index(k), Index(k)}});
    out.push_back({n + ".b", {Index(o)}});
  };
  dense("vfe1", 3, c.vfe1_out / 2);
  dense("vfe2", c.vfe1_out, c.vfe2_out / 2);
  dense("vfe.fc", c.vfe2_out, c.fc_out);
  for (int level = 0; level <= c.unet_depth; ++level) {
    if (level > 0)
      conv("unet.down" + std::to_string(level), detail::unet_level_output(c, level - 1), c.unet_channels, 2);
    for (int j = 0; j < c.unet_layers; ++j)
      conv(detail::unet_conv(level, j), detail::unet_level_input(c, level) + j * c.unet_growth,
           c.unet_growth, 3);
  }
  int up = detail::unet_level_output(c, c.unet_depth);
  for (int level = c.unet_depth - 1; level >= 0; --level) {
    const int o = level == 0 ? c.fc_out : c.unet_channels;
    conv("unet.fuse" + std::to_string(level), up + detail::unet_level_output(c, level), o, 1);
    up = o;
  }
  if (c.unet_depth == 0) conv("unet.fuse0", detail::unet_level_output(c, 0), c.fc_out, 1);
  conv("head.cls", c.fc_out, 2, 1);
  conv("head.reg", c.fc_out, c.cylinder_params, 1);
  int in = 3;
  for (std::size_t i = 0; i < c.point_mlp.size(); ++i) {
    dense("pointnet.mlp" + std::to_string(i), in, c.point_mlp[i]);
    in = c.point_mlp[i];
  }
  for (std::size_t i = 0; i < c.global_mlp.size(); ++i) {
    dense("pointnet.fc" + std::to_string(i), in, c.global_mlp[i]);
    in = c.global_mlp[i];
  }
  dense("pointnet.out", in, 3 * c.joint_count);
  return out;
}

inline bool is_regressor_weight(const std::string& name) { return name.rfind("pointnet.", 0) == 0; }

// He-style uniform fan-in initialisation, zero biases.
template <typename S>
nn::ParameterMap<S> init_weights(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(seed);
  nn::ParameterMap<S> w;
  for (const auto& [name, shape] : weight_layout(c)) {
    if (shape.size() == 1) {
      w.emplace(name, nn::Tensor<S>(shape));
      continue;
    }
    const nn::Index fan_in = shape.size() == 2 ? shape[0] : nn::numel(shape) / shape[0];
    const S bound = S(std::sqrt(6.0 / double(fan_in)));
    w.emplace(name, nn::Tensor<S>::uniform(shape, -bound, bound, rng));
  }
  return w;
}

// Binds weights as tape leaves; names rejected by `trainable` get no gradient tracking.
template <typename S>
Bound<S> bind_weights(nn::Tape<S>& tape, const nn::ParameterMap<S>& weights,
              const std::function<bool(const std::string&)>& trainable = {}) {
  Bound<S> b;
  for (const auto& [name, t] : weights) b.emplace(name, tape.leaf(t, !trainable || trainable(name)));
  return b;
}

template <typename S>
nn::GradientMap<S> collect_gradients(const nn::Tape<S>& tape, const Bound<S>& bound) {
  nn::GradientMap<S> g;
  for (const auto& [name, v] : bound)
    if (tape.requires_grad(v)) g.emplace(name, tape.grad(v));
  return g;
}

// Points of a frame as rows, grouped by voxel (ascending id) and, inside each
// voxel, sorted lexicographically so that the row matrix depends only on the
// per-voxel point multisets.
template <typename S>
struct PointRows {
  nn::Tensor<S> coords;  // (P, 3)
  std::shared_ptr<const std::vector<nn::Index>> voxel_of_row;
};

template <typename S>
PointRows<S> gather_point_rows(const VoxelizedFrame& frame) {
  std::vector<nn::Index> seg;
  std::vector<std::array<S, 3>> rows;
  for (nn::Index v : frame.occupied_ids) {
    const int n = frame.count_per_voxel[std::size_t(v)];
    const std::size_t start = rows.size();
    for (int t = 0; t < n; ++t) rows.push_back({S(frame.at(0, t, v)), S(frame.at(1, t, v)), S(frame.at(2, t, v))});
    std::sort(rows.begin() + std::ptrdiff_t(start), rows.end());
    seg.insert(seg.end(), std::size_t(n), v);
  }
  PointRows<S> out;
  out.coords = nn::Tensor<S>(nn::Shape{nn::Index(rows.size()), 3});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < 3; ++c) out.coords.data[nn::Index(i) * 3 + c] = rows[i][std::size_t(c)];
  out.voxel_of_row = std::make_shared<const std::vector<nn::Index>>(std::move(seg));
  return out;
}

// VFE on point rows: per-point affine+ReLU to half width, voxel-wise max, and the
// voxel aggregate concatenated back onto every point.
template <typename S>
nn::Var<S> vfe_rows(nn::Var<S> x, const std::shared_ptr<const std::vector<nn::Index>>& voxel_of_row,
                    nn::Index voxel_count, nn::Var<S> w, nn::Var<S> b) {
  nn::Var<S> h = nn::relu(nn::affine(x, w, b));
  nn::Var<S> agg = nn::segment_max(h, voxel_of_row, voxel_count);
  nn::Var<S> back = nn::gather_rows(agg, voxel_of_row);
  return nn::concat<S>({h, back}, 1);
}

// Dense VFE layer on a (c_in, T, N_v) tensor where slots t >= count[v] are padding.
// Padding never enters the max and is zero in the (c_out, T, N_v) output.
template <typename S>
nn::Var<S> vfe_layer(nn::Var<S> x, const std::vector<int>& count_per_voxel, nn::Var<S> w, nn::Var<S> b) {
  using nn::Index;
  if (x.value().rank() != 3) throw DimensionError("vfe_layer: input must be (c_in, T, N_v)");
  const Index c_in = x.dim(0), t_max = x.dim(1), nv = x.dim(2);
  if (Index(count_per_voxel.size()) != nv) throw DimensionError("vfe_layer: one count per voxel required");
  if (w.dim(0) != c_in) throw DimensionError("vfe_layer: weight rows must equal c_in");
  const Index c_out = 2 * w.dim(1);
  const auto& xd = x.value().data;
  auto elem = [&](Index c, Index t, Index v) { return (c * t_max + t) * nv + v; };

  std::vector<std::pair<Index, Index>> slots;  // (t, v) in row order
  std::vector<Index> seg;
  for (Index v = 0; v < nv; ++v) {
    const Index n = std::min<Index>(count_per_voxel[std::size_t(v)], t_max);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    std::vector<S> feat(std::size_t(n * c_in));
    for (Index t = 0; t < n; ++t)
      for (Index c = 0; c < c_in; ++c) feat[std::size_t(t * c_in + c)] = xd[elem(c, t, v)];
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index bb) {
      return detail::row_less(&feat[std::size_t(a * c_in)], &feat[std::size_t(bb * c_in)], int(c_in));
    });
    for (Index t : order) {
      slots.emplace_back(t, v);
      seg.push_back(v);
    }
  }
  const Index p = Index(slots.size());
  auto in_index = std::make_shared<std::vector<Index>>(std::size_t(p * c_in));
  for (Index r = 0; r < p; ++r)
    for (Index c = 0; c < c_in; ++c)
      (*in_index)[std::size_t(r * c_in + c)] = elem(c, slots[std::size_t(r)].first, slots[std::size_t(r)].second);
  auto out_index = std::make_shared<std::vector<Index>>(std::size_t(c_out * t_max * nv), Index(-1));
  for (Index r = 0; r < p; ++r)
    for (Index c = 0; c < c_out; ++c) {
      const auto [t, v] = slots[std::size_t(r)];
      (*out_index)[std::size_t((c * t_max + t) * nv + v)] = r * c_out + c;
    }
  auto segments = std::make_shared<const std::vector<Index>>(std::move(seg));
  nn::Var<S> rows = detail::take(x, std::move(in_index), nn::Shape{p, c_in});
  nn::Var<S> y = vfe_rows(rows, segments, nv, w, b);
  return detail::take(y, std::move(out_index), nn::Shape{c_out, t_max, nv});
}

// VFE-1 -> VFE-2 -> FC -> voxel max, reshaped to (C, N_x, N_y, N_z). Empty voxels are zero.
template <typename S>
nn::Var<S> encode_voxels(nn::Tape<S>& tape, const VoxelizedFrame& frame, const Bound<S>& w,
                         const ModelConfig& cfg) {
  if (frame.counts != cfg.grid)
    throw ConfigError("frame grid does not match the model grid");
  if (frame.points_per_voxel != cfg.points_per_voxel)
    throw ConfigError("frame points-per-voxel does not match the model");
  const nn::Index nv = frame.voxel_count();
  PointRows<S> rows = gather_point_rows<S>(frame);
  nn::Var<S> x = tape.leaf(std::move(rows.coords));
  x = vfe_rows(x, rows.voxel_of_row, nv, detail::param(w, "vfe1.W"), detail::param(w, "vfe1.b"));
  x = vfe_rows(x, rows.voxel_of_row, nv, detail::param(w, "vfe2.W"), detail::param(w, "vfe2.b"));
  x = nn::relu(nn::affine(x, detail::param(w, "vfe.fc.W"), detail::param(w, "vfe.fc.b")));
  nn::Var<S> vox = nn::segment_max(x, rows.voxel_of_row, nv);
  return nn::reshape(nn::transpose(vox),
                     nn::Shape{cfg.fc_out, cfg.grid.x(), cfg.grid.y(), cfg.grid.z()});
}

namespace detail {

template <typename S>
nn::Var<S> conv_relu(nn::Var<S> x, const Bound<S>& w, const std::string& name, nn::Index stride,
                     nn::Index padding) {
  return nn::relu(nn::conv3d(x, param(w, name + ".w"), param(w, name + ".b"), stride, padding));
}

template <typename S>
nn::Var<S> dense_block(nn::Var<S> x, const Bound<S>& w, const ModelConfig& cfg, int level) {
  for (int j = 0; j < cfg.unet_layers; ++j) {
    nn::Var<S> y = conv_relu(x, w, unet_conv(level, j), 1, 1);
    x = nn::concat<S>({x, y}, 0);
  }
  return x;
}

}  // namespace detail

// DenseUNet: dense blocks of 3x3x3 convs, 2x2x2 stride-2 downsampling, nearest
// upsampling with skip concatenation and 1x1x1 fusion back to C channels.
template <typename S>
nn::Var<S> aggregate(nn::Var<S> volume, const Bound<S>& w, const ModelConfig& cfg) {
  const auto& s = volume.shape();
  const int div = 1 << cfg.unet_depth;
  if (s.size() != 4 || s[1] % div || s[2] % div || s[3] % div)
    throw ConfigError("aggregate: spatial dims " + nn::to_string(s) + " not divisible by " +
                      std::to_string(div));
  std::vector<nn::Var<S>> skips;
  nn::Var<S> x = volume;
  for (int level = 0; level <= cfg.unet_depth; ++level) {
    if (level > 0) x = detail::conv_relu(x, w, "unet.down" + std::to_string(level), 2, 0);
    x = detail::dense_block(x, w, cfg, level);
    skips.push_back(x);
  }
  if (cfg.unet_depth == 0) return detail::conv_relu(x, w, "unet.fuse0", 1, 0);
  for (int level = cfg.unet_depth - 1; level >= 0; --level) {
    nn::Var<S> up = nn::upsample_nearest3d(x, 2);
    x = detail::conv_relu(nn::concat<S>({up, skips[std::size_t(level)]}, 0), w,
                          "unet.fuse" + std::to_string(level), 1, 0);
  }
  return x;
}

template <typename S>
struct HeadOutputs {
  nn::Var<S> scores;     // (2, N_x, N_y, N_z) logits
  nn::Var<S> cylinders;  // (4, N_x, N_y, N_z) normalized parameters
};

template <typename S>
HeadOutputs<S> detection_heads(nn::Var<S> features, const Bound<S>& w) {
  using detail::param;
  return {nn::conv3d(features, param(w, "head.cls.w"), param(w, "head.cls.b")),
          nn::conv3d(features, param(w, "head.reg.w"), param(w, "head.reg.b"))};
}

template <typename S>
struct DetectionOutputs {
  nn::Var<S> volume;
  nn::Var<S> features;
  HeadOutputs<S> heads;
};

template <typename S>
DetectionOutputs<S> detect(nn::Tape<S>& tape, const VoxelizedFrame& frame, const Bound<S>& w,
                           const ModelConfig& cfg) {
  DetectionOutputs<S> out;
  out.volume = encode_voxels(tape, frame, w, cfg);
  out.features = aggregate(out.volume, w, cfg);
  out.heads = detection_heads(out.features, w);
  return out;
}

// Joint regression from M sphere-normalized points (columns). Output (J, 3).
template <typename S>
nn::Var<S> pointnet_regress(nn::Tape<S>& tape, const Eigen::Matrix<S, 3, Eigen::Dynamic>& points,
                            const Bound<S>& w, const ModelConfig& cfg) {
  const auto m = points.cols();
  if (m < cfg.min_instance_points || m > cfg.max_instance_points)
    throw ContractError("pointnet_regress: instance has " + std::to_string(m) + " points, expected [" +
                        std::to_string(cfg.min_instance_points) + ", " +
                        std::to_string(cfg.max_instance_points) + "]");
  std::vector<std::array<S, 3>> rows(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) rows[std::size_t(i)] = {points(0, i), points(1, i), points(2, i)};
  std::sort(rows.begin(), rows.end());
  nn::Tensor<S> input(nn::Shape{m, 3});
  for (Eigen::Index i = 0; i < m; ++i)
    for (int c = 0; c < 3; ++c) input.data[i * 3 + c] = rows[std::size_t(i)][std::size_t(c)];

  using detail::param;
  nn::Var<S> x = tape.leaf(std::move(input));
  for (std::size_t i = 0; i < cfg.point_mlp.size(); ++i) {
    const std::string n = "pointnet.mlp" + std::to_string(i);
    x = nn::relu(nn::affine(x, param(w, n + ".W"), param(w, n + ".b")));
  }
  x = nn::reshape(nn::max_over_axis(x, 0), nn::Shape{1, cfg.point_mlp.back()});
  for (std::size_t i = 0; i < cfg.global_mlp.size(); ++i) {
    const std::string n = "pointnet.fc" + std::to_string(i);
    x = nn::relu(nn::affine(x, param(w, n + ".W"), param(w, n + ".b")));
  }
  x = nn::affine(x, param(w, "pointnet.out.W"), param(w, "pointnet.out.b"));
  return nn::reshape(x, nn::Shape{cfg.joint_count, 3});
}

}  // namespace prcnn
