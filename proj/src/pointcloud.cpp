#include "prcnn/pointcloud.hpp"

#include "prcnn/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace prcnn {

PointCloud PointCloud::from_points(const std::vector<Point3>& pts, std::int32_t sensor_id) {
  PointCloud cloud;
  cloud.points.resize(3, Eigen::Index(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) cloud.points.col(Eigen::Index(i)) = pts[i].cast<float>();
  if (sensor_id >= 0) cloud.sensor_ids.assign(pts.size(), sensor_id);
  return cloud;
}

bool Workspace::contains(const Point3& p) const {
  const Eigen::Vector3d hi = origin + extent();
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= origin[a] && p[a] < hi[a])) return false;
  }
  return true;
}

void Workspace::validate() const {
  if ((voxel_size.array() <= 0.0).any() || !voxel_size.allFinite())
    throw ConfigError("workspace voxel size must be positive");
  if ((counts.array() <= 0).any()) throw ConfigError("workspace voxel counts must be positive");
  if (!origin.allFinite()) throw ConfigError("workspace origin must be finite");
}

Workspace Workspace::make(const Point3& origin, const Eigen::Vector3d& extent,
                          const Eigen::Vector3d& voxel_size) {
  Workspace ws;
  ws.origin = origin;
  ws.voxel_size = voxel_size;
  for (int a = 0; a < 3; ++a) {
    if (voxel_size[a] <= 0.0) throw ConfigError("workspace voxel size must be positive");
    const double n = extent[a] / voxel_size[a];
    const double r = std::round(n);
    if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, r))
      throw ConfigError("workspace extent must be a positive multiple of the voxel size");
    ws.counts[a] = int(r);
  }
  return ws;
}

PointCloud fuse(std::span<const PointCloud> clouds) {
  Eigen::Index total = 0;
  bool any_ids = false;
  for (const auto& c : clouds) {
    total += c.size();
    any_ids = any_ids || c.has_sensor_ids();
  }
  PointCloud out;
  out.points.resize(3, total);
  if (any_ids) out.sensor_ids.reserve(std::size_t(total));
  Eigen::Index at = 0;
  for (const auto& c : clouds) {
    out.points.middleCols(at, c.size()) = c.points;
    at += c.size();
    if (any_ids) {
      if (c.has_sensor_ids())
        out.sensor_ids.insert(out.sensor_ids.end(), c.sensor_ids.begin(), c.sensor_ids.end());
      else
        out.sensor_ids.insert(out.sensor_ids.end(), std::size_t(c.size()), -1);
    }
  }
  return out;
}

namespace {

PointCloud select(const PointCloud& cloud, const std::vector<Eigen::Index>& keep) {
  PointCloud out;
  out.points.resize(3, Eigen::Index(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) out.points.col(Eigen::Index(i)) = cloud.points.col(keep[i]);
  if (cloud.has_sensor_ids()) {
    out.sensor_ids.reserve(keep.size());
    for (auto k : keep) out.sensor_ids.push_back(cloud.sensor_ids[std::size_t(k)]);
  }
  return out;
}

}  // namespace

PointCloud crop_workspace(const PointCloud& cloud, const Workspace& ws) {
  std::vector<Eigen::Index> keep;
  keep.reserve(std::size_t(cloud.size()));
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    if (ws.contains(cloud.point(i))) keep.push_back(i);
  }
  return select(cloud, keep);
}

PointCloud voxel_grid_filter(const PointCloud& cloud, double cell, const Point3& origin) {
  if (!(cell > 0.0)) throw ConfigError("voxel grid filter cell must be positive");
  struct Acc {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::int64_t n = 0;
    std::int32_t sensor = -1;
  };
  std::map<std::array<std::int64_t, 3>, Acc> cells;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Point3 p = cloud.point(i);
    std::array<std::int64_t, 3> key;
    for (int a = 0; a < 3; ++a) key[std::size_t(a)] = std::int64_t(std::floor((p[a] - origin[a]) / cell));
    auto& acc = cells[key];
    if (acc.n == 0 && cloud.has_sensor_ids()) acc.sensor = cloud.sensor_ids[std::size_t(i)];
    acc.sum += p;
    ++acc.n;
  }
  PointCloud out;
  out.points.resize(3, Eigen::Index(cells.size()));
  if (cloud.has_sensor_ids()) out.sensor_ids.reserve(cells.size());
  Eigen::Index at = 0;
  for (const auto& [key, acc] : cells) {
    out.points.col(at++) = (acc.sum / double(acc.n)).cast<float>();
    if (cloud.has_sensor_ids()) out.sensor_ids.push_back(acc.sensor);
  }
  return out;
}

PointCloud shuffle(const PointCloud& cloud, std::uint64_t seed) {
  std::vector<Eigen::Index> order(std::size_t(cloud.size()));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return select(cloud, order);
}

}  // namespace prcnn
