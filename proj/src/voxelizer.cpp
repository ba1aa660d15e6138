#include "prcnn/voxelizer.hpp"

#include "prcnn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace prcnn {

Eigen::Index linear_index(int ix, int iy, int iz, const Eigen::Vector3i& counts) {
  return Eigen::Index(iz) + Eigen::Index(iy) * counts.z() +
         Eigen::Index(ix) * counts.z() * counts.y();
}

VoxelIndex decode_linear_index(Eigen::Index id, const Eigen::Vector3i& counts) {
  const Eigen::Index plane = Eigen::Index(counts.z()) * counts.y();
  VoxelIndex idx;
  idx.id = id;
  idx.ix = int(id / plane);
  idx.iy = int((id % plane) / counts.z());
  idx.iz = int(id % counts.z());
  return idx;
}

VoxelIndex assign_voxel_index(const Point3& p, const Workspace& ws) {
  if (!ws.contains(p))
    throw ContractError("point outside the workspace; crop before voxelizing");
  int id[3];
  for (int a = 0; a < 3; ++a) {
    const double o = ws.origin[a];
    const double v = ws.voxel_size[a];
    int i = int(std::floor((p[a] - o) / v));
    // Division rounding can disagree with the corner subtraction by one cell.
    if (p[a] - (o + i * v) < 0.0) --i;
    if (p[a] - (o + (i + 1) * v) >= 0.0) ++i;
    id[a] = std::clamp(i, 0, ws.counts[a] - 1);
  }
  return {id[0], id[1], id[2], linear_index(id[0], id[1], id[2], ws.counts)};
}

Point3 voxel_corner(const VoxelIndex& idx, const Workspace& ws) {
  return ws.origin + Eigen::Vector3d(idx.ix, idx.iy, idx.iz).cwiseProduct(ws.voxel_size);
}

Point3 voxel_center(Eigen::Index id, const Workspace& ws) {
  return voxel_corner(decode_linear_index(id, ws.counts), ws) + 0.5 * ws.voxel_size;
}

Eigen::Vector3d relative_coordinates(const Point3& p, const VoxelIndex& idx, const Workspace& ws) {
  return p - voxel_corner(idx, ws);
}

VoxelizedFrame build_voxel_tensor(const PointCloud& input, const Workspace& ws,
                                  int points_per_voxel, std::optional<std::uint64_t> seed) {
  if (points_per_voxel <= 0)
    throw ConfigError("points per voxel must be positive, got " + std::to_string(points_per_voxel));
  ws.validate();
  const PointCloud cloud = seed ? shuffle(input, *seed) : input;

  VoxelizedFrame frame;
  frame.points_per_voxel = points_per_voxel;
  frame.counts = ws.counts;
  const Eigen::Index nv = ws.voxel_count();
  frame.count_per_voxel.assign(std::size_t(nv), 0);
  frame.data = Eigen::VectorXf::Zero(3 * points_per_voxel * nv);

  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Point3 p = cloud.point(i);
    const VoxelIndex idx = assign_voxel_index(p, ws);
    int& n = frame.count_per_voxel[std::size_t(idx.id)];
    if (n >= points_per_voxel) continue;
    const Eigen::Vector3d rel = relative_coordinates(p, idx, ws);
    for (int c = 0; c < 3; ++c) {
      float r = float(rel[c]);
      while (double(r) >= ws.voxel_size[c]) r = std::nextafter(r, 0.0f);
      frame.at(c, n, idx.id) = std::max(r, 0.0f);
    }
    ++n;
  }
  for (Eigen::Index v = 0; v < nv; ++v)
    if (frame.count_per_voxel[std::size_t(v)] > 0) frame.occupied_ids.push_back(v);
  return frame;
}

}  // namespace prcnn
