#pragma once

#include "prcnn/pointcloud.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace prcnn {

struct VoxelIndex {
  int ix = 0, iy = 0, iz = 0;
  Eigen::Index id = 0;  // iz + iy*Nz + ix*Nz*Ny

  bool operator==(const VoxelIndex&) const = default;
};

Eigen::Index linear_index(int ix, int iy, int iz, const Eigen::Vector3i& counts);
VoxelIndex decode_linear_index(Eigen::Index id, const Eigen::Vector3i& counts);

// Throws ContractError for points outside the workspace.
VoxelIndex assign_voxel_index(const Point3& p, const Workspace& ws);

Point3 voxel_corner(const VoxelIndex& idx, const Workspace& ws);
Point3 voxel_center(Eigen::Index id, const Workspace& ws);

Eigen::Vector3d relative_coordinates(const Point3& p, const VoxelIndex& idx, const Workspace& ws);

inline constexpr int kDefaultPointsPerVoxel = 64;

// Fixed-budget (3, T, N_v) tensor of voxel-relative coordinates.
// Element (c, t, v) lives at data[(c * T + t) * N_v + v]; slots t >= count[v] are zero.
struct VoxelizedFrame {
  int points_per_voxel = kDefaultPointsPerVoxel;
  Eigen::Vector3i counts = Eigen::Vector3i::Zero();
  Eigen::VectorXf data;
  std::vector<int> count_per_voxel;
  std::vector<Eigen::Index> occupied_ids;

  Eigen::Index voxel_count() const { return Eigen::Index(count_per_voxel.size()); }
  float& at(int c, int t, Eigen::Index v) {
    return data[(Eigen::Index(c) * points_per_voxel + t) * voxel_count() + v];
  }
  float at(int c, int t, Eigen::Index v) const {
    return data[(Eigen::Index(c) * points_per_voxel + t) * voxel_count() + v];
  }
  Eigen::Vector3f slot(int t, Eigen::Index v) const { return {at(0, t, v), at(1, t, v), at(2, t, v)}; }
};

// Groups points by voxel and keeps the first T per voxel in cloud order. With a
// seed the cloud is shuffled first; without one its current order is used.
VoxelizedFrame build_voxel_tensor(const PointCloud& cloud, const Workspace& ws,
                                  int points_per_voxel = kDefaultPointsPerVoxel,
                                  std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace prcnn
