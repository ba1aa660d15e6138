#pragma once

#include "prcnn/geometry.hpp"
#include "prcnn/voxelizer.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace prcnn {

inline constexpr double kReferenceRadius = 0.3;
inline constexpr double kMinimumRadius = 0.05;
inline constexpr int kFallbackSampleCount = 32;

// Axis through the neck, top at the highest joint, radius to the farthest joint
// from the axis (floored at min_radius), bottom on the ground plane.
// Throws AnnotationError when the neck is missing.
Cylinder skeleton_to_cylinder(const Skeleton& s, const JointSchema& schema, double ground_y,
                              double min_radius = kMinimumRadius);

// Regression target relative to a voxel:
//   ((x - cx)/vx, (z - cz)/vz, (top - cy)/vy, log(r / r_ref))
Eigen::Vector4d encode_cylinder(const Cylinder& c, Eigen::Index voxel_id, const Workspace& ws);
Cylinder decode_cylinder(Eigen::Index voxel_id, const Eigen::Vector4d& reg, const Workspace& ws);

struct VoxelTargets {
  std::vector<std::uint8_t> labels;     // N_v
  Eigen::Matrix4Xd reg;                 // (4, N_v), valid where label = 1
  std::vector<int> owner;               // cylinder index per voxel or -1
  std::vector<std::string> warnings;    // skipped or colliding cylinders

  std::size_t positive_count() const;
};

// The voxel holding each cylinder's top-centre is positive. Two tops in one voxel:
// the larger-volume cylinder wins. Tops outside the workspace are skipped.
VoxelTargets assign_voxel_targets(std::span<const Cylinder> cylinders, const Workspace& ws);

// All positives, as many random occupied voxels, and as many random voxels, as a
// sorted set over the concatenated batch; 32 random voxels when there are no positives.
std::vector<Eigen::Index> sample_training_voxels(std::span<const std::uint8_t> labels,
                                                 std::span<const std::uint8_t> occupied,
                                                 std::mt19937_64& rng,
                                                 int fallback_count = kFallbackSampleCount);

}  // namespace prcnn
