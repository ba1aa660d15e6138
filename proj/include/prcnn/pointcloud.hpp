#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace prcnn {

using Point3 = Eigen::Vector3d;

// Unordered set of world-frame points (y is the ground normal). Columns of
// `points` are points; `sensor_ids` is either empty or one id per point.
struct PointCloud {
  Eigen::Matrix3Xf points;
  std::vector<std::int32_t> sensor_ids;

  Eigen::Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }
  bool has_sensor_ids() const { return !sensor_ids.empty(); }

  Point3 point(Eigen::Index i) const { return points.col(i).cast<double>(); }
  static PointCloud from_points(const std::vector<Point3>& pts, std::int32_t sensor_id = -1);
};

// Axis-aligned working cuboid subdivided into voxels.
//   extent = counts * voxel_size (componentwise)
struct Workspace {
  Point3 origin = Point3::Zero();
  Eigen::Vector3d voxel_size = Eigen::Vector3d::Constant(0.25);
  Eigen::Vector3i counts = Eigen::Vector3i(16, 8, 12);

  Eigen::Vector3d extent() const { return counts.cast<double>().cwiseProduct(voxel_size); }
  Eigen::Index voxel_count() const {
    return Eigen::Index(counts.x()) * counts.y() * counts.z();
  }
  double ground_y() const { return origin.y(); }
  bool contains(const Point3& p) const;

  // Throws ConfigError on non-positive sizes/counts.
  void validate() const;

  // Defaults: 4 x 2 x 3 m cuboid, 0.25 m detection voxels.
  static Workspace make(const Point3& origin, const Eigen::Vector3d& extent,
                        const Eigen::Vector3d& voxel_size);
};

inline constexpr double kDefaultFilterCell = 0.025;

PointCloud fuse(std::span<const PointCloud> clouds);
PointCloud crop_workspace(const PointCloud& cloud, const Workspace& ws);

// Replaces the points of each occupied cubic cell (aligned to `origin`)
// with their centroid. Output is ordered by cell key.
PointCloud voxel_grid_filter(const PointCloud& cloud, double cell,
                             const Point3& origin = Point3::Zero());

PointCloud shuffle(const PointCloud& cloud, std::uint64_t seed);

}  // namespace prcnn
