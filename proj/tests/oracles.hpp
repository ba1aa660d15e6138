// Independent reference implementations used by the unit and acceptance tests.
#pragma once

#include "prcnn/geometry.hpp"
#include "prcnn/pointcloud.hpp"

#include <cmath>
#include <map>
#include <random>
#include <tuple>
#include <vector>

namespace oracle {

using prcnn::Point3;

// Centroid per cell by hashing every point into a map, double accumulation in input order.
inline std::map<std::tuple<long, long, long>, Point3> cell_centroids(const prcnn::PointCloud& c, double cell,
                                                                     const Point3& origin) {
  std::map<std::tuple<long, long, long>, std::pair<Point3, long>> acc;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const Point3 p = c.point(i);
    const auto key = std::make_tuple(long(std::floor((p.x() - origin.x()) / cell)),
                                     long(std::floor((p.y() - origin.y()) / cell)),
                                     long(std::floor((p.z() - origin.z()) / cell)));
    auto& [sum, n] = acc[key];
    if (n == 0) sum.setZero();
    sum += p;
    ++n;
  }
  std::map<std::tuple<long, long, long>, Point3> out;
  for (const auto& [k, v] : acc) out[k] = v.first / double(v.second);
  return out;
}

struct VoxelGroup {
  long count = 0;                            // all points in the voxel
  std::vector<Eigen::Vector3f> stored;       // first T relative coordinates
};

// Groups points by the floor formulas id = iz + iy*Nz + ix*Nz*Ny, keeping the first T.
inline std::map<long, VoxelGroup> group_voxels(const prcnn::PointCloud& c, const prcnn::Workspace& ws, int T) {
  std::map<long, VoxelGroup> out;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const Point3 p = c.point(i);
    long idx[3];
    for (int a = 0; a < 3; ++a) idx[a] = long(std::floor((p[a] - ws.origin[a]) / ws.voxel_size[a]));
    const long id = idx[2] + idx[1] * ws.counts.z() + idx[0] * ws.counts.z() * ws.counts.y();
    auto& g = out[id];
    ++g.count;
    if (long(g.stored.size()) < T) {
      Eigen::Vector3f r;
      for (int a = 0; a < 3; ++a) r[a] = float(p[a] - (ws.origin[a] + double(idx[a]) * ws.voxel_size[a]));
      g.stored.push_back(r);
    }
  }
  return out;
}

inline bool in_cylinder(const prcnn::Cylinder& c, const Point3& p) {
  const double dx = p.x() - c.axis_x, dz = p.z() - c.axis_z;
  return dx * dx + dz * dz <= c.radius * c.radius && p.y() >= c.bottom_y && p.y() <= c.top_y;
}

// Monte-Carlo IoU over the joint bounding box of the two cylinders.
inline double monte_carlo_iou(const prcnn::Cylinder& a, const prcnn::Cylinder& b, long samples, std::mt19937_64& rng) {
  const double x0 = std::min(a.axis_x - a.radius, b.axis_x - b.radius), x1 = std::max(a.axis_x + a.radius, b.axis_x + b.radius);
  const double z0 = std::min(a.axis_z - a.radius, b.axis_z - b.radius), z1 = std::max(a.axis_z + a.radius, b.axis_z + b.radius);
  const double y0 = std::min(a.bottom_y, b.bottom_y), y1 = std::max(a.top_y, b.top_y);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1), uz(z0, z1);
  long in_a = 0, in_b = 0, both = 0;
  for (long i = 0; i < samples; ++i) {
    const Point3 p(ux(rng), uy(rng), uz(rng));
    const bool ia = in_cylinder(a, p), ib = in_cylinder(b, p);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : double(both) / double(uni);
}

}  // namespace oracle
