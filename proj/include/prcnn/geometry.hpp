#pragma once

#include "prcnn/pointcloud.hpp"

#include <optional>
#include <string>
#include <vector>

namespace prcnn {

// Ordered joint names; the order fixes the regressor's output rows.
struct JointSchema {
  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }
  std::optional<std::size_t> index_of(const std::string& name) const;
  bool operator==(const JointSchema&) const = default;

  static JointSchema cmu();   // 11 joints, Neck ... Rankle
  static JointSchema mvor();  // 8 joints, Head ... Relb
};

struct Skeleton {
  int person_id = 0;
  std::vector<std::optional<Point3>> joints;  // indexed like the schema

  std::size_t present_count() const;
};

// Vertical cylinder standing on the ground plane.
struct Cylinder {
  double axis_x = 0.0;
  double axis_z = 0.0;
  double top_y = 0.0;
  double radius = 0.0;
  double bottom_y = 0.0;

  double height() const { return top_y - bottom_y; }
  double volume() const;
  Point3 center() const { return {axis_x, bottom_y + 0.5 * height(), axis_z}; }
  Point3 top_center() const { return {axis_x, top_y, axis_z}; }
  bool contains(const Point3& p) const;
};

}  // namespace prcnn
