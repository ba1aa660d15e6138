#include "prcnn/geometry.hpp"

#include <numbers>

namespace prcnn {

std::optional<std::size_t> JointSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

JointSchema JointSchema::cmu() {
  return {{"Neck", "Headtop", "BodyCenter", "Lshoulder", "Lhip", "Lknee", "Lankle", "Rshoulder",
           "Rhip", "Rknee", "Rankle"}};
}

JointSchema JointSchema::mvor() {
  return {{"Head", "Neck", "Lshoulder", "Rshoulder", "Lhip", "Rhip", "Lelb", "Relb"}};
}

std::size_t Skeleton::present_count() const {
  std::size_t n = 0;
  for (const auto& j : joints) n += j.has_value();
  return n;
}

double Cylinder::volume() const { return std::numbers::pi * radius * radius * height(); }

bool Cylinder::contains(const Point3& p) const {
  const double dx = p.x() - axis_x;
  const double dz = p.z() - axis_z;
  return dx * dx + dz * dz <= radius * radius && p.y() >= bottom_y && p.y() <= top_y;
}

}  // namespace prcnn
