#include "prcnn/targets.hpp"

#include "prcnn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace prcnn {

Cylinder skeleton_to_cylinder(const Skeleton& s, const JointSchema& schema, double ground_y, double min_radius) {
  const auto neck_idx = schema.index_of("Neck");
  if (!neck_idx || *neck_idx >= s.joints.size() || !s.joints[*neck_idx])
    throw AnnotationError("person " + std::to_string(s.person_id) + " has no neck joint");
  const Point3 neck = *s.joints[*neck_idx];
  Cylinder c;
  c.axis_x = neck.x();
  c.axis_z = neck.z();
  c.bottom_y = ground_y;
  c.top_y = neck.y();
  double r = 0.0;
  for (const auto& j : s.joints) {
    if (!j) continue;
    c.top_y = std::max(c.top_y, j->y());
    r = std::max(r, std::hypot(j->x() - neck.x(), j->z() - neck.z()));
  }
  c.radius = std::max(r, min_radius);
  return c;
}

Eigen::Vector4d encode_cylinder(const Cylinder& c, Eigen::Index voxel_id, const Workspace& ws) {
  const Point3 ctr = voxel_center(voxel_id, ws);
  return {(c.axis_x - ctr.x()) / ws.voxel_size.x(), (c.axis_z - ctr.z()) / ws.voxel_size.z(),
          (c.top_y - ctr.y()) / ws.voxel_size.y(), std::log(c.radius / kReferenceRadius)};
}

Cylinder decode_cylinder(Eigen::Index voxel_id, const Eigen::Vector4d& reg, const Workspace& ws) {
  const Point3 ctr = voxel_center(voxel_id, ws);
  Cylinder c;
  c.axis_x = ctr.x() + reg[0] * ws.voxel_size.x();
  c.axis_z = ctr.z() + reg[1] * ws.voxel_size.z();
  c.top_y = ctr.y() + reg[2] * ws.voxel_size.y();
  c.radius = kReferenceRadius * std::exp(reg[3]);
  c.bottom_y = ws.ground_y();
  return c;
}

std::size_t VoxelTargets::positive_count() const {
  return std::size_t(std::count(labels.begin(), labels.end(), std::uint8_t(1)));
}

VoxelTargets assign_voxel_targets(std::span<const Cylinder> cylinders, const Workspace& ws) {
  const Eigen::Index nv = ws.voxel_count();
  VoxelTargets t;
  t.labels.assign(std::size_t(nv), 0);
  t.reg = Eigen::Matrix4Xd::Zero(4, nv);
  t.owner.assign(std::size_t(nv), -1);
  for (std::size_t i = 0; i < cylinders.size(); ++i) {
    const Cylinder& c = cylinders[i];
    const Point3 top = c.top_center();
    if (!ws.contains(top)) {
      t.warnings.push_back("cylinder " + std::to_string(i) + " top outside workspace; target skipped");
      continue;
    }
    const Eigen::Index id = assign_voxel_index(top, ws).id;
    int& owner = t.owner[std::size_t(id)];
    if (owner >= 0) {
      const bool replace = c.volume() > cylinders[std::size_t(owner)].volume();
      t.warnings.push_back("cylinders " + std::to_string(owner) + " and " + std::to_string(i) +
                           " share voxel " + std::to_string(id) + "; keeping " +
                           std::to_string(replace ? int(i) : owner));
      if (!replace) continue;
    }
    owner = int(i);
    t.labels[std::size_t(id)] = 1;
    t.reg.col(id) = encode_cylinder(c, id, ws);
  }
  return t;
}

namespace {

// k distinct draws from `pool` (all of it when k >= size).
std::vector<Eigen::Index> draw_distinct(std::vector<Eigen::Index> pool, std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

std::vector<Eigen::Index> sample_training_voxels(std::span<const std::uint8_t> labels,
                                                 std::span<const std::uint8_t> occupied,
                                                 std::mt19937_64& rng, int fallback_count) {
  if (labels.size() != occupied.size()) throw DimensionError("sample_training_voxels: size mismatch");
  std::vector<Eigen::Index> positives, filled, all(labels.size());
  std::iota(all.begin(), all.end(), Eigen::Index(0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) positives.push_back(Eigen::Index(i));
    if (occupied[i]) filled.push_back(Eigen::Index(i));
  }
  std::vector<Eigen::Index> out;
  if (positives.empty()) {
    out = draw_distinct(std::move(all), std::size_t(fallback_count), rng);
  } else {
    const std::size_t p = positives.size();
    out = positives;
    auto a = draw_distinct(std::move(filled), p, rng);
    auto b = draw_distinct(std::move(all), p, rng);
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace prcnn
