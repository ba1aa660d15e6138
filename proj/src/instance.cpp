#include "prcnn/instance.hpp"

#include "prcnn/errors.hpp"
#include "prcnn/metrics.hpp"
#include "prcnn/targets.hpp"

#include <algorithm>

namespace prcnn {

Eigen::VectorXd positive_probability(const Eigen::Matrix2Xd& logits) {
  // p1 = 1 / (1 + exp(z0 - z1))
  return (1.0 / (1.0 + (logits.row(0) - logits.row(1)).array().exp())).matrix().transpose();
}

std::vector<Detection> decode_detections(const Eigen::VectorXd& probability, const Eigen::Matrix4Xd& reg,
                                         const Workspace& ws, double score_threshold) {
  if (probability.size() != ws.voxel_count() || reg.cols() != ws.voxel_count())
    throw DimensionError("decode_detections: outputs do not cover the workspace grid");
  std::vector<Detection> out;
  for (Eigen::Index v = 0; v < probability.size(); ++v) {
    if (!(probability[v] >= score_threshold) || !reg.col(v).allFinite()) continue;
    out.push_back({decode_cylinder(v, reg.col(v), ws), probability[v], v});
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& sorted_dets, double iou_threshold) {
  std::vector<Detection> kept;
  for (const auto& d : sorted_dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return cylinder_iou(k.cylinder, d.cylinder) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

std::vector<Eigen::Index> points_in_cylinder(const PointCloud& cloud, const Cylinder& c) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    if (c.contains(cloud.point(i))) idx.push_back(i);
  return idx;
}

SphereFrame sphere_frame(const Cylinder& c) {
  const double h = c.height();
  if (!(h > 0.0)) throw ContractError("sphere normalization needs a cylinder with positive height");
  return {c.center(), 0.5 * h};
}

Eigen::Matrix3Xd sphere_normalize(const Eigen::Matrix3Xd& world, const Cylinder& c) {
  const SphereFrame f = sphere_frame(c);
  return (world.colwise() - f.center) / f.scale;
}

Eigen::Matrix3Xd denormalize_joints(const Eigen::Matrix3Xd& normalized, const Cylinder& c) {
  const SphereFrame f = sphere_frame(c);
  return (normalized * f.scale).colwise() + f.center;
}

std::optional<InstanceCrop> extract_instance_points(const PointCloud& cloud, const Cylinder& c, std::mt19937_64& rng,
                                                    int max_points, int min_points) {
  std::vector<Eigen::Index> idx = points_in_cylinder(cloud, c);
  if (int(idx.size()) < min_points) return std::nullopt;
  if (int(idx.size()) > max_points) {
    for (int i = 0; i < max_points; ++i) {
      std::uniform_int_distribution<std::size_t> pick(std::size_t(i), idx.size() - 1);
      std::swap(idx[std::size_t(i)], idx[pick(rng)]);
    }
    idx.resize(std::size_t(max_points));
    std::sort(idx.begin(), idx.end());
  }
  InstanceCrop crop;
  crop.cylinder = c;
  crop.frame = sphere_frame(c);
  crop.world.resize(3, Eigen::Index(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) crop.world.col(Eigen::Index(i)) = cloud.point(idx[i]);
  crop.normalized = sphere_normalize(crop.world, c);
  return crop;
}

nlohmann::json inference_to_json(int frame_id, const std::vector<PersonEstimate>& persons, const JointSchema& schema) {
  using nlohmann::json;
  json dets = json::array();
  for (const auto& p : persons) {
    const Cylinder& c = p.detection.cylinder;
    json joints = json::object();
    for (std::size_t j = 0; j < std::min(schema.size(), p.joints.size()); ++j)
      joints[schema.names[j]] = {p.joints[j].x(), p.joints[j].y(), p.joints[j].z()};
    dets.push_back({{"score", p.detection.score},
                    {"cylinder", {{"axis_x", c.axis_x}, {"axis_z", c.axis_z}, {"top_y", c.top_y}, {"radius", c.radius}}},
                    {"joints", joints}});
  }
  return {{"frame_id", frame_id}, {"detections", dets}};
}

}  // namespace prcnn
