#pragma once

#include "prcnn/geometry.hpp"
#include "prcnn/pointcloud.hpp"

#include <json.hpp>

#include <optional>
#include <random>
#include <vector>

namespace prcnn {

inline constexpr double kDefaultScoreThreshold = 0.5;
inline constexpr double kDefaultNmsIou = 0.3;
inline constexpr int kMaxInstancePoints = 1024;
inline constexpr int kMinInstancePoints = 32;

struct Detection {
  Cylinder cylinder;
  double score = 0.0;
  Eigen::Index voxel_id = -1;
};

// Softmax probability of class 1 per voxel from (2, N_v) logits.
Eigen::VectorXd positive_probability(const Eigen::Matrix2Xd& logits);

// Voxels with probability >= threshold, decoded and sorted by descending score.
std::vector<Detection> decode_detections(const Eigen::VectorXd& probability, const Eigen::Matrix4Xd& reg,
                                         const Workspace& ws, double score_threshold = kDefaultScoreThreshold);

// Greedy suppression: drop detections whose IoU with a kept one exceeds the threshold.
std::vector<Detection> nms(const std::vector<Detection>& sorted_dets, double iou_threshold = kDefaultNmsIou);

// Indices of points inside the closed cylinder.
std::vector<Eigen::Index> points_in_cylinder(const PointCloud& cloud, const Cylinder& c);

// Sphere centred at mid-axis with radius half the cylinder height.
struct SphereFrame {
  Point3 center = Point3::Zero();
  double scale = 1.0;
};

SphereFrame sphere_frame(const Cylinder& c);  // ContractError when height <= 0
Eigen::Matrix3Xd sphere_normalize(const Eigen::Matrix3Xd& world, const Cylinder& c);
Eigen::Matrix3Xd denormalize_joints(const Eigen::Matrix3Xd& normalized, const Cylinder& c);

struct InstanceCrop {
  Cylinder cylinder;
  SphereFrame frame;
  Eigen::Matrix3Xd world;       // retained (possibly subsampled) points
  Eigen::Matrix3Xd normalized;  // same points in the sphere frame
};

// Points inside the cylinder, uniformly subsampled to max_points; nullopt when fewer
// than min_points remain.
std::optional<InstanceCrop> extract_instance_points(const PointCloud& cloud, const Cylinder& c, std::mt19937_64& rng,
                                                    int max_points = kMaxInstancePoints,
                                                    int min_points = kMinInstancePoints);

struct PersonEstimate {
  Detection detection;
  std::vector<Point3> joints;  // world frame, schema order
};

// {frame_id, detections: [{score, cylinder: {axis_x, axis_z, top_y, radius}, joints: {name: [x, y, z]}}]}
nlohmann::json inference_to_json(int frame_id, const std::vector<PersonEstimate>& persons, const JointSchema& schema);

}  // namespace prcnn
