#pragma once

#include "prcnn/geometry.hpp"
#include "prcnn/pointcloud.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace prcnn {

namespace fs = std::filesystem;

// Point-cloud file: "PRC1", u32 count, count x (x, y, z) f32, little-endian.
void write_point_cloud(const PointCloud& cloud, const fs::path& path);
PointCloud read_point_cloud(const fs::path& path, std::int32_t sensor_id = -1);

struct SensorEntry {
  int sensor_id = 0;
  fs::path cloud_path;  // absolute after reading
};

struct FrameManifest {
  int frame_id = 0;
  std::vector<SensorEntry> sensors;
  fs::path annotation_path;  // absolute after reading; empty when unannotated
};

// Paths are written relative to the manifest's directory and resolved against it on read.
void write_frame_manifest(const FrameManifest& frame, const fs::path& path);
FrameManifest read_frame_manifest(const fs::path& path);

struct Annotation {
  std::vector<Skeleton> persons;
};

// {persons: [{id, joints: {name: [x, y, z] | null}}]}
nlohmann::json annotation_to_json(const Annotation& ann, const JointSchema& schema);
Annotation annotation_from_json(const nlohmann::json& j, const JointSchema& schema);
void write_annotation(const Annotation& ann, const JointSchema& schema, const fs::path& path);
Annotation read_annotation(const fs::path& path, const JointSchema& schema);

struct DatasetManifest {
  JointSchema joints;
  Point3 origin = Point3::Zero();
  Eigen::Vector3d extent = Eigen::Vector3d(4.0, 2.0, 3.0);
  std::vector<fs::path> frames;  // frame manifests, absolute after reading
  nlohmann::json cameras = nlohmann::json::array();
};

void write_dataset_manifest(const DatasetManifest& m, const fs::path& path);
DatasetManifest read_dataset_manifest(const fs::path& path);

nlohmann::json read_json(const fs::path& path);
void write_json(const nlohmann::json& j, const fs::path& path);

}  // namespace prcnn
