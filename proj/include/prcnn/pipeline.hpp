#pragma once

#include "prcnn/config.hpp"
#include "prcnn/instance.hpp"
#include "prcnn/io.hpp"
#include "prcnn/metrics.hpp"
#include "prcnn/targets.hpp"
#include "prcnn/voxelizer.hpp"

#include <filesystem>
#include <set>
#include <vector>

namespace prcnn {

struct FrameData {
  int frame_id = 0;
  std::vector<int> sensor_ids;
  std::vector<PointCloud> clouds;  // one per sensor, tagged
  std::optional<Annotation> annotation;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FrameData> frames;
};

// Reads every cloud of a frame; a FormatError lists all missing cloud files at once.
FrameData load_frame(const std::filesystem::path& frame_manifest, const JointSchema& schema);

// Accepts a dataset directory or its manifest.json. Throws ConfigError when the dataset's
// joint list or workspace disagrees with `cfg`, and FormatError when it has no frames.
Dataset load_dataset(const std::filesystem::path& path, const Config& cfg);

// fuse -> crop -> voxel-grid filter (cell aligned to the workspace origin).
PointCloud preprocess(const std::vector<PointCloud>& clouds, const Config& cfg);

// Shuffle with `seed`, then build the (3, T, N_v) tensor.
VoxelizedFrame voxelize(const PointCloud& cloud, const Config& cfg, std::uint64_t seed);

struct GroundTruth {
  std::vector<Skeleton> persons;    // persons with a neck
  std::vector<Cylinder> cylinders;  // same order
};

GroundTruth ground_truth(const Annotation& ann, const Config& cfg);

struct PreparedFrame {
  int frame_id = 0;
  PointCloud cloud;  // filtered, in cell order
  VoxelizedFrame voxels;
  GroundTruth truth;
  VoxelTargets targets;
};

PreparedFrame prepare_frame(const FrameData& frame, const std::vector<PointCloud>& clouds, const Config& cfg,
                            std::uint64_t shuffle_seed);

// A ground-truth person cropped with its own cylinder, joints in the sphere frame.
struct TrainingInstance {
  Eigen::Matrix3Xf points;
  nn::Tensor<float> joints;    // (J, 3), zero where absent
  std::vector<bool> present;   // per joint
  std::size_t present_count() const;
};

// Nullopt when the crop keeps fewer than the minimum number of points.
std::optional<TrainingInstance> make_training_instance(const PointCloud& cloud, const Skeleton& person,
                                                       const Cylinder& cylinder, const Config& cfg,
                                                       std::mt19937_64& rng);

// Detection, NMS and joint regression for one prepared frame. Detections whose crop keeps
// fewer than the minimum number of points are dropped.
std::vector<PersonEstimate> infer_frame(const nn::ParameterMap<float>& weights, const Config& cfg,
                                        const PointCloud& cloud, const VoxelizedFrame& voxels, int frame_id);

// Full inference for a single frame manifest.
nlohmann::json infer_manifest(const nn::ParameterMap<float>& weights, const Config& cfg,
                              const std::filesystem::path& frame_manifest);

// AP and joint metrics over every annotated frame, after removing `drop_sensors`.
EvalReport evaluate(const nn::ParameterMap<float>& weights, const Config& cfg, const Dataset& data,
                    const std::set<int>& drop_sensors = {});

// Sphere-normalized joint MSE (sum of squared errors over present joints / joint count)
// with ground-truth crops, the quantity the joint term of the loss trains.
double joint_mse(const nn::ParameterMap<float>& weights, const Config& cfg, const Dataset& data);

}  // namespace prcnn
