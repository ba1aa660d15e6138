#pragma once

#include "prcnn/geometry.hpp"
#include "prcnn/io.hpp"
#include "prcnn/pointcloud.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace prcnn {

struct Capsule {
  Point3 a = Point3::Zero();
  Point3 b = Point3::Zero();
  double radius = 0.0;

  double area() const;
  double distance(const Point3& p) const;  // to the axis segment
  bool contains(const Point3& p) const { return distance(p) < radius; }
};

struct SyntheticPerson {
  Skeleton skeleton;  // CMU joint order
  std::vector<Capsule> body;
};

struct VirtualCamera {
  int sensor_id = 0;
  Point3 position = Point3::Zero();
  Point3 target = Point3::Zero();
  int budget = 1500;  // points per frame
  double noise_sigma = 0.01;
  double half_fov = 1.4;  // radians
};

// Capsule body for a CMU skeleton.
std::vector<Capsule> capsule_body(const Skeleton& s);

// Randomized standing pose with the neck axis at (x, z) and feet on the ground.
SyntheticPerson random_person(std::mt19937_64& rng, double x, double z, double ground_y);

// n persons placed by rejection sampling with neck axes at least 0.5 m apart (more for
// wide poses) and every joint inside the workspace. Throws GenerationError after 1000
// rejected placements.
std::vector<SyntheticPerson> generate_scene(std::mt19937_64& rng, int n_persons, const Workspace& ws);

// `count` cameras on the ellipse through the workspace corners, 1.8 m above the ground,
// aimed at the centre; four cameras sit exactly at the corners.
std::vector<VirtualCamera> default_cameras(const Workspace& ws, int count = 4, int budget = 1500,
                                           double noise_sigma = 0.01);

// Area-weighted surface samples that face the camera and are not buried in another
// capsule of the same body, plus isotropic Gaussian noise.
PointCloud render_camera(const std::vector<SyntheticPerson>& scene, const VirtualCamera& cam, std::mt19937_64& rng);

// Indices of surviving sensors: each dropped with probability p, one random
// survivor forced when all were dropped.
std::vector<std::size_t> apply_dropout(std::size_t sensor_count, double p, std::mt19937_64& rng);
std::vector<PointCloud> apply_dropout(const std::vector<PointCloud>& clouds, double p, std::mt19937_64& rng);

struct GenerateOptions {
  int frames = 20;
  int min_persons = 1;
  int max_persons = 3;
  int cameras = 4;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  int budget = 1500;
  double noise_sigma = 0.01;
  Workspace workspace;

  void validate() const;  // ConfigError on bad ranges
};

struct SyntheticFrame {
  int frame_id = 0;
  std::vector<SyntheticPerson> persons;
  std::vector<int> sensor_ids;     // surviving sensors
  std::vector<PointCloud> clouds;  // one per surviving sensor
};

// Deterministic in (seed, frame_id) alone.
SyntheticFrame generate_frame(const GenerateOptions& opt, int frame_id, const std::vector<VirtualCamera>& cams);

struct DatasetSummary {
  int frames = 0;
  int persons = 0;
  long points = 0;
  std::filesystem::path manifest;
};

// Writes <out>/manifest.json and per frame frames/NNNNNN/{frame.json, annotation.json, sensor_K.prc}.
DatasetSummary write_dataset(const GenerateOptions& opt, const std::filesystem::path& out_dir);

}  // namespace prcnn
