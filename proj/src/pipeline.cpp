#include "prcnn/pipeline.hpp"

#include "prcnn/errors.hpp"
#include "prcnn/network.hpp"
#include "prcnn/parallel.hpp"
#include "prcnn/rng.hpp"

#include <algorithm>

namespace prcnn {

namespace fs = std::filesystem;

FrameData load_frame(const fs::path& frame_manifest, const JointSchema& schema) {
  const FrameManifest fm = read_frame_manifest(frame_manifest);
  std::string missing;
  for (const auto& s : fm.sensors)
    if (!fs::exists(s.cloud_path)) missing += "\n  " + s.cloud_path.string();
  if (!fm.annotation_path.empty() && !fs::exists(fm.annotation_path)) missing += "\n  " + fm.annotation_path.string();
  if (!missing.empty()) throw FormatError(frame_manifest.string() + ": missing files:" + missing);
  FrameData f;
  f.frame_id = fm.frame_id;
  for (const auto& s : fm.sensors) {
    f.sensor_ids.push_back(s.sensor_id);
    f.clouds.push_back(read_point_cloud(s.cloud_path, s.sensor_id));
  }
  if (!fm.annotation_path.empty()) f.annotation = read_annotation(fm.annotation_path, schema);
  return f;
}

Dataset load_dataset(const fs::path& path, const Config& cfg) {
  const fs::path manifest = fs::is_directory(path) ? path / "manifest.json" : path;
  Dataset d;
  d.manifest = read_dataset_manifest(manifest);
  if (!(d.manifest.joints == cfg.joints))
    throw ConfigError(manifest.string() + ": dataset joint list does not match the configured joints");
  if ((d.manifest.origin - cfg.workspace.origin).norm() > 1e-9)
    throw ConfigError(manifest.string() + ": dataset workspace origin differs from the configuration");
  if ((d.manifest.extent - cfg.workspace.extent()).norm() > 1e-9)
    throw ConfigError(manifest.string() + ": dataset workspace extent differs from the configuration");
  if (d.manifest.frames.empty()) throw FormatError(manifest.string() + ": dataset has no frames");
  d.frames.resize(d.manifest.frames.size());
  parallel_for(d.frames.size(), [&](std::size_t i) { d.frames[i] = load_frame(d.manifest.frames[i], cfg.joints); });
  return d;
}

PointCloud preprocess(const std::vector<PointCloud>& clouds, const Config& cfg) {
  return voxel_grid_filter(crop_workspace(fuse(clouds), cfg.workspace), cfg.filter_cell, cfg.workspace.origin);
}

VoxelizedFrame voxelize(const PointCloud& cloud, const Config& cfg, std::uint64_t seed) {
  return build_voxel_tensor(cloud, cfg.workspace, cfg.model.points_per_voxel, seed);
}

GroundTruth ground_truth(const Annotation& ann, const Config& cfg) {
  GroundTruth gt;
  const auto neck = cfg.joints.index_of("Neck");
  for (const auto& p : ann.persons) {
    if (!neck || *neck >= p.joints.size() || !p.joints[*neck]) continue;
    gt.cylinders.push_back(skeleton_to_cylinder(p, cfg.joints, cfg.workspace.ground_y()));
    gt.persons.push_back(p);
  }
  return gt;
}

PreparedFrame prepare_frame(const FrameData& frame, const std::vector<PointCloud>& clouds, const Config& cfg,
                            std::uint64_t shuffle_seed) {
  PreparedFrame out;
  out.frame_id = frame.frame_id;
  out.cloud = preprocess(clouds, cfg);
  out.voxels = voxelize(out.cloud, cfg, shuffle_seed);
  if (frame.annotation) out.truth = ground_truth(*frame.annotation, cfg);
  out.targets = assign_voxel_targets(out.truth.cylinders, cfg.workspace);
  return out;
}

std::size_t TrainingInstance::present_count() const {
  return std::size_t(std::count(present.begin(), present.end(), true));
}

std::optional<TrainingInstance> make_training_instance(const PointCloud& cloud, const Skeleton& person,
                                                       const Cylinder& cylinder, const Config& cfg,
                                                       std::mt19937_64& rng) {
  if (!(cylinder.height() > 0.0)) return std::nullopt;
  auto crop = extract_instance_points(cloud, cylinder, rng, cfg.model.max_instance_points,
                                      cfg.model.min_instance_points);
  if (!crop) return std::nullopt;
  TrainingInstance inst;
  inst.points = crop->normalized.cast<float>();
  const Eigen::Index j = Eigen::Index(cfg.joints.size());
  inst.joints = nn::Tensor<float>(nn::Shape{j, 3});
  inst.present.assign(std::size_t(j), false);
  for (Eigen::Index k = 0; k < j; ++k) {
    const auto& q = person.joints[std::size_t(k)];
    if (!q) continue;
    const Point3 n = (*q - crop->frame.center) / crop->frame.scale;
    for (int a = 0; a < 3; ++a) inst.joints.data[k * 3 + a] = float(n[a]);
    inst.present[std::size_t(k)] = true;
  }
  return inst;
}

std::vector<PersonEstimate> infer_frame(const nn::ParameterMap<float>& weights, const Config& cfg,
                                        const PointCloud& cloud, const VoxelizedFrame& voxels, int frame_id) {
  nn::Tape<float> tape;
  const Bound<float> w = bind_weights(tape, weights, [](const std::string&) { return false; });
  const auto out = detect(tape, voxels, w, cfg.model);
  const Eigen::Index nv = cfg.workspace.voxel_count();
  const Eigen::Matrix2Xd logits =
      Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          out.heads.scores.value().data.data(), 2, nv).cast<double>();
  const Eigen::Matrix4Xd reg =
      Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          out.heads.cylinders.value().data.data(), 4, nv).cast<double>();
  auto dets = nms(decode_detections(positive_probability(logits), reg, cfg.workspace, cfg.infer.score_threshold),
                  cfg.infer.nms_iou);

  std::vector<PersonEstimate> persons;
  auto rng = keyed_rng({std::uint64_t(frame_id), tag(Stream::kCrop)});
  for (const auto& d : dets) {
    if (!(d.cylinder.height() > 0.0)) continue;
    auto crop = extract_instance_points(cloud, d.cylinder, rng, cfg.model.max_instance_points,
                                        cfg.model.min_instance_points);
    if (!crop) continue;
    nn::Tape<float> t;
    const Bound<float> wr = bind_weights(t, weights, [](const std::string&) { return false; });
    const nn::Var<float> j = pointnet_regress<float>(t, crop->normalized.cast<float>(), wr, cfg.model);
    const Eigen::Matrix3Xd norm =
        Eigen::Map<const Eigen::Matrix<float, 3, Eigen::Dynamic>>(j.value().data.data(), 3, cfg.model.joint_count)
            .cast<double>();
    const Eigen::Matrix3Xd world = denormalize_joints(norm, d.cylinder);
    PersonEstimate p;
    p.detection = d;
    for (Eigen::Index k = 0; k < world.cols(); ++k) p.joints.push_back(world.col(k));
    persons.push_back(std::move(p));
  }
  return persons;
}

namespace {

std::uint64_t eval_shuffle_seed(int frame_id) { return std::uint64_t(frame_id) * 0x9E3779B97F4A7C15ull + 1; }

std::vector<PointCloud> surviving(const FrameData& f, const std::set<int>& drop) {
  std::vector<PointCloud> out;
  for (std::size_t i = 0; i < f.clouds.size(); ++i)
    if (!drop.count(f.sensor_ids[i])) out.push_back(f.clouds[i]);
  return out;
}

}  // namespace

nlohmann::json infer_manifest(const nn::ParameterMap<float>& weights, const Config& cfg, const fs::path& frame_manifest) {
  const FrameData f = load_frame(frame_manifest, cfg.joints);
  const PointCloud cloud = preprocess(f.clouds, cfg);
  const VoxelizedFrame vox = voxelize(cloud, cfg, eval_shuffle_seed(f.frame_id));
  return inference_to_json(f.frame_id, infer_frame(weights, cfg, cloud, vox, f.frame_id), cfg.joints);
}

EvalReport evaluate(const nn::ParameterMap<float>& weights, const Config& cfg, const Dataset& data,
                    const std::set<int>& drop_sensors) {
  struct FrameResult {
    bool annotated = false;
    std::vector<PersonEstimate> persons;
    GroundTruth truth;
  };
  std::vector<FrameResult> results(data.frames.size());
  parallel_for(results.size(), [&](std::size_t i) {
    const FrameData& f = data.frames[i];
    if (!f.annotation) return;
    const PointCloud cloud = preprocess(surviving(f, drop_sensors), cfg);
    const VoxelizedFrame vox = voxelize(cloud, cfg, eval_shuffle_seed(f.frame_id));
    results[i].annotated = true;
    results[i].persons = infer_frame(weights, cfg, cloud, vox, f.frame_id);
    results[i].truth = ground_truth(*f.annotation, cfg);
  });

  EvalReport report;
  JointErrors errors(cfg.joints.size());
  std::vector<RankedFlag> flags;
  for (const auto& r : results) {
    if (!r.annotated) continue;
    ++report.frames;
    report.gt_count += r.truth.cylinders.size();
    std::vector<ScoredCylinder> dets;
    for (const auto& p : r.persons) dets.push_back({p.detection.cylinder, p.detection.score});
    const MatchResult m = match_detections(dets, r.truth.cylinders, cfg.eval.iou_threshold);
    for (std::size_t k = 0; k < dets.size(); ++k) {
      flags.push_back({dets[k].score, m.det_true_positive[k]});
      if (!m.det_true_positive[k]) continue;
      ++report.true_positives;
      errors.add(r.truth.persons[std::size_t(m.det_gt[k])].joints, r.persons[k].joints);
    }
    report.detections += dets.size();
  }
  report.ap = average_precision(flags, report.gt_count);
  joint_metrics(errors, cfg.joints, report, cfg.eval.acc_threshold_cm);
  return report;
}

double joint_mse(const nn::ParameterMap<float>& weights, const Config& cfg, const Dataset& data) {
  double sum = 0.0;
  std::size_t joints = 0;
  for (const FrameData& f : data.frames) {
    if (!f.annotation) continue;
    const PointCloud cloud = preprocess(f.clouds, cfg);
    const GroundTruth gt = ground_truth(*f.annotation, cfg);
    for (std::size_t k = 0; k < gt.persons.size(); ++k) {
      auto rng = keyed_rng({std::uint64_t(f.frame_id), std::uint64_t(k), tag(Stream::kCrop)});
      const auto inst = make_training_instance(cloud, gt.persons[k], gt.cylinders[k], cfg, rng);
      if (!inst) continue;
      nn::Tape<float> t;
      const Bound<float> w = bind_weights(t, weights, [](const std::string&) { return false; });
      const auto pred = pointnet_regress<float>(t, inst->points, w, cfg.model);
      for (std::size_t j = 0; j < inst->present.size(); ++j) {
        if (!inst->present[j]) continue;
        for (int a = 0; a < 3; ++a) {
          const double d = double(pred.value().data[Eigen::Index(j) * 3 + a]) - inst->joints.data[Eigen::Index(j) * 3 + a];
          sum += d * d;
        }
        ++joints;
      }
    }
  }
  if (joints == 0) throw ContractError("joint_mse: no ground-truth instance with enough points");
  return sum / double(joints);
}

}  // namespace prcnn
