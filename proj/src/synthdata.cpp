#include "prcnn/synthdata.hpp"

#include "prcnn/errors.hpp"
#include "prcnn/parallel.hpp"
#include "prcnn/rng.hpp"
#include "prcnn/targets.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace prcnn {

namespace {

constexpr double kPi = std::numbers::pi;

using Eigen::AngleAxisd;
using Eigen::Vector3d;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// CMU order: Neck, Headtop, BodyCenter, Lshoulder, Lhip, Lknee, Lankle, Rshoulder, Rhip, Rknee, Rankle.
enum J { kNeck, kHeadtop, kBodyCenter, kLshoulder, kLhip, kLknee, kLankle, kRshoulder, kRhip, kRknee, kRankle };

Vector3d unit_orthogonal(const Vector3d& d) {
  const Vector3d h = std::abs(d.x()) < 0.9 ? Vector3d::UnitX() : Vector3d::UnitY();
  return d.cross(h).normalized();
}

struct SurfaceSample {
  Point3 p;
  Vector3d n;
};

SurfaceSample sample_capsule(const Capsule& c, std::mt19937_64& rng) {
  const Vector3d axis = c.b - c.a;
  const double len = axis.norm();
  const double side = 2.0 * kPi * c.radius * len;
  const double caps = 4.0 * kPi * c.radius * c.radius;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (len > 0.0 && u01(rng) * (side + caps) < side) {
    const Vector3d d = axis / len;
    const Vector3d e1 = unit_orthogonal(d), e2 = d.cross(e1);
    const double phi = 2.0 * kPi * u01(rng);
    const Vector3d n = std::cos(phi) * e1 + std::sin(phi) * e2;
    return {c.a + u01(rng) * axis + c.radius * n, n};
  }
  // Uniform direction; the half pointing away from the segment belongs to each end cap.
  std::normal_distribution<double> g(0.0, 1.0);
  Vector3d n(g(rng), g(rng), g(rng));
  while (n.squaredNorm() < 1e-12) n = Vector3d(g(rng), g(rng), g(rng));
  n.normalize();
  const bool at_b = len > 0.0 && n.dot(axis) > 0.0;
  return {(at_b ? c.b : c.a) + c.radius * n, n};
}

}  // namespace

double Capsule::area() const { return 2.0 * kPi * radius * (b - a).norm() + 4.0 * kPi * radius * radius; }

double Capsule::distance(const Point3& p) const {
  const Vector3d ab = b - a;
  const double l2 = ab.squaredNorm();
  const double t = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

std::vector<Capsule> capsule_body(const Skeleton& s) {
  auto j = [&](int k) {
    if (std::size_t(k) >= s.joints.size() || !s.joints[std::size_t(k)])
      throw AnnotationError("capsule_body needs all 11 CMU joints");
    return *s.joints[std::size_t(k)];
  };
  const Vector3d up = (j(kHeadtop) - j(kNeck)).normalized();
  const double head_r = 0.1;
  std::vector<Capsule> body;
  body.push_back({j(kNeck) + 0.03 * up, j(kHeadtop) - head_r * up, head_r});
  body.push_back({j(kNeck), j(kBodyCenter), 0.14});
  body.push_back({j(kLshoulder), j(kRshoulder), 0.05});
  body.push_back({j(kLhip), j(kRhip), 0.09});
  body.push_back({j(kLhip), j(kLknee), 0.07});
  body.push_back({j(kRhip), j(kRknee), 0.07});
  body.push_back({j(kLknee), j(kLankle), 0.05});
  body.push_back({j(kRknee), j(kRankle), 0.05});
  return body;
}

SyntheticPerson random_person(std::mt19937_64& rng, double x, double z, double ground_y) {
  // Local frame: x lateral (left positive), y up, z forward.
  const double h = uniform(rng, 1.55, 1.85);
  const double s = h / 1.7;
  const double lean = uniform(rng, -0.15, 0.15);
  const double heading = uniform(rng, 0.0, 2.0 * kPi);
  const AngleAxisd lean_rot(lean, Vector3d::UnitX());

  std::vector<Vector3d> p(11);
  p[kBodyCenter] = Vector3d(0.0, 0.53 * h, 0.0);
  p[kNeck] = p[kBodyCenter] + lean_rot * Vector3d(0.0, 0.29 * h, 0.0);
  p[kHeadtop] = p[kNeck] + lean_rot * Vector3d(0.0, 0.18 * h, 0.0);
  p[kLshoulder] = p[kNeck] + lean_rot * Vector3d(0.2 * s, -0.03 * s, 0.0);
  p[kRshoulder] = p[kNeck] + lean_rot * Vector3d(-0.2 * s, -0.03 * s, 0.0);
  p[kLhip] = p[kBodyCenter] + Vector3d(0.09 * s, 0.0, 0.0);
  p[kRhip] = p[kBodyCenter] + Vector3d(-0.09 * s, 0.0, 0.0);

  const double thigh = 0.245 * h, shin = 0.246 * h;
  auto leg = [&](int hip, int knee, int ankle, double side) {
    const double swing = uniform(rng, -0.4, 0.4);
    const double abduct = uniform(rng, 0.0, 0.2) * side;
    const double bend = uniform(rng, 0.0, 0.6);
    const Vector3d thigh_dir =
        AngleAxisd(-swing, Vector3d::UnitX()) * (AngleAxisd(abduct, Vector3d::UnitZ()) * -Vector3d::UnitY());
    const Vector3d shin_dir = AngleAxisd(bend, Vector3d::UnitX()) * thigh_dir;
    p[std::size_t(knee)] = p[std::size_t(hip)] + thigh * thigh_dir;
    p[std::size_t(ankle)] = p[std::size_t(knee)] + shin * shin_dir;
  };
  leg(kLhip, kLknee, kLankle, 1.0);
  leg(kRhip, kRknee, kRankle, -1.0);

  // Rotate about the neck axis, put the neck at (x, z) and the lower ankle's shin cap on the floor.
  const AngleAxisd turn(heading, Vector3d::UnitY());
  const Vector3d neck = p[kNeck];
  for (auto& q : p) q = turn * (q - Vector3d(neck.x(), 0.0, neck.z()));
  const double lowest = std::min(p[kLankle].y(), p[kRankle].y());
  const Vector3d shift(x, ground_y + 0.05 - lowest, z);
  SyntheticPerson person;
  for (const auto& q : p) person.skeleton.joints.emplace_back(q + shift);
  person.body = capsule_body(person.skeleton);
  return person;
}

std::vector<SyntheticPerson> generate_scene(std::mt19937_64& rng, int n_persons, const Workspace& ws) {
  if (n_persons < 0) throw ConfigError("generate_scene: negative person count");
  const JointSchema schema = JointSchema::cmu();
  const Point3 lo = ws.origin, hi = ws.origin + ws.extent();
  std::vector<SyntheticPerson> scene;
  std::vector<Cylinder> cyls;
  int rejections = 0;
  while (int(scene.size()) < n_persons) {
    SyntheticPerson p = random_person(rng, uniform(rng, lo.x(), hi.x()), uniform(rng, lo.z(), hi.z()), ws.ground_y());
    const Cylinder c = skeleton_to_cylinder(p.skeleton, schema, ws.ground_y());
    bool ok = true;
    // Joints and capsule surfaces both stay inside the workspace.
    for (const auto& cap : p.body)
      for (const Point3& e : {cap.a, cap.b})
        for (int a : {0, 2})
          ok = ok && e[a] - cap.radius - 0.02 > lo[a] && e[a] + cap.radius + 0.02 < hi[a];
    for (const auto& q : p.skeleton.joints) ok = ok && ws.contains(*q);
    ok = ok && ws.contains(c.top_center());
    for (std::size_t k = 0; ok && k < cyls.size(); ++k) {
      const double d = std::hypot(c.axis_x - cyls[k].axis_x, c.axis_z - cyls[k].axis_z);
      ok = d >= std::max(0.5, c.radius + cyls[k].radius + 0.1);
    }
    if (!ok) {
      if (++rejections >= 1000)
        throw GenerationError("could not place " + std::to_string(n_persons) + " persons in the workspace");
      continue;
    }
    scene.push_back(std::move(p));
    cyls.push_back(c);
  }
  return scene;
}

std::vector<VirtualCamera> default_cameras(const Workspace& ws, int count, int budget, double noise_sigma) {
  if (count < 1) throw ConfigError("at least one camera is required");
  const Vector3d e = ws.extent();
  const Point3 center = ws.origin + 0.5 * e;
  const double a = e.x() / std::sqrt(2.0), b = e.z() / std::sqrt(2.0);
  std::vector<VirtualCamera> cams;
  for (int k = 0; k < count; ++k) {
    const double phi = kPi / 4.0 + 2.0 * kPi * k / count;
    VirtualCamera c;
    c.sensor_id = k;
    c.position = Point3(center.x() + a * std::cos(phi), ws.ground_y() + 1.8, center.z() + b * std::sin(phi));
    c.target = Point3(center.x(), ws.ground_y() + 1.0, center.z());
    c.budget = budget;
    c.noise_sigma = noise_sigma;
    cams.push_back(c);
  }
  return cams;
}

PointCloud render_camera(const std::vector<SyntheticPerson>& scene, const VirtualCamera& cam, std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> caps;
  std::vector<double> areas;
  for (std::size_t i = 0; i < scene.size(); ++i)
    for (std::size_t k = 0; k < scene[i].body.size(); ++k) {
      caps.emplace_back(i, k);
      areas.push_back(scene[i].body[k].area());
    }
  std::vector<Point3> pts;
  if (caps.empty() || cam.budget <= 0) return PointCloud::from_points(pts, cam.sensor_id);

  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::normal_distribution<double> noise(0.0, cam.noise_sigma > 0.0 ? cam.noise_sigma : 1.0);
  const Vector3d look = (cam.target - cam.position).normalized();
  const double cos_fov = std::cos(cam.half_fov);
  const long max_attempts = 200L * cam.budget;
  for (long attempt = 0; attempt < max_attempts && int(pts.size()) < cam.budget; ++attempt) {
    const auto [pi, ci] = caps[pick(rng)];
    const SurfaceSample s = sample_capsule(scene[pi].body[ci], rng);
    const Vector3d to_cam = cam.position - s.p;
    if (s.n.dot(to_cam) <= 0.0) continue;
    if ((-to_cam).normalized().dot(look) < cos_fov) continue;
    bool buried = false;
    for (std::size_t k = 0; k < scene[pi].body.size() && !buried; ++k)
      buried = k != ci && scene[pi].body[k].contains(s.p);
    if (buried) continue;
    Point3 q = s.p;
    if (cam.noise_sigma > 0.0) q += Vector3d(noise(rng), noise(rng), noise(rng));
    pts.push_back(q);
  }
  return PointCloud::from_points(pts, cam.sensor_id);
}

std::vector<std::size_t> apply_dropout(std::size_t sensor_count, double p, std::mt19937_64& rng) {
  if (sensor_count == 0) throw ContractError("apply_dropout: no sensors");
  std::bernoulli_distribution drop(std::clamp(p, 0.0, 1.0));
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < sensor_count; ++i)
    if (!drop(rng)) kept.push_back(i);
  if (kept.empty()) kept.push_back(std::uniform_int_distribution<std::size_t>(0, sensor_count - 1)(rng));
  return kept;
}

std::vector<PointCloud> apply_dropout(const std::vector<PointCloud>& clouds, double p, std::mt19937_64& rng) {
  std::vector<PointCloud> out;
  for (std::size_t i : apply_dropout(clouds.size(), p, rng)) out.push_back(clouds[i]);
  return out;
}

void GenerateOptions::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (frames < 1) fail("--frames must be >= 1");
  if (min_persons < 0 || max_persons > 4 || min_persons > max_persons)
    fail("--persons must be MIN..MAX with 0 <= MIN <= MAX <= 4");
  if (cameras < 1) fail("--cameras must be >= 1");
  if (!(dropout >= 0.0 && dropout <= 1.0)) fail("--dropout must be in [0, 1]");
  if (budget < 1) fail("camera point budget must be >= 1");
  if (!(noise_sigma >= 0.0)) fail("noise sigma must be >= 0");
  workspace.validate();
}

SyntheticFrame generate_frame(const GenerateOptions& opt, int frame_id, const std::vector<VirtualCamera>& cams) {
  const auto f = std::uint64_t(frame_id);
  auto scene_rng = keyed_rng({opt.seed, f, tag(Stream::kScene)});
  const int n = std::uniform_int_distribution<int>(opt.min_persons, opt.max_persons)(scene_rng);
  SyntheticFrame frame;
  frame.frame_id = frame_id;
  frame.persons = generate_scene(scene_rng, n, opt.workspace);
  std::vector<PointCloud> clouds;
  for (const auto& cam : cams) {
    auto cam_rng = keyed_rng({opt.seed, f, tag(Stream::kCamera), std::uint64_t(cam.sensor_id)});
    clouds.push_back(render_camera(frame.persons, cam, cam_rng));
  }
  auto drop_rng = keyed_rng({opt.seed, f, tag(Stream::kDropout)});
  std::vector<std::size_t> kept(cams.size());
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
  if (opt.dropout > 0.0) kept = apply_dropout(cams.size(), opt.dropout, drop_rng);
  for (std::size_t i : kept) {
    frame.sensor_ids.push_back(cams[i].sensor_id);
    frame.clouds.push_back(std::move(clouds[i]));
  }
  return frame;
}

DatasetSummary write_dataset(const GenerateOptions& opt, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  opt.validate();
  const auto cams = default_cameras(opt.workspace, opt.cameras, opt.budget, opt.noise_sigma);
  const JointSchema schema = JointSchema::cmu();

  std::vector<SyntheticFrame> frames(std::size_t(opt.frames));
  parallel_for(frames.size(), [&](std::size_t i) { frames[i] = generate_frame(opt, int(i), cams); });

  std::error_code ec;
  fs::create_directories(out_dir / "frames", ec);
  if (ec) throw FormatError("cannot create " + (out_dir / "frames").string() + ": " + ec.message());

  DatasetSummary summary;
  DatasetManifest manifest;
  manifest.joints = schema;
  manifest.origin = opt.workspace.origin;
  manifest.extent = opt.workspace.extent();
  manifest.cameras = nlohmann::json::array();
  for (const auto& c : cams)
    manifest.cameras.push_back({{"sensor_id", c.sensor_id},
                                {"position", {c.position.x(), c.position.y(), c.position.z()}},
                                {"target", {c.target.x(), c.target.y(), c.target.z()}},
                                {"budget", c.budget},
                                {"noise_sigma", c.noise_sigma}});
  for (const auto& f : frames) {
    char name[16];
    std::snprintf(name, sizeof name, "%06d", f.frame_id);
    const fs::path dir = out_dir / "frames" / name;
    fs::create_directories(dir, ec);
    if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
    FrameManifest fm;
    fm.frame_id = f.frame_id;
    for (std::size_t k = 0; k < f.clouds.size(); ++k) {
      const PointCloud& cloud = f.clouds[k];
      const int sid = f.sensor_ids[k];
      const fs::path cp = dir / ("sensor_" + std::to_string(sid) + ".prc");
      write_point_cloud(cloud, cp);
      fm.sensors.push_back({sid, cp});
      summary.points += cloud.size();
    }
    Annotation ann;
    for (std::size_t k = 0; k < f.persons.size(); ++k) {
      Skeleton s = f.persons[k].skeleton;
      s.person_id = int(k);
      ann.persons.push_back(std::move(s));
    }
    fm.annotation_path = dir / "annotation.json";
    write_annotation(ann, schema, fm.annotation_path);
    write_frame_manifest(fm, dir / "frame.json");
    manifest.frames.push_back(dir / "frame.json");
    summary.persons += int(f.persons.size());
  }
  summary.frames = int(frames.size());
  summary.manifest = out_dir / "manifest.json";
  write_dataset_manifest(manifest, summary.manifest);
  return summary;
}

}  // namespace prcnn
