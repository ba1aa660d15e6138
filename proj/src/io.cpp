#include "prcnn/io.hpp"

#include "binary.hpp"
#include "prcnn/errors.hpp"

#include <cmath>
#include <fstream>

namespace prcnn {

using nlohmann::json;

void write_point_cloud(const PointCloud& cloud, const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os.write("PRC1", 4);
  binary::put_u32(os, std::uint32_t(cloud.size()));
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    for (int a = 0; a < 3; ++a) binary::put_f32(os, cloud.points(a, i));
  if (!os) throw FormatError("failed writing " + path.string());
}

PointCloud read_point_cloud(const fs::path& path, std::int32_t sensor_id) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open point cloud: " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != "PRC1")
    throw FormatError("not a point-cloud file (bad magic): " + path.string());
  const std::uint32_t n = binary::get_u32(is, "point count in " + path.string());
  PointCloud cloud;
  cloud.points.resize(3, Eigen::Index(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      const float v = binary::get_f32(is, "points in " + path.string());
      if (!std::isfinite(v)) throw FormatError("non-finite coordinate in " + path.string());
      cloud.points(a, Eigen::Index(i)) = v;
    }
  }
  if (sensor_id >= 0) cloud.sensor_ids.assign(n, sensor_id);
  return cloud;
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw FormatError("failed writing " + path.string());
}

namespace {

fs::path relative_to(const fs::path& p, const fs::path& base_dir) {
  if (p.empty()) return p;
  std::error_code ec;
  auto r = fs::relative(p, base_dir, ec);
  return ec || r.empty() ? p : r;
}

fs::path resolve(const std::string& p, const fs::path& base_dir) {
  if (p.empty()) return {};
  fs::path q(p);
  return (q.is_absolute() ? q : base_dir / q).lexically_normal();
}

template <typename T>
T field(const json& j, const char* key, const fs::path& where) {
  if (!j.contains(key)) throw FormatError(where.string() + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(where.string() + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

void write_frame_manifest(const FrameManifest& frame, const fs::path& path) {
  const fs::path dir = fs::absolute(path).parent_path();
  json j;
  j["frame_id"] = frame.frame_id;
  j["sensors"] = json::array();
  for (const auto& s : frame.sensors)
    j["sensors"].push_back({{"sensor_id", s.sensor_id},
                            {"cloud_path", relative_to(fs::absolute(s.cloud_path), dir).generic_string()}});
  j["annotation_path"] =
      frame.annotation_path.empty() ? "" : relative_to(fs::absolute(frame.annotation_path), dir).generic_string();
  write_json(j, path);
}

FrameManifest read_frame_manifest(const fs::path& path) {
  const json j = read_json(path);
  const fs::path dir = fs::absolute(path).parent_path();
  FrameManifest f;
  f.frame_id = field<int>(j, "frame_id", path);
  for (const auto& s : field<json>(j, "sensors", path))
    f.sensors.push_back({field<int>(s, "sensor_id", path), resolve(field<std::string>(s, "cloud_path", path), dir)});
  if (j.contains("annotation_path") && !j["annotation_path"].is_null())
    f.annotation_path = resolve(j["annotation_path"].get<std::string>(), dir);
  return f;
}

json annotation_to_json(const Annotation& ann, const JointSchema& schema) {
  json persons = json::array();
  for (const auto& s : ann.persons) {
    if (s.joints.size() != schema.size()) throw AnnotationError("skeleton/schema joint count mismatch");
    json joints = json::object();
    for (std::size_t i = 0; i < schema.size(); ++i) {
      if (s.joints[i])
        joints[schema.names[i]] = {s.joints[i]->x(), s.joints[i]->y(), s.joints[i]->z()};
      else
        joints[schema.names[i]] = nullptr;
    }
    persons.push_back({{"id", s.person_id}, {"joints", joints}});
  }
  return {{"persons", persons}};
}

Annotation annotation_from_json(const json& j, const JointSchema& schema) {
  Annotation ann;
  if (!j.contains("persons") || !j["persons"].is_array()) throw FormatError("annotation: missing 'persons' array");
  for (const auto& p : j["persons"]) {
    Skeleton s;
    s.person_id = p.value("id", 0);
    s.joints.assign(schema.size(), std::nullopt);
    if (!p.contains("joints") || !p["joints"].is_object()) throw FormatError("annotation: person without 'joints'");
    for (const auto& [name, value] : p["joints"].items()) {
      const auto idx = schema.index_of(name);
      if (!idx) throw FormatError("annotation: joint '" + name + "' not in the joint schema");
      if (value.is_null()) continue;
      if (!value.is_array() || value.size() != 3) throw FormatError("annotation: joint '" + name + "' must be [x, y, z]");
      const Point3 q(value[0].get<double>(), value[1].get<double>(), value[2].get<double>());
      if (!q.allFinite()) throw FormatError("annotation: non-finite joint '" + name + "'");
      s.joints[*idx] = q;
    }
    ann.persons.push_back(std::move(s));
  }
  return ann;
}

void write_annotation(const Annotation& ann, const JointSchema& schema, const fs::path& path) {
  write_json(annotation_to_json(ann, schema), path);
}

Annotation read_annotation(const fs::path& path, const JointSchema& schema) {
  try {
    return annotation_from_json(read_json(path), schema);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_dataset_manifest(const DatasetManifest& m, const fs::path& path) {
  const fs::path dir = fs::absolute(path).parent_path();
  json j;
  j["version"] = 1;
  j["joint_names"] = m.joints.names;
  j["workspace"] = {{"origin", {m.origin.x(), m.origin.y(), m.origin.z()}},
                    {"extent", {m.extent.x(), m.extent.y(), m.extent.z()}}};
  j["cameras"] = m.cameras;
  j["frames"] = json::array();
  for (const auto& f : m.frames) j["frames"].push_back(relative_to(fs::absolute(f), dir).generic_string());
  write_json(j, path);
}

DatasetManifest read_dataset_manifest(const fs::path& path) {
  const json j = read_json(path);
  const fs::path dir = fs::absolute(path).parent_path();
  DatasetManifest m;
  m.joints.names = field<std::vector<std::string>>(j, "joint_names", path);
  const json ws = field<json>(j, "workspace", path);
  const auto o = field<std::vector<double>>(ws, "origin", path);
  const auto e = field<std::vector<double>>(ws, "extent", path);
  if (o.size() != 3 || e.size() != 3) throw FormatError(path.string() + ": workspace vectors must have 3 entries");
  m.origin = Point3(o[0], o[1], o[2]);
  m.extent = Eigen::Vector3d(e[0], e[1], e[2]);
  if (j.contains("cameras")) m.cameras = j["cameras"];
  for (const auto& f : field<std::vector<std::string>>(j, "frames", path)) m.frames.push_back(resolve(f, dir));
  return m;
}

}  // namespace prcnn
