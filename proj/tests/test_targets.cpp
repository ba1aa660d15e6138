#include "prcnn/errors.hpp"
#include "prcnn/targets.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace prcnn;

namespace {

Skeleton skeleton(const JointSchema& schema, std::initializer_list<std::pair<const char*, Point3>> joints) {
  Skeleton s;
  s.joints.assign(schema.size(), std::nullopt);
  for (const auto& [name, p] : joints) s.joints[*schema.index_of(name)] = p;
  return s;
}

}  // namespace

TEST_CASE("skeleton to cylinder") {
  const auto schema = JointSchema::cmu();
  const auto s = skeleton(schema, {{"Neck", {1, 1.5, 2}}, {"Headtop", {1, 1.7, 2}}, {"Lankle", {1.3, 0.1, 2}}});
  const Cylinder c = skeleton_to_cylinder(s, schema, 0.0);
  CHECK(c.axis_x == 1.0);
  CHECK(c.axis_z == 2.0);
  CHECK(c.top_y == 1.7);
  CHECK(c.radius == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(c.bottom_y == 0.0);

  const Cylinder neck_only = skeleton_to_cylinder(skeleton(schema, {{"Neck", {1, 1.5, 2}}}), schema, 0.0);
  CHECK(neck_only.radius == kMinimumRadius);
  CHECK(neck_only.top_y == 1.5);

  auto moved = s;
  for (auto& j : moved.joints)
    if (j) *j += Point3(0.4, 0.0, -0.7);
  const Cylinder m = skeleton_to_cylinder(moved, schema, 0.0);
  CHECK(m.axis_x == doctest::Approx(1.4));
  CHECK(m.axis_z == doctest::Approx(1.3));
  CHECK(m.radius == doctest::Approx(c.radius));

  CHECK_THROWS_AS(skeleton_to_cylinder(skeleton(schema, {{"Headtop", {1, 1.7, 2}}}), schema, 0.0), AnnotationError);
}

TEST_CASE("voxel targets and encoding") {
  const Workspace ws;
  const Eigen::Index id = linear_index(3, 6, 5, ws.counts);
  const Point3 ctr = voxel_center(id, ws);
  const Cylinder at_center{ctr.x(), ctr.z(), ctr.y(), 0.3, 0.0};
  const std::vector<Cylinder> one{at_center};
  const VoxelTargets t = assign_voxel_targets(one, ws);
  CHECK(t.positive_count() == 1);
  CHECK(t.labels[std::size_t(id)] == 1);
  CHECK(t.reg.col(id).norm() < 1e-12);

  const Cylinder d = decode_cylinder(id, Eigen::Vector4d(0, 0, 0, 0), ws);
  CHECK(d.axis_x == ctr.x());
  CHECK(d.axis_z == ctr.z());
  CHECK(d.top_y == ctr.y());
  CHECK(d.radius == 0.3);

  const Cylinder off = decode_cylinder(id, Eigen::Vector4d(0.5, -0.5, 0, 0), ws);
  CHECK(off.axis_x - ctr.x() == doctest::Approx(0.125));
  CHECK(off.axis_z - ctr.z() == doctest::Approx(-0.125));

  const std::vector<Cylinder> outside{{1.0, 1.0, 2.5, 0.3, 0.0}};
  const VoxelTargets skipped = assign_voxel_targets(outside, ws);
  CHECK(skipped.positive_count() == 0);
  CHECK(skipped.warnings.size() == 1);
}

TEST_CASE("encode/decode round trip over random cylinders") {
  const Workspace ws;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> x(0.3, 3.7), z(0.3, 2.7), top(0.5, 1.95), r(0.05, 0.6);
  for (int i = 0; i < 100; ++i) {
    const Cylinder c{x(rng), z(rng), top(rng), r(rng), 0.0};
    const std::vector<Cylinder> one{c};
    const VoxelTargets t = assign_voxel_targets(one, ws);
    REQUIRE(t.positive_count() == 1);
    const Eigen::Index id = std::find(t.labels.begin(), t.labels.end(), 1) - t.labels.begin();
    const Cylinder back = decode_cylinder(id, t.reg.col(id), ws);
    CHECK(std::abs(back.axis_x - c.axis_x) < 1e-6);
    CHECK(std::abs(back.axis_z - c.axis_z) < 1e-6);
    CHECK(std::abs(back.top_y - c.top_y) < 1e-6);
    CHECK(std::abs(back.radius - c.radius) < 1e-6);
  }
}

TEST_CASE("colliding tops keep the larger cylinder") {
  const Workspace ws;
  const std::vector<Cylinder> two{{1.01, 1.01, 1.6, 0.2, 0.0}, {1.05, 1.05, 1.62, 0.3, 0.0}, {3.0, 2.0, 1.7, 0.25, 0.0}};
  const VoxelTargets t = assign_voxel_targets(two, ws);
  CHECK(t.positive_count() == 2);
  const Eigen::Index id = assign_voxel_index(two[0].top_center(), ws).id;
  CHECK(t.owner[std::size_t(id)] == 1);
  CHECK(t.warnings.size() == 1);
}

TEST_CASE("training voxel sampling") {
  const std::size_t n = 4 * 1536;
  std::mt19937_64 rng(2);
  std::vector<std::uint8_t> labels(n, 0), occupied(n, 0);
  const std::vector<Eigen::Index> pos{10, 500, 1600, 3000, 6000};
  for (auto p : pos) labels[std::size_t(p)] = occupied[std::size_t(p)] = 1;
  for (std::size_t i = 0; i < n; i += 7) occupied[i] = 1;

  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = sample_training_voxels(labels, occupied, rng);
    REQUIRE(s.size() <= 15);
    REQUIRE(std::is_sorted(s.begin(), s.end()));
    REQUIRE(std::set<Eigen::Index>(s.begin(), s.end()).size() == s.size());
    for (auto p : pos) REQUIRE(std::binary_search(s.begin(), s.end(), p));
    for (auto i : s) REQUIRE(i < Eigen::Index(n));
    // the non-positive members come from the occupied group or the uniform group
    std::size_t occupied_members = 0;
    for (auto i : s) occupied_members += occupied[std::size_t(i)] && !labels[std::size_t(i)];
    REQUIRE(s.size() >= 5 + std::min<std::size_t>(occupied_members, 5));
  }
  const std::vector<std::uint8_t> none(n, 0);
  CHECK(sample_training_voxels(none, occupied, rng).size() == 32);
}
