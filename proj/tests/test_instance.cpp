#include "oracles.hpp"
#include "test_util.hpp"

#include "prcnn/errors.hpp"
#include "prcnn/instance.hpp"
#include "prcnn/metrics.hpp"
#include "prcnn/targets.hpp"
#include "prcnn/voxelizer.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace prcnn;

TEST_CASE("decode detections") {
  const Workspace ws;
  const Eigen::Index nv = ws.voxel_count();
  Eigen::VectorXd prob = Eigen::VectorXd::Constant(nv, 0.1);
  const Eigen::Matrix4Xd reg = Eigen::Matrix4Xd::Zero(4, nv);
  CHECK(decode_detections(prob, reg, ws, 0.5).empty());

  prob[77] = 0.9;
  const auto one = decode_detections(prob, reg, ws, 0.5);
  REQUIRE(one.size() == 1);
  const Point3 c = voxel_center(77, ws);
  CHECK(one[0].score == 0.9);
  CHECK(one[0].cylinder.axis_x == c.x());
  CHECK(one[0].cylinder.axis_z == c.z());
  CHECK(one[0].cylinder.top_y == c.y());
  CHECK(one[0].cylinder.radius == 0.3);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (Eigen::Index v = 0; v < nv; ++v) prob[v] = u(rng);
  const auto many = decode_detections(prob, reg, ws, 0.5);
  CHECK(std::is_sorted(many.begin(), many.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; }));

  Eigen::Matrix2Xd logits(2, 3);
  logits << 0, 1, -2, 0, -1, 2;
  const Eigen::VectorXd p = positive_probability(logits);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[2] == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))));
}

TEST_CASE("nms") {
  const Cylinder a{1, 1, 1.7, 0.3, 0}, far{3, 2, 1.7, 0.3, 0};
  const auto same = nms({{a, 0.9, 0}, {a, 0.8, 1}});
  REQUIRE(same.size() == 1);
  CHECK(same[0].score == 0.9);
  CHECK(nms({{a, 0.9, 0}, {far, 0.8, 1}}).size() == 2);

  // chain: b overlaps a and c, a and c barely overlap
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> x(0.5, 1.5), r(0.2, 0.4), h(1.4, 1.9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Detection> dets;
    for (int k = 0; k < 6; ++k) dets.push_back({{x(rng), x(rng), h(rng), r(rng), 0.0}, 1.0 - 0.1 * k, k});
    // brute-force greedy
    std::vector<bool> removed(dets.size(), false);
    std::vector<Eigen::Index> expect;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (removed[i]) continue;
      expect.push_back(dets[i].voxel_id);
      for (std::size_t j = i + 1; j < dets.size(); ++j)
        if (cylinder_iou(dets[i].cylinder, dets[j].cylinder) > 0.3) removed[j] = true;
    }
    std::vector<Eigen::Index> got;
    for (const auto& d : nms(dets, 0.3)) got.push_back(d.voxel_id);
    CHECK(got == expect);
  }
}

TEST_CASE("cylinder membership and extraction") {
  const Cylinder c{2.0, 1.5, 1.8, 0.3, 0.0};
  CHECK(points_in_cylinder(PointCloud::from_points({{2.0, 0.9, 1.5}}), c).size() == 1);
  CHECK(points_in_cylinder(PointCloud::from_points({{2.0 + 1.01 * 0.3, 0.9, 1.5}}), c).empty());

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto cloud = testutil::random_cloud(rng, 5000, {1.5, -0.1, 1.0}, {2.5, 2.0, 2.0});
    const auto idx = points_in_cylinder(cloud, c);
    std::vector<Eigen::Index> expect;
    for (Eigen::Index i = 0; i < cloud.size(); ++i)
      if (oracle::in_cylinder(c, cloud.point(i))) expect.push_back(i);
    CHECK(idx == expect);

    const auto crop = extract_instance_points(cloud, c, rng);
    REQUIRE(crop);
    CHECK(crop->world.cols() == std::min<Eigen::Index>(Eigen::Index(expect.size()), 1024));
    for (Eigen::Index k = 0; k < crop->world.cols(); ++k) {
      CHECK(oracle::in_cylinder(c, crop->world.col(k)));
      CHECK(crop->normalized.col(k).norm() <= std::hypot(1.0, c.radius / (0.5 * c.height())) + 1e-9);
    }
  }
  const auto sparse = PointCloud::from_points(std::vector<Point3>(31, Point3(2.0, 1.0, 1.5)));
  CHECK_FALSE(extract_instance_points(sparse, c, rng).has_value());
  const auto enough = PointCloud::from_points(std::vector<Point3>(32, Point3(2.0, 1.0, 1.5)));
  CHECK(extract_instance_points(enough, c, rng).has_value());
}

TEST_CASE("sphere normalization") {
  const Cylinder c{1.0, 2.0, 1.6, 0.3, 0.0};
  Eigen::Matrix3Xd p(3, 2);
  p.col(0) = c.center();
  p.col(1) = c.top_center();
  const Eigen::Matrix3Xd q = sphere_normalize(p, c);
  CHECK(q.col(0).norm() < 1e-15);
  CHECK((q.col(1) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);
  CHECK((denormalize_joints(q, c) - p).norm() < 1e-12);
  CHECK((denormalize_joints(Eigen::Matrix3Xd::Zero(3, 1), c).col(0) - c.center()).norm() < 1e-15);

  const Eigen::Matrix3Xd r = Eigen::Matrix3Xd::Random(3, 50);
  CHECK((sphere_normalize(denormalize_joints(r, c), c) - r).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(sphere_normalize(p, Cylinder{1, 1, 0.0, 0.3, 0.0}), ContractError);
}

TEST_CASE("inference json layout") {
  const auto schema = JointSchema::mvor();
  PersonEstimate p;
  p.detection = {{1, 2, 1.7, 0.3, 0}, 0.8, 5};
  for (std::size_t k = 0; k < schema.size(); ++k) p.joints.push_back(Point3(double(k), 1, 2));
  const auto j = inference_to_json(3, {p}, schema);
  CHECK(j["frame_id"] == 3);
  REQUIRE(j["detections"].size() == 1);
  CHECK(j["detections"][0]["cylinder"]["radius"] == 0.3);
  CHECK(j["detections"][0]["joints"].size() == schema.size());
  CHECK(j["detections"][0]["joints"]["Relb"][0] == 7.0);
  CHECK(inference_to_json(0, {}, schema)["detections"].empty());
}
