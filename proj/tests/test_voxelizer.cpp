#include "oracles.hpp"
#include "test_util.hpp"

#include "prcnn/errors.hpp"
#include "prcnn/voxelizer.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>

using namespace prcnn;

namespace {

std::vector<std::array<float, 3>> sorted(std::vector<Eigen::Vector3f> v) {
  std::vector<std::array<float, 3>> out;
  for (const auto& p : v) out.push_back({p.x(), p.y(), p.z()});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("voxel index formulas") {
  const Workspace ws;
  const VoxelIndex idx = assign_voxel_index({0.6, 0.1, 2.9}, ws);
  CHECK(idx.ix == 2);
  CHECK(idx.iy == 0);
  CHECK(idx.iz == 11);
  CHECK(idx.id == 11 + 0 * 12 + 2 * 12 * 8);
  CHECK(assign_voxel_index({0, 0, 0}, ws).id == 0);
  CHECK(linear_index(2, 1, 3, ws.counts) == 207);
  CHECK_THROWS_AS(assign_voxel_index({4.0, 0.5, 0.5}, ws), ContractError);
  CHECK_THROWS_AS(assign_voxel_index({-0.01, 0.5, 0.5}, ws), ContractError);
}

TEST_CASE("linearization is a bijection over the grid") {
  const Workspace ws;
  std::vector<bool> seen(std::size_t(ws.voxel_count()), false);
  for (int x = 0; x < ws.counts.x(); ++x)
    for (int y = 0; y < ws.counts.y(); ++y)
      for (int z = 0; z < ws.counts.z(); ++z) {
        const auto id = linear_index(x, y, z, ws.counts);
        REQUIRE(id >= 0);
        REQUIRE(id < ws.voxel_count());
        CHECK_FALSE(seen[std::size_t(id)]);
        seen[std::size_t(id)] = true;
        const VoxelIndex d = decode_linear_index(id, ws.counts);
        CHECK(d.ix == x);
        CHECK(d.iy == y);
        CHECK(d.iz == z);
      }
}

TEST_CASE("relative coordinates") {
  const Workspace ws;
  const Point3 p(0.6, 0.1, 2.9);
  const auto idx = assign_voxel_index(p, ws);
  CHECK(voxel_corner(idx, ws).isApprox(Point3(0.5, 0.0, 2.75)));
  const auto r = relative_coordinates(p, idx, ws);
  CHECK(r.isApprox(Eigen::Vector3d(0.1, 0.1, 0.15), 1e-12));
  CHECK((voxel_corner(idx, ws) + r - p).norm() < 1e-12);
  const Point3 corner(0.75, 0.5, 1.25);
  CHECK(relative_coordinates(corner, assign_voxel_index(corner, ws), ws).norm() == 0.0);
}

TEST_CASE("empty cloud and invalid budget") {
  const Workspace ws;
  const VoxelizedFrame f = build_voxel_tensor(PointCloud{}, ws, 64);
  CHECK(f.occupied_ids.empty());
  CHECK(f.data.size() == 3 * 64 * ws.voxel_count());
  CHECK(f.data.cwiseAbs().maxCoeff() == 0.0f);
  CHECK_THROWS_AS(build_voxel_tensor(PointCloud{}, ws, 0), ConfigError);
}

TEST_CASE("a crowded voxel keeps exactly the first T shuffled points") {
  const Workspace ws;
  std::mt19937_64 rng(5);
  const auto c = testutil::random_cloud(rng, 100, {1.0, 1.0, 1.0}, {1.24, 1.24, 1.24});
  const PointCloud shuffled = shuffle(c, 11);
  const VoxelizedFrame f = build_voxel_tensor(c, ws, 64, 11);
  const Eigen::Index v = assign_voxel_index({1.1, 1.1, 1.1}, ws).id;
  REQUIRE(f.occupied_ids == std::vector<Eigen::Index>{v});
  CHECK(f.count_per_voxel[std::size_t(v)] == 64);
  const Point3 corner = voxel_corner(decode_linear_index(v, ws.counts), ws);
  for (int t = 0; t < 64; ++t)
    for (int a = 0; a < 3; ++a) CHECK(f.at(a, t, v) == float(shuffled.point(t)[a] - corner[a]));
}

TEST_CASE("voxel tensor matches the grouping oracle") {
  const Workspace ws;
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    // clustered cloud so that some voxels overflow T
    auto c = testutil::random_cloud(rng, 3000, {0, 0, 0}, {4, 2, 3});
    auto dense = testutil::random_cloud(rng, 400, {2.0, 1.0, 1.0}, {2.3, 1.3, 1.3});
    c = fuse(std::vector<PointCloud>{c, dense});
    const int T = trial % 2 ? 64 : 8;
    const std::uint64_t seed = 100 + std::uint64_t(trial);
    const VoxelizedFrame f = build_voxel_tensor(c, ws, T, seed);
    const auto ref = oracle::group_voxels(shuffle(c, seed), ws, T);

    std::vector<Eigen::Index> ids;
    for (const auto& [id, g] : ref) ids.push_back(id);
    CHECK(f.occupied_ids == ids);
    for (Eigen::Index v = 0; v < f.voxel_count(); ++v) {
      auto it = ref.find(long(v));
      const int expect = it == ref.end() ? 0 : int(std::min<long>(it->second.count, T));
      REQUIRE(f.count_per_voxel[std::size_t(v)] == expect);
      std::vector<Eigen::Vector3f> stored;
      for (int t = 0; t < T; ++t) {
        const Eigen::Vector3f s = f.slot(t, v);
        if (t < expect) {
          stored.push_back(s);
          for (int a = 0; a < 3; ++a) {
            CHECK(s[a] >= 0.0f);
            CHECK(double(s[a]) < ws.voxel_size[a]);
          }
        } else {
          CHECK(s.cwiseAbs().sum() == 0.0f);
        }
      }
      if (it != ref.end()) CHECK(sorted(stored) == sorted(it->second.stored));
    }
  }
}
