#include "miniature.hpp"
#include "test_util.hpp"

#include "prcnn/checkpoint.hpp"
#include "prcnn/network.hpp"
#include "prcnn/nn/gradcheck.hpp"
#include "prcnn/voxelizer.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

using namespace prcnn;

namespace {

// Small-width model on the default 16x8x12 grid.
ModelConfig narrow() {
  ModelConfig c;
  c.points_per_voxel = 8;
  c.vfe1_out = 8;
  c.vfe2_out = 8;
  c.fc_out = 8;
  c.unet_growth = 4;
  c.unet_channels = 8;
  c.point_mlp = {8, 16};
  c.global_mlp = {8};
  return c;
}

Workspace mini_workspace() { return Workspace::make({0, 0, 0}, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}); }

// Reorders the stored points inside every voxel by a random permutation.
VoxelizedFrame permute_within_voxels(const VoxelizedFrame& f, std::mt19937_64& rng) {
  VoxelizedFrame g = f;
  for (Eigen::Index v = 0; v < f.voxel_count(); ++v) {
    const int n = f.count_per_voxel[std::size_t(v)];
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int t = 0; t < n; ++t)
      for (int c = 0; c < 3; ++c) g.at(c, t, v) = f.at(c, perm[std::size_t(t)], v);
  }
  return g;
}

}  // namespace

TEST_CASE("weight layout and initialization") {
  const ModelConfig cfg;
  const auto w = init_weights<float>(cfg, 1);
  CHECK(w.at("vfe1.W").shape == nn::Shape{3, 16});
  CHECK(w.at("vfe2.W").shape == nn::Shape{32, 32});
  CHECK(w.at("vfe.fc.W").shape == nn::Shape{64, 64});
  CHECK(w.at("head.cls.w").shape == nn::Shape{2, 64, 1, 1, 1});
  CHECK(w.at("head.reg.w").shape == nn::Shape{4, 64, 1, 1, 1});
  CHECK(w.at("pointnet.mlp2.W").shape == nn::Shape{128, 1024});
  CHECK(w.at("pointnet.out.W").shape == nn::Shape{256, 33});
  CHECK(w.at("vfe1.b").data.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(init_weights<float>(cfg, 1).at("unet.enc0.conv1.w").data == w.at("unet.enc0.conv1.w").data);
  CHECK(init_weights<float>(cfg, 2).at("unet.enc0.conv1.w").data != w.at("unet.enc0.conv1.w").data);

  ModelConfig bad;
  bad.vfe1_out = 31;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ModelConfig{};
  bad.grid = Eigen::Vector3i(16, 6, 12);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("vfe layer shapes and single-point aggregate") {
  const ModelConfig cfg;
  const Workspace ws;
  std::mt19937_64 rng(1);
  const auto cloud = testutil::random_cloud(rng, 2000, {0, 0, 0}, {4, 2, 3});
  const VoxelizedFrame f = build_voxel_tensor(cloud, ws, 64, 3);
  const auto w = init_weights<float>(cfg, 1);
  nn::Tape<float> tape;
  const auto b = bind_weights(tape, w);
  nn::Tensor<float> x(nn::Shape{3, 64, ws.voxel_count()}, f.data);
  const auto y = vfe_layer(tape.leaf(x), f.count_per_voxel, detail::param(b, "vfe1.W"), detail::param(b, "vfe1.b"));
  CHECK(y.shape() == nn::Shape{32, 64, 1536});

  // a voxel with one point: the aggregate half equals the point's own transformed half
  Eigen::Index single = -1;
  for (Eigen::Index v = 0; v < f.voxel_count(); ++v)
    if (f.count_per_voxel[std::size_t(v)] == 1) single = v;
  REQUIRE(single >= 0);
  const auto& yd = y.value().data;
  const auto at = [&](Eigen::Index c, Eigen::Index t) { return yd[(c * 64 + t) * 1536 + single]; };
  for (int c = 0; c < 16; ++c) CHECK(at(c, 0) == at(16 + c, 0));
  for (int c = 0; c < 32; ++c) CHECK(at(c, 1) == 0.0f);
}

TEST_CASE("encoder, aggregator and heads on the default grid") {
  const ModelConfig cfg;
  const Workspace ws;
  const auto w = init_weights<float>(cfg, 2);
  {
    nn::Tape<float> tape;
    const auto out = detect(tape, build_voxel_tensor(PointCloud{}, ws, 64), bind_weights(tape, w), cfg);
    CHECK(out.volume.shape() == nn::Shape{64, 16, 8, 12});
    CHECK(out.volume.value().data.cwiseAbs().maxCoeff() == 0.0f);
    CHECK(out.features.shape() == nn::Shape{64, 16, 8, 12});
    CHECK(out.heads.scores.shape() == nn::Shape{2, 16, 8, 12});
    CHECK(out.heads.cylinders.shape() == nn::Shape{4, 16, 8, 12});
  }
  std::mt19937_64 rng(3);
  nn::Tape<float> tape;
  const auto b = bind_weights(tape, w);
  const auto f = build_voxel_tensor(testutil::random_cloud(rng, 3000, {0, 0, 0}, {4, 2, 3}), ws, 64, 1);
  const auto out = detect(tape, f, b, cfg);
  CHECK(out.features.value().data.allFinite());
  VoxelizedFrame wrong = f;
  wrong.points_per_voxel = 32;
  CHECK_THROWS_AS(encode_voxels(tape, wrong, b, cfg), ConfigError);
}

TEST_CASE("aggregator receptive field extends past the impulse voxel") {
  const ModelConfig cfg = narrow();
  const auto w = init_weights<float>(cfg, 4);
  nn::Tape<float> tape;
  const auto b = bind_weights(tape, w);
  nn::Tensor<float> base(nn::Shape{8, 16, 8, 12});
  nn::Tensor<float> impulse = base;
  const Eigen::Index cx = 8, cy = 4, cz = 6;
  for (int c = 0; c < 8; ++c) impulse.data[((c * 16 + cx) * 8 + cy) * 12 + cz] = 1.0f;
  const auto y0 = aggregate(tape.leaf(base), b, cfg).value();
  const auto y1 = aggregate(tape.leaf(impulse), b, cfg).value();
  // count voxels other than the impulse whose features changed
  int changed = 0, far = 0;
  for (Eigen::Index x = 0; x < 16; ++x)
    for (Eigen::Index y = 0; y < 8; ++y)
      for (Eigen::Index z = 0; z < 12; ++z) {
        if (x == cx && y == cy && z == cz) continue;
        bool diff = false;
        for (int c = 0; c < 8; ++c) {
          const auto i = ((c * 16 + x) * 8 + y) * 12 + z;
          diff = diff || y0.data[i] != y1.data[i];
        }
        changed += diff;
        far += diff && std::max({std::abs(x - cx), std::abs(y - cy), std::abs(z - cz)}) >= 3;
      }
  CHECK(changed > 0);
  CHECK(far > 0);
  CHECK_THROWS_AS(aggregate(tape.leaf(nn::Tensor<float>(nn::Shape{8, 6, 8, 12})), b, cfg), ConfigError);
}

TEST_CASE("heads share the trunk") {
  const ModelConfig cfg = narrow();
  const Workspace ws;
  std::mt19937_64 rng(5);
  const auto f = build_voxel_tensor(testutil::random_cloud(rng, 2000, {0, 0, 0}, {4, 2, 3}), ws, 8, 1);
  auto w = init_weights<float>(cfg, 5);
  nn::Tape<float> t0;
  const auto a = detect(t0, f, bind_weights(t0, w), cfg);
  w.at("unet.enc0.conv0.w").data.array() += 0.05f;
  nn::Tape<float> t1;
  const auto c = detect(t1, f, bind_weights(t1, w), cfg);
  CHECK(a.heads.scores.value().data != c.heads.scores.value().data);
  CHECK(a.heads.cylinders.value().data != c.heads.cylinders.value().data);
}

TEST_CASE("encoder output is invariant to within-voxel order and to empty voxels") {
  const ModelConfig cfg = narrow();
  const Workspace ws;
  std::mt19937_64 rng(6);
  const auto w = init_weights<float>(cfg, 6);
  // A sparse cloud so that each voxel holds at most T points.
  const auto f = build_voxel_tensor(testutil::random_cloud(rng, 1500, {0, 0, 0}, {4, 2, 3}), ws, 8, 2);
  nn::Tape<float> t0;
  const auto ref = encode_voxels(t0, f, bind_weights(t0, w), cfg).value().data;
  for (int trial = 0; trial < 5; ++trial) {
    nn::Tape<float> t;
    const auto g = permute_within_voxels(f, rng);
    CHECK(encode_voxels(t, g, bind_weights(t, w), cfg).value().data == ref);
  }
  for (Eigen::Index v = 0; v < f.voxel_count(); ++v)
    if (f.count_per_voxel[std::size_t(v)] == 0) {
      for (int c = 0; c < cfg.fc_out; ++c) CHECK(ref[c * f.voxel_count() + v] == 0.0f);
    }
}

TEST_CASE("pointnet output shape, permutation and duplication invariance") {
  const ModelConfig cfg;
  const auto w = init_weights<float>(cfg, 7);
  std::mt19937_64 rng(7);
  Eigen::Matrix3Xf pts = Eigen::Matrix3Xf::Random(3, 200);
  nn::Tape<float> tape;
  const auto b = bind_weights(tape, w);
  const auto y = pointnet_regress<float>(tape, pts, b, cfg);
  CHECK(y.shape() == nn::Shape{11, 3});

  std::vector<Eigen::Index> perm(200);
  std::iota(perm.begin(), perm.end(), Eigen::Index(0));
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::Matrix3Xf shuffled(3, 200), doubled(3, 400);
  for (Eigen::Index i = 0; i < 200; ++i) shuffled.col(i) = pts.col(perm[std::size_t(i)]);
  doubled << pts, pts;
  CHECK(pointnet_regress<float>(tape, shuffled, b, cfg).value().data == y.value().data);
  CHECK(pointnet_regress<float>(tape, doubled, b, cfg).value().data == y.value().data);

  CHECK_THROWS_AS(pointnet_regress<float>(tape, Eigen::Matrix3Xf::Random(3, 31), b, cfg), ContractError);
  CHECK_THROWS_AS(pointnet_regress<float>(tape, Eigen::Matrix3Xf::Random(3, 1025), b, cfg), ContractError);
}

TEST_CASE("all four outputs of the miniature model are differentiable in every weight") {
  const auto mini = testutil::live_miniature(8);
  std::vector<std::string> names;
  std::vector<nn::Tensor<double>> inputs;
  for (const auto& [name, t] : mini.weights) {
    names.push_back(name);
    inputs.push_back(t);
  }
  const auto op = [&](nn::Tape<double>& tape, const std::vector<nn::Var<double>>& v) {
    Bound<double> b;
    for (std::size_t i = 0; i < names.size(); ++i) b.emplace(names[i], v[i]);
    const auto d = detect(tape, mini.frame, b, mini.cfg);
    const auto j = pointnet_regress<double>(tape, mini.instances[0], b, mini.cfg);
    return nn::concat<double>({nn::reshape(d.volume, {d.volume.value().size()}),
                               nn::reshape(d.heads.scores, {d.heads.scores.value().size()}),
                               nn::reshape(d.heads.cylinders, {d.heads.cylinders.value().size()}),
                               nn::reshape(j, {j.value().size()})},
                              0);
  };
  nn::GradCheckOptions opt;
  opt.directions = 3;
  CHECK(nn::finite_difference_check(op, inputs, opt) < 1e-4);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto w = init_weights<float>(ModelConfig{}, 9);
  const auto dir = testutil::scratch_dir("ckpt");
  save_checkpoint(w, dir / "m.prcw");
  const auto r = load_checkpoint(dir / "m.prcw");
  REQUIRE(r.size() == w.size());
  for (const auto& [name, t] : w) {
    CHECK(r.at(name).shape == t.shape);
    CHECK(std::memcmp(r.at(name).data.data(), t.data.data(), sizeof(float) * std::size_t(t.size())) == 0);
  }
}
