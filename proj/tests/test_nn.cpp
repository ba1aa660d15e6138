#include "gradient_checks.hpp"

#include "prcnn/nn.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace prcnn;
using namespace prcnn::nn;

namespace {

using T = Tensor<double>;
using V = Var<double>;

using testutil::away_from_zero;
using testutil::randn;

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("affine forward") {
  Tape<double> tape;
  const V x = tape.leaf(T::from({1, 2}, {1, 2}));
  const V w = tape.leaf(T::from({2, 2}, {1, 0, 0, 1}));
  const V b = tape.leaf(T::from({2}, {3, 4}));
  const V y = affine(x, w, b);
  CHECK(y.value().data[0] == 4.0);
  CHECK(y.value().data[1] == 6.0);
  CHECK_THROWS_AS(affine(x, tape.leaf(T(Shape{3, 2})), b), DimensionError);
}

TEST_CASE("conv3d forward cases") {
  Tape<double> tape;
  T x(Shape{1, 3, 3, 3});
  x.data.setOnes();
  T w(Shape{1, 1, 3, 3, 3});
  w.data.setOnes();
  const V y = conv3d(tape.leaf(x), tape.leaf(w), tape.leaf(T(Shape{1})));
  REQUIRE(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.value().data[0] == 27.0);

  std::mt19937_64 rng(1);
  const T in = randn({3, 2, 2, 2}, rng);
  T eye(Shape{3, 3, 1, 1, 1});
  for (int c = 0; c < 3; ++c) eye.data[c * 3 + c] = 1.0;
  const V id = conv3d(tape.leaf(in), tape.leaf(eye), tape.leaf(T(Shape{3})));
  CHECK(id.value().data == in.data);

  // (4 + 2 - 3) / 2 + 1 is not integral
  CHECK_THROWS_AS(conv3d(tape.leaf(T(Shape{1, 4, 4, 4})), tape.leaf(T(Shape{1, 1, 3, 3, 3})), tape.leaf(T(Shape{1})), 2, 1),
                  ConfigError);
}

TEST_CASE("elementwise and pooling forward") {
  Tape<double> tape;
  const V r = relu(tape.leaf(T::from({2}, {-1, 2})));
  CHECK(r.value().data[0] == 0.0);
  CHECK(r.value().data[1] == 2.0);
  // one real point, zero padding, positive features
  const V m = max_over_axis(tape.leaf(T::from({3, 2}, {0.5, 0.7, 0, 0, 0, 0})), 0);
  CHECK(m.value().data[0] == 0.5);
  CHECK(m.value().data[1] == 0.7);
  CHECK_THROWS_AS(max_over_axis(tape.leaf(T(Shape{2, 2})), 2), DimensionError);
  CHECK(sigmoid(tape.leaf(T::from({1}, {0}))).value().data[0] == 0.5);
}

TEST_CASE("loss values") {
  Tape<double> tape;
  CHECK(cross_entropy(tape.leaf(T::from({1, 2}, {0, 0})), {1}).value().data[0] == doctest::Approx(std::log(2.0)));
  CHECK(cross_entropy(tape.leaf(T::from({1, 2}, {-30, 30})), {1}).value().data[0] < 1e-12);
  CHECK(smooth_l1_value(0.5) == 0.125);
  CHECK(smooth_l1_value(2.0) == 1.5);
  const T p = T::from({2}, {0.5, 2});
  CHECK(smooth_l1(tape.leaf(p), T(Shape{2})).value().data[0] == 1.625);
  CHECK(smooth_l1(tape.leaf(p), p).value().data[0] == 0.0);
  CHECK(mse(tape.leaf(T::from({2}, {0, 0})), T::from({2}, {1, 1})).value().data[0] == 1.0);
  CHECK_THROWS_AS(mse(tape.leaf(T(Shape{2})), T(Shape{3})), DimensionError);
  CHECK_THROWS_AS(smooth_l1(tape.leaf(T(Shape{2})), T(Shape{3})), DimensionError);
}

TEST_CASE("mse gradient is 2(pred - target)/n") {
  Tape<double> tape;
  const V p = tape.leaf(T::from({3}, {1, 2, 3}), true);
  const T t = T::from({3}, {0, 0, 0});
  tape.backward(mse(p, t));
  const auto g = tape.grad(p);
  for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(2.0 * (i + 1) / 3.0));
}

TEST_CASE("finite-difference agreement of every kernel at 10 random points") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    GradCheckOptions opt;
    opt.seed = 1000 + std::uint64_t(trial);
    for (const auto& [name, err] : testutil::kernel_gradient_errors(rng, opt)) {
      CAPTURE(trial);
      CAPTURE(name);
      CHECK(err < kTol);
    }
  }
}

TEST_CASE("composed chain agrees with finite differences") {
  std::mt19937_64 rng(8);
  const auto op = [](Tape<double>&, const std::vector<V>& v) {
    return sum(relu(affine(sigmoid(v[0]), v[1], v[2])));
  };
  T b = randn({3}, rng);
  b.data.array() += 2.0;  // keeps relu inputs positive
  CHECK(finite_difference_check(op, {randn({4, 2}, rng), randn({2, 3}, rng, 0.3), b}) < kTol);
}

TEST_CASE("gradient check detects a corrupted backward") {
  std::mt19937_64 rng(9);
  const auto broken = [](Tape<double>& tape, const std::vector<V>& v) {
    V x = v[0];
    T out = x.value();
    out.data = out.data.array().square();
    // claims d(x^2)/dx = x instead of 2x
    return tape.record(std::move(out), {x}, [x](Tape<double>& t, std::size_t self) {
      t.grad_accumulator(x.id) += t.output_grad(self).cwiseProduct(t.value(x).data);
    });
  };
  CHECK(finite_difference_check(broken, {away_from_zero({5}, rng)}) > 1e-2);
}

TEST_CASE("max pooling routes ties to the first index") {
  Tape<double> tape;
  const V x = tape.leaf(T::from({3, 1}, {2, 2, 1}), true);
  tape.backward(sum(max_over_axis(x, 0)));
  const auto g = tape.grad(x);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);
}

TEST_CASE("adam") {
  AdamConfig cfg;
  {
    ParameterMap<double> p{{"w", T::from({2}, {1.5, -2})}};
    AdamState<double> s;
    GradientMap<double> g{{"w", Eigen::VectorXd::Zero(2)}};
    adam_step(p, g, s, cfg);
    CHECK(p["w"].data == Eigen::Vector2d(1.5, -2));
  }
  {
    ParameterMap<double> p{{"w", T::from({1}, {1})}};
    AdamState<double> s;
    cfg.lr = 0.1;
    adam_step(p, GradientMap<double>{{"w", Eigen::VectorXd::Constant(1, 2.0)}}, s, cfg);
    CHECK(p["w"].data[0] < 1.0);
  }
  {
    // f(a, b) = (a - 1)^2 + 3 (b + 2)^2
    ParameterMap<double> p{{"w", T::from({2}, {4, 3})}};
    AdamState<double> s;
    cfg.lr = 0.1;
    Eigen::Vector2d grad;
    for (int i = 0; i < 200; ++i) {
      const auto& w = p["w"].data;
      grad = Eigen::Vector2d(2 * (w[0] - 1), 6 * (w[1] + 2));
      adam_step(p, GradientMap<double>{{"w", grad}}, s, cfg);
    }
    const auto& w = p["w"].data;
    grad = Eigen::Vector2d(2 * (w[0] - 1), 6 * (w[1] + 2));
    CHECK(grad.norm() < 1e-3);
  }
}
