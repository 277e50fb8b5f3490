#include <doctest.h>

#include "bridge.hpp"
#include "gnb/numerics.hpp"

using namespace gnb;

namespace {

FcParams<double> linear(std::initializer_list<double> row) {
  FcParams<double> p({{static_cast<Index>(row.size()), 1}});
  Index j = 0;
  for (double v : row) p.layer(0)(0, j++) = v;
  return p;
}

}  // namespace

TEST_CASE("init_params is deterministic per seed") {
  const std::vector<LayerDim> dims{{4, 8}, {8, 1}};
  CHECK(init_params<double>(dims, 7) == init_params<double>(dims, 7));
  CHECK_FALSE(init_params<double>(dims, 7) == init_params<double>(dims, 8));
}

TEST_CASE("init_params variance follows fan-in") {
  // 100 x 100 hidden layer: 10^4 draws at variance 2/100
  const Index m = 100;
  const auto p = init_params<double>({{m, m}, {m, 1}}, 11);
  const auto& w1 = p.layer(0);
  const double var1 = (w1.array() - w1.mean()).square().sum() / static_cast<double>(w1.size() - 1);
  CHECK(var1 == doctest::Approx(2.0 / m).epsilon(0.10));
  // last layer (1 x 10^4): variance 1/fan_in
  const Index wide = 10000;
  const auto q = init_params<double>({{1, wide}, {wide, 1}}, 3);
  const auto& w2 = q.layer(1);
  const double var2 = (w2.array() - w2.mean()).square().sum() / static_cast<double>(w2.size() - 1);
  CHECK(var2 == doctest::Approx(1.0 / static_cast<double>(wide)).epsilon(0.10));
}

TEST_CASE("zero dimension is a shape error") {
  CHECK_THROWS_AS(init_params<double>({{4, 0}}, 1), shape_error);
  CHECK_THROWS_AS(FcParams<double>(std::vector<LayerDim>{{2, 3}, {4, 1}}), shape_error);
}

TEST_CASE("fc_forward hand cases") {
  CHECK(fc_forward(linear({2, 3}), VectorXd::Ones(2)).output == 5.0);
  const auto p = init_params<double>(mlp_dims(6, 16, 3), 2);
  CHECK(fc_forward(p, VectorXd::Zero(6)).output == 0.0);
  CHECK_THROWS_AS(fc_forward(p, VectorXd::Zero(5)), shape_error);
}

TEST_CASE("fc_forward matches the straight-line oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = init_params<double>(mlp_dims(5, 12, 2 + trial % 3), rng);
    const VectorXd x = bridge::random_vector(5, rng);
    CHECK(std::abs(fc_forward(p, x).output - oracle::mlp(bridge::layers(p), bridge::vec(x))) < 1e-12);
  }
}

TEST_CASE("single layer output is positively homogeneous in the weights") {
  std::mt19937_64 rng(9);
  auto p = init_params<double>({{4, 1}}, rng);
  const VectorXd x = bridge::random_vector(4, rng);
  const double base = fc_forward(p, x).output;
  p.layer(0) *= 3.5;
  CHECK(fc_forward(p, x).output == doctest::Approx(3.5 * base).epsilon(1e-14));
}

TEST_CASE("fc_backward linear and zero-input cases") {
  const auto g = fc_backward(linear({2, 3}), fc_forward(linear({2, 3}), VectorXd::Ones(2)).cache);
  CHECK(g.values == VectorXd::Ones(2));

  const auto p = init_params<double>(mlp_dims(4, 8, 2), 3);
  const auto g0 = fc_backward(p, fc_forward(p, VectorXd::Zero(4)).cache);
  CHECK(g0.values.head(4 * 8).isZero(0.0));
}

TEST_CASE("fc_backward matches central finite differences") {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto dims = mlp_dims(4, 8, 2 + trial % 2);
    const auto p = init_params<double>(dims, rng);
    const VectorXd x = bridge::random_vector(4, rng);
    const auto g = fc_backward(p, fc_forward(p, x).cache);
    const auto fd = oracle::finite_difference(
        [&](const oracle::Vec& theta) {
          return fc_forward(FcParams<double>::unflatten(dims, bridge::eig(theta)), x).output;
        },
        bridge::vec(p.flatten()));
    worst = std::max(worst, oracle::max_rel_error(bridge::vec(g.values), fd));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("stale cache is a shape error") {
  const auto a = init_params<double>(mlp_dims(4, 8, 2), 1);
  const auto b = init_params<double>(mlp_dims(4, 6, 2), 1);
  CHECK_THROWS_AS(fc_backward(b, fc_forward(a, VectorXd::Ones(4)).cache), shape_error);
}

TEST_CASE("flatten and unflatten round-trip") {
  std::mt19937_64 rng(4);
  for (int depth = 1; depth <= 4; ++depth) {
    const auto p = init_params<double>(mlp_dims(3, 5, depth), rng);
    const auto q = FcParams<double>::unflatten(p.dims(), p.flatten());
    CHECK(q == p);
    CHECK(q.flatten() == p.flatten());
  }
  CHECK_THROWS_AS(FcParams<double>::unflatten(mlp_dims(3, 5, 2), VectorXd::Zero(3)), shape_error);
}

TEST_CASE("gd_step arithmetic") {
  auto p = linear({1.0});
  const Gradient<double> zero{p.dims(), VectorXd::Zero(1)};
  CHECK(gd_step(p, zero, 0.1) == p);
  const Gradient<double> two{p.dims(), VectorXd::Constant(1, 2.0)};
  CHECK(gd_step(p, two, 0.1).layer(0)(0, 0) == doctest::Approx(0.8).epsilon(1e-15));

  Gradient<double> bad{p.dims(), VectorXd::Constant(1, std::nan(""))};
  CHECK_THROWS_AS(gd_step(p, bad, 0.1), numeric_error);
  CHECK_THROWS_AS(gd_step(p, two, 0.0), validation_error);
}

TEST_CASE("gd on (theta - 3)^2 contracts to the minimizer") {
  auto p = linear({0.0});
  for (int i = 0; i < 100; ++i) {
    const double theta = p.layer(0)(0, 0);
    p = gd_step(p, Gradient<double>{p.dims(), VectorXd::Constant(1, 2.0 * (theta - 3.0))}, 0.1);
  }
  CHECK(std::abs(p.layer(0)(0, 0) - 3.0) < 1e-6);
}

TEST_CASE("gd strictly decreases a convex quadratic loss") {
  // Single linear layer: sum_i (w.x_i - y_i)^2 is convex in w.
  std::mt19937_64 rng(8);
  MatrixXd inputs(10, 3);
  for (Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = std::normal_distribution<double>()(rng);
  const VectorXd labels = bridge::random_vector(10, rng);
  auto p = init_params<double>({{3, 1}}, rng);
  double prev = fc_loss_gradient<double>(p, inputs, labels).loss;
  for (int i = 0; i < 50; ++i) {
    p = gd_step(p, fc_loss_gradient<double>(p, inputs, labels).grad, 1e-3);
    const double now = fc_loss_gradient<double>(p, inputs, labels).loss;
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("batched loss gradient is the sum of per-sample gradients") {
  std::mt19937_64 rng(12);
  const auto p = init_params<double>(mlp_dims(4, 6, 3), rng);
  MatrixXd inputs(7, 4);
  for (Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = std::normal_distribution<double>()(rng);
  const VectorXd labels = bridge::random_vector(7, rng);

  VectorXd expected = VectorXd::Zero(p.total_len());
  double loss = 0.0;
  for (Index i = 0; i < 7; ++i) {
    const auto fwd = fc_forward(p, VectorXd(inputs.row(i).transpose()));
    const double r = fwd.output - labels(i);
    loss += r * r;
    expected += 2.0 * r * fc_backward(p, fwd.cache).values;
  }
  const auto sum = fc_loss_gradient<double>(p, inputs, labels);
  CHECK(sum.loss == doctest::Approx(loss).epsilon(1e-12));
  CHECK((sum.grad.values - expected).cwiseAbs().maxCoeff() < 1e-12);
  const auto mean = fc_loss_gradient<double>(p, inputs, labels, LossReduction::mean);
  CHECK(mean.loss == doctest::Approx(loss / 7.0).epsilon(1e-12));
  CHECK((mean.grad.values - expected / 7.0).cwiseAbs().maxCoeff() < 1e-12);

  const VectorXd batch = fc_predict_batch<double>(p, inputs);
  for (Index i = 0; i < 7; ++i) CHECK(std::abs(batch(i) - fc_forward(p, VectorXd(inputs.row(i).transpose())).output) < 1e-12);
}

TEST_CASE("templated on scalar: float networks work") {
  const auto p = init_params<float>(mlp_dims(3, 4, 2), 1);
  const Eigen::VectorXf x = Eigen::VectorXf::Ones(3);
  const auto fwd = fc_forward(p, x);
  CHECK(std::isfinite(fwd.output));
  CHECK(fc_backward(p, fwd.cache).values.size() == p.total_len());
}
