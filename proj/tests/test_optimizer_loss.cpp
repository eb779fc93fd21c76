#include <doctest.h>

#include <cmath>

#include "rdl/errors.hpp"
#include "rdl/loss.hpp"
#include "rdl/network.hpp"
#include "rdl/optimizer.hpp"
#include "test_support.hpp"

using namespace rdl;

TEST_CASE("sgd without momentum is a plain gradient step") {
  Tensor p = Tensor::from({0.0});
  Tensor v = Tensor::from({0.0});
  sgd_update(p, v, Tensor::from({1.0}), 0.1, 0.0);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("two momentum steps follow the hand recurrence") {
  // v1 = -0.1, p1 = -0.1; v2 = 0.9*(-0.1) - 0.1 = -0.19, p2 = -0.29.
  Tensor p = Tensor::from({0.0});
  Tensor v = Tensor::from({0.0});
  const Tensor g = Tensor::from({1.0});
  sgd_update(p, v, g, 0.1, 0.9);
  sgd_update(p, v, g, 0.1, 0.9);
  CHECK(p[0] == doctest::Approx(-0.29).epsilon(1e-15));
}

TEST_CASE("zero gradient and zero velocity leave parameters unchanged") {
  Tensor p = Tensor::from({1.5, -2.0});
  Tensor v = Tensor::zeros({2});
  const Vec before = p.vec();
  sgd_update(p, v, Tensor::zeros({2}), 0.05, 0.9);
  CHECK(p.vec() == before);
}

TEST_CASE("sgd rejects invalid hyperparameters and non-finite updates") {
  Network net = Network::build({2}, {LayerSpec::fully_connected(2)}, Rng(1));
  CHECK_THROWS_AS(SgdState::init(net, 0.0, 0.9), ShapeError);
  CHECK_THROWS_AS(SgdState::init(net, 0.1, 1.0), ShapeError);
  Tensor p = Tensor::from({1.0});
  Tensor v = Tensor::from({0.0});
  CHECK_THROWS_AS(
      sgd_update(p, v, Tensor::from({std::numeric_limits<double>::quiet_NaN()}), 0.1, 0.0),
      NumericError);
}

TEST_CASE("uniform logits give ln(k) cross-entropy") {
  for (int k : {2, 5, 10}) {
    Tensor logits = Tensor::zeros({3, static_cast<std::size_t>(k)});
    LossResult res = softmax_xent(logits, {0, k - 1, k / 2});
    CHECK(res.loss == doctest::Approx(std::log(double(k))).epsilon(1e-12));
  }
}

TEST_CASE("saturated logits do not overflow") {
  const Tensor logits({1, 2}, (Vec(2) << 1000.0, 0.0).finished());
  LossResult res = softmax_xent(logits, {0});
  CHECK(std::isfinite(res.loss));
  CHECK(res.loss < 1e-9);
}

TEST_CASE("cross-entropy gradient matches finite differences") {
  Rng rng(12);
  const Tensor logits = test::random_tensor({4, 6}, rng, -2.0, 2.0);
  const std::vector<int> labels{1, 0, 5, 3};
  LossResult res = softmax_xent(logits, labels);
  auto f = [&](const Eigen::VectorXd& x) {
    return softmax_xent(Tensor(logits.shape(), x), labels).loss;
  };
  const Eigen::VectorXd fd = test::finite_difference(f, logits.vec());
  CHECK(test::max_rel_error(res.grad.vec(), fd) < 1e-6);
}

TEST_CASE("labels out of range are rejected") {
  Tensor logits = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(softmax_xent(logits, {0, 3}), ShapeError);
  CHECK_THROWS_AS(softmax_xent(logits, {-1, 0}), ShapeError);
}

TEST_CASE("error_rate counts argmax disagreements") {
  CHECK(error_rate({1, 2, 3}, {1, 0, 3}) == doctest::Approx(1.0 / 3.0));
  CHECK(error_rate({}, {}) == 0.0);
}
