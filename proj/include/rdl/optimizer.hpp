#pragma once

#include <vector>

#include "rdl/network.hpp"
#include "rdl/tensor.hpp"

namespace rdl {

// Classical (heavy-ball) momentum update on one parameter tensor:
//   v <- momentum * v - lr * g;  p <- p + v
void sgd_update(Tensor& param, Tensor& velocity, const Tensor& grad, double lr,
                double momentum);

// SGD-with-momentum state for a whole network; velocities mirror parameter
// shapes.
struct SgdState {
  double learning_rate = 0.01;
  double momentum = 0.0;
  std::vector<Tensor> weight_velocity;
  std::vector<Tensor> bias_velocity;

  static SgdState init(const Network& net, double learning_rate, double momentum);
  void step(Network& net, const Gradients& grads);
};

}  // namespace rdl
