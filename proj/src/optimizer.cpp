#include "rdl/optimizer.hpp"

#include "rdl/errors.hpp"

namespace rdl {

void sgd_update(Tensor& param, Tensor& velocity, const Tensor& grad, double lr,
                double momentum) {
  if (!param.same_shape(velocity) || !param.same_shape(grad)) {
    throw ShapeError("sgd_update: parameter/velocity/gradient shapes disagree");
  }
  velocity.vec() = momentum * velocity.vec() - lr * grad.vec();
  param.vec() += velocity.vec();
  if (!param.all_finite()) throw NumericError("non-finite parameter after sgd update");
}

SgdState SgdState::init(const Network& net, double learning_rate, double momentum) {
  if (!(learning_rate > 0.0)) throw ShapeError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ShapeError("momentum must be in [0, 1)");
  SgdState s;
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  for (const auto& layer : net.layers()) {
    s.weight_velocity.push_back(Tensor::zeros(layer.weights.shape()));
    s.bias_velocity.push_back(Tensor::zeros(layer.bias.shape()));
  }
  return s;
}

void SgdState::step(Network& net, const Gradients& grads) {
  auto& layers = net.layers();
  if (weight_velocity.size() != layers.size() || grads.weights.size() != layers.size()) {
    throw ShapeError("sgd state/gradients do not match network layer count");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].has_params()) continue;
    sgd_update(layers[i].weights, weight_velocity[i], grads.weights[i], learning_rate,
               momentum);
    sgd_update(layers[i].bias, bias_velocity[i], grads.bias[i], learning_rate, momentum);
  }
}

}  // namespace rdl
