#include "rdl/network.hpp"

#include "rdl/errors.hpp"

namespace rdl {

Network Network::build(Shape input_shape, const std::vector<LayerSpec>& specs,
                       const Rng& init_rng) {
  if (specs.empty()) throw ShapeError("network needs at least one layer");
  Network net;
  net.input_shape_ = std::move(input_shape);
  Shape shape = net.input_shape_;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Rng layer_rng = init_rng.fork("layer-init", i);
    Layer layer = materialize_layer(specs[i], shape, layer_rng);
    shape = layer.out_shape;
    if (!specs[i].tap.empty()) {
      if (!net.taps_.emplace(specs[i].tap, i).second) {
        throw ShapeError("duplicate tap name '" + specs[i].tap + "'");
      }
    }
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

std::size_t Network::tap_layer(const std::string& name) const {
  auto it = taps_.find(name);
  if (it == taps_.end()) throw ShapeError("unknown tap '" + name + "'");
  return it->second;
}

std::size_t Network::tap_feature_count(const std::string& name) const {
  return shape_size(layers_[tap_layer(name)].out_shape);
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

bool Network::params_equal(const Network& o) const {
  if (layers_.size() != o.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].spec.kind != o.layers_[i].spec.kind) return false;
    if (!(layers_[i].weights == o.layers_[i].weights)) return false;
    if (!(layers_[i].bias == o.layers_[i].bias)) return false;
  }
  return true;
}

namespace {

void check_batch_shape(const Network& net, const Tensor& batch) {
  const Shape& in = net.input_shape();
  if (batch.ndim() != in.size() + 1) {
    throw ShapeError("batch rank " + std::to_string(batch.ndim()) +
                     " does not match input shape " + shape_str(in));
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (batch.dim(i + 1) != in[i]) {
      throw ShapeError("batch shape " + shape_str(batch.shape()) +
                       " does not match input shape " + shape_str(in));
    }
  }
}

bool ends_with_softmax(const Network& net) {
  return net.layers().back().spec.kind == LayerKind::Softmax;
}

}  // namespace

ForwardResult forward(const Network& net, const Tensor& batch, Mode mode,
                      std::uint64_t rng_seed) {
  check_batch_shape(net, batch);
  Rng base(rng_seed);

  // Layer index -> tap name, for tap capture while the activations flow.
  std::map<std::size_t, std::string> tap_at;
  for (const auto& [name, idx] : net.taps()) tap_at[idx] = name;

  ForwardResult res;
  res.trace.resize(net.layers().size());
  const std::size_t last = net.layers().size() - 1;
  Tensor x = batch;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    Rng layer_rng = base.fork("dropout", i);
    if (i == last && ends_with_softmax(net)) res.logits = x;
    x = layer_forward(net.layers()[i], x, mode, layer_rng, res.trace[i]);
    if (!x.all_finite()) {
      throw NumericError("non-finite activation after layer " + std::to_string(i) + " (" +
                         layer_kind_name(net.layers()[i].spec.kind) + ")");
    }
    if (auto it = tap_at.find(i); it != tap_at.end()) res.taps.emplace(it->second, x);
  }
  res.output = x;
  if (!ends_with_softmax(net)) res.logits = res.output;
  return res;
}

Gradients& Gradients::operator+=(const Gradients& o) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].size()) weights[i].vec() += o.weights[i].vec();
    if (bias[i].size()) bias[i].vec() += o.bias[i].vec();
  }
  if (input.size()) input.vec() += o.input.vec();
  return *this;
}

void Gradients::scale(double s) {
  for (auto& w : weights)
    if (w.size()) w.vec() *= s;
  for (auto& b : bias)
    if (b.size()) b.vec() *= s;
  if (input.size()) input.vec() *= s;
}

namespace {

// Reverse pass starting from layer `start` with `flow` being the gradient
// w.r.t. that layer's output.
Gradients backward_impl(const Network& net, const ForwardResult& fwd, Tensor flow,
                        std::size_t start,
                        const std::map<std::string, TapInjection>& injections) {
  const auto& layers = net.layers();
  if (fwd.trace.size() != layers.size()) {
    throw ShapeError("forward trace does not belong to this network");
  }
  for (const auto& [name, inj] : injections) {
    if (!net.has_tap(name)) throw ShapeError("unknown tap '" + name + "'");
    if (inj.alpha < 0.0) throw ShapeError("tap alpha must be nonnegative");
    if (net.tap_layer(name) > start) {
      throw ShapeError("tap '" + name + "' is above the backward start layer");
    }
  }

  // tap layer index -> injection
  std::map<std::size_t, const TapInjection*> by_layer;
  for (const auto& [name, inj] : injections) by_layer[net.tap_layer(name)] = &inj;

  Gradients g;
  g.weights.resize(layers.size());
  g.bias.resize(layers.size());
  for (std::size_t ii = start + 1; ii-- > 0;) {
    if (auto it = by_layer.find(ii); it != by_layer.end()) {
      const TapInjection& inj = *it->second;
      Tensor aux = inj.grad;
      if (aux.size() != flow.size()) {
        throw ShapeError("tap gradient size " + std::to_string(aux.size()) +
                         " does not match activation size " + std::to_string(flow.size()));
      }
      flow.vec() += inj.alpha * aux.vec();
    }
    LayerGrads lg = layer_backward(layers[ii], fwd.trace[ii], flow.reshaped(fwd.trace[ii].out_shape));
    if (layers[ii].has_params()) {
      if (!lg.weights.all_finite() || !lg.bias.all_finite()) {
        throw NumericError("non-finite gradient at layer " + std::to_string(ii) + " (" +
                           layer_kind_name(layers[ii].spec.kind) + ")");
      }
      g.weights[ii] = std::move(lg.weights);
      g.bias[ii] = std::move(lg.bias);
    }
    flow = std::move(lg.input);
  }
  g.input = std::move(flow);
  return g;
}

}  // namespace

Gradients backward(const Network& net, const ForwardResult& fwd, const Tensor& output_grad,
                   const std::map<std::string, TapInjection>& injections) {
  if (!output_grad.same_shape(fwd.output)) {
    throw ShapeError("output gradient shape " + shape_str(output_grad.shape()) +
                     " does not match output shape " + shape_str(fwd.output.shape()));
  }
  return backward_impl(net, fwd, output_grad, net.layers().size() - 1, injections);
}

Gradients backward_from_logits(const Network& net, const ForwardResult& fwd,
                               const Tensor& logit_grad,
                               const std::map<std::string, TapInjection>& injections) {
  if (!ends_with_softmax(net)) {
    throw ShapeError("backward_from_logits requires a trailing softmax layer");
  }
  if (!logit_grad.same_shape(fwd.logits)) {
    throw ShapeError("logit gradient shape " + shape_str(logit_grad.shape()) +
                     " does not match logits shape " + shape_str(fwd.logits.shape()));
  }
  return backward_impl(net, fwd, logit_grad, net.layers().size() - 2, injections);
}

std::vector<int> predict(const Network& net, const Tensor& batch) {
  ForwardResult fwd = forward(net, batch, Mode::Eval, 0);
  const std::size_t n = batch.dim(0);
  const std::size_t k = fwd.output.size() / n;
  const auto m = fwd.output.matrix(n, k);
  std::vector<int> pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index best;
    m.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    pred[i] = static_cast<int>(best);
  }
  return pred;
}

}  // namespace rdl
