#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rdl/layer.hpp"
#include "rdl/tensor.hpp"

namespace rdl {

// Ordered layer chain with named taps. Immutable during forward/backward;
// parameters are mutated only by optimizer steps and explicit copies.
class Network {
 public:
  Network() = default;

  // Propagates shapes from `input_shape` ([channels, height, width] or
  // [features]), validates layer compatibility and tap uniqueness, and
  // materializes parameters. Each layer's init draws from its own fork of
  // `init_rng`, so adding or removing an unrelated layer elsewhere does not
  // shift initialization.
  static Network build(Shape input_shape, const std::vector<LayerSpec>& specs,
                       const Rng& init_rng);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return layers_.back().out_shape; }

  const std::map<std::string, std::size_t>& taps() const { return taps_; }
  bool has_tap(const std::string& name) const { return taps_.count(name) != 0; }
  std::size_t tap_layer(const std::string& name) const;
  std::size_t tap_feature_count(const std::string& name) const;

  std::size_t param_count() const;

  // True when both networks have identical specs, shapes and parameter bits.
  bool params_equal(const Network& o) const;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::map<std::string, std::size_t> taps_;  // tap name -> layer index
};

struct ForwardResult {
  Tensor output;  // final layer output, batch-major
  Tensor logits;  // input of a trailing Softmax layer; == output otherwise
  std::map<std::string, Tensor> taps;
  std::vector<LayerTrace> trace;
};

// Deterministic given (parameters, batch, mode, seed); every layer output is
// checked finite. Dropout draws from a per-layer fork of `rng_seed`.
ForwardResult forward(const Network& net, const Tensor& batch, Mode mode,
                      std::uint64_t rng_seed);

// Auxiliary gradient injected into the backward stream at a tap:
// flow <- flow + alpha * grad (Eq. combine semantics; see combine_gradients).
struct TapInjection {
  Tensor grad;
  double alpha = 1.0;
};

struct Gradients {
  std::vector<Tensor> weights;  // aligned with net.layers(); empty where no params
  std::vector<Tensor> bias;
  Tensor input;

  Gradients& operator+=(const Gradients& o);
  void scale(double s);
};

// Reverse pass from the final layer. Tap gradients are added into the
// backward stream at their layer, scaled by their alpha.
Gradients backward(const Network& net, const ForwardResult& fwd, const Tensor& output_grad,
                   const std::map<std::string, TapInjection>& injections = {});

// Same, but `logit_grad` is w.r.t. the input of the trailing Softmax layer
// (the usual path when the loss is softmax cross-entropy on logits).
Gradients backward_from_logits(const Network& net, const ForwardResult& fwd,
                               const Tensor& logit_grad,
                               const std::map<std::string, TapInjection>& injections = {});

// Per-image argmax of the network output (class predictions).
std::vector<int> predict(const Network& net, const Tensor& batch);

}  // namespace rdl
