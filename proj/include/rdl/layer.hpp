#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdl/rng.hpp"
#include "rdl/tensor.hpp"

namespace rdl {

enum class LayerKind : std::uint32_t {
  Conv = 0,
  MaxPool = 1,
  FullyConnected = 2,
  ReLU = 3,
  Dropout = 4,
  Softmax = 5,
  LinearReadout = 6,
};

std::string layer_kind_name(LayerKind kind);

// Declarative layer description. Only the fields relevant to the kind are
// meaningful; validate() enforces the per-kind constraints.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t features = 0;  // output channels / units
  double dropout_p = 0.0;
  std::string tap;  // non-empty: register this layer's output under the name

  static LayerSpec conv(std::size_t kh, std::size_t kw, std::size_t features,
                        std::size_t stride = 1);
  static LayerSpec max_pool(std::size_t kh, std::size_t kw, std::size_t stride);
  static LayerSpec fully_connected(std::size_t units);
  static LayerSpec relu();
  static LayerSpec dropout(double p);
  static LayerSpec softmax();
  static LayerSpec linear_readout(std::size_t units);

  LayerSpec& with_tap(std::string name);

  void validate() const;
  bool has_params() const {
    return kind == LayerKind::Conv || kind == LayerKind::FullyConnected ||
           kind == LayerKind::LinearReadout;
  }
};

// A LayerSpec with materialized parameters and resolved shapes. Shapes are
// per image (no batch extent).
struct Layer {
  LayerSpec spec;
  Shape in_shape;
  Shape out_shape;
  Tensor weights;  // Conv: [F, C, kh, kw]; dense: [F, In]; empty otherwise
  Tensor bias;     // [F] or empty

  bool has_params() const { return spec.has_params(); }
  std::size_t param_count() const { return weights.size() + bias.size(); }
  std::size_t in_features() const { return shape_size(in_shape); }
  std::size_t out_features() const { return shape_size(out_shape); }
};

// Resolves the output shape of `spec` applied to `in_shape` and materializes
// Glorot-uniform parameters from `rng` (uniform in +/- sqrt(6/(fan_in+fan_out))).
Layer materialize_layer(const LayerSpec& spec, const Shape& in_shape, Rng& rng);

// Per-layer forward state a backward pass needs. Inputs/outputs are kept
// only where the backward rule consumes them (dense and relu keep the
// input, softmax its output); everything else stores compact summaries.
struct LayerTrace {
  Shape in_shape;   // batch shape of the layer input
  Shape out_shape;  // batch shape of the layer output
  Tensor input;     // Dense
  Tensor output;    // Softmax
  std::vector<unsigned char> relu_mask;  // ReLU: 1 where the input was positive
  std::vector<std::int64_t> argmax;  // MaxPool: flat per-image input index per output
  Tensor dropout_mask;               // Dropout: 0 or 1/(1-p) per element
  Mat cols;                          // Conv: batch im2col matrix, reused by backward
};

struct LayerGrads {
  Tensor weights;  // empty for parameterless layers
  Tensor bias;
  Tensor input;  // gradient w.r.t. the layer input, batch shape
};

enum class Mode { Train, Eval };

// Forward one batch through one layer. `rng` is only consumed by Dropout in
// train mode. Returns the output and fills `trace`.
Tensor layer_forward(const Layer& layer, const Tensor& batch, Mode mode, Rng& rng,
                     LayerTrace& trace);

// Gradient of the loss w.r.t. parameters and input given the gradient w.r.t.
// the output of this layer.
LayerGrads layer_backward(const Layer& layer, const LayerTrace& trace,
                          const Tensor& output_grad);

}  // namespace rdl
