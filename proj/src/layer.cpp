#include "rdl/layer.hpp"

#include <cmath>

#include "rdl/errors.hpp"

namespace rdl {

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::FullyConnected: return "fully_connected";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::LinearReadout: return "linear_readout";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(std::size_t kh, std::size_t kw, std::size_t features,
                          std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.features = features;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::max_pool(std::size_t kh, std::size_t kw, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.kernel_h = kh;
  s.kernel_w = kw;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::fully_connected(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::FullyConnected;
  s.features = units;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::ReLU;
  return s;
}

LayerSpec LayerSpec::dropout(double p) {
  LayerSpec s;
  s.kind = LayerKind::Dropout;
  s.dropout_p = p;
  return s;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec s;
  s.kind = LayerKind::Softmax;
  return s;
}

LayerSpec LayerSpec::linear_readout(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::LinearReadout;
  s.features = units;
  return s;
}

LayerSpec& LayerSpec::with_tap(std::string name) {
  tap = std::move(name);
  return *this;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::Conv:
      if (kernel_h == 0 || kernel_w == 0) throw ShapeError("conv kernel must be positive");
      if (stride == 0) throw ShapeError("conv stride must be positive");
      if (features == 0) throw ShapeError("conv features must be positive");
      break;
    case LayerKind::MaxPool:
      if (kernel_h == 0 || kernel_w == 0) throw ShapeError("maxpool kernel must be positive");
      if (stride == 0) throw ShapeError("maxpool stride must be positive");
      break;
    case LayerKind::FullyConnected:
    case LayerKind::LinearReadout:
      if (features == 0) throw ShapeError(layer_kind_name(kind) + " units must be positive");
      break;
    case LayerKind::Dropout:
      if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw ShapeError("dropout probability must be in [0, 1)");
      }
      break;
    case LayerKind::ReLU:
    case LayerKind::Softmax:
      break;
  }
}

namespace {

Shape chw(const Shape& s, const std::string& what) {
  if (s.size() != 3) {
    throw ShapeError(what + " expects a [channels, height, width] input, got " + shape_str(s));
  }
  return s;
}

// Valid (unpadded) window count along one axis.
std::size_t out_extent(std::size_t in, std::size_t k, std::size_t stride,
                       const std::string& what) {
  if (k > in) throw ShapeError(what + ": kernel " + std::to_string(k) +
                               " larger than input extent " + std::to_string(in));
  return (in - k) / stride + 1;
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::uniform(std::move(shape), -bound, bound, rng);
}

}  // namespace

Layer materialize_layer(const LayerSpec& spec, const Shape& in_shape, Rng& rng) {
  spec.validate();
  Layer layer;
  layer.spec = spec;
  layer.in_shape = in_shape;

  switch (spec.kind) {
    case LayerKind::Conv: {
      const Shape in = chw(in_shape, "conv");
      const std::size_t oh = out_extent(in[1], spec.kernel_h, spec.stride, "conv");
      const std::size_t ow = out_extent(in[2], spec.kernel_w, spec.stride, "conv");
      layer.out_shape = {spec.features, oh, ow};
      const std::size_t patch = in[0] * spec.kernel_h * spec.kernel_w;
      layer.weights = glorot_uniform({spec.features, in[0], spec.kernel_h, spec.kernel_w},
                                     patch, spec.features * spec.kernel_h * spec.kernel_w, rng);
      layer.bias = Tensor::zeros({spec.features});
      break;
    }
    case LayerKind::MaxPool: {
      const Shape in = chw(in_shape, "maxpool");
      const std::size_t oh = out_extent(in[1], spec.kernel_h, spec.stride, "maxpool");
      const std::size_t ow = out_extent(in[2], spec.kernel_w, spec.stride, "maxpool");
      layer.out_shape = {in[0], oh, ow};
      break;
    }
    case LayerKind::FullyConnected:
    case LayerKind::LinearReadout: {
      const std::size_t in_features = shape_size(in_shape);
      layer.out_shape = {spec.features};
      layer.weights = glorot_uniform({spec.features, in_features}, in_features,
                                     spec.features, rng);
      layer.bias = Tensor::zeros({spec.features});
      break;
    }
    case LayerKind::ReLU:
    case LayerKind::Dropout:
    case LayerKind::Softmax:
      layer.out_shape = in_shape;
      break;
  }
  return layer;
}

namespace {

struct ConvDims {
  std::size_t n, c, h, w, f, kh, kw, stride, oh, ow, patch, out_hw;
};

ConvDims conv_dims(const Layer& layer, std::size_t n) {
  ConvDims d;
  d.n = n;
  d.c = layer.in_shape[0];
  d.h = layer.in_shape[1];
  d.w = layer.in_shape[2];
  d.f = layer.spec.features;
  d.kh = layer.spec.kernel_h;
  d.kw = layer.spec.kernel_w;
  d.stride = layer.spec.stride;
  d.oh = layer.out_shape[1];
  d.ow = layer.out_shape[2];
  d.patch = d.c * d.kh * d.kw;
  d.out_hw = d.oh * d.ow;
  return d;
}

// Gather the conv patches of one image into a column-major [patch, oh*ow]
// block: each output position is one contiguous column, written in order.
void im2col(const ConvDims& d, const double* img, double* cols) {
  for (std::size_t oi = 0; oi < d.oh; ++oi) {
    for (std::size_t oj = 0; oj < d.ow; ++oj) {
      double* dst = cols + (oi * d.ow + oj) * d.patch;
      for (std::size_t c = 0; c < d.c; ++c) {
        const double* plane = img + c * d.h * d.w + oi * d.stride * d.w + oj * d.stride;
        for (std::size_t ki = 0; ki < d.kh; ++ki) {
          const double* src = plane + ki * d.w;
          for (std::size_t kj = 0; kj < d.kw; ++kj) *dst++ = src[kj];
        }
      }
    }
  }
}

// Scatter-add a column-major [patch, oh*ow] block back onto one image.
void col2im(const ConvDims& d, const double* cols, double* img) {
  for (std::size_t oi = 0; oi < d.oh; ++oi) {
    for (std::size_t oj = 0; oj < d.ow; ++oj) {
      const double* src = cols + (oi * d.ow + oj) * d.patch;
      for (std::size_t c = 0; c < d.c; ++c) {
        double* plane = img + c * d.h * d.w + oi * d.stride * d.w + oj * d.stride;
        for (std::size_t ki = 0; ki < d.kh; ++ki) {
          double* dst = plane + ki * d.w;
          for (std::size_t kj = 0; kj < d.kw; ++kj) dst[kj] += *src++;
        }
      }
    }
  }
}

Tensor conv_forward(const Layer& layer, const Tensor& batch, LayerTrace& trace) {
  const ConvDims d = conv_dims(layer, batch.dim(0));
  Tensor out({d.n, d.f, d.oh, d.ow});
  // One column-major patch matrix for the whole batch (image i owns columns
  // [i*out_hw, (i+1)*out_hw)) so the convolution runs as a single GEMM per
  // batch; backward reuses the same columns.
  trace.cols.resize(static_cast<Eigen::Index>(d.patch),
                    static_cast<Eigen::Index>(d.n * d.out_hw));
  for (std::size_t i = 0; i < d.n; ++i) {
    im2col(d, batch.data() + i * d.c * d.h * d.w,
           trace.cols.data() + i * d.out_hw * d.patch);
  }
  const auto w = layer.weights.matrix(d.f, d.patch);
  Mat big(static_cast<Eigen::Index>(d.f), static_cast<Eigen::Index>(d.n * d.out_hw));
  big.noalias() = w * trace.cols;
  big.colwise() += layer.bias.vec();
  for (std::size_t i = 0; i < d.n; ++i) {
    MapRowMat out_i(out.data() + i * d.f * d.out_hw, static_cast<Eigen::Index>(d.f),
                    static_cast<Eigen::Index>(d.out_hw));
    out_i = big.middleCols(static_cast<Eigen::Index>(i * d.out_hw),
                           static_cast<Eigen::Index>(d.out_hw));
  }
  return out;
}

LayerGrads conv_backward(const Layer& layer, const LayerTrace& trace,
                         const Tensor& output_grad) {
  const ConvDims d = conv_dims(layer, trace.in_shape[0]);
  LayerGrads g;
  g.weights = Tensor::zeros(layer.weights.shape());
  g.bias = Tensor::zeros(layer.bias.shape());
  g.input = Tensor::zeros(trace.in_shape);

  // Gather the output gradient into the same column-major batch layout.
  Mat dout(static_cast<Eigen::Index>(d.f), static_cast<Eigen::Index>(d.n * d.out_hw));
  for (std::size_t i = 0; i < d.n; ++i) {
    dout.middleCols(static_cast<Eigen::Index>(i * d.out_hw),
                    static_cast<Eigen::Index>(d.out_hw)) =
        ConstMapRowMat(output_grad.data() + i * d.f * d.out_hw,
                       static_cast<Eigen::Index>(d.f),
                       static_cast<Eigen::Index>(d.out_hw));
  }

  g.weights.matrix(d.f, d.patch).noalias() = dout * trace.cols.transpose();
  g.bias.vec() = dout.rowwise().sum();

  Mat dcols(static_cast<Eigen::Index>(d.patch), static_cast<Eigen::Index>(d.n * d.out_hw));
  dcols.noalias() = layer.weights.matrix(d.f, d.patch).transpose() * dout;
  for (std::size_t i = 0; i < d.n; ++i) {
    col2im(d, dcols.data() + i * d.out_hw * d.patch,
           g.input.data() + i * d.c * d.h * d.w);
  }
  return g;
}

Tensor maxpool_forward(const Layer& layer, const Tensor& batch, LayerTrace& trace) {
  const std::size_t n = batch.dim(0);
  const std::size_t c = layer.in_shape[0], h = layer.in_shape[1], w = layer.in_shape[2];
  const std::size_t kh = layer.spec.kernel_h, kw = layer.spec.kernel_w;
  const std::size_t stride = layer.spec.stride;
  const std::size_t oh = layer.out_shape[1], ow = layer.out_shape[2];

  Tensor out({n, c, oh, ow});
  trace.argmax.assign(n * c * oh * ow, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* plane = batch.data() + (i * c + ch) * h * w;
      const std::size_t base = (i * c + ch) * oh * ow;
      for (std::size_t oi = 0; oi < oh; ++oi) {
        for (std::size_t oj = 0; oj < ow; ++oj) {
          // Ties go to the lowest flat index: strict > keeps the first max.
          std::size_t best = (oi * stride) * w + oj * stride;
          double best_v = plane[best];
          for (std::size_t ki = 0; ki < kh; ++ki) {
            const std::size_t row = (oi * stride + ki) * w + oj * stride;
            for (std::size_t kj = 0; kj < kw; ++kj) {
              if (plane[row + kj] > best_v) {
                best_v = plane[row + kj];
                best = row + kj;
              }
            }
          }
          out[base + oi * ow + oj] = best_v;
          trace.argmax[base + oi * ow + oj] =
              static_cast<std::int64_t>(ch * h * w + best);
        }
      }
    }
  }
  return out;
}

LayerGrads maxpool_backward(const Layer& layer, const LayerTrace& trace,
                            const Tensor& output_grad) {
  const std::size_t n = trace.in_shape[0];
  const std::size_t per_image_in = shape_size(layer.in_shape);
  const std::size_t per_image_out = shape_size(layer.out_shape);
  const std::size_t c = layer.in_shape[0];
  const std::size_t oh = layer.out_shape[1], ow = layer.out_shape[2];

  LayerGrads g;
  g.input = Tensor::zeros(trace.in_shape);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c * oh * ow; ++k) {
      const std::size_t out_idx = i * per_image_out + k;
      g.input[i * per_image_in + static_cast<std::size_t>(trace.argmax[out_idx])] +=
          output_grad[out_idx];
    }
  }
  return g;
}

Tensor dense_forward(const Layer& layer, const Tensor& batch) {
  const std::size_t n = batch.dim(0);
  const std::size_t in_f = layer.in_features();
  const std::size_t out_f = layer.spec.features;
  Tensor out({n, out_f});
  out.matrix(n, out_f).noalias() =
      batch.matrix(n, in_f) * layer.weights.matrix(out_f, in_f).transpose();
  out.matrix(n, out_f).rowwise() += layer.bias.vec().transpose();
  return out;
}

LayerGrads dense_backward(const Layer& layer, const LayerTrace& trace,
                          const Tensor& output_grad) {
  const std::size_t n = trace.in_shape[0];
  const std::size_t in_f = layer.in_features();
  const std::size_t out_f = layer.spec.features;
  const auto x = trace.input.matrix(n, in_f);
  const auto dout = output_grad.matrix(n, out_f);

  LayerGrads g;
  g.weights = Tensor::zeros(layer.weights.shape());
  g.bias = Tensor::zeros(layer.bias.shape());
  g.input = Tensor::zeros(trace.input.shape());
  g.weights.matrix(out_f, in_f).noalias() = dout.transpose() * x;
  g.bias.vec() = dout.colwise().sum().transpose();
  g.input.matrix(n, in_f).noalias() = dout * layer.weights.matrix(out_f, in_f);
  return g;
}

Tensor softmax_forward(const Tensor& batch) {
  const std::size_t n = batch.dim(0);
  const std::size_t k = batch.size() / n;
  Tensor out = batch;
  auto m = out.matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = m.row(static_cast<Eigen::Index>(i));
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return out;
}

LayerGrads softmax_backward(const LayerTrace& trace, const Tensor& output_grad) {
  const std::size_t n = trace.out_shape[0];
  const std::size_t k = trace.output.size() / n;
  LayerGrads g;
  g.input = Tensor::zeros(trace.in_shape);
  const auto y = trace.output.matrix(n, k);
  const auto dy = output_grad.matrix(n, k);
  auto dx = g.input.matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    const double dot = y.row(r).dot(dy.row(r));
    dx.row(r) = y.row(r).cwiseProduct(dy.row(r).array().matrix() -
                                      Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(k), dot));
  }
  return g;
}

}  // namespace

Tensor layer_forward(const Layer& layer, const Tensor& batch, Mode mode, Rng& rng,
                     LayerTrace& trace) {
  trace.in_shape = batch.shape();
  if (layer.spec.kind == LayerKind::FullyConnected ||
      layer.spec.kind == LayerKind::LinearReadout) {
    trace.input = batch;
  }
  Tensor out;
  switch (layer.spec.kind) {
    case LayerKind::Conv:
      out = conv_forward(layer, batch, trace);
      break;
    case LayerKind::MaxPool:
      out = maxpool_forward(layer, batch, trace);
      break;
    case LayerKind::FullyConnected:
    case LayerKind::LinearReadout:
      out = dense_forward(layer, batch);
      break;
    case LayerKind::ReLU: {
      out = batch;
      trace.relu_mask.resize(out.size());
      double* v = out.data();
      for (std::size_t i = 0; i < out.size(); ++i) {
        const bool pos = v[i] > 0.0;
        trace.relu_mask[i] = pos;
        if (!pos) v[i] = 0.0;
      }
      break;
    }
    case LayerKind::Dropout: {
      // Inverted dropout: train-time scaling by 1/(1-p) makes eval an exact
      // identity.
      out = batch;
      if (mode == Mode::Train && layer.spec.dropout_p > 0.0) {
        const double p = layer.spec.dropout_p;
        const double scale = 1.0 / (1.0 - p);
        trace.dropout_mask = Tensor::zeros(batch.shape());
        for (std::size_t i = 0; i < batch.size(); ++i) {
          trace.dropout_mask[i] = rng.bernoulli(p) ? 0.0 : scale;
        }
        out.vec() = out.vec().cwiseProduct(trace.dropout_mask.vec());
      }
      break;
    }
    case LayerKind::Softmax:
      out = softmax_forward(batch);
      trace.output = out;
      break;
  }
  trace.out_shape = out.shape();
  return out;
}

LayerGrads layer_backward(const Layer& layer, const LayerTrace& trace,
                          const Tensor& output_grad) {
  if (output_grad.shape() != trace.out_shape) {
    throw ShapeError("backward: gradient shape " + shape_str(output_grad.shape()) +
                     " does not match activation shape " + shape_str(trace.out_shape) +
                     " at " + layer_kind_name(layer.spec.kind));
  }
  switch (layer.spec.kind) {
    case LayerKind::Conv:
      return conv_backward(layer, trace, output_grad);
    case LayerKind::MaxPool:
      return maxpool_backward(layer, trace, output_grad);
    case LayerKind::FullyConnected:
    case LayerKind::LinearReadout:
      return dense_backward(layer, trace, output_grad);
    case LayerKind::ReLU: {
      LayerGrads g;
      g.input = output_grad;
      double* v = g.input.data();
      for (std::size_t i = 0; i < g.input.size(); ++i) {
        if (!trace.relu_mask[i]) v[i] = 0.0;
      }
      return g;
    }
    case LayerKind::Dropout: {
      LayerGrads g;
      g.input = output_grad;
      if (trace.dropout_mask.size() == g.input.size()) {
        g.input.vec() = g.input.vec().cwiseProduct(trace.dropout_mask.vec());
      }
      return g;
    }
    case LayerKind::Softmax:
      return softmax_backward(trace, output_grad);
  }
  throw ShapeError("unknown layer kind");
}

}  // namespace rdl
