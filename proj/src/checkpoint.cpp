#include "rdl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "rdl/errors.hpp"

namespace rdl {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'L', 'K'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw IdxError(IdxError::Kind::Io, "checkpoint truncated");
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) {
    throw IdxError(IdxError::Kind::Io, "checkpoint truncated");
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_tensor(std::ostream& os, const Tensor& t) {
  put_u32(os, static_cast<std::uint32_t>(t.ndim()));
  for (std::size_t d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.size(); ++i) put_f64(os, t[i]);
}

Tensor get_tensor(std::istream& is) {
  const std::uint32_t ndim = get_u32(is);
  if (ndim == 0) return Tensor{};  // parameterless layer
  Shape shape(ndim);
  for (auto& d : shape) d = get_u32(is);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f64(is);
  return t;
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const std::uint32_t len = get_u32(is);
  std::string s(len, '\0');
  if (len && !is.read(s.data(), len)) {
    throw IdxError(IdxError::Kind::Io, "checkpoint truncated");
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IdxError(IdxError::Kind::Io, "cannot write " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(net.layers().size()));
  put_u32(os, static_cast<std::uint32_t>(net.input_shape().size()));
  for (std::size_t d : net.input_shape()) put_u32(os, static_cast<std::uint32_t>(d));
  for (const auto& layer : net.layers()) {
    const LayerSpec& s = layer.spec;
    put_u32(os, static_cast<std::uint32_t>(s.kind));
    put_u32(os, static_cast<std::uint32_t>(s.kernel_h));
    put_u32(os, static_cast<std::uint32_t>(s.kernel_w));
    put_u32(os, static_cast<std::uint32_t>(s.stride));
    put_u32(os, static_cast<std::uint32_t>(s.features));
    put_f64(os, s.dropout_p);
    put_string(os, s.tap);
    put_tensor(os, layer.weights);
    put_tensor(os, layer.bias);
  }
  if (!os) throw IdxError(IdxError::Kind::Io, "short write to " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IdxError(IdxError::Kind::Io, "cannot read " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IdxError(IdxError::Kind::BadMagic, "not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) {
    throw IdxError(IdxError::Kind::BadMagic,
                   "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t layer_count = get_u32(is);
  Shape input_shape(get_u32(is));
  for (auto& d : input_shape) d = get_u32(is);

  std::vector<LayerSpec> specs;
  std::vector<Tensor> weights, biases;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec s;
    s.kind = static_cast<LayerKind>(get_u32(is));
    s.kernel_h = get_u32(is);
    s.kernel_w = get_u32(is);
    s.stride = get_u32(is);
    s.features = get_u32(is);
    s.dropout_p = get_f64(is);
    s.tap = get_string(is);
    specs.push_back(s);
    weights.push_back(get_tensor(is));
    biases.push_back(get_tensor(is));
  }

  // Rebuild through the normal constructor so shape propagation is
  // re-validated, then overwrite the materialized parameters.
  Network net = Network::build(input_shape, specs, Rng(0));
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    Layer& layer = net.layers()[i];
    if (!layer.weights.same_shape(weights[i]) || !layer.bias.same_shape(biases[i])) {
      throw ShapeError("checkpoint parameter shapes do not match layer " + std::to_string(i));
    }
    layer.weights = std::move(weights[i]);
    layer.bias = std::move(biases[i]);
  }
  return net;
}

}  // namespace rdl
