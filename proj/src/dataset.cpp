#include "rdl/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "rdl/errors.hpp"
#include "rdl/rng.hpp"

namespace rdl {

namespace fs = std::filesystem;

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  const std::size_t f = features();
  Dataset out;
  out.images = Tensor({indices.size(), images.dim(1), images.dim(2), images.dim(3)});
  out.labels.reserve(indices.size());
  out.num_classes = num_classes;
  out.provenance = provenance;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw ShapeError("subset index out of range");
    std::memcpy(out.images.data() + k * f, images.data() + i * f, f * sizeof(double));
    out.labels.push_back(labels[i]);
  }
  return out;
}

Tensor Dataset::batch(std::size_t begin, std::size_t count) const {
  if (begin + count > size()) throw ShapeError("batch range out of bounds");
  const std::size_t f = features();
  Tensor out({count, images.dim(1), images.dim(2), images.dim(3)});
  std::memcpy(out.data(), images.data() + begin * f, count * f * sizeof(double));
  return out;
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = images.content_hash();
  h = fnv1a64(labels.data(), labels.size() * sizeof(int), h);
  return h;
}

void Dataset::validate() const {
  if (images.ndim() != 4) throw ShapeError("dataset images must be [n, c, h, w]");
  if (images.dim(0) != labels.size()) {
    throw ShapeError("dataset has " + std::to_string(images.dim(0)) + " images but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (!images.all_finite()) throw NumericError("dataset contains non-finite pixels");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw ShapeError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw IdxError(IdxError::Kind::Truncated, what + ": truncated header");
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const fs::path& images_path, const fs::path& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IdxError(IdxError::Kind::Io, "cannot open " + images_path.string());
  const std::uint32_t imagic = read_be32(imgs, images_path.string());
  if (imagic != kImagesMagic) {
    throw IdxError(IdxError::Kind::BadMagic,
                   images_path.string() + ": expected image magic 0x00000803");
  }
  const std::uint32_t n = read_be32(imgs, images_path.string());
  const std::uint32_t rows = read_be32(imgs, images_path.string());
  const std::uint32_t cols = read_be32(imgs, images_path.string());

  std::vector<unsigned char> pixels(static_cast<std::size_t>(n) * rows * cols);
  if (!pixels.empty() &&
      !imgs.read(reinterpret_cast<char*>(pixels.data()),
                 static_cast<std::streamsize>(pixels.size()))) {
    throw IdxError(IdxError::Kind::Truncated,
                   images_path.string() + ": fewer pixel bytes than the header promises");
  }

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IdxError(IdxError::Kind::Io, "cannot open " + labels_path.string());
  const std::uint32_t lmagic = read_be32(labs, labels_path.string());
  if (lmagic != kLabelsMagic) {
    throw IdxError(IdxError::Kind::BadMagic,
                   labels_path.string() + ": expected label magic 0x00000801");
  }
  const std::uint32_t ln = read_be32(labs, labels_path.string());
  if (ln != n) {
    throw IdxError(IdxError::Kind::CountMismatch,
                   "image count " + std::to_string(n) + " != label count " +
                       std::to_string(ln));
  }
  std::vector<unsigned char> raw_labels(ln);
  if (!raw_labels.empty() &&
      !labs.read(reinterpret_cast<char*>(raw_labels.data()),
                 static_cast<std::streamsize>(raw_labels.size()))) {
    throw IdxError(IdxError::Kind::Truncated,
                   labels_path.string() + ": fewer label bytes than the header promises");
  }

  Dataset ds;
  ds.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    ds.images[i] = static_cast<double>(pixels[i]) / 255.0;
  }
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  int max_label = -1;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = std::max(10, max_label + 1);
  ds.provenance = "idx:" + images_path.filename().string();
  ds.validate();
  return ds;
}

TrainValidationSplit split(const Dataset& dataset, std::size_t validation_count,
                           std::uint64_t rng_seed) {
  if (validation_count >= dataset.size() && validation_count != 0) {
    throw ShapeError("validation count " + std::to_string(validation_count) +
                     " must be smaller than the dataset (" +
                     std::to_string(dataset.size()) + ")");
  }
  std::vector<std::size_t> idx(dataset.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = Rng(rng_seed).fork("split");
  rng.shuffle(idx);

  TrainValidationSplit out;
  out.validation = dataset.subset({idx.begin(), idx.begin() + static_cast<long>(validation_count)});
  out.train = dataset.subset({idx.begin() + static_cast<long>(validation_count), idx.end()});
  out.train.provenance = dataset.provenance + "/train";
  out.validation.provenance = dataset.provenance + "/validation";
  return out;
}

Tensor gcn(const Tensor& images, double epsilon) {
  if (images.ndim() < 2 || images.dim(0) == 0) {
    throw ShapeError("gcn expects a nonempty batch");
  }
  const std::size_t n = images.dim(0);
  const std::size_t f = images.size() / n;
  Tensor out = images;
  auto m = out.matrix(n, f);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = m.row(static_cast<Eigen::Index>(i));
    const double mean = row.mean();
    row.array() -= mean;
    const double stddev = std::sqrt(row.array().square().mean());
    row /= std::max(stddev, epsilon);
  }
  return out;
}

Tensor augment_hflip(const Tensor& images, std::uint64_t rng_seed) {
  const std::size_t n = images.dim(0);
  const std::size_t c = images.dim(1), h = images.dim(2), w = images.dim(3);
  Tensor out = images;
  Rng rng = Rng(rng_seed).fork("hflip");
  for (std::size_t i = 0; i < n; ++i) {
    if (!rng.bernoulli(0.5)) continue;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t r = 0; r < h; ++r) {
        double* row = out.data() + ((i * c + ch) * h + r) * w;
        for (std::size_t a = 0, b = w - 1; a < b; ++a, --b) std::swap(row[a], row[b]);
      }
    }
  }
  return out;
}

Dataset synth_clusters(int num_classes, int per_class, std::size_t height,
                       std::size_t width, double separation, std::uint64_t rng_seed) {
  if (num_classes <= 0 || per_class <= 0 || height == 0 || width == 0) {
    throw ShapeError("synth_clusters: all dimensions must be positive");
  }
  const std::size_t f = height * width;
  const std::size_t n = static_cast<std::size_t>(num_classes) * per_class;
  Rng base(rng_seed);

  // Random unit directions scaled by `separation`; separation 0 collapses
  // all class means onto the origin.
  Mat means(num_classes, f);
  {
    Rng mrng = base.fork("means");
    for (int cls = 0; cls < num_classes; ++cls) {
      for (std::size_t j = 0; j < f; ++j) means(cls, j) = mrng.normal();
      const double norm = means.row(cls).norm();
      means.row(cls) *= separation / (norm > 0 ? norm : 1.0);
    }
  }

  Dataset ds;
  ds.images = Tensor({n, 1, height, width});
  ds.labels.resize(n);
  ds.num_classes = num_classes;
  ds.provenance = "synthetic";
  Rng srng = base.fork("samples");
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % num_classes);
    ds.labels[i] = cls;
    for (std::size_t j = 0; j < f; ++j) {
      ds.images[i * f + j] = means(cls, static_cast<Eigen::Index>(j)) + srng.normal();
    }
  }
  return ds;
}

Mat class_means(const Dataset& dataset) {
  const std::size_t f = dataset.features();
  Mat means = Mat::Zero(dataset.num_classes, f);
  std::vector<int> counts(dataset.num_classes, 0);
  const auto imgs = dataset.images.matrix(dataset.size(), f);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    means.row(dataset.labels[i]) += imgs.row(static_cast<Eigen::Index>(i));
    counts[dataset.labels[i]]++;
  }
  for (int cls = 0; cls < dataset.num_classes; ++cls) {
    if (counts[cls]) means.row(cls) /= counts[cls];
  }
  return means;
}

namespace {
constexpr char kCacheMagic[4] = {'R', 'D', 'L', 'D'};
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

void save_dataset_cache(const fs::path& path, const Dataset& dataset) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IdxError(IdxError::Kind::Io, "cannot write " + path.string());
  os.write(kCacheMagic, 4);
  auto put32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
  put32(kCacheVersion);
  put32(static_cast<std::uint32_t>(dataset.size()));
  put32(static_cast<std::uint32_t>(dataset.images.dim(1)));
  put32(static_cast<std::uint32_t>(dataset.images.dim(2)));
  put32(static_cast<std::uint32_t>(dataset.images.dim(3)));
  put32(static_cast<std::uint32_t>(dataset.num_classes));
  put32(static_cast<std::uint32_t>(dataset.provenance.size()));
  os.write(dataset.provenance.data(),
           static_cast<std::streamsize>(dataset.provenance.size()));
  os.write(reinterpret_cast<const char*>(dataset.labels.data()),
           static_cast<std::streamsize>(dataset.labels.size() * sizeof(int)));
  os.write(reinterpret_cast<const char*>(dataset.images.data()),
           static_cast<std::streamsize>(dataset.images.size() * sizeof(double)));
  if (!os) throw IdxError(IdxError::Kind::Io, "short write to " + path.string());
}

Dataset load_dataset_cache(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IdxError(IdxError::Kind::Io, "cannot read " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCacheMagic, 4) != 0) {
    throw IdxError(IdxError::Kind::BadMagic, path.string() + ": not a dataset cache");
  }
  auto get32 = [&]() {
    std::uint32_t v;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) {
      throw IdxError(IdxError::Kind::Truncated, path.string() + ": truncated");
    }
    return v;
  };
  if (get32() != kCacheVersion) {
    throw IdxError(IdxError::Kind::BadMagic, path.string() + ": unsupported cache version");
  }
  const std::uint32_t n = get32(), c = get32(), h = get32(), w = get32();
  Dataset ds;
  ds.num_classes = static_cast<int>(get32());
  std::string prov(get32(), '\0');
  if (!prov.empty() && !is.read(prov.data(), static_cast<std::streamsize>(prov.size()))) {
    throw IdxError(IdxError::Kind::Truncated, path.string() + ": truncated");
  }
  ds.provenance = prov;
  ds.labels.resize(n);
  ds.images = Tensor({n, c, h, w});
  if (n && !is.read(reinterpret_cast<char*>(ds.labels.data()),
                    static_cast<std::streamsize>(n * sizeof(int)))) {
    throw IdxError(IdxError::Kind::Truncated, path.string() + ": truncated");
  }
  if (ds.images.size() &&
      !is.read(reinterpret_cast<char*>(ds.images.data()),
               static_cast<std::streamsize>(ds.images.size() * sizeof(double)))) {
    throw IdxError(IdxError::Kind::Truncated, path.string() + ": truncated");
  }
  ds.validate();
  return ds;
}

}  // namespace rdl
