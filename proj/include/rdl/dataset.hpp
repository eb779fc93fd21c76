#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rdl/tensor.hpp"

namespace rdl {

// A labeled image collection: images [n, channels, height, width] with
// values already scaled to [0, 1] for file-backed sources.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  int num_classes = 0;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const {
    return {images.dim(1), images.dim(2), images.dim(3)};
  }
  std::size_t features() const { return shape_size(image_shape()); }

  // Rows `indices` of this dataset, in the given order.
  Dataset subset(const std::vector<std::size_t>& indices) const;
  // Batch tensor + labels for rows [begin, begin+count).
  Tensor batch(std::size_t begin, std::size_t count) const;

  std::uint64_t content_hash() const;
  void validate() const;
};

// MNIST-style IDX containers, big-endian: magic 0x00000803 for images
// (u8, [n, rows, cols]) and 0x00000801 for labels (u8, [n]). Pixels are
// scaled to [0, 1] by /255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

struct TrainValidationSplit {
  Dataset train;
  Dataset validation;
};

// Deterministic shuffle-then-partition; disjoint and exhaustive.
TrainValidationSplit split(const Dataset& dataset, std::size_t validation_count,
                           std::uint64_t rng_seed);

// Global contrast normalization, per image: subtract the image mean, divide
// by max(std, epsilon). Population standard deviation.
Tensor gcn(const Tensor& images, double epsilon = 1e-8);

// Flip each image left-right independently with probability 0.5.
Tensor augment_hflip(const Tensor& images, std::uint64_t rng_seed);

// Gaussian class clusters in pixel space with means `separation` apart from
// the origin along random unit directions, reshaped to [1, height, width]
// images. Desk-scale stand-in data for teacher/student experiments.
Dataset synth_clusters(int num_classes, int per_class, std::size_t height,
                       std::size_t width, double separation, std::uint64_t rng_seed);

// Class-conditional means of a dataset, one row per class.
Mat class_means(const Dataset& dataset);

// Single-file binary mirror of a Dataset for fast reload (magic "RDLD",
// versioned). Round-trips exactly.
void save_dataset_cache(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset_cache(const std::filesystem::path& path);

}  // namespace rdl
