#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "rdl/errors.hpp"
#include "rdl/rng.hpp"

namespace rdl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRowMat = Eigen::Map<RowMat>;
using ConstMapRowMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Vec>;
using ConstMapVec = Eigen::Map<const Vec>;

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense n-dimensional array of doubles in row-major order: the carrier for
// activations, parameters and gradients. 64-bit throughout.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(Vec::Zero(shape_size(shape_))) {}

  Tensor(Shape shape, Vec data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != static_cast<std::size_t>(data_.size())) {
      throw ShapeError("tensor shape " + shape_str(shape_) + " does not match " +
                       std::to_string(data_.size()) + " values");
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor from(std::initializer_list<double> values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return Tensor({values.size()}, std::move(v));
  }

  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (Eigen::Index i = 0; i < t.data_.size(); ++i) t.data_[i] = rng.uniform(lo, hi);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  Vec& vec() { return data_; }
  const Vec& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[static_cast<Eigen::Index>(i)]; }
  double operator[](std::size_t i) const { return data_[static_cast<Eigen::Index>(i)]; }

  // Row-major matrix view over the flat buffer.
  MapRowMat matrix(std::size_t rows, std::size_t cols) {
    check_view(rows, cols);
    return MapRowMat(data_.data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
  }
  ConstMapRowMat matrix(std::size_t rows, std::size_t cols) const {
    check_view(rows, cols);
    return ConstMapRowMat(data_.data(), static_cast<Eigen::Index>(rows),
                          static_cast<Eigen::Index>(cols));
  }

  // Batch view: first extent as rows, everything else flattened to columns.
  MapRowMat batch_matrix() { return matrix(shape_.at(0), size() / shape_.at(0)); }
  ConstMapRowMat batch_matrix() const { return matrix(shape_.at(0), size() / shape_.at(0)); }

  // Same data, new shape; extent product must match.
  Tensor reshaped(Shape new_shape) const { return Tensor(std::move(new_shape), data_); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const { return data_.allFinite(); }

  bool operator==(const Tensor& o) const {
    return shape_ == o.shape_ && data_.size() == o.data_.size() && data_ == o.data_;
  }

  std::uint64_t content_hash(std::uint64_t h = 0xcbf29ce484222325ull) const {
    return fnv1a64(data_.data(), sizeof(double) * size(), h);
  }

 private:
  void check_view(std::size_t rows, std::size_t cols) const {
    if (rows * cols != size()) {
      throw ShapeError("cannot view " + std::to_string(size()) + " values as " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  Shape shape_;
  Vec data_;
};

}  // namespace rdl
