#include "rdl/loss.hpp"

#include <cmath>

#include "rdl/errors.hpp"

namespace rdl {

LossResult softmax_xent(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.size() / n;
  if (labels.size() != n) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  const auto x = logits.matrix(n, k);

  LossResult res;
  res.grad = Tensor::zeros(logits.shape());
  auto g = res.grad.matrix(n, k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ShapeError("label " + std::to_string(y) + " out of range for " +
                       std::to_string(k) + " classes");
    }
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    const double m = x.row(r).maxCoeff();
    const Eigen::ArrayXd shifted = x.row(r).array() - m;
    const double lse = std::log(shifted.exp().sum());
    total += lse - shifted[y];
    g.row(r) = (shifted - lse).exp().matrix() / static_cast<double>(n);
    g(r, y) -= 1.0 / static_cast<double>(n);
  }
  res.loss = total / static_cast<double>(n);
  if (!std::isfinite(res.loss) || !res.grad.all_finite()) {
    throw NumericError("non-finite cross-entropy");
  }
  return res;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  const std::size_t n = scores.dim(0);
  const std::size_t k = scores.size() / n;
  const auto m = scores.matrix(n, k);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index best;
    m.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

double error_rate(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("error_rate: prediction/label count mismatch");
  }
  if (predictions.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] != labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

}  // namespace rdl
