#pragma once

#include <vector>

#include "rdl/tensor.hpp"

namespace rdl {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // w.r.t. logits, [n, classes]
};

// Mean softmax cross-entropy over the batch, log-sum-exp stabilized.
// grad = (softmax(logits) - onehot(labels)) / n.
LossResult softmax_xent(const Tensor& logits, const std::vector<int>& labels);

// Row-wise argmax of a [n, k] tensor.
std::vector<int> argmax_rows(const Tensor& scores);

// Fraction of rows whose argmax disagrees with the label.
double error_rate(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace rdl
