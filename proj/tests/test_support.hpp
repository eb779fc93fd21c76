#pragma once

#include <Eigen/Dense>
#include <functional>

#include "rdl/network.hpp"
#include "rdl/rng.hpp"
#include "rdl/tensor.hpp"

namespace rdl::test {

// Central finite differences of a scalar function of a flat parameter
// vector. Independent of any analytic gradient path in the library.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double step = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + step;
    const double hi = f(p);
    p[i] = saved - step;
    const double lo = f(p);
    p[i] = saved;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

// Five-point central differences (Richardson-extrapolated): truncation
// O(h^4), so a larger step keeps the roundoff term small too. Use where the
// tolerance is tighter than plain central differencing can reach.
inline Eigen::VectorXd finite_difference_rich(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double step = 1e-4) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = p[i];
    const double h = step * std::max(1.0, std::abs(saved));
    p[i] = saved + h;
    const double f1 = f(p);
    p[i] = saved - h;
    const double f_1 = f(p);
    p[i] = saved + 2 * h;
    const double f2 = f(p);
    p[i] = saved - 2 * h;
    const double f_2 = f(p);
    p[i] = saved;
    g[i] = (8.0 * (f1 - f_1) - (f2 - f_2)) / (12.0 * h);
  }
  return g;
}

// Componentwise relative error with an absolute floor: values whose analytic
// and numeric magnitudes both sit below `floor` are treated as matching.
inline double max_rel_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric,
                            double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor::uniform(std::move(shape), lo, hi, rng);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                                     double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Flattened view of all network parameters, and its inverse. Used to drive
// whole-network finite differencing.
inline Eigen::VectorXd flatten_params(const Network& net) {
  Eigen::VectorXd out(net.param_count());
  Eigen::Index k = 0;
  for (const auto& layer : net.layers()) {
    for (std::size_t i = 0; i < layer.weights.size(); ++i) out[k++] = layer.weights[i];
    for (std::size_t i = 0; i < layer.bias.size(); ++i) out[k++] = layer.bias[i];
  }
  return out;
}

inline void unflatten_params(Network& net, const Eigen::VectorXd& flat) {
  Eigen::Index k = 0;
  for (auto& layer : net.layers()) {
    for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] = flat[k++];
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] = flat[k++];
  }
}

inline Eigen::VectorXd flatten_grads(const Network& net, const Gradients& g) {
  Eigen::VectorXd out(net.param_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i) out[k++] = g.weights[l][i];
    for (std::size_t i = 0; i < layer.bias.size(); ++i) out[k++] = g.bias[l][i];
  }
  return out;
}

}  // namespace rdl::test
