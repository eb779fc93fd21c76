#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "rdl/errors.hpp"
#include "rdl/rdm.hpp"
#include "rdl/rng.hpp"
#include "rdl/tensor.hpp"

namespace rdl {

// ---------------------------------------------------------------------------
// Pair subsampling
// ---------------------------------------------------------------------------

// Random subset P of unordered index pairs (i, j), i < j, drawn without
// replacement from the n(n-1)/2 pairs of a batch.
struct PairSample {
  std::vector<std::pair<int, int>> pairs;  // sorted, i < j
  double fraction = 1.0;

  std::size_t size() const { return pairs.size(); }
};

namespace detail {

inline PairSample select_pairs(int n, std::size_t m, Rng& rng, double fraction) {
  const std::size_t total = static_cast<std::size_t>(n) * (n - 1) / 2;
  std::vector<std::uint32_t> ids(total);
  for (std::size_t k = 0; k < total; ++k) ids[k] = static_cast<std::uint32_t>(k);
  for (std::size_t k = 0; k < m; ++k) {
    std::swap(ids[k], ids[k + rng.uniform_int(total - k)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());

  PairSample sample;
  sample.fraction = fraction;
  sample.pairs.reserve(m);
  // Decode flat upper-triangle ids in row-major order.
  std::size_t row_start = 0;
  int i = 0;
  std::size_t row_len = static_cast<std::size_t>(n - 1);
  for (std::uint32_t id : ids) {
    while (id >= row_start + row_len) {
      row_start += row_len;
      --row_len;
      ++i;
    }
    const int j = i + 1 + static_cast<int>(id - row_start);
    sample.pairs.emplace_back(i, j);
  }
  return sample;
}

}  // namespace detail

// Uniform sample of round(fraction * n(n-1)/2) pairs. Deterministic given
// the generator state.
inline PairSample sample_pairs(int n, double fraction, Rng& rng) {
  if (n < 2) throw DegenerateInputError("sample_pairs: need n >= 2");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DegenerateInputError("sample_pairs: fraction must be in (0, 1]");
  }
  const std::size_t total = static_cast<std::size_t>(n) * (n - 1) / 2;
  const auto m = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(total)));
  if (m == 0) {
    throw DegenerateInputError("sample_pairs: fraction " + std::to_string(fraction) +
                               " yields zero pairs for n=" + std::to_string(n));
  }
  return detail::select_pairs(n, m, rng, fraction);
}

inline PairSample sample_pairs(int n, double fraction, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return sample_pairs(n, fraction, rng);
}

// Same, but with the pair count given directly (the paper-style "500 pairs
// per mini-batch" configuration).
inline PairSample sample_pair_count(int n, std::size_t count, Rng& rng) {
  if (n < 2) throw DegenerateInputError("sample_pair_count: need n >= 2");
  const std::size_t total = static_cast<std::size_t>(n) * (n - 1) / 2;
  if (count == 0) throw DegenerateInputError("sample_pair_count: zero pairs");
  if (count > total) count = total;  // tail batches: cap at the available pairs
  return detail::select_pairs(n, count, rng,
                              static_cast<double>(count) / static_cast<double>(total));
}

// ---------------------------------------------------------------------------
// Auxiliary RDM-matching objective
// ---------------------------------------------------------------------------
//
// With S the student RDM and T the teacher RDM over the same batch,
//
//   E_aux = 2/(n(n-1)) * sum_{i<j} (S_ij - T_ij)^2
//
// and the gradient w.r.t. the student activation row f_i is
//
//   dE_aux/df_i = 4/(n(n-1)) * sum_{j != i} (S_ij - T_ij) * dd(f_i, f_j)/df_i.
//
// For the mean-squared-error metric dd/df_i = (2/K)(f_i - f_j), so the
// leading constant becomes 8/(n(n-1)K); for the squared-Euclidean metric the
// K factor drops. The pair-subsampled estimator replaces 4/(n(n-1)) with
// 4/(|X_P| |P_i|) per row, where X_P is the set of distinct images in P and
// P_i the sampled pairs containing i; rows with no sampled pair get a zero
// gradient.

namespace detail {

inline void check_aux_sizes(Eigen::Index n, const Rdm& teacher) {
  if (n < 2) throw DegenerateInputError("aux objective: need n >= 2");
  if (teacher.n() != n) {
    throw ShapeError("aux objective: teacher RDM is " + std::to_string(teacher.n()) +
                     "x" + std::to_string(teacher.n()) + " for a batch of " +
                     std::to_string(n));
  }
}

// Gradient of d(f_i, f_j) w.r.t. f_i for the correlation metric:
//   d = 1 - rho(f_i, f_j),  drho/df_i = C (u_j - rho u_i) / |c_i|
// with c = centered row, u = c/|c| and C the centering projector.
inline Eigen::RowVectorXd correlation_pair_grad(const Eigen::MatrixXd& acts,
                                                Eigen::Index i, Eigen::Index j) {
  const Eigen::RowVectorXd ci = acts.row(i).array() - acts.row(i).mean();
  const Eigen::RowVectorXd cj = acts.row(j).array() - acts.row(j).mean();
  const double ni = ci.norm(), nj = cj.norm();
  if (ni == 0.0 || nj == 0.0) {
    throw DegenerateInputError("correlation gradient: constant activation vector");
  }
  const Eigen::RowVectorXd ui = ci / ni, uj = cj / nj;
  const double rho = ui.dot(uj);
  Eigen::RowVectorXd g = (uj - rho * ui) / ni;
  g.array() -= g.mean();  // centering projector
  return -g;
}

// Shared core: G.row(i) = row_coeff[i] * sum_j W(i,j) * dd(f_i, f_j)/df_i,
// where W holds the (S - T) residuals of the pairs that participate
// (symmetrically) and row_coeff the per-row normalization.
inline Eigen::MatrixXd weighted_pair_grad(const Eigen::MatrixXd& acts,
                                          const Eigen::MatrixXd& w,
                                          const Eigen::VectorXd& row_coeff,
                                          PairwiseMetric metric) {
  const Eigen::Index n = acts.rows();
  const auto k = static_cast<double>(acts.cols());

  if (metric == PairwiseMetric::Correlation) {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, acts.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (row_coeff[i] == 0.0) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i || w(i, j) == 0.0) continue;
        grad.row(i) += w(i, j) * correlation_pair_grad(acts, i, j);
      }
      grad.row(i) *= row_coeff[i];
    }
    return grad;
  }

  // dd/df_i = s * (f_i - f_j) with s = 2/K (MSE) or 2 (squared Euclidean):
  //   G.row(i) = c_i * s * [ (sum_j w_ij) f_i - sum_j w_ij f_j ]
  // which is one dense matrix product.
  const double s = metric == PairwiseMetric::MeanSquaredError ? 2.0 / k : 2.0;
  const Eigen::VectorXd row_sums = w.rowwise().sum();
  Eigen::MatrixXd grad = row_sums.asDiagonal() * acts;
  grad.noalias() -= w * acts;
  grad.array().colwise() *= s * row_coeff.array();
  return grad;
}

}  // namespace detail

// E_aux from precomputed student/teacher RDMs.
inline double aux_loss(const Rdm& student, const Rdm& teacher) {
  detail::check_aux_sizes(student.n(), teacher);
  const Eigen::Index n = student.n();
  const Eigen::MatrixXd diff = student.values - teacher.values;
  // Each unordered pair appears twice in the full matrix.
  const double sum_sq = diff.squaredNorm() / 2.0;
  return 2.0 * sum_sq / (static_cast<double>(n) * static_cast<double>(n - 1));
}

// E_aux between the RDM of `student_acts` (one row per input) and a teacher
// RDM over the same batch.
template <typename Derived>
double aux_loss(const Eigen::MatrixBase<Derived>& student_acts, const Rdm& teacher,
                PairwiseMetric metric) {
  return aux_loss(compute_rdm(student_acts, metric), teacher);
}

// Exact gradient of aux_loss w.r.t. every student activation.
inline Eigen::MatrixXd aux_grad_exact_from_rdm(const Eigen::MatrixXd& acts,
                                               const Rdm& student, const Rdm& teacher) {
  detail::check_aux_sizes(acts.rows(), teacher);
  const Eigen::Index n = acts.rows();
  const Eigen::MatrixXd w = student.values - teacher.values;  // zero diagonal
  const double coeff = 4.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
  return detail::weighted_pair_grad(acts, w, Eigen::VectorXd::Constant(n, coeff),
                                    student.metric);
}

template <typename Derived>
Eigen::MatrixXd aux_grad_exact(const Eigen::MatrixBase<Derived>& student_acts,
                               const Rdm& teacher, PairwiseMetric metric) {
  const Eigen::MatrixXd acts = student_acts.template cast<double>();
  return aux_grad_exact_from_rdm(acts, compute_rdm(acts, metric), teacher);
}

// Pair-subsampled gradient estimate. Unsampled rows get a zero gradient.
inline Eigen::MatrixXd aux_grad_sampled_from_rdm(const Eigen::MatrixXd& acts,
                                                 const Rdm& student, const Rdm& teacher,
                                                 const PairSample& sample) {
  detail::check_aux_sizes(acts.rows(), teacher);
  if (sample.pairs.empty()) throw DegenerateInputError("aux_grad_sampled: empty sample");
  const Eigen::Index n = acts.rows();

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd pairs_per_row = Eigen::VectorXd::Zero(n);
  std::vector<char> in_sample(static_cast<std::size_t>(n), 0);
  for (const auto& [i, j] : sample.pairs) {
    if (i < 0 || j <= i || j >= n) {
      throw ShapeError("aux_grad_sampled: pair (" + std::to_string(i) + "," +
                       std::to_string(j) + ") out of range");
    }
    const double r = student.values(i, j) - teacher.values(i, j);
    w(i, j) = r;
    w(j, i) = r;
    pairs_per_row[i] += 1.0;
    pairs_per_row[j] += 1.0;
    in_sample[static_cast<std::size_t>(i)] = 1;
    in_sample[static_cast<std::size_t>(j)] = 1;
  }
  double distinct = 0.0;
  for (char f : in_sample) distinct += f;

  Eigen::VectorXd row_coeff = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pairs_per_row[i] > 0.0) row_coeff[i] = 4.0 / (distinct * pairs_per_row[i]);
  }
  return detail::weighted_pair_grad(acts, w, row_coeff, student.metric);
}

template <typename Derived>
Eigen::MatrixXd aux_grad_sampled(const Eigen::MatrixBase<Derived>& student_acts,
                                 const Rdm& teacher, const PairSample& sample,
                                 PairwiseMetric metric) {
  const Eigen::MatrixXd acts = student_acts.template cast<double>();
  return aux_grad_sampled_from_rdm(acts, compute_rdm(acts, metric), teacher, sample);
}

// ---------------------------------------------------------------------------
// Gradient combination and alpha schedules
// ---------------------------------------------------------------------------

// Total gradient at a layer carrying an auxiliary error:
// backprop_grad + alpha * aux_grad.
inline Tensor combine_gradients(const Tensor& backprop_grad, const Tensor& aux_grad,
                                double alpha) {
  if (backprop_grad.size() != aux_grad.size()) {
    throw ShapeError("combine_gradients: size mismatch");
  }
  if (alpha < 0.0) throw ShapeError("combine_gradients: alpha must be nonnegative");
  Tensor out = backprop_grad;
  out.vec() += alpha * aux_grad.vec();
  return out;
}

enum class AlphaRule {
  RdlLinear,  // alpha_t = alpha0 * (1 - t/t_max)
  DsnDecay,   // alpha_{t+1} = alpha_t * 0.1 * (1 - t/t_max)
};

struct AlphaSchedule {
  double alpha0 = 0.0;
  int t_max = 0;
  AlphaRule rule = AlphaRule::RdlLinear;
};

// Auxiliary-loss weight at the start of epoch `epoch` (0-based; epoch ==
// t_max is the value after the final epoch).
inline double alpha_at(const AlphaSchedule& schedule, int epoch) {
  if (schedule.t_max <= 0) throw DegenerateInputError("alpha_at: t_max must be positive");
  if (epoch < 0 || epoch > schedule.t_max) {
    throw DegenerateInputError("alpha_at: epoch " + std::to_string(epoch) +
                               " outside [0, " + std::to_string(schedule.t_max) + "]");
  }
  if (schedule.alpha0 < 0.0) throw DegenerateInputError("alpha_at: negative alpha0");
  switch (schedule.rule) {
    case AlphaRule::RdlLinear:
      return schedule.alpha0 *
             (1.0 - static_cast<double>(epoch) / static_cast<double>(schedule.t_max));
    case AlphaRule::DsnDecay: {
      double a = schedule.alpha0;
      for (int t = 0; t < epoch; ++t) {
        a *= 0.1 * (1.0 - static_cast<double>(t) / static_cast<double>(schedule.t_max));
      }
      return a;
    }
  }
  return 0.0;
}

}  // namespace rdl
