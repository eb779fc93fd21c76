#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <string>

#include "rdl/errors.hpp"

namespace rdl {

// Pairwise dissimilarity between two activation vectors.
enum class PairwiseMetric {
  MeanSquaredError,  // |a - b|^2 / K
  SquaredEuclidean,  // |a - b|^2
  Correlation,       // 1 - Pearson r, in [0, 2]
};

inline std::string pairwise_metric_name(PairwiseMetric m) {
  switch (m) {
    case PairwiseMetric::MeanSquaredError: return "mse";
    case PairwiseMetric::SquaredEuclidean: return "squared_euclidean";
    case PairwiseMetric::Correlation: return "correlation";
  }
  return "unknown";
}

inline PairwiseMetric pairwise_metric_from_name(const std::string& name) {
  if (name == "mse") return PairwiseMetric::MeanSquaredError;
  if (name == "squared_euclidean") return PairwiseMetric::SquaredEuclidean;
  if (name == "correlation") return PairwiseMetric::Correlation;
  throw ConfigError("unknown pairwise metric '" + name + "'");
}

// How two RDMs are compared (over their upper triangles).
enum class RdmComparison { Correlation, NormalizedEuclidean };

inline std::string rdm_comparison_name(RdmComparison m) {
  return m == RdmComparison::Correlation ? "correlation" : "normalized_euclidean";
}

inline RdmComparison rdm_comparison_from_name(const std::string& name) {
  if (name == "correlation") return RdmComparison::Correlation;
  if (name == "normalized_euclidean") return RdmComparison::NormalizedEuclidean;
  throw ConfigError("unknown rdm comparison '" + name + "'");
}

// n x n representational distance matrix over a batch of inputs at one
// layer: symmetric, zero diagonal.
struct Rdm {
  Eigen::MatrixXd values;
  PairwiseMetric metric = PairwiseMetric::MeanSquaredError;

  Eigen::Index n() const { return values.rows(); }
};

// Pearson correlation of two equal-length vectors. Throws
// DegenerateInputError when either vector is constant.
inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw DegenerateInputError("pearson: need two vectors of equal length >= 2");
  }
  const Eigen::ArrayXd ca = a.array() - a.mean();
  const Eigen::ArrayXd cb = b.array() - b.mean();
  const double na = std::sqrt((ca * ca).sum());
  const double nb = std::sqrt((cb * cb).sum());
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("pearson: correlation of a constant vector is undefined");
  }
  // Rounding can push the ratio an ulp outside [-1, 1]; clamp so derived
  // distances stay in range.
  return std::clamp((ca * cb).sum() / (na * nb), -1.0, 1.0);
}

namespace detail {

// d(a, b) for one pair of rows.
template <typename DerivedA, typename DerivedB>
double pair_dissimilarity(const Eigen::MatrixBase<DerivedA>& a,
                          const Eigen::MatrixBase<DerivedB>& b, PairwiseMetric metric) {
  switch (metric) {
    case PairwiseMetric::MeanSquaredError:
      return (a - b).squaredNorm() / static_cast<double>(a.size());
    case PairwiseMetric::SquaredEuclidean:
      return (a - b).squaredNorm();
    case PairwiseMetric::Correlation: {
      return 1.0 - pearson(a.transpose(), b.transpose());
    }
  }
  return 0.0;
}

}  // namespace detail

// RDM of a batch of activations, one row per input, features flattened.
// values(i, j) = d(acts.row(i), acts.row(j)); symmetric with zero diagonal
// by construction.
template <typename Derived>
Rdm compute_rdm(const Eigen::MatrixBase<Derived>& acts, PairwiseMetric metric) {
  const Eigen::Index n = acts.rows();
  if (n < 2) throw DegenerateInputError("compute_rdm: need at least 2 inputs");

  Rdm rdm;
  rdm.metric = metric;
  rdm.values = Eigen::MatrixXd::Zero(n, n);

  if (metric == PairwiseMetric::Correlation) {
    // Center and normalize rows once; a zero-variance row is degenerate.
    Eigen::MatrixXd c = acts.template cast<double>();
    c.colwise() -= c.rowwise().mean();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double norm = c.row(i).norm();
      if (norm == 0.0) {
        throw DegenerateInputError("compute_rdm: constant activation vector at row " +
                                   std::to_string(i) + " under correlation metric");
      }
      c.row(i) /= norm;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double d = 1.0 - c.row(i).dot(c.row(j));
        rdm.values(i, j) = d;
        rdm.values(j, i) = d;
      }
    }
    return rdm;
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = detail::pair_dissimilarity(acts.row(i), acts.row(j), metric);
      rdm.values(i, j) = d;
      rdm.values(j, i) = d;
    }
  }
  return rdm;
}

// Upper triangle (i < j), row-major order, as a vector.
inline Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  Eigen::VectorXd v(n * (n - 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) v[k++] = m(i, j);
  }
  return v;
}

// Distance between two RDMs over a shared input set.
//   Correlation:          1 - Pearson r of the upper-triangle vectors.
//   NormalizedEuclidean:  |u/|u| - v/|v||.
inline double rdm_distance(const Rdm& a, const Rdm& b, RdmComparison method) {
  if (a.n() != b.n()) throw ShapeError("rdm_distance: size mismatch");
  const Eigen::VectorXd u = upper_triangle(a.values);
  const Eigen::VectorXd v = upper_triangle(b.values);
  switch (method) {
    case RdmComparison::Correlation:
      return 1.0 - pearson(u, v);
    case RdmComparison::NormalizedEuclidean: {
      const double nu = u.norm(), nv = v.norm();
      if (nu == 0.0 || nv == 0.0) {
        throw DegenerateInputError("rdm_distance: zero-norm RDM under normalized euclidean");
      }
      return (u / nu - v / nv).norm();
    }
  }
  return 0.0;
}

}  // namespace rdl
