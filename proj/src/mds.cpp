#include "rdl/mds.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "rdl/errors.hpp"

namespace rdl {

MdsEmbedding classical_mds(const Eigen::MatrixXd& distances) {
  const Eigen::Index k = distances.rows();
  if (k == 0 || distances.cols() != k) {
    throw ShapeError("classical_mds: need a square distance matrix");
  }
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ShapeError("classical_mds: distance matrix must be symmetric");
  }
  if (distances.diagonal().cwiseAbs().maxCoeff() > 1e-12) {
    throw ShapeError("classical_mds: distance matrix must have a zero diagonal");
  }
  if (distances.minCoeff() < -1e-9) {
    throw ShapeError("classical_mds: distances must be nonnegative");
  }
  const Eigen::MatrixXd clean = distances.cwiseMax(0.0);  // rounding dust

  const Eigen::MatrixXd j =
      Eigen::MatrixXd::Identity(k, k) - Eigen::MatrixXd::Constant(k, k, 1.0 / double(k));
  const Eigen::MatrixXd b = -0.5 * j * clean.cwiseProduct(clean) * j;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) {
    throw NumericError("classical_mds: eigendecomposition failed");
  }
  // Ascending eigenvalues; take the top two that are positive.
  const Eigen::VectorXd evals = solver.eigenvalues();
  const Eigen::MatrixXd evecs = solver.eigenvectors();

  MdsEmbedding out;
  out.points = Eigen::MatrixXd::Zero(k, 2);
  out.dims = 0;
  double captured = 0.0, positive_total = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) positive_total += std::max(0.0, evals[i]);
  for (int axis = 0; axis < 2; ++axis) {
    const Eigen::Index idx = k - 1 - axis;
    if (idx < 0 || evals[idx] <= 0.0) break;
    out.points.col(axis) = evecs.col(idx) * std::sqrt(evals[idx]);
    captured += evals[idx];
    ++out.dims;
  }
  out.stress = positive_total - captured;

  // Gauge fixes: centroid at the origin, first nonzero coordinate of each
  // axis positive.
  for (int axis = 0; axis < 2; ++axis) {
    out.points.col(axis).array() -= out.points.col(axis).mean();
    for (Eigen::Index i = 0; i < k; ++i) {
      const double v = out.points(i, axis);
      if (v != 0.0) {
        if (v < 0.0) out.points.col(axis) = -out.points.col(axis);
        break;
      }
    }
  }
  return out;
}

}  // namespace rdl
