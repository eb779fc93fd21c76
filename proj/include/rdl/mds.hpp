#pragma once

#include <Eigen/Dense>

namespace rdl {

// 2-D classical MDS embedding of a distance matrix. `points` has one row
// per item; `dims` may degrade to 1 or 0 when the double-centered matrix
// has fewer than two positive eigenvalues (the remaining columns are zero).
struct MdsEmbedding {
  Eigen::MatrixXd points;  // k x 2
  double stress = 0.0;     // positive spectrum not captured by the embedding
  int dims = 2;
};

// Double-centers -0.5 * J D^2 J and embeds the top-2 nonnegative eigenpairs
// as coordinates eigvec * sqrt(eigval). The centroid sits at the origin and
// each axis is sign-fixed so its first nonzero coordinate is positive.
// Exact (up to rounding) for distance matrices realizable in the plane.
MdsEmbedding classical_mds(const Eigen::MatrixXd& distances);

}  // namespace rdl
