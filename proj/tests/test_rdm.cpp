#include <doctest.h>

#include <cmath>

#include "rdl/errors.hpp"
#include "rdl/rdm.hpp"
#include "test_support.hpp"

using namespace rdl;

namespace {

// Independent scalar implementations of the pairwise metrics, used as the
// brute-force oracle for compute_rdm.
double oracle_pair(const Eigen::MatrixXd& acts, int i, int j, PairwiseMetric metric) {
  const int k = static_cast<int>(acts.cols());
  switch (metric) {
    case PairwiseMetric::MeanSquaredError: {
      double s = 0.0;
      for (int c = 0; c < k; ++c) {
        const double d = acts(i, c) - acts(j, c);
        s += d * d;
      }
      return s / k;
    }
    case PairwiseMetric::SquaredEuclidean: {
      double s = 0.0;
      for (int c = 0; c < k; ++c) {
        const double d = acts(i, c) - acts(j, c);
        s += d * d;
      }
      return s;
    }
    case PairwiseMetric::Correlation: {
      double ma = 0.0, mb = 0.0;
      for (int c = 0; c < k; ++c) {
        ma += acts(i, c);
        mb += acts(j, c);
      }
      ma /= k;
      mb /= k;
      double num = 0.0, da = 0.0, db = 0.0;
      for (int c = 0; c < k; ++c) {
        num += (acts(i, c) - ma) * (acts(j, c) - mb);
        da += (acts(i, c) - ma) * (acts(i, c) - ma);
        db += (acts(j, c) - mb) * (acts(j, c) - mb);
      }
      return 1.0 - num / std::sqrt(da * db);
    }
  }
  return 0.0;
}

}  // namespace

TEST_CASE("identical rows give an all-zero rdm under every metric") {
  Eigen::MatrixXd acts(2, 3);
  acts << 1.0, 2.0, 3.0, 1.0, 2.0, 3.0;
  for (auto metric : {PairwiseMetric::MeanSquaredError, PairwiseMetric::SquaredEuclidean}) {
    Rdm rdm = compute_rdm(acts, metric);
    CHECK(rdm.values.cwiseAbs().maxCoeff() == 0.0);
  }
  // The correlation path normalizes rows first, so identical rows cancel
  // only to rounding.
  CHECK(compute_rdm(acts, PairwiseMetric::Correlation).values.cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("mse rdm of rows [0,0] and [2,2] has off-diagonal 4") {
  Eigen::MatrixXd acts(2, 2);
  acts << 0.0, 0.0, 2.0, 2.0;
  Rdm rdm = compute_rdm(acts, PairwiseMetric::MeanSquaredError);
  CHECK(rdm.values(0, 1) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(rdm.values(1, 0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(rdm.values(0, 0) == 0.0);
  CHECK(rdm.values(1, 1) == 0.0);
}

TEST_CASE("rdm matches the entrywise scalar oracle on random inputs") {
  Rng rng(21);
  const Eigen::MatrixXd acts = test::random_matrix(5, 7, rng);
  for (auto metric : {PairwiseMetric::MeanSquaredError, PairwiseMetric::SquaredEuclidean,
                      PairwiseMetric::Correlation}) {
    Rdm rdm = compute_rdm(acts, metric);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double expect = i == j ? 0.0 : oracle_pair(acts, i, j, metric);
        CHECK(rdm.values(i, j) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("rdm invariants: symmetry, zero diagonal, permutation behavior") {
  Rng rng(22);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 3 + static_cast<int>(rng.uniform_int(6));
    const int k = 2 + static_cast<int>(rng.uniform_int(9));
    const Eigen::MatrixXd acts = test::random_matrix(n, k, rng);

    for (auto metric :
         {PairwiseMetric::MeanSquaredError, PairwiseMetric::SquaredEuclidean}) {
      const Rdm rdm = compute_rdm(acts, metric);
      CHECK((rdm.values - rdm.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(rdm.values.diagonal().cwiseAbs().maxCoeff() == 0.0);
      CHECK(rdm.values.minCoeff() >= 0.0);

      // Feature-column permutation leaves the rdm unchanged.
      std::vector<int> perm(k);
      for (int c = 0; c < k; ++c) perm[c] = c;
      rng.shuffle(perm);
      Eigen::MatrixXd shuffled(n, k);
      for (int c = 0; c < k; ++c) shuffled.col(c) = acts.col(perm[c]);
      CHECK((compute_rdm(shuffled, metric).values - rdm.values).cwiseAbs().maxCoeff() <
            1e-12);

      // Relabeling inputs by pi conjugates the rdm.
      std::vector<int> rperm(n);
      for (int r = 0; r < n; ++r) rperm[r] = r;
      rng.shuffle(rperm);
      Eigen::MatrixXd racts(n, k);
      for (int r = 0; r < n; ++r) racts.row(r) = acts.row(rperm[r]);
      const Rdm rrdm = compute_rdm(racts, metric);
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          CHECK(rrdm.values(a, b) ==
                doctest::Approx(rdm.values(rperm[a], rperm[b])).epsilon(1e-14));
        }
      }
    }

    // MSE rdm equals squared-Euclidean rdm divided by feature count.
    const Rdm mse = compute_rdm(acts, PairwiseMetric::MeanSquaredError);
    const Rdm se = compute_rdm(acts, PairwiseMetric::SquaredEuclidean);
    CHECK((mse.values * static_cast<double>(k) - se.values).cwiseAbs().maxCoeff() <
          1e-12 * se.values.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("correlation metric rejects constant rows explicitly") {
  Eigen::MatrixXd acts(3, 4);
  acts.setRandom();
  acts.row(1).setConstant(2.5);
  CHECK_THROWS_AS(compute_rdm(acts, PairwiseMetric::Correlation), DegenerateInputError);
}

TEST_CASE("rdm of fewer than two rows is rejected") {
  Eigen::MatrixXd acts(1, 4);
  acts.setRandom();
  CHECK_THROWS_AS(compute_rdm(acts, PairwiseMetric::MeanSquaredError),
                  DegenerateInputError);
}

TEST_CASE("rdm_distance of an rdm with itself is zero") {
  Rng rng(23);
  const Rdm rdm = compute_rdm(test::random_matrix(6, 5, rng), PairwiseMetric::MeanSquaredError);
  CHECK(rdm_distance(rdm, rdm, RdmComparison::Correlation) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rdm_distance(rdm, rdm, RdmComparison::NormalizedEuclidean) == 0.0);
}

TEST_CASE("correlation distance is invariant to entrywise scaling") {
  Rng rng(24);
  Rdm a = compute_rdm(test::random_matrix(6, 5, rng), PairwiseMetric::MeanSquaredError);
  Rdm b = a;
  b.values *= 2.0;
  CHECK(rdm_distance(a, b, RdmComparison::Correlation) < 1e-12);
  CHECK(rdm_distance(a, b, RdmComparison::NormalizedEuclidean) < 1e-12);
}

TEST_CASE("rdm_distance matches a direct pearson oracle") {
  Rng rng(25);
  const Rdm a = compute_rdm(test::random_matrix(6, 4, rng), PairwiseMetric::MeanSquaredError);
  const Rdm b = compute_rdm(test::random_matrix(6, 4, rng), PairwiseMetric::MeanSquaredError);

  // Direct scalar Pearson over the 15 upper-triangle entries.
  std::vector<double> u, v;
  for (int i = 0; i < 6; ++i) {
    for (int j = i + 1; j < 6; ++j) {
      u.push_back(a.values(i, j));
      v.push_back(b.values(i, j));
    }
  }
  double mu = 0.0, mv = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    mu += u[t];
    mv += v[t];
  }
  mu /= u.size();
  mv /= v.size();
  double num = 0.0, du = 0.0, dv = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    num += (u[t] - mu) * (v[t] - mv);
    du += (u[t] - mu) * (u[t] - mu);
    dv += (v[t] - mv) * (v[t] - mv);
  }
  const double expect = 1.0 - num / std::sqrt(du * dv);
  CHECK(rdm_distance(a, b, RdmComparison::Correlation) ==
        doctest::Approx(expect).epsilon(1e-12));
  // Symmetry in the two arguments.
  CHECK(rdm_distance(a, b, RdmComparison::Correlation) ==
        doctest::Approx(rdm_distance(b, a, RdmComparison::Correlation)).epsilon(1e-14));
  CHECK(rdm_distance(a, b, RdmComparison::NormalizedEuclidean) ==
        doctest::Approx(rdm_distance(b, a, RdmComparison::NormalizedEuclidean)).epsilon(1e-14));
}

TEST_CASE("constant upper triangle under correlation comparison is degenerate") {
  Rdm a, b;
  a.values = Eigen::MatrixXd::Zero(3, 3);
  b.values = Eigen::MatrixXd::Zero(3, 3);
  a.values(0, 1) = a.values(1, 0) = 1.0;
  a.values(0, 2) = a.values(2, 0) = 2.0;
  a.values(1, 2) = a.values(2, 1) = 3.0;
  // b's upper triangle is constant 1.
  b.values(0, 1) = b.values(1, 0) = 1.0;
  b.values(0, 2) = b.values(2, 0) = 1.0;
  b.values(1, 2) = b.values(2, 1) = 1.0;
  CHECK_THROWS_AS(rdm_distance(a, b, RdmComparison::Correlation), DegenerateInputError);
  CHECK_THROWS_AS(rdm_distance(a, b, RdmComparison::Correlation), DegenerateInputError);
}
