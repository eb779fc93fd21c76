#include <doctest.h>

#include <cmath>

#include "rdl/bootstrap.hpp"
#include "rdl/errors.hpp"
#include "rdl/exporters.hpp"
#include "rdl/mds.hpp"
#include "rdl/metrics_io.hpp"
#include "rdl/stats.hpp"
#include "test_support.hpp"

using namespace rdl;

// ---------------------------------------------------------------------------
// McNemar
// ---------------------------------------------------------------------------

namespace {

// Exact rational oracle: sum_{i<=k} C(m,i) as a 64-bit integer over 2^m.
// Exact for m <= 30 (sum < 2^30, every C fits well inside 64 bits).
double mcnemar_oracle(long n01, long n10) {
  const long m = n01 + n10;
  if (m == 0) return 1.0;
  const long k = std::min(n01, n10);
  unsigned long long sum = 0;
  for (long i = 0; i <= k; ++i) {
    unsigned long long c = 1;  // C(m, i) by rows of Pascal's triangle
    for (long j = 1; j <= i; ++j) c = c * static_cast<unsigned long long>(m - j + 1) /
                                      static_cast<unsigned long long>(j);
    sum += c;
  }
  const double p = 2.0 * static_cast<double>(sum) / std::pow(2.0, static_cast<double>(m));
  return std::min(1.0, p);
}

}  // namespace

TEST_CASE("mcnemar: symmetric discordance and no discordance give p = 1") {
  CHECK(mcnemar_exact({0, 5, 5, 0}) == 1.0);
  CHECK(mcnemar_exact({3, 0, 0, 4}) == 1.0);
}

TEST_CASE("mcnemar matches the hand-computed 1-vs-9 case") {
  // 2*(C(10,0)+C(10,1))*0.5^10 = 22/1024.
  const double p = mcnemar_exact({0, 1, 9, 0});
  CHECK(std::abs(p - 22.0 / 1024.0) < 1e-10);
}

TEST_CASE("mcnemar equals the exact rational oracle for all m <= 30") {
  for (long m = 0; m <= 30; ++m) {
    for (long n01 = 0; n01 <= m; ++n01) {
      const long n10 = m - n01;
      const double p = mcnemar_exact({0, n01, n10, 0});
      const double expect = mcnemar_oracle(n01, n10);
      CHECK(std::abs(p - expect) < 1e-14);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      // Symmetry under swapping the discordant counts.
      CHECK(p == mcnemar_exact({0, n10, n01, 0}));
    }
  }
}

TEST_CASE("paired_outcomes tallies agreement against labels") {
  const std::vector<int> labels{0, 1, 2, 3, 4};
  const std::vector<int> a{0, 1, 2, 0, 0};  // right on 0,1,2
  const std::vector<int> b{0, 0, 2, 3, 0};  // right on 0,2,3
  const PairedOutcomes o = paired_outcomes(a, b, labels);
  CHECK(o.n11 == 2);  // items 0, 2
  CHECK(o.n01 == 1);  // item 1
  CHECK(o.n10 == 1);  // item 3
  CHECK(o.n00 == 1);  // item 4
  CHECK(o.total() == 5);
}

// ---------------------------------------------------------------------------
// Classical MDS
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return d;
}

}  // namespace

TEST_CASE("mds embeds an equilateral triangle exactly") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 1, 1, 0, 1, 1, 1, 0;
  const MdsEmbedding e = classical_mds(d);
  CHECK(e.dims == 2);
  const Eigen::MatrixXd rec = pairwise_distances(e.points);
  CHECK((rec - d).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(e.points.col(0).sum()) < 1e-9);
  CHECK(std::abs(e.points.col(1).sum()) < 1e-9);
  CHECK(e.stress < 1e-9);
}

TEST_CASE("mds recovers random planar configurations") {
  Rng rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::MatrixXd pts = test::random_matrix(4, 2, rng, -2.0, 2.0);
    const Eigen::MatrixXd d = pairwise_distances(pts);
    const MdsEmbedding e = classical_mds(d);
    const Eigen::MatrixXd rec = pairwise_distances(e.points);
    CHECK((rec - d).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("mds of an all-zero matrix puts every point at the origin") {
  const MdsEmbedding e = classical_mds(Eigen::MatrixXd::Zero(4, 4));
  CHECK(e.points.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(e.dims == 0);
}

TEST_CASE("mds degrades to one dimension for collinear points") {
  // Three collinear points: 0, 1, 3 on a line.
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 3, 1, 0, 2, 3, 2, 0;
  const MdsEmbedding e = classical_mds(d);
  CHECK(e.dims == 1);
  CHECK(e.points.col(1).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::MatrixXd rec = pairwise_distances(e.points);
  CHECK((rec - d).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("mds validates its input") {
  Eigen::MatrixXd bad(2, 3);
  bad.setZero();
  CHECK_THROWS_AS(classical_mds(bad), ShapeError);
  Eigen::MatrixXd asym(2, 2);
  asym << 0, 1, 2, 0;
  CHECK_THROWS_AS(classical_mds(asym), ShapeError);
  Eigen::MatrixXd diag(2, 2);
  diag << 1, 0, 0, 1;
  CHECK_THROWS_AS(classical_mds(diag), ShapeError);
  Eigen::MatrixXd neg(2, 2);
  neg << 0, -1, -1, 0;
  CHECK_THROWS_AS(classical_mds(neg), ShapeError);
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

TEST_CASE("bootstrap distance of a model against itself is zero") {
  Rng rng(80);
  const RowMat acts = test::random_matrix(50, 6, rng);
  for (std::uint64_t seed : {1ull, 2ull, 77ull}) {
    const BootstrapResult r = bootstrap_rdm_distance(
        acts, acts, 8, 10, PairwiseMetric::MeanSquaredError, RdmComparison::Correlation,
        seed);
    CHECK(r.used == 8);
    CHECK(r.mean_distance < 1e-12);
  }
}

TEST_CASE("single full-pool subset equals a direct rdm distance") {
  Rng rng(81);
  const RowMat a = test::random_matrix(20, 5, rng);
  const RowMat b = test::random_matrix(20, 7, rng);
  const BootstrapResult r = bootstrap_rdm_distance(
      a, b, 1, 20, PairwiseMetric::MeanSquaredError, RdmComparison::Correlation, 5);
  const double direct = rdm_distance(compute_rdm(a, PairwiseMetric::MeanSquaredError),
                                     compute_rdm(b, PairwiseMetric::MeanSquaredError),
                                     RdmComparison::Correlation);
  CHECK(r.mean_distance == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("variance of the bootstrap mean shrinks with more samples") {
  Rng rng(82);
  const RowMat a = test::random_matrix(120, 4, rng);
  const RowMat b = test::random_matrix(120, 4, rng);
  auto spread = [&](int samples) {
    std::vector<double> means;
    for (int s = 0; s < 24; ++s) {
      means.push_back(bootstrap_rdm_distance(a, b, samples, 12,
                                             PairwiseMetric::MeanSquaredError,
                                             RdmComparison::Correlation, 1000 + s)
                          .mean_distance);
    }
    double mu = 0.0;
    for (double m : means) mu += m;
    mu /= means.size();
    double var = 0.0;
    for (double m : means) var += (m - mu) * (m - mu);
    return var / means.size();
  };
  CHECK(spread(40) < spread(2));
}

TEST_CASE("degenerate subsets are skipped and counted") {
  // Model B is constant on the whole pool: every subset rdm has a constant
  // (all-zero) upper triangle, so the correlation comparison always skips.
  Rng rng(83);
  const RowMat a = test::random_matrix(30, 4, rng);
  RowMat b = RowMat::Zero(30, 4);
  b.col(0).setOnes();  // rows identical: zero rdm; rows non-constant so the
                       // metric itself stays defined
  CHECK_THROWS_AS(bootstrap_rdm_distance(a, b, 4, 8, PairwiseMetric::MeanSquaredError,
                                         RdmComparison::Correlation, 9),
                  DegenerateInputError);
  // Under normalized-Euclidean the zero-norm side is equally degenerate.
  CHECK_THROWS_AS(bootstrap_rdm_distance(a, b, 4, 8, PairwiseMetric::MeanSquaredError,
                                         RdmComparison::NormalizedEuclidean, 9),
                  DegenerateInputError);

  // A mixed pool: pairs drawn entirely from the five identical rows are
  // degenerate and must be skipped and counted, the rest still average.
  RowMat mixed(6, 3);
  mixed.setZero();
  mixed.row(5) << 1.0, 2.0, 3.0;
  const RowMat other = test::random_matrix(6, 3, rng);
  const BootstrapResult r = bootstrap_rdm_distance(
      other, mixed, 30, 2, PairwiseMetric::MeanSquaredError,
      RdmComparison::NormalizedEuclidean, 13);
  CHECK(r.used + r.skipped == 30);
  CHECK(r.used > 0);
  CHECK(r.skipped > 0);
}

// ---------------------------------------------------------------------------
// Error-curve artifact
// ---------------------------------------------------------------------------

TEST_CASE("empty history serializes to a bare header") {
  CHECK(error_curve_csv({}) == "epoch,train_loss,train_error,test_error,alpha,learning_rate\n");
  CHECK(parse_error_curve_csv(error_curve_csv({})).empty());
}

TEST_CASE("error curve round-trips three epochs exactly") {
  std::vector<EpochMetrics> history(3);
  for (int e = 0; e < 3; ++e) {
    history[e].epoch = e;
    history[e].train_loss = 0.1 + 0.01 * e + 1e-13;
    history[e].train_error = 0.5 / (e + 1);
    history[e].test_error = e == 1 ? std::numeric_limits<double>::quiet_NaN() : 0.4 / (e + 1);
    history[e].alpha = 1.0 - e / 3.0;
    history[e].learning_rate = 0.01;
  }
  const std::string csv = error_curve_csv(history);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
  const auto back = parse_error_curve_csv(csv);
  REQUIRE(back.size() == 3);
  for (int e = 0; e < 3; ++e) {
    CHECK(back[e].epoch == e);
    CHECK(back[e].train_loss == history[e].train_loss);
    CHECK(back[e].train_error == history[e].train_error);
    if (std::isnan(history[e].test_error)) {
      CHECK(std::isnan(back[e].test_error));
    } else {
      CHECK(back[e].test_error == history[e].test_error);
    }
    CHECK(back[e].alpha == history[e].alpha);
  }
  CHECK_THROWS_AS(parse_error_curve_csv("bogus\n"), ShapeError);
}

// ---------------------------------------------------------------------------
// Exporters
// ---------------------------------------------------------------------------

TEST_CASE("rdm csv export parses back to the same matrix") {
  Rng rng(84);
  const Rdm rdm = compute_rdm(test::random_matrix(5, 3, rng), PairwiseMetric::MeanSquaredError);
  const Eigen::MatrixXd back = parse_square_csv(rdm_csv(rdm));
  CHECK((back - rdm.values).cwiseAbs().maxCoeff() == 0.0);

  const std::string sidecar = rdm_sidecar_json(rdm, {1, 2, 3, 4, 5});
  CHECK(sidecar.find("\"metric\": \"mse\"") != std::string::npos);
  const std::string svg = rdm_heatmap_svg(rdm);
  CHECK(svg.find("<svg") != std::string::npos);
  // One rect per cell.
  std::size_t rects = 0, pos = 0;
  while ((pos = svg.find("<rect", pos)) != std::string::npos) {
    ++rects;
    ++pos;
  }
  CHECK(rects == 25);
}

TEST_CASE("mds export names every point") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 1, 1, 0, 1, 1, 1, 0;
  const MdsEmbedding e = classical_mds(d);
  const std::string svg = mds_scatter_svg(e, {"alpha", "beta", "gamma"});
  for (const char* name : {"alpha", "beta", "gamma"}) {
    CHECK(svg.find(name) != std::string::npos);
  }
  const std::string sidecar = mds_sidecar_json(e, {"alpha", "beta", "gamma"});
  CHECK(sidecar.find("\"stress\"") != std::string::npos);
}
