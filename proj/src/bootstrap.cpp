#include "rdl/bootstrap.hpp"

#include "rdl/errors.hpp"
#include "rdl/rng.hpp"

namespace rdl {

BootstrapResult bootstrap_rdm_distance(const RowMat& acts_a, const RowMat& acts_b,
                                       int samples, int sample_size,
                                       PairwiseMetric metric, RdmComparison method,
                                       std::uint64_t rng_seed, bool with_replacement) {
  const auto pool = static_cast<std::size_t>(acts_a.rows());
  if (acts_b.rows() != acts_a.rows()) {
    throw ShapeError("bootstrap_rdm_distance: pools differ in size");
  }
  if (sample_size < 2 || static_cast<std::size_t>(sample_size) > pool) {
    throw ShapeError("bootstrap_rdm_distance: sample size must be in [2, pool size]");
  }
  if (samples <= 0) throw ShapeError("bootstrap_rdm_distance: need samples > 0");

  const Rng base(rng_seed);
  BootstrapResult res;
  double sum = 0.0;
  for (int it = 0; it < samples; ++it) {
    Rng rng = base.fork("bootstrap", static_cast<std::uint64_t>(it));
    std::vector<std::size_t> idx;
    if (with_replacement) {
      idx.resize(static_cast<std::size_t>(sample_size));
      for (auto& i : idx) i = rng.uniform_int(pool);
    } else {
      idx = rng.sample_without_replacement(pool, static_cast<std::size_t>(sample_size));
    }

    RowMat sub_a(sample_size, acts_a.cols());
    RowMat sub_b(sample_size, acts_b.cols());
    for (int r = 0; r < sample_size; ++r) {
      sub_a.row(r) = acts_a.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]));
      sub_b.row(r) = acts_b.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]));
    }
    try {
      const Rdm rdm_a = compute_rdm(sub_a, metric);
      const Rdm rdm_b = compute_rdm(sub_b, metric);
      sum += rdm_distance(rdm_a, rdm_b, method);
      ++res.used;
    } catch (const DegenerateInputError&) {
      ++res.skipped;
    }
  }
  if (res.used == 0) {
    throw DegenerateInputError("bootstrap_rdm_distance: every subset was degenerate");
  }
  res.mean_distance = sum / res.used;
  return res;
}

}  // namespace rdl
