#pragma once

#include <cstdint>

#include "rdl/rdm.hpp"
#include "rdl/tensor.hpp"

namespace rdl {

struct BootstrapResult {
  double mean_distance = 0.0;
  int used = 0;     // subsets that produced a distance
  int skipped = 0;  // subsets dropped as degenerate under the comparison
};

// Mean RDM distance between two models over `samples` random image subsets
// of a shared pool. `acts_a` and `acts_b` hold the two models' activations
// for the pool, one row per image (the feature widths may differ).
// Subsets are drawn without replacement within each subset unless
// `with_replacement` is set; each subset's indices come from a
// deterministic fork of (seed, subset index), so iterations are
// order-independent. Degenerate subsets (e.g. a constant RDM triangle under
// the correlation comparison) are skipped and counted.
BootstrapResult bootstrap_rdm_distance(const RowMat& acts_a, const RowMat& acts_b,
                                       int samples, int sample_size,
                                       PairwiseMetric metric, RdmComparison method,
                                       std::uint64_t rng_seed,
                                       bool with_replacement = false);

}  // namespace rdl
