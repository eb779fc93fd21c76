#pragma once

#include <vector>

#include "rdl/errors.hpp"

namespace rdl {

// Paired classification outcomes of two models A and B on a shared test
// set: n01 counts items only A got right, n10 items only B got right.
struct PairedOutcomes {
  long n00 = 0;
  long n01 = 0;
  long n10 = 0;
  long n11 = 0;

  long total() const { return n00 + n01 + n10 + n11; }
  void validate() const {
    if (n00 < 0 || n01 < 0 || n10 < 0 || n11 < 0) {
      throw ShapeError("paired outcome counts must be nonnegative");
    }
  }
};

PairedOutcomes paired_outcomes(const std::vector<int>& pred_a,
                               const std::vector<int>& pred_b,
                               const std::vector<int>& labels);

// Two-sided exact McNemar test on the discordant pairs: with
// m = n01 + n10 and k = min(n01, n10),
//   p = min(1, 2 * sum_{i<=k} C(m, i) * 0.5^m),
// and p = 1 when m = 0.
double mcnemar_exact(const PairedOutcomes& outcomes);

}  // namespace rdl
