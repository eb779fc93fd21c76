#include "rdl/stats.hpp"

#include <algorithm>
#include <cmath>

namespace rdl {

PairedOutcomes paired_outcomes(const std::vector<int>& pred_a,
                               const std::vector<int>& pred_b,
                               const std::vector<int>& labels) {
  if (pred_a.size() != labels.size() || pred_b.size() != labels.size()) {
    throw ShapeError("paired_outcomes: prediction/label counts disagree");
  }
  PairedOutcomes o;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a = pred_a[i] == labels[i];
    const bool b = pred_b[i] == labels[i];
    if (a && b) ++o.n11;
    else if (a) ++o.n01;
    else if (b) ++o.n10;
    else ++o.n00;
  }
  return o;
}

double mcnemar_exact(const PairedOutcomes& outcomes) {
  outcomes.validate();
  const long m = outcomes.n01 + outcomes.n10;
  if (m == 0) return 1.0;
  const long k = std::min(outcomes.n01, outcomes.n10);

  // Binomial(m, 1/2) lower tail. The coefficient recurrence is exact in
  // 80-bit floats well past any desk-scale test set; C(m, i)*(m-i) stays an
  // integer below the 64-bit mantissa for m <= 30, which makes the small
  // cases exactly representable.
  long double coeff = 1.0L;
  long double tail = 1.0L;  // i = 0 term, as coefficient units
  for (long i = 0; i < k; ++i) {
    coeff = coeff * static_cast<long double>(m - i) / static_cast<long double>(i + 1);
    tail += coeff;
  }
  const long double p = 2.0L * tail * std::pow(0.5L, static_cast<long double>(m));
  return static_cast<double>(std::min(1.0L, p));
}

}  // namespace rdl
