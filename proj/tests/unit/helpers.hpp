#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "adalase/network.hpp"
#include "adalase/rng.hpp"
#include "adalase/tensor.hpp"

namespace testutil {

inline adalase::Tensor4 random_tensor(adalase::Shape4 s, adalase::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
  adalase::Tensor4 t(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline adalase::SoftLabels random_onehot(std::size_t n, std::size_t classes, adalase::Rng& rng) {
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.uniform_index(classes));
  return adalase::SoftLabels::one_hot(labels, classes);
}

/// Plain elementwise loop with long double accumulation.
inline double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace testutil
