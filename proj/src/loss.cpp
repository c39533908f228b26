#include "adalase/loss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "adalase/error.hpp"

namespace adalase {

CrossEntropy cross_entropy(const Tensor4& logits, const SoftLabels& labels) {
  const Shape4& s = logits.shape();
  const std::size_t classes = s.per_sample();
  if (labels.rows() != s.n || labels.classes() != classes) {
    throw ShapeError("cross_entropy: logits " + s.str() + " vs labels (" +
                     std::to_string(labels.rows()) + "," + std::to_string(labels.classes()) + ")");
  }
  if (s.n == 0) throw ShapeError("cross_entropy: empty batch");
  labels.validate();

  CrossEntropy out{0.0, Tensor4(s)};
  const double inv_n = 1.0 / static_cast<double>(s.n);
  std::vector<double> p(classes);
  for (std::size_t i = 0; i < s.n; ++i) {
    auto z = logits.sample(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = std::exp(z[c] - zmax);
      denom += p[c];
    }
    const double log_denom = std::log(denom);
    auto g = out.grad.sample(i);
    double row_loss = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double y = labels.at(i, c);
      if (y != 0.0) row_loss -= y * (z[c] - zmax - log_denom);
      g[c] = (p[c] / denom - y) * inv_n;
    }
    out.loss += row_loss;
  }
  out.loss *= inv_n;
  return out;
}

}  // namespace adalase
