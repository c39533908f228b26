#pragma once

#include "adalase/tensor.hpp"

namespace adalase {

struct CrossEntropy {
  double loss = 0.0;
  /// d(loss)/d(logits), same shape as the logits.
  Tensor4 grad;
};

/// Mean over the batch of -sum_c y_c log softmax(logits)_c, computed with
/// max subtraction. Logits are (batch, classes, 1, 1). Throws ShapeError on
/// mismatched shapes and ValidationError when label rows do not sum to 1.
CrossEntropy cross_entropy(const Tensor4& logits, const SoftLabels& labels);

}  // namespace adalase
