#include "adalase/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "adalase/error.hpp"

namespace adalase {

std::string Shape4::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.str());
  }
}

std::span<double> Tensor4::sample(std::size_t n) {
  const std::size_t k = shape_.per_sample();
  return {data_.data() + n * k, k};
}

std::span<const double> Tensor4::sample(std::size_t n) const {
  const std::size_t k = shape_.per_sample();
  return {data_.data() + n * k, k};
}

Tensor4 Tensor4::reshaped(Shape4 shape) const {
  if (shape.size() != data_.size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor4(shape, data_);
}

bool Tensor4::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool operator==(const Tensor4& a, const Tensor4& b) {
  if (!(a.shape_ == b.shape_)) return false;
  // memcmp so that -0.0 vs 0.0 and NaN payloads count as differences.
  return a.data_.empty() ||
         std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(double)) == 0;
}

SoftLabels::SoftLabels(std::size_t rows, std::size_t classes)
    : rows_(rows), classes_(classes), data_(rows * classes, 0.0) {}

SoftLabels SoftLabels::one_hot(std::span<const int> labels, std::size_t classes) {
  SoftLabels out(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw RangeError("label " + std::to_string(l) + " outside [0, " + std::to_string(classes) +
                       ")");
    }
    out.at(i, static_cast<std::size_t>(l)) = 1.0;
  }
  return out;
}

void SoftLabels::validate(double tol) const {
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (double v : row(i)) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("label row " + std::to_string(i) + " has a negative or non-finite entry");
      }
      s += v;
    }
    if (std::abs(s - 1.0) > tol) {
      std::ostringstream os;
      os << "label row " << i << " sums to " << s << ", expected 1";
      throw ValidationError(os.str());
    }
  }
}

}  // namespace adalase
