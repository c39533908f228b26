#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace adalase {

/// Batch x channels x height x width.
struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const { return n * c * h * w; }
  std::size_t spatial() const { return h * w; }
  std::size_t per_sample() const { return c * h * w; }
  std::string str() const;

  friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Per-sample feature map geometry (channels x height x width).
struct MapShape {
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const { return c * h * w; }
  Shape4 with_batch(std::size_t n) const { return {n, c, h, w}; }

  friend bool operator==(const MapShape&, const MapShape&) = default;
};

/// Dense rank-4 array of doubles in NCHW order.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0);
  /// Throws ShapeError when `data.size() != shape.size()`.
  Tensor4(Shape4 shape, std::vector<double> data);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[index(n, c, y, x)];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(n, c, y, x)];
  }

  std::span<double> sample(std::size_t n);
  std::span<const double> sample(std::size_t n) const;

  /// Same data, different geometry. Throws ShapeError if element counts differ.
  Tensor4 reshaped(Shape4 shape) const;

  bool all_finite() const;

  /// Bitwise equality of shape and contents.
  friend bool operator==(const Tensor4& a, const Tensor4& b);

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

/// Row-stochastic label matrix (batch x classes).
class SoftLabels {
 public:
  SoftLabels() = default;
  SoftLabels(std::size_t rows, std::size_t classes);

  static SoftLabels one_hot(std::span<const int> labels, std::size_t classes);

  std::size_t rows() const { return rows_; }
  std::size_t classes() const { return classes_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * classes_, classes_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * classes_, classes_};
  }
  double& at(std::size_t i, std::size_t c) { return data_[i * classes_ + c]; }
  double at(std::size_t i, std::size_t c) const { return data_[i * classes_ + c]; }
  std::span<const double> data() const { return data_; }

  /// Throws ValidationError unless every entry is finite and nonnegative and
  /// every row sums to 1 within `tol`.
  void validate(double tol = 1e-6) const;

  friend bool operator==(const SoftLabels&, const SoftLabels&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> data_;
};

}  // namespace adalase
