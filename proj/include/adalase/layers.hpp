#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "adalase/kernels.hpp"
#include "adalase/tensor.hpp"

namespace adalase {

class Rng;

/// A trainable tensor and its gradient slot (same shape).
struct Param {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> value;
  std::vector<double> grad;
  /// Fan-in used for initialization.
  std::size_t fan_in = 1;
  bool is_bias = false;

  std::size_t size() const { return value.size(); }
};

/// One stage of the layer stack. `forward` caches what `backward` needs;
/// `infer` is the cache-free, const equivalent.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string kind() const = 0;
  /// Throws ShapeError when `in` is not accepted.
  virtual MapShape output_shape(const MapShape& in) const = 0;

  virtual Tensor4 infer(const Tensor4& in) const = 0;
  virtual Tensor4 forward(const Tensor4& in) = 0;
  /// Returns d(loss)/d(in) and overwrites the gradients of this layer's params.
  virtual Tensor4 backward(const Tensor4& grad_out) = 0;

  virtual std::vector<Param*> params() { return {}; }
  virtual std::vector<const Param*> params() const { return {}; }
};

/// Fully connected layer over the flattened per-sample features. The output
/// can be laid out as a spatial map so that spatial augmentations (cutout,
/// translation) have a geometry to act on in MLP hidden layers.
class Dense final : public Layer {
 public:
  Dense(std::size_t in_features, MapShape out_map);
  Dense(std::size_t in_features, std::size_t out_features)
      : Dense(in_features, MapShape{out_features, 1, 1}) {}

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  std::string kind() const override { return "dense"; }
  MapShape output_shape(const MapShape& in) const override;
  Tensor4 infer(const Tensor4& in) const override;
  Tensor4 forward(const Tensor4& in) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::vector<const Param*> params() const override { return {&weight_, &bias_}; }

 private:
  std::size_t in_features_;
  MapShape out_map_;
  Param weight_;
  Param bias_;
  Tensor4 input_;
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel = 3,
         std::size_t stride = 1, std::size_t pad = 1);

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string kind() const override { return "conv2d"; }
  MapShape output_shape(const MapShape& in) const override;
  Tensor4 infer(const Tensor4& in) const override;
  Tensor4 forward(const Tensor4& in) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::vector<const Param*> params() const override { return {&weight_, &bias_}; }

 private:
  kernels::ConvGeometry geometry(const Shape4& in) const;

  std::size_t in_channels_;
  std::size_t out_channels_;
  std::size_t kernel_;
  std::size_t stride_;
  std::size_t pad_;
  Param weight_;
  Param bias_;
  Tensor4 input_;
};

class Relu final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
  std::string kind() const override { return "relu"; }
  MapShape output_shape(const MapShape& in) const override { return in; }
  Tensor4 infer(const Tensor4& in) const override;
  Tensor4 forward(const Tensor4& in) override;
  Tensor4 backward(const Tensor4& grad_out) override;

 private:
  Tensor4 input_;
};

/// 2x2 max pooling, stride 2.
class MaxPool2 final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2>(*this); }
  std::string kind() const override { return "maxpool2"; }
  MapShape output_shape(const MapShape& in) const override;
  Tensor4 infer(const Tensor4& in) const override;
  Tensor4 forward(const Tensor4& in) override;
  Tensor4 backward(const Tensor4& grad_out) override;

 private:
  Shape4 in_shape_;
  std::vector<std::size_t> argmax_;
};

/// relu(conv2(relu(conv1(x))) + x), 3x3 convolutions, no normalization.
class ResidualBlock final : public Layer {
 public:
  explicit ResidualBlock(std::size_t channels);

  std::unique_ptr<Layer> clone() const override { return std::make_unique<ResidualBlock>(*this); }
  std::string kind() const override { return "residual"; }
  MapShape output_shape(const MapShape& in) const override;
  Tensor4 infer(const Tensor4& in) const override;
  Tensor4 forward(const Tensor4& in) override;
  Tensor4 backward(const Tensor4& grad_out) override;
  std::vector<Param*> params() override;
  std::vector<const Param*> params() const override;

 private:
  std::size_t channels_;
  Conv2d conv1_;
  Relu relu1_;
  Conv2d conv2_;
  Relu relu_out_;
};

class GlobalAvgPool final : public Layer {
 public:
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
  std::string kind() const override { return "global_avg_pool"; }
  MapShape output_shape(const MapShape& in) const override { return {in.c, 1, 1}; }
  Tensor4 infer(const Tensor4& in) const override;
  Tensor4 forward(const Tensor4& in) override;
  Tensor4 backward(const Tensor4& grad_out) override;

 private:
  Shape4 in_shape_;
};

}  // namespace adalase
