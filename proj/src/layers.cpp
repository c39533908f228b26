#include "adalase/layers.hpp"

#include <algorithm>
#include <utility>

#include "adalase/error.hpp"

namespace adalase {

namespace {

Param make_param(std::string name, std::vector<std::size_t> dims, std::size_t fan_in, bool bias) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  Param p;
  p.name = std::move(name);
  p.dims = std::move(dims);
  p.value.assign(n, 0.0);
  p.grad.assign(n, 0.0);
  p.fan_in = fan_in;
  p.is_bias = bias;
  return p;
}

void require_cached(const Tensor4& cached, const char* layer) {
  if (cached.size() == 0) {
    throw StateError(std::string(layer) + ": backward called without a cached forward pass");
  }
}

}  // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in_features, MapShape out_map)
    : in_features_(in_features),
      out_map_(out_map),
      weight_(make_param("weight", {out_map.size(), in_features}, in_features, false)),
      bias_(make_param("bias", {out_map.size()}, in_features, true)) {}

MapShape Dense::output_shape(const MapShape& in) const {
  if (in.size() != in_features_) {
    throw ShapeError("dense: expected " + std::to_string(in_features_) + " input features, got " +
                     std::to_string(in.size()));
  }
  return out_map_;
}

Tensor4 Dense::infer(const Tensor4& in) const {
  const Shape4& s = in.shape();
  output_shape({s.c, s.h, s.w});
  Tensor4 out(out_map_.with_batch(s.n));
  kernels::parallel::dense_forward({s.n, in_features_, out_map_.size()}, in.data(), weight_.value,
                                   bias_.value, out.data());
  return out;
}

Tensor4 Dense::forward(const Tensor4& in) {
  Tensor4 out = infer(in);
  input_ = in;
  return out;
}

Tensor4 Dense::backward(const Tensor4& grad_out) {
  require_cached(input_, "dense");
  const std::size_t n = input_.shape().n;
  Tensor4 grad_in(input_.shape());
  kernels::parallel::dense_backward({n, in_features_, out_map_.size()}, input_.data(),
                                    weight_.value, grad_out.data(), grad_in.data(), weight_.grad,
                                    bias_.grad);
  return grad_in;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t pad)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(make_param("weight", {out_channels, in_channels, kernel, kernel},
                         in_channels * kernel * kernel, false)),
      bias_(make_param("bias", {out_channels}, in_channels * kernel * kernel, true)) {
  if (stride == 0 || kernel == 0) throw ShapeError("conv2d: kernel and stride must be positive");
}

kernels::ConvGeometry Conv2d::geometry(const Shape4& in) const {
  return {in.n, in_channels_, in.h, in.w, out_channels_, kernel_, stride_, pad_};
}

MapShape Conv2d::output_shape(const MapShape& in) const {
  if (in.c != in_channels_) {
    throw ShapeError("conv2d: expected " + std::to_string(in_channels_) + " channels, got " +
                     std::to_string(in.c));
  }
  if (in.h + 2 * pad_ < kernel_ || in.w + 2 * pad_ < kernel_) {
    throw ShapeError("conv2d: input smaller than kernel");
  }
  const auto g = geometry({1, in.c, in.h, in.w});
  return {out_channels_, g.out_height(), g.out_width()};
}

Tensor4 Conv2d::infer(const Tensor4& in) const {
  const Shape4& s = in.shape();
  const MapShape o = output_shape({s.c, s.h, s.w});
  Tensor4 out(o.with_batch(s.n));
  kernels::parallel::conv2d_forward(geometry(s), in.data(), weight_.value, bias_.value, out.data());
  return out;
}

Tensor4 Conv2d::forward(const Tensor4& in) {
  Tensor4 out = infer(in);
  input_ = in;
  return out;
}

Tensor4 Conv2d::backward(const Tensor4& grad_out) {
  require_cached(input_, "conv2d");
  Tensor4 grad_in(input_.shape());
  kernels::parallel::conv2d_backward(geometry(input_.shape()), input_.data(), weight_.value,
                                     grad_out.data(), grad_in.data(), weight_.grad, bias_.grad);
  return grad_in;
}

// ---------------------------------------------------------------- Relu

Tensor4 Relu::infer(const Tensor4& in) const {
  Tensor4 out(in.shape());
  auto src = in.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
  return out;
}

Tensor4 Relu::forward(const Tensor4& in) {
  input_ = in;
  return infer(in);
}

Tensor4 Relu::backward(const Tensor4& grad_out) {
  require_cached(input_, "relu");
  Tensor4 grad_in(input_.shape());
  auto x = input_.data();
  auto g = grad_out.data();
  auto dst = grad_in.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] > 0.0 ? g[i] : 0.0;
  return grad_in;
}

// ---------------------------------------------------------------- MaxPool2

MapShape MaxPool2::output_shape(const MapShape& in) const {
  if (in.h < 2 || in.w < 2) throw ShapeError("maxpool2: spatial dims must be >= 2");
  return {in.c, in.h / 2, in.w / 2};
}

Tensor4 MaxPool2::infer(const Tensor4& in) const {
  const Shape4& s = in.shape();
  const MapShape o = output_shape({s.c, s.h, s.w});
  Tensor4 out(o.with_batch(s.n));
  std::vector<std::size_t> argmax(out.size());
  kernels::parallel::maxpool2_forward({s.n, s.c, s.h, s.w}, in.data(), out.data(), argmax);
  return out;
}

Tensor4 MaxPool2::forward(const Tensor4& in) {
  const Shape4& s = in.shape();
  const MapShape o = output_shape({s.c, s.h, s.w});
  Tensor4 out(o.with_batch(s.n));
  argmax_.assign(out.size(), 0);
  kernels::parallel::maxpool2_forward({s.n, s.c, s.h, s.w}, in.data(), out.data(), argmax_);
  in_shape_ = s;
  return out;
}

Tensor4 MaxPool2::backward(const Tensor4& grad_out) {
  if (in_shape_.size() == 0) throw StateError("maxpool2: backward called without forward");
  Tensor4 grad_in(in_shape_);
  const Shape4& s = in_shape_;
  kernels::parallel::maxpool2_backward({s.n, s.c, s.h, s.w}, grad_out.data(), argmax_,
                                       grad_in.data());
  return grad_in;
}

// ---------------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(std::size_t channels)
    : channels_(channels), conv1_(channels, channels), conv2_(channels, channels) {
  const char* prefixes[] = {"conv1.", "conv1.", "conv2.", "conv2."};
  auto ps = params();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->name = prefixes[i] + ps[i]->name;
}

MapShape ResidualBlock::output_shape(const MapShape& in) const {
  if (in.c != channels_) throw ShapeError("residual: channel count mismatch");
  return conv2_.output_shape(conv1_.output_shape(in));
}

Tensor4 ResidualBlock::infer(const Tensor4& in) const {
  Tensor4 h = conv2_.infer(relu1_.infer(conv1_.infer(in)));
  auto hv = h.data();
  auto x = in.data();
  for (std::size_t i = 0; i < hv.size(); ++i) hv[i] += x[i];
  return relu_out_.infer(h);
}

Tensor4 ResidualBlock::forward(const Tensor4& in) {
  Tensor4 h = conv2_.forward(relu1_.forward(conv1_.forward(in)));
  auto hv = h.data();
  auto x = in.data();
  for (std::size_t i = 0; i < hv.size(); ++i) hv[i] += x[i];
  return relu_out_.forward(h);
}

Tensor4 ResidualBlock::backward(const Tensor4& grad_out) {
  Tensor4 g_sum = relu_out_.backward(grad_out);
  Tensor4 g_in = conv1_.backward(relu1_.backward(conv2_.backward(g_sum)));
  auto gi = g_in.data();
  auto skip = g_sum.data();
  for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += skip[i];
  return g_in;
}

std::vector<Param*> ResidualBlock::params() {
  auto a = conv1_.params();
  auto b = conv2_.params();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<const Param*> ResidualBlock::params() const {
  auto a = std::as_const(conv1_).params();
  auto b = std::as_const(conv2_).params();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// ---------------------------------------------------------------- GlobalAvgPool

Tensor4 GlobalAvgPool::infer(const Tensor4& in) const {
  const Shape4& s = in.shape();
  Tensor4 out({s.n, s.c, 1, 1});
  const std::size_t hw = s.spatial();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += in.data()[p * hw + i];
    out.data()[p] = acc / static_cast<double>(hw);
  }
  return out;
}

Tensor4 GlobalAvgPool::forward(const Tensor4& in) {
  in_shape_ = in.shape();
  return infer(in);
}

Tensor4 GlobalAvgPool::backward(const Tensor4& grad_out) {
  if (in_shape_.size() == 0) throw StateError("global_avg_pool: backward called without forward");
  Tensor4 grad_in(in_shape_);
  const std::size_t hw = in_shape_.spatial();
  const double scale = 1.0 / static_cast<double>(hw);
  for (std::size_t p = 0; p < in_shape_.n * in_shape_.c; ++p) {
    const double g = grad_out.data()[p] * scale;
    for (std::size_t i = 0; i < hw; ++i) grad_in.data()[p * hw + i] = g;
  }
  return grad_in;
}

}  // namespace adalase
