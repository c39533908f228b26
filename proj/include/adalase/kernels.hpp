#pragma once

// Compute kernels for the layer primitives.
//
// Two implementations share one interface: `serial` is the reference, kept
// for testing and benchmarking; `parallel` splits the outer loops across
// OpenMP threads. Every output element is produced by exactly one thread and
// accumulates its terms in the same order as the serial loop, so the two are
// bitwise identical for any thread count.

#include <cstddef>
#include <span>

namespace adalase::kernels {

struct DenseGeometry {
  std::size_t batch = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

struct PoolGeometry {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t out_height() const { return height / 2; }
  std::size_t out_width() const { return width / 2; }
};

#define ADALASE_KERNEL_DECLS                                                                    \
  /* out[n,o] = sum_i in[n,i] * weight[o,i] + bias[o] */                                        \
  void dense_forward(const DenseGeometry& g, std::span<const double> in,                        \
                     std::span<const double> weight, std::span<const double> bias,              \
                     std::span<double> out);                                                    \
  /* Overwrites grad_in, grad_weight and grad_bias. */                                          \
  void dense_backward(const DenseGeometry& g, std::span<const double> in,                       \
                      std::span<const double> weight, std::span<const double> grad_out,         \
                      std::span<double> grad_in, std::span<double> grad_weight,                 \
                      std::span<double> grad_bias);                                             \
  void conv2d_forward(const ConvGeometry& g, std::span<const double> in,                        \
                      std::span<const double> weight, std::span<const double> bias,             \
                      std::span<double> out);                                                   \
  void conv2d_backward(const ConvGeometry& g, std::span<const double> in,                       \
                       std::span<const double> weight, std::span<const double> grad_out,        \
                       std::span<double> grad_in, std::span<double> grad_weight,                \
                       std::span<double> grad_bias);                                            \
  /* 2x2 window, stride 2, floor semantics. argmax holds the flat input index. */               \
  void maxpool2_forward(const PoolGeometry& g, std::span<const double> in, std::span<double> out, \
                        std::span<std::size_t> argmax);                                         \
  void maxpool2_backward(const PoolGeometry& g, std::span<const double> grad_out,               \
                         std::span<const std::size_t> argmax, std::span<double> grad_in);

namespace serial {
ADALASE_KERNEL_DECLS
}  // namespace serial

namespace parallel {
ADALASE_KERNEL_DECLS
}  // namespace parallel

#undef ADALASE_KERNEL_DECLS

/// Inner product accumulated sequentially in index order. Deliberately not
/// parallel: the ratio update must not depend on the thread count.
double dot(std::span<const double> a, std::span<const double> b);

/// Caps OpenMP threads; 0 leaves the runtime default.
void set_max_threads(int threads);
int max_threads();

}  // namespace adalase::kernels
