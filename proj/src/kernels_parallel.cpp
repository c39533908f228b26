// OpenMP kernels. Work is split over independent output elements; each
// element sums its terms in the serial reference's order.

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <utility>

#include "adalase/kernels.hpp"

namespace adalase::kernels::parallel {

namespace {
using Index = std::int64_t;
}

void dense_forward(const DenseGeometry& g, std::span<const double> in,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> out) {
  const Index rows = static_cast<Index>(g.batch), cols = static_cast<Index>(g.out);
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < rows; ++n) {
    for (Index o = 0; o < cols; ++o) {
      const double* x = in.data() + n * g.in;
      const double* w = weight.data() + o * g.in;
      double acc = 0.0;
      for (std::size_t i = 0; i < g.in; ++i) acc += x[i] * w[i];
      out[n * g.out + o] = acc + bias[o];
    }
  }
}

void dense_backward(const DenseGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> grad_out,
                    std::span<double> grad_in, std::span<double> grad_weight,
                    std::span<double> grad_bias) {
  const Index rows = static_cast<Index>(g.batch), outs = static_cast<Index>(g.out);
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (Index n = 0; n < rows; ++n) {
      for (std::size_t i = 0; i < g.in; ++i) {
        double acc = 0.0;
        for (std::size_t o = 0; o < g.out; ++o) acc += grad_out[n * g.out + o] * weight[o * g.in + i];
        grad_in[n * g.in + i] = acc;
      }
    }
#pragma omp for schedule(static)
    for (Index o = 0; o < outs; ++o) {
      double gb = 0.0;
      for (std::size_t i = 0; i < g.in; ++i) grad_weight[o * g.in + i] = 0.0;
      for (std::size_t n = 0; n < g.batch; ++n) {
        const double go = grad_out[n * g.out + o];
        gb += go;
        for (std::size_t i = 0; i < g.in; ++i) grad_weight[o * g.in + i] += go * in[n * g.in + i];
      }
      grad_bias[o] = gb;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t k = g.kernel;
  const Index planes = static_cast<Index>(g.batch * g.out_channels);
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < planes; ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / g.out_channels;
    const std::size_t co = static_cast<std::size_t>(p) % g.out_channels;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          const double* src = in.data() + (n * g.in_channels + ci) * g.height * g.width;
          const double* w = weight.data() + (co * g.in_channels + ci) * k * k;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long y = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (y < 0 || y >= static_cast<long>(g.height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long x = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (x < 0 || x >= static_cast<long>(g.width)) continue;
              acc += src[y * g.width + x] * w[ky * k + kx];
            }
          }
        }
        out[(static_cast<std::size_t>(p) * oh + oy) * ow + ox] = acc + bias[co];
      }
    }
  }
}

namespace {

// Half-open range of output indices o with 0 <= shifted - o * stride < k.
std::pair<long, long> covering(long shifted, long stride, std::size_t k, std::size_t count) {
  const long kk = static_cast<long>(k);
  long lo = shifted - kk + 1 <= 0 ? 0 : (shifted - kk + 1 + stride - 1) / stride;
  long hi = shifted < 0 ? 0 : shifted / stride + 1;
  hi = std::min(hi, static_cast<long>(count));
  lo = std::min(lo, hi);
  return {lo, hi};
}

}  // namespace

void conv2d_backward(const ConvGeometry& g, std::span<const double> in,
                     std::span<const double> weight, std::span<const double> grad_out,
                     std::span<double> grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t k = g.kernel;
  const long stride = static_cast<long>(g.stride), pad = static_cast<long>(g.pad);
  const Index in_planes = static_cast<Index>(g.batch * g.in_channels);
  const Index out_channels = static_cast<Index>(g.out_channels);
#pragma omp parallel
  {
    // Input gradient as a gather: visiting (co, oy, ox) in ascending order
    // reproduces the reference scatter's summation order.
#pragma omp for schedule(static) nowait
    for (Index p = 0; p < in_planes; ++p) {
      const std::size_t n = static_cast<std::size_t>(p) / g.in_channels;
      const std::size_t ci = static_cast<std::size_t>(p) % g.in_channels;
      for (std::size_t y = 0; y < g.height; ++y) {
        for (std::size_t x = 0; x < g.width; ++x) {
          // Output rows/cols whose window covers (y, x), in ascending order.
          const auto [oy0, oy1] = covering(static_cast<long>(y) + pad, stride, k, oh);
          const auto [ox0, ox1] = covering(static_cast<long>(x) + pad, stride, k, ow);
          double acc = 0.0;
          for (std::size_t co = 0; co < g.out_channels; ++co) {
            const double* go = grad_out.data() + (n * g.out_channels + co) * oh * ow;
            const double* w = weight.data() + (co * g.in_channels + ci) * k * k;
            for (long oy = oy0; oy < oy1; ++oy) {
              const long ky = static_cast<long>(y) + pad - oy * stride;
              for (long ox = ox0; ox < ox1; ++ox) {
                const long kx = static_cast<long>(x) + pad - ox * stride;
                acc += go[oy * static_cast<long>(ow) + ox] * w[ky * static_cast<long>(k) + kx];
              }
            }
          }
          grad_in[(static_cast<std::size_t>(p) * g.height + y) * g.width + x] = acc;
        }
      }
    }

#pragma omp for schedule(static)
    for (Index co_i = 0; co_i < out_channels; ++co_i) {
      const std::size_t co = static_cast<std::size_t>(co_i);
      double* gw = grad_weight.data() + co * g.in_channels * k * k;
      std::fill(gw, gw + g.in_channels * k * k, 0.0);
      double gb = 0.0;
      for (std::size_t n = 0; n < g.batch; ++n) {
        const double* go = grad_out.data() + (n * g.out_channels + co) * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const double v = go[oy * ow + ox];
            gb += v;
            for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
              const double* src = in.data() + (n * g.in_channels + ci) * g.height * g.width;
              for (std::size_t ky = 0; ky < k; ++ky) {
                const long y = static_cast<long>(oy) * stride + static_cast<long>(ky) - pad;
                if (y < 0 || y >= static_cast<long>(g.height)) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                  const long x = static_cast<long>(ox) * stride + static_cast<long>(kx) - pad;
                  if (x < 0 || x >= static_cast<long>(g.width)) continue;
                  gw[(ci * k + ky) * k + kx] += v * src[y * g.width + x];
                }
              }
            }
          }
        }
      }
      grad_bias[co] = gb;
    }
  }
}

void maxpool2_forward(const PoolGeometry& g, std::span<const double> in, std::span<double> out,
                      std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const Index planes = static_cast<Index>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < planes; ++p) {
    const std::size_t nc = static_cast<std::size_t>(p);
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best_idx = (nc * g.height + 2 * oy) * g.width + 2 * ox;
        double best = in[best_idx];
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (nc * g.height + 2 * oy + dy) * g.width + 2 * ox + dx;
            if (in[idx] > best) {
              best = in[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (nc * oh + oy) * ow + ox;
        out[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
}

void maxpool2_backward(const PoolGeometry& g, std::span<const double> grad_out,
                       std::span<const std::size_t> argmax, std::span<double> grad_in) {
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  const Index count = static_cast<Index>(g.batch * g.channels * g.out_height() * g.out_width());
  // Pooling windows do not overlap, so each input index receives at most one write.
#pragma omp parallel for schedule(static)
  for (Index o = 0; o < count; ++o) grad_in[argmax[o]] += grad_out[o];
}

}  // namespace adalase::kernels::parallel

namespace adalase::kernels {

void set_max_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace adalase::kernels
