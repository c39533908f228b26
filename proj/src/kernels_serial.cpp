// Reference kernels: plain nested loops, written for readability.

#include <algorithm>
#include <limits>

#include "adalase/kernels.hpp"

namespace adalase::kernels::serial {

void dense_forward(const DenseGeometry& g, std::span<const double> in,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> out) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.in; ++i) acc += in[n * g.in + i] * weight[o * g.in + i];
      out[n * g.out + o] = acc + bias[o];
    }
  }
}

void dense_backward(const DenseGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> grad_out,
                    std::span<double> grad_in, std::span<double> grad_weight,
                    std::span<double> grad_bias) {
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out; ++o) {
      const double go = grad_out[n * g.out + o];
      grad_bias[o] += go;
      for (std::size_t i = 0; i < g.in; ++i) {
        grad_in[n * g.in + i] += go * weight[o * g.in + i];
        grad_weight[o * g.in + i] += go * in[n * g.in + i];
      }
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> in,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> out) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t k = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long y = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
              if (y < 0 || y >= static_cast<long>(g.height)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long x = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (x < 0 || x >= static_cast<long>(g.width)) continue;
                acc += in[((n * g.in_channels + ci) * g.height + y) * g.width + x] *
                       weight[((co * g.in_channels + ci) * k + ky) * k + kx];
              }
            }
          }
          out[((n * g.out_channels + co) * oh + oy) * ow + ox] = acc + bias[co];
        }
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> in,
                     std::span<const double> weight, std::span<const double> grad_out,
                     std::span<double> grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t k = g.kernel;
  // Scatter each output gradient back through the receptive field.
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = grad_out[((n * g.out_channels + co) * oh + oy) * ow + ox];
          grad_bias[co] += go;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long y = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
              if (y < 0 || y >= static_cast<long>(g.height)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long x = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (x < 0 || x >= static_cast<long>(g.width)) continue;
                const std::size_t ii = ((n * g.in_channels + ci) * g.height + y) * g.width + x;
                const std::size_t wi = ((co * g.in_channels + ci) * k + ky) * k + kx;
                grad_in[ii] += go * weight[wi];
                grad_weight[wi] += go * in[ii];
              }
            }
          }
        }
      }
    }
  }
}

void maxpool2_forward(const PoolGeometry& g, std::span<const double> in, std::span<double> out,
                      std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  for (std::size_t nc = 0; nc < g.batch * g.channels; ++nc) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (nc * g.height + 2 * oy + dy) * g.width + 2 * ox + dx;
            if (in[idx] > best || (dy == 0 && dx == 0)) {
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
  const std::size_t count = g.batch * g.channels * g.out_height() * g.out_width();
  for (std::size_t o = 0; o < count; ++o) grad_in[argmax[o]] += grad_out[o];
}

}  // namespace adalase::kernels::serial

namespace adalase::kernels {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace adalase::kernels
