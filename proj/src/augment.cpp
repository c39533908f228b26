#include "adalase/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "adalase/error.hpp"

namespace adalase {

namespace {

struct KindName {
  AugKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {AugKind::none, "none"},
    {AugKind::mixup, "mixup"},
    {AugKind::cutout, "cutout"},
    {AugKind::translation, "translation"},
    {AugKind::cutmix, "cutmix"},
    {AugKind::rotation, "rotation"},
    {AugKind::random_crop, "random_crop"},
    {AugKind::horizontal_flip, "horizontal_flip"},
};

std::size_t scaled_side(double fraction, std::size_t side) {
  const auto v = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(side)));
  return std::min(v, side);
}

// Integer anchor in [0, limit] from a uniform draw in [0, 1).
std::size_t anchor(double u, std::size_t limit) {
  return std::min(static_cast<std::size_t>(u * static_cast<double>(limit + 1)), limit);
}

void require_pair_batch(const Shape4& shape, AugKind kind) {
  if (shape.n < 2) {
    throw DegenerateBatchError(to_string(kind) + " needs a batch of at least 2 samples");
  }
}

void require_shape(const AugTrace& trace, const Shape4& shape) {
  if (!(trace.shape == shape)) {
    throw ShapeError("augmentation trace was sampled for " + trace.shape.str() +
                     " but applied to " + shape.str());
  }
}

SoftLabels mix_labels(const SoftLabels& labels, double lambda,
                      const std::vector<std::size_t>& partner) {
  if (lambda == 1.0) return labels;
  SoftLabels out(labels.rows(), labels.classes());
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    for (std::size_t c = 0; c < labels.classes(); ++c) {
      out.at(i, c) = lambda * labels.at(i, c) + (1.0 - lambda) * labels.at(partner[i], c);
    }
  }
  return out;
}

// Source coordinate for output pixel (y, x) of sample geometry `g`, or
// nullopt when it falls outside the map (zero fill).
struct Source {
  bool valid;
  std::size_t y;
  std::size_t x;
};

Source gather_source(AugKind kind, const SampleGeometry& g, const Shape4& s, std::size_t y,
                     std::size_t x) {
  long sy = static_cast<long>(y), sx = static_cast<long>(x);
  switch (kind) {
    case AugKind::translation:
      sy -= g.dy;
      sx -= g.dx;
      break;
    case AugKind::random_crop:
      sy += g.dy;
      sx += g.dx;
      break;
    case AugKind::horizontal_flip:
      if (g.flip) sx = static_cast<long>(s.w) - 1 - sx;
      break;
    case AugKind::rotation: {
      if (g.angle_deg != 0.0) {
        const double theta = g.angle_deg * std::numbers::pi / 180.0;
        const double c = 0.5 * static_cast<double>(s.h - 1);
        const double ry = static_cast<double>(y) - c;
        const double rx = static_cast<double>(x) - c;
        const double cs = std::cos(theta), sn = std::sin(theta);
        sx = std::lround(c + cs * rx + sn * ry);
        sy = std::lround(c - sn * rx + cs * ry);
      }
      break;
    }
    default:
      break;
  }
  if (sy < 0 || sx < 0 || sy >= static_cast<long>(s.h) || sx >= static_cast<long>(s.w)) {
    return {false, 0, 0};
  }
  return {true, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)};
}

bool is_gather(AugKind kind) {
  return kind == AugKind::translation || kind == AugKind::random_crop ||
         kind == AugKind::horizontal_flip || kind == AugKind::rotation;
}

}  // namespace

std::string to_string(AugKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

AugKind aug_kind_from_string(const std::string& name) {
  for (const auto& kn : kKindNames) {
    if (name == kn.name) return kn.kind;
  }
  throw ConfigError("unknown augmentation kind '" + name + "'");
}

void AugSpec::validate() const {
  if (mixes_labels() && !(alpha > 0.0)) {
    throw ConfigError("alpha must be > 0 for " + to_string(kind), "alpha");
  }
  if (!(mask_fraction >= 0.0 && mask_fraction <= 1.0)) {
    throw ConfigError("mask_fraction must be in [0, 1]", "mask_fraction");
  }
  if (!(shift_fraction_max >= 0.0 && shift_fraction_max <= 1.0)) {
    throw ConfigError("shift_fraction_max must be in [0, 1]", "shift_fraction_max");
  }
  if (!(degree_range >= 0.0 && degree_range <= 180.0)) {
    throw ConfigError("degree_range must be in [0, 180]", "degree_range");
  }
}

AugTrace sample_trace(const AugSpec& spec, const Shape4& shape, Rng& rng) {
  spec.validate();
  AugTrace t;
  t.kind = spec.kind;
  t.shape = shape;
  switch (spec.kind) {
    case AugKind::none:
      break;
    case AugKind::mixup:
      require_pair_batch(shape, spec.kind);
      t.lambda = rng.beta(spec.alpha);
      t.partner = rng.permutation(shape.n);
      break;
    case AugKind::cutout: {
      const std::size_t mh = scaled_side(spec.mask_fraction, shape.h);
      const std::size_t mw = scaled_side(spec.mask_fraction, shape.w);
      t.boxes.resize(shape.n);
      for (auto& b : t.boxes) {
        const double uy = rng.uniform();
        const double ux = rng.uniform();
        b = {anchor(uy, shape.h - mh), anchor(ux, shape.w - mw), mh, mw};
      }
      break;
    }
    case AugKind::translation:
      t.geometry.resize(shape.n);
      for (auto& g : t.geometry) {
        const double fy = rng.uniform(0.0, spec.shift_fraction_max);
        const double fx = rng.uniform(0.0, spec.shift_fraction_max);
        const double sy = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double sx = rng.bernoulli(0.5) ? 1.0 : -1.0;
        g.dy = std::lround(sy * fy * static_cast<double>(shape.h));
        g.dx = std::lround(sx * fx * static_cast<double>(shape.w));
      }
      break;
    case AugKind::cutmix: {
      require_pair_batch(shape, spec.kind);
      const double lambda = rng.beta(spec.alpha);
      t.partner = rng.permutation(shape.n);
      const double r = std::sqrt(1.0 - lambda);
      const auto bh = static_cast<long>(scaled_side(r, shape.h));
      const auto bw = static_cast<long>(scaled_side(r, shape.w));
      const auto cy = static_cast<long>(anchor(rng.uniform(), shape.h - 1));
      const auto cx = static_cast<long>(anchor(rng.uniform(), shape.w - 1));
      const long y0 = std::clamp(cy - bh / 2, 0L, static_cast<long>(shape.h));
      const long y1 = std::clamp(cy - bh / 2 + bh, 0L, static_cast<long>(shape.h));
      const long x0 = std::clamp(cx - bw / 2, 0L, static_cast<long>(shape.w));
      const long x1 = std::clamp(cx - bw / 2 + bw, 0L, static_cast<long>(shape.w));
      Box b{static_cast<std::size_t>(y0), static_cast<std::size_t>(x0),
            static_cast<std::size_t>(y1 - y0), static_cast<std::size_t>(x1 - x0)};
      t.boxes = {b};
      t.lambda = 1.0 - static_cast<double>(b.area()) / static_cast<double>(shape.spatial());
      break;
    }
    case AugKind::rotation:
      if (shape.h != shape.w) {
        throw ShapeError("rotation supports square maps only, got " + shape.str());
      }
      t.geometry.resize(shape.n);
      for (auto& g : t.geometry) g.angle_deg = rng.uniform(-spec.degree_range, spec.degree_range);
      break;
    case AugKind::random_crop: {
      t.geometry.resize(shape.n);
      const std::size_t span = 2 * spec.pad + 1;
      const long pad = static_cast<long>(spec.pad);
      for (auto& g : t.geometry) {
        g.dy = static_cast<long>(rng.uniform_index(span)) - pad;
        g.dx = static_cast<long>(rng.uniform_index(span)) - pad;
      }
      break;
    }
    case AugKind::horizontal_flip:
      t.geometry.resize(shape.n);
      for (auto& g : t.geometry) g.flip = rng.bernoulli(0.5);
      break;
  }
  return t;
}

AugTrace make_mixup_trace(const Shape4& shape, double lambda, std::vector<std::size_t> partner) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw RangeError("mixup lambda must be in [0, 1]");
  if (partner.size() != shape.n) throw ShapeError("mixup partner list must have one entry per sample");
  AugTrace t;
  t.kind = AugKind::mixup;
  t.shape = shape;
  t.lambda = lambda;
  t.partner = std::move(partner);
  return t;
}

AugOutcome apply_trace(const AugTrace& trace, const Tensor4& in, const SoftLabels& labels) {
  require_shape(trace, in.shape());
  if (labels.rows() != in.shape().n) {
    throw ShapeError("label rows do not match batch size");
  }
  const Shape4& s = in.shape();
  AugOutcome out{in, labels, 1.0, trace};

  switch (trace.kind) {
    case AugKind::none:
      break;
    case AugKind::mixup: {
      if (trace.lambda == 1.0) break;
      const double a = trace.lambda, b = 1.0 - trace.lambda;
      for (std::size_t n = 0; n < s.n; ++n) {
        auto dst = out.tensor.sample(n);
        auto x = in.sample(n);
        auto y = in.sample(trace.partner[n]);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a * x[i] + b * y[i];
      }
      out.labels = mix_labels(labels, trace.lambda, trace.partner);
      out.lambda = trace.lambda;
      break;
    }
    case AugKind::cutout:
      for (std::size_t n = 0; n < s.n; ++n) {
        const Box& b = trace.boxes[n];
        for (std::size_t c = 0; c < s.c; ++c) {
          for (std::size_t y = b.y0; y < b.y0 + b.h; ++y) {
            for (std::size_t x = b.x0; x < b.x0 + b.w; ++x) out.tensor.at(n, c, y, x) = 0.0;
          }
        }
      }
      break;
    case AugKind::cutmix: {
      const Box& b = trace.boxes.front();
      for (std::size_t n = 0; n < s.n; ++n) {
        const std::size_t p = trace.partner[n];
        for (std::size_t c = 0; c < s.c; ++c) {
          for (std::size_t y = b.y0; y < b.y0 + b.h; ++y) {
            for (std::size_t x = b.x0; x < b.x0 + b.w; ++x) {
              out.tensor.at(n, c, y, x) = in.at(p, c, y, x);
            }
          }
        }
      }
      out.labels = mix_labels(labels, trace.lambda, trace.partner);
      out.lambda = trace.lambda;
      break;
    }
    default:
      for (std::size_t n = 0; n < s.n; ++n) {
        const SampleGeometry& g = trace.geometry[n];
        for (std::size_t y = 0; y < s.h; ++y) {
          for (std::size_t x = 0; x < s.w; ++x) {
            const Source src = gather_source(trace.kind, g, s, y, x);
            for (std::size_t c = 0; c < s.c; ++c) {
              out.tensor.at(n, c, y, x) = src.valid ? in.at(n, c, src.y, src.x) : 0.0;
            }
          }
        }
      }
      break;
  }
  return out;
}

Tensor4 backward_trace(const AugTrace& trace, const Tensor4& grad_out) {
  require_shape(trace, grad_out.shape());
  const Shape4& s = grad_out.shape();
  switch (trace.kind) {
    case AugKind::none:
      return grad_out;
    case AugKind::mixup: {
      if (trace.lambda == 1.0) return grad_out;
      Tensor4 g(s);
      const double a = trace.lambda, b = 1.0 - trace.lambda;
      for (std::size_t n = 0; n < s.n; ++n) {
        auto dst = g.sample(n);
        auto src = grad_out.sample(n);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
      }
      for (std::size_t n = 0; n < s.n; ++n) {
        auto dst = g.sample(trace.partner[n]);
        auto src = grad_out.sample(n);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += b * src[i];
      }
      return g;
    }
    case AugKind::cutout: {
      Tensor4 g = grad_out;
      for (std::size_t n = 0; n < s.n; ++n) {
        const Box& b = trace.boxes[n];
        for (std::size_t c = 0; c < s.c; ++c) {
          for (std::size_t y = b.y0; y < b.y0 + b.h; ++y) {
            for (std::size_t x = b.x0; x < b.x0 + b.w; ++x) g.at(n, c, y, x) = 0.0;
          }
        }
      }
      return g;
    }
    case AugKind::cutmix: {
      Tensor4 g = grad_out;
      const Box& b = trace.boxes.front();
      for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
          for (std::size_t y = b.y0; y < b.y0 + b.h; ++y) {
            for (std::size_t x = b.x0; x < b.x0 + b.w; ++x) g.at(n, c, y, x) = 0.0;
          }
        }
      }
      for (std::size_t n = 0; n < s.n; ++n) {
        const std::size_t p = trace.partner[n];
        for (std::size_t c = 0; c < s.c; ++c) {
          for (std::size_t y = b.y0; y < b.y0 + b.h; ++y) {
            for (std::size_t x = b.x0; x < b.x0 + b.w; ++x) {
              g.at(p, c, y, x) += grad_out.at(n, c, y, x);
            }
          }
        }
      }
      return g;
    }
    default: {
      Tensor4 g(s);
      for (std::size_t n = 0; n < s.n; ++n) {
        const SampleGeometry& geo = trace.geometry[n];
        for (std::size_t y = 0; y < s.h; ++y) {
          for (std::size_t x = 0; x < s.w; ++x) {
            const Source src = gather_source(trace.kind, geo, s, y, x);
            if (!src.valid) continue;
            for (std::size_t c = 0; c < s.c; ++c) g.at(n, c, src.y, src.x) += grad_out.at(n, c, y, x);
          }
        }
      }
      return g;
    }
  }
}

AugOutcome mixup(const Tensor4& batch, const SoftLabels& labels, double alpha, Rng& rng) {
  AugSpec spec{.kind = AugKind::mixup, .alpha = alpha};
  return apply_trace(sample_trace(spec, batch.shape(), rng), batch, labels);
}

namespace {
Tensor4 apply_unlabeled(const AugSpec& spec, const Tensor4& batch, Rng& rng) {
  const AugTrace t = sample_trace(spec, batch.shape(), rng);
  return apply_trace(t, batch, SoftLabels(batch.shape().n, 1)).tensor;
}
}  // namespace

Tensor4 cutout(const Tensor4& batch, double mask_fraction, Rng& rng) {
  return apply_unlabeled({.kind = AugKind::cutout, .mask_fraction = mask_fraction}, batch, rng);
}

Tensor4 translation(const Tensor4& batch, double shift_fraction_max, Rng& rng) {
  return apply_unlabeled({.kind = AugKind::translation, .shift_fraction_max = shift_fraction_max},
                         batch, rng);
}

AugOutcome cutmix(const Tensor4& batch, const SoftLabels& labels, double alpha, Rng& rng) {
  AugSpec spec{.kind = AugKind::cutmix, .alpha = alpha};
  return apply_trace(sample_trace(spec, batch.shape(), rng), batch, labels);
}

Tensor4 rotation(const Tensor4& batch, double degree_range, Rng& rng) {
  return apply_unlabeled({.kind = AugKind::rotation, .degree_range = degree_range}, batch, rng);
}

Tensor4 standard_input_augs(const Tensor4& batch, std::size_t pad, Rng& rng) {
  Tensor4 cropped = apply_unlabeled({.kind = AugKind::random_crop, .pad = pad}, batch, rng);
  return apply_unlabeled({.kind = AugKind::horizontal_flip}, cropped, rng);
}

AugOutcome apply_at_position(const AugSpec& spec, const Tensor4& features,
                             const SoftLabels& labels, std::size_t position, Rng& rng) {
  if (position > 0 && spec.input_only()) {
    throw PolicyError(to_string(spec.kind) + " is only allowed at the input position P0, not P" +
                      std::to_string(position));
  }
  return apply_trace(sample_trace(spec, features.shape(), rng), features, labels);
}

}  // namespace adalase
