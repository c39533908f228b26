#pragma once

// Input- and feature-space augmentation kernels.
//
// Every augmentation is split in two steps. `sample_trace` draws the random
// parameters (mix rate, partner permutation, mask anchor, shift, angle) and
// rasterizes them for a concrete tensor shape; `apply_trace` then applies
// them deterministically. Spatial parameters are drawn as fractions of the
// map size, so the same rng stream yields the same relative geometry on a
// 32x32 input and on an 8x8 feature map. Given a trace every augmentation is
// a linear map of the features, and `backward_trace` applies its transpose.
//
// Spatial parameters are shared by all channels of a sample.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "adalase/rng.hpp"
#include "adalase/tensor.hpp"

namespace adalase {

enum class AugKind {
  none,
  mixup,
  cutout,
  translation,
  cutmix,
  rotation,
  random_crop,
  horizontal_flip,
};

std::string to_string(AugKind kind);
/// Throws ConfigError on unknown names.
AugKind aug_kind_from_string(const std::string& name);

struct AugSpec {
  AugKind kind = AugKind::none;
  /// Beta(alpha, alpha) parameter for mixup and cutmix.
  double alpha = 1.0;
  /// Cutout mask side as a fraction of the map side.
  double mask_fraction = 0.5;
  /// Translation: each axis shifts by a fraction drawn from [0, max].
  double shift_fraction_max = 0.2;
  /// Rotation angle is drawn from [-degree_range, +degree_range].
  double degree_range = 10.0;
  /// Zero padding (pixels) before a random crop back to the original size.
  std::size_t pad = 2;

  /// Throws ConfigError when a parameter is out of range.
  void validate() const;
  /// Kinds that mix two samples and their labels.
  bool mixes_labels() const { return kind == AugKind::mixup || kind == AugKind::cutmix; }
  /// Kinds only allowed at the input position P0.
  bool input_only() const { return kind == AugKind::rotation || kind == AugKind::random_crop; }
};

/// Axis-aligned pixel rectangle [y0, y0+h) x [x0, x0+w).
struct Box {
  std::size_t y0 = 0;
  std::size_t x0 = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t area() const { return h * w; }
  bool contains(std::size_t y, std::size_t x) const {
    return y >= y0 && y < y0 + h && x >= x0 && x < x0 + w;
  }
};

/// Per-sample rigid parameters for translation, rotation, crop and flip.
struct SampleGeometry {
  long dy = 0;
  long dx = 0;
  double angle_deg = 0.0;
  bool flip = false;
};

/// Concrete parameters of one augmentation call, rasterized for `shape`.
struct AugTrace {
  AugKind kind = AugKind::none;
  Shape4 shape;
  /// Mix coefficient (mixup) or effective kept-area fraction (cutmix); 1 otherwise.
  double lambda = 1.0;
  /// Partner index per sample for mixing kinds.
  std::vector<std::size_t> partner;
  /// Cutout: one mask per sample. Cutmix: a single box shared by the batch.
  std::vector<Box> boxes;
  std::vector<SampleGeometry> geometry;
};

struct AugOutcome {
  Tensor4 tensor;
  SoftLabels labels;
  double lambda = 1.0;
  AugTrace trace;
};

/// Draws augmentation parameters for a tensor of the given shape.
/// Throws DegenerateBatchError for mixing kinds on a batch of one, and
/// ShapeError for rotation of a non-square map.
AugTrace sample_trace(const AugSpec& spec, const Shape4& shape, Rng& rng);

/// Applies a trace. Throws ShapeError when `in` does not match `trace.shape`.
AugOutcome apply_trace(const AugTrace& trace, const Tensor4& in, const SoftLabels& labels);

/// Transpose of the linear map applied by `apply_trace`.
Tensor4 backward_trace(const AugTrace& trace, const Tensor4& grad_out);

/// Trace for mixup with a fixed mix rate and partner assignment.
AugTrace make_mixup_trace(const Shape4& shape, double lambda, std::vector<std::size_t> partner);

// Kernel entry points.

AugOutcome mixup(const Tensor4& batch, const SoftLabels& labels, double alpha, Rng& rng);
Tensor4 cutout(const Tensor4& batch, double mask_fraction, Rng& rng);
Tensor4 translation(const Tensor4& batch, double shift_fraction_max, Rng& rng);
AugOutcome cutmix(const Tensor4& batch, const SoftLabels& labels, double alpha, Rng& rng);
Tensor4 rotation(const Tensor4& batch, double degree_range, Rng& rng);
/// Random crop after zero padding by `pad`, then horizontal flip with probability 0.5.
Tensor4 standard_input_augs(const Tensor4& batch, std::size_t pad, Rng& rng);

/// Applies `spec` to the features at tap `position` (0 = input). Rotation and
/// random crop are input-only and raise PolicyError at hidden positions.
AugOutcome apply_at_position(const AugSpec& spec, const Tensor4& features,
                             const SoftLabels& labels, std::size_t position, Rng& rng);

}  // namespace adalase
