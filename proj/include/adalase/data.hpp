#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adalase/augment.hpp"
#include "adalase/rng.hpp"
#include "adalase/tensor.hpp"

namespace adalase {

enum class Split { train, val, test };
std::string to_string(Split split);

/// Immutable labelled image set. Pixels are stored as f32 in [0, 1] and
/// widened to f64 when a batch is gathered.
struct Dataset {
  MapShape sample_shape;
  std::vector<float> images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  /// Throws ValidationError on out-of-range labels, non-finite or
  /// out-of-[0,1] pixels, or inconsistent sizes.
  void validate() const;
  std::size_t class_count(int label) const;
};

struct Batch {
  Tensor4 x;
  SoftLabels y;
  std::vector<int> labels;
};

Batch gather(const Dataset& ds, std::span<const std::size_t> indices);

/// MNIST-style IDX pair (big-endian, magics 2051 / 2049).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Split split = Split::train);
/// CIFAR-10 binary: 3073-byte records (label byte + 3x32x32 pixels).
Dataset load_cifar_bin(const std::filesystem::path& path, Split split = Split::train);

/// Raw-with-header interchange format: one line of JSON
/// {"format":"adalase-raw","version":1,"shape":[n,c,h,w],"dtype":"f32le",
///  "num_classes":k,"label_dtype":"i32le"}
/// followed by n*c*h*w f32le pixels and n i32le labels.
void save_raw(const Dataset& ds, const std::filesystem::path& path);
Dataset load_raw(const std::filesystem::path& path, Split split = Split::train);

enum class SyntheticKind { two_gaussians, striped_patches };
SyntheticKind synthetic_kind_from_string(const std::string& name);

struct SyntheticOptions {
  std::size_t side = 8;
  /// two_gaussians: distance between class means in units of the noise sigma.
  double separation_sigmas = 10.0;
  /// Per-pixel noise standard deviation.
  double noise = 0.05;
  /// striped_patches: number of classes (2 = horizontal/vertical, 4 adds diagonals).
  std::size_t classes = 2;
};

/// Balanced synthetic set; n >= 2, classes alternate so any n has every class
/// within one sample of the others.
Dataset gen_synthetic(SyntheticKind kind, std::size_t n, std::uint64_t seed,
                      const SyntheticOptions& opts = {});

/// Class-stratified subsample without replacement. Per-class quotas are
/// floor(count * n_c / N) plus largest-remainder rounding, so proportions are
/// exact when divisible and within one sample otherwise. Two subsamples with
/// different seeds are not guaranteed to be disjoint.
Dataset subsample(const Dataset& ds, std::size_t count, std::uint64_t seed);

/// Picks `indices` from `ds` (in order), keeping metadata.
Dataset select(const Dataset& ds, std::span<const std::size_t> indices, Split split);

struct SplitSpec {
  std::size_t train_count = 0;
  std::size_t val_count = 0;
  std::size_t test_count = 0;
  std::uint64_t seed = 0;
};

struct DataSplits {
  Dataset train;
  Dataset val;  // empty when val_count == 0
  Dataset test;
};

/// Carves disjoint train/val subsets out of `train_pool` and a test subset
/// out of `test_pool`. A count of 0 for train or test keeps the whole pool.
DataSplits make_splits(const Dataset& train_pool, const Dataset& test_pool, const SplitSpec& spec);

/// Epoch-seeded shuffle cut into batches; the final short batch is kept.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t dataset_size, std::size_t batch_size,
                                                 std::uint64_t seed, std::size_t epoch);

struct PseudoValBatch {
  Batch batch;
  AugTrace trace;
};

/// Fresh draw of `batch_size` distinct samples with an input-space,
/// label-preserving augmentation applied at P0. Labels stay one-hot.
/// Throws PolicyError for label-mixing kinds.
PseudoValBatch pseudo_val_batch(const Dataset& ds, std::size_t batch_size, const AugSpec& aug,
                                Rng& rng);

}  // namespace adalase
