#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace adalase {

/// Independent random streams of a run. Each consumer draws from its own
/// stream so adding or removing one consumer never shifts another's draws.
enum class Stream : std::uint64_t {
  init = 1,
  data_order,
  reference,
  selection,
  train_aug,
  input_aug,
  probe,
  counterfactual,
  subsample,
  synthetic,
};

/// splitmix64 finalizer over (seed, stream, index).
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
      : engine_(derive_seed(seed, stream, index)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform on {0, ..., n-1}; n must be > 0.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  /// Symmetric Beta(alpha, alpha) via two gamma draws.
  double beta(double alpha);
  std::vector<std::size_t> permutation(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace adalase
