#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "adalase/augment.hpp"
#include "adalase/layers.hpp"
#include "adalase/rng.hpp"
#include "adalase/tensor.hpp"

namespace adalase {

/// All parameter gradients concatenated in declaration order.
struct FlatGrad {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Exact inner product, accumulated sequentially in canonical order.
/// Throws ShapeError on length mismatch.
double grad_dot(const FlatGrad& a, const FlatGrad& b);
double grad_norm(const FlatGrad& g);

struct ForwardResult {
  Tensor4 logits;
  double loss = 0.0;
  SoftLabels mixed_labels;
};

/// Layer stack with K augmentation taps. Tap i sits in front of layer
/// `tap_layers()[i]`; tap 0 is the input.
///
/// A network is single-writer: a forward/backward pair must not interleave
/// with another pass on the same instance. Copies are deep, so read-only
/// evaluation can run on a copy.
class Network {
 public:
  Network(MapShape input, std::vector<std::unique_ptr<Layer>> layers,
          std::vector<std::size_t> tap_layers);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;
  ~Network() = default;

  std::size_t num_taps() const { return taps_.size(); }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<std::size_t>& tap_layers() const { return taps_; }
  MapShape input_shape() const { return input_; }
  std::size_t num_classes() const { return output_.size(); }
  /// Feature-map geometry seen at tap `tap`.
  MapShape tap_shape(std::size_t tap) const;

  /// He-style fan-in scaled symmetric uniform weights, zero biases.
  void init_uniform(Rng& rng);

  /// Plain forward pass without loss; does not touch the backward cache.
  Tensor4 predict(const Tensor4& x) const;

  /// Forward pass with `aug` injected at `tap` (none = plain pass), then
  /// cross-entropy against the (possibly mixed) labels. Caches activations
  /// for `backward`.
  ForwardResult forward_with_tap(const Tensor4& x, const SoftLabels& labels,
                                 std::optional<std::size_t> tap, const AugSpec& aug, Rng& rng);
  /// Same, replaying fixed augmentation parameters.
  ForwardResult forward_with_trace(const Tensor4& x, const SoftLabels& labels,
                                   std::optional<std::size_t> tap, const AugTrace& trace);
  /// Cache-free loss evaluation with augmentation at `tap`.
  ForwardResult evaluate_with_tap(const Tensor4& x, const SoftLabels& labels,
                                  std::optional<std::size_t> tap, const AugSpec& aug,
                                  Rng& rng) const;
  ForwardResult evaluate_with_trace(const Tensor4& x, const SoftLabels& labels,
                                    std::optional<std::size_t> tap, const AugTrace& trace) const;

  /// d(loss)/d(theta) of the last forward pass. Augmentation parameters are
  /// constants. Throws StateError without a preceding forward pass.
  FlatGrad backward();

  std::size_t param_count() const;
  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> values);
  /// FNV-1a over the parameter bytes.
  std::uint64_t param_hash() const;

 private:
  struct Pass;
  template <typename Self, typename LayerCall>
  static Pass run(Self& self, const Tensor4& x, const SoftLabels& labels,
                  std::optional<std::size_t> tap, const AugTrace* trace, const AugSpec* spec,
                  Rng* rng, LayerCall call);
  void check_input(const Tensor4& x, const SoftLabels& labels,
                   std::optional<std::size_t> tap) const;
  void name_params();

  MapShape input_;
  MapShape output_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> taps_;

  // Backward cache.
  bool pending_ = false;
  Tensor4 loss_grad_;
  std::optional<std::size_t> cached_tap_;
  AugTrace cached_trace_;
};

/// (f(x + eps e_i) - f(x - eps e_i)) / 2 eps for every coordinate i.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double eps);

/// Central-difference gradient of the loss, one parameter at a time.
/// Test oracle; independent of `backward`.
FlatGrad finite_diff_grad(const Network& net, const Tensor4& x, const SoftLabels& labels,
                          double eps, std::optional<std::size_t> tap = std::nullopt,
                          const AugTrace* trace = nullptr);

/// Dense -> relu -> dense classifier with taps P0 (input) and P1 (hidden).
/// The hidden layer is laid out as `hidden` so spatial augmentations apply.
Network make_mlp(MapShape input, MapShape hidden, std::size_t classes);

/// conv-relu stem, residual block, 2x2 max pool, residual block, global
/// average pool, linear classifier. Taps: P0 input, P1 stem output, P2 and P3
/// after each residual block's skip addition.
Network make_tiny_resnet(MapShape input, std::size_t channels, std::size_t classes);

/// Weight checkpoint ("ADLW" container).
void save_checkpoint(const Network& net, const std::filesystem::path& path);
/// Throws FormatError on malformed files and ShapeError when names, ranks or
/// dims do not match `net`. `net` is unchanged on failure.
void load_checkpoint(Network& net, const std::filesystem::path& path);

}  // namespace adalase
