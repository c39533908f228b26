#pragma once

// Training loop with adaptive augmentation-position selection.
//
// One iteration computes the reference gradient (pseudo-validation or held
// out data) and the training gradient with augmentation at a sampled tap,
// both at the same parameters, takes a momentum SGD step with the training
// gradient, and feeds their inner product to the ratio update.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "adalase/augment.hpp"
#include "adalase/data.hpp"
#include "adalase/network.hpp"
#include "adalase/ratios.hpp"

namespace adalase {

/// Where the reference gradient comes from.
enum class ReferenceSource {
  /// Training data with an input-space augmentation (rotation by default).
  pseudo_validation,
  /// Unaugmented batches of the validation split.
  validation,
  /// Unaugmented batches of the test split.
  test,
};

std::string to_string(ReferenceSource source);
ReferenceSource reference_source_from_string(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double base_lr = 0.1;
  double momentum = 0.9;
  RatioSchedule schedule;
  AugSpec train_aug{AugKind::mixup};
  AugSpec pseudo_val_aug{AugKind::rotation};
  /// Random crop (pad 4) and horizontal flip of every training batch at the input.
  bool standard_input_augs = false;
  ReferenceSource reference = ReferenceSource::pseudo_validation;
  AdaLaseConfig adalase;
  /// Per-position probe losses at every epoch end.
  bool probe = true;
  /// Samples per probe evaluation chunk.
  std::size_t probe_batch = 256;
  std::uint64_t seed = 0;
  /// Draw fresh weights at the start of `train`; off when weights were loaded.
  bool initialize = true;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct OptimizerState {
  std::vector<double> velocity;
  double momentum = 0.9;
  double base_lr = 0.1;
  double lr = 0.1;
  std::size_t step = 0;
  std::size_t total_steps = 1;

  static OptimizerState make(const Network& net, double base_lr, double momentum,
                             std::size_t total_steps);
};

/// lr0 * (1 + cos(pi t / T)) / 2. Throws RangeError unless 0 <= t <= T.
double cosine_lr(std::size_t t, std::size_t total, double lr0);

/// v <- mu v + g; theta <- theta - lr v. Throws ShapeError on length mismatch.
void sgd_momentum_step(Network& net, const FlatGrad& grads, OptimizerState& opt);

/// Moves the step counter forward and recomputes lr from the cosine schedule.
void advance_lr(OptimizerState& opt);

/// Random streams owned by one training run.
struct RunStreams {
  Rng selection;
  Rng train_aug;
  Rng reference;
  Rng input_aug;
  Rng counterfactual;

  explicit RunStreams(std::uint64_t seed);
};

/// Position-selection state: either a fixed distribution or adaptive ratios
/// with their pending averaging window.
class Selector {
 public:
  Selector(const RatioSchedule& schedule, std::size_t positions, const AdaLaseConfig& cfg);

  bool adaptive() const { return ratios_.has_value(); }
  std::span<const double> probabilities() const;
  const AcceptanceRatios* ratios() const { return ratios_ ? &*ratios_ : nullptr; }

  /// Queues a dot and applies the averaged update when the window is full.
  /// Returns true when the ratios moved.
  bool record(std::size_t position, double dot);
  /// Applies whatever is queued (end of epoch). Returns true when the ratios moved.
  bool flush();
  std::size_t pending() const { return window_.size(); }

 private:
  AdaLaseConfig cfg_;
  std::optional<AcceptanceRatios> ratios_;
  std::vector<double> fixed_;
  std::vector<WindowEntry> window_;
};

struct IterationResult {
  double loss = 0.0;
  std::size_t position = 0;
  /// NaN when no reference gradient was computed.
  double dot = 0.0;
  double reference_loss = 0.0;
  bool ratios_moved = false;
};

/// One training iteration. `reference` may be null for static schedules, in
/// which case no reference gradient is computed. On an exception the
/// parameters, optimizer state and selector are left unchanged.
IterationResult adalase_iteration(Network& net, const Batch& train, const Batch* reference,
                                  Selector& selector, OptimizerState& opt, const TrainConfig& cfg,
                                  RunStreams& streams);

/// Cross-entropy of augmented-at-position-i evaluation on `set` for every
/// tap. Each position uses its own fixed-seed stream, so repeated probes of
/// the same parameters agree. Read-only on `net`.
std::vector<double> probe_layer_losses(const Network& net, const Dataset& set, const AugSpec& aug,
                                       std::uint64_t seed, std::size_t chunk = 256);

/// Argmax accuracy; ties go to the lowest class index.
double evaluate(const Network& net, const Dataset& set, std::size_t chunk = 256);
/// Mean cross-entropy without augmentation.
double evaluate_loss(const Network& net, const Dataset& set, std::size_t chunk = 256);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  /// Mean reference loss; NaN when no reference gradient was computed.
  double reference_loss = 0.0;
  /// NaN without a validation split.
  double val_loss = 0.0;
  double test_acc = 0.0;
  std::vector<double> q;
  std::vector<std::size_t> histogram;
  /// Empty when probing is off.
  std::vector<double> probe_loss;
  std::uint64_t param_hash = 0;
};

struct SelectionAudit {
  std::vector<std::size_t> selected;
  std::vector<std::size_t> counterfactual;
  std::vector<std::size_t> epoch_of;
  /// End-of-epoch probe losses, one vector per epoch.
  std::vector<std::vector<double>> probes;
  std::size_t positions = 0;
};

struct AuditMetrics {
  std::size_t n_ada = 0;
  std::size_t n_uni = 0;
  std::size_t n_all = 0;
  /// Iterations at which each position was the worst one.
  std::vector<std::size_t> worst_tally;
  /// (n_ada - n_uni) / n_all
  double x = 0.0;
  /// (max tally - min tally) / n_all; equals |n_p0 - n_p1| / n_all for two taps.
  double y = 0.0;
};

/// Throws AuditError when an iteration has no probe for its epoch.
AuditMetrics audit_worst_layer(const SelectionAudit& audit);

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  /// Row 0 holds the initial ratios, row e the ratios after epoch e.
  std::vector<std::vector<double>> trajectory;
  SelectionAudit audit;
  double best_test_acc = 0.0;
  std::size_t best_epoch = 0;
};

/// Full training run. The validation split may be empty; probes and the
/// `validation` reference use it when present and the test split otherwise.
/// Throws ConfigError for empty train or test data.
TrainResult train(Network& net, const DataSplits& data, const TrainConfig& cfg);

}  // namespace adalase
