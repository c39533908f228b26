#include "adalase/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "adalase/error.hpp"
#include "adalase/loss.hpp"

namespace adalase {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCosineEps = 1e-12;
constexpr std::size_t kStandardPad = 4;
}  // namespace

std::string to_string(ReferenceSource source) {
  switch (source) {
    case ReferenceSource::pseudo_validation: return "pseudo_validation";
    case ReferenceSource::validation: return "validation";
    case ReferenceSource::test: return "test";
  }
  return "pseudo_validation";
}

ReferenceSource reference_source_from_string(const std::string& name) {
  if (name == "pseudo_validation") return ReferenceSource::pseudo_validation;
  if (name == "validation") return ReferenceSource::validation;
  if (name == "test") return ReferenceSource::test;
  throw ConfigError("unknown reference source '" + name +
                        "' (expected pseudo_validation, validation, test)",
                    "train.reference");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1", "train.epochs");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1", "train.batch_size");
  if (train_aug.mixes_labels() && batch_size < 2) {
    throw ConfigError("train.batch_size must be >= 2 for " + to_string(train_aug.kind),
                      "train.batch_size");
  }
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) {
    throw ConfigError("train.base_lr must be >= 0", "train.base_lr");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("train.momentum must be in [0, 1)", "train.momentum");
  }
  if (probe_batch < 2) throw ConfigError("train.probe_batch must be >= 2", "train.probe_batch");
  train_aug.validate();
  pseudo_val_aug.validate();
  if (reference == ReferenceSource::pseudo_validation && pseudo_val_aug.mixes_labels()) {
    throw ConfigError("train.pseudo_val_aug must not mix labels", "train.pseudo_val_aug.kind");
  }
  adalase.validate();
}

// ---------------------------------------------------------------- optimizer

OptimizerState OptimizerState::make(const Network& net, double base_lr, double momentum,
                                    std::size_t total_steps) {
  OptimizerState s;
  s.velocity.assign(net.param_count(), 0.0);
  s.momentum = momentum;
  s.base_lr = base_lr;
  s.lr = base_lr;
  s.total_steps = std::max<std::size_t>(1, total_steps);
  return s;
}

double cosine_lr(std::size_t t, std::size_t total, double lr0) {
  if (total == 0 || t > total) {
    throw RangeError("cosine_lr: step " + std::to_string(t) + " outside [0, " +
                     std::to_string(total) + "]");
  }
  const double frac = static_cast<double>(t) / static_cast<double>(total);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void sgd_momentum_step(Network& net, const FlatGrad& grads, OptimizerState& opt) {
  const std::size_t n = net.param_count();
  if (grads.size() != n || opt.velocity.size() != n) {
    throw ShapeError("sgd step: " + std::to_string(grads.size()) + " gradients and " +
                     std::to_string(opt.velocity.size()) + " velocities for " + std::to_string(n) +
                     " parameters");
  }
  std::size_t k = 0;
  for (Param* p : net.params()) {
    for (double& w : p->value) {
      opt.velocity[k] = opt.momentum * opt.velocity[k] + grads.values[k];
      w -= opt.lr * opt.velocity[k];
      ++k;
    }
  }
}

void advance_lr(OptimizerState& opt) {
  opt.step = std::min(opt.step + 1, opt.total_steps);
  opt.lr = cosine_lr(opt.step, opt.total_steps, opt.base_lr);
}

// ---------------------------------------------------------------- selection

RunStreams::RunStreams(std::uint64_t seed)
    : selection(seed, Stream::selection),
      train_aug(seed, Stream::train_aug),
      reference(seed, Stream::reference),
      input_aug(seed, Stream::input_aug),
      counterfactual(seed, Stream::counterfactual) {}

Selector::Selector(const RatioSchedule& schedule, std::size_t positions, const AdaLaseConfig& cfg)
    : cfg_(cfg) {
  if (schedule.shape == ScheduleShape::adaptive) {
    ratios_ = AcceptanceRatios::init(positions, cfg.d_scale);
  } else {
    fixed_ = schedule_ratios(schedule, positions);
  }
}

std::span<const double> Selector::probabilities() const {
  return ratios_ ? ratios_->values() : std::span<const double>(fixed_);
}

bool Selector::record(std::size_t position, double dot) {
  if (!ratios_ || cfg_.freeze) return false;
  window_.push_back({position, dot});
  if (cfg_.avg_window > 0 && window_.size() >= cfg_.avg_window) return flush();
  return false;
}

bool Selector::flush() {
  if (!ratios_ || window_.empty()) return false;
  const bool moved = averaged_update(*ratios_, window_, cfg_);
  window_.clear();
  return moved;
}

// ---------------------------------------------------------------- iteration

IterationResult adalase_iteration(Network& net, const Batch& train, const Batch* reference,
                                  Selector& selector, OptimizerState& opt, const TrainConfig& cfg,
                                  RunStreams& streams) {
  IterationResult r;
  r.dot = kNaN;
  r.reference_loss = kNaN;

  FlatGrad ref_grad;
  if (reference != nullptr) {
    r.reference_loss =
        net.forward_with_tap(reference->x, reference->y, std::nullopt, AugSpec{}, streams.reference)
            .loss;
    ref_grad = net.backward();
  }

  r.position = sample_position(selector.probabilities(), streams.selection);

  const Tensor4 x = cfg.standard_input_augs
                        ? standard_input_augs(train.x, kStandardPad, streams.input_aug)
                        : train.x;
  r.loss = net.forward_with_tap(x, train.y, r.position, cfg.train_aug, streams.train_aug).loss;
  const FlatGrad train_grad = net.backward();
  if (!std::isfinite(r.loss)) throw ValidationError("training loss is not finite");

  if (reference != nullptr) {
    r.dot = grad_dot(ref_grad, train_grad);
    if (cfg.adalase.dot_normalization == DotNormalization::cosine) {
      r.dot /= grad_norm(ref_grad) * grad_norm(train_grad) + kCosineEps;
    }
  }

  sgd_momentum_step(net, train_grad, opt);
  if (reference != nullptr) r.ratios_moved = selector.record(r.position, r.dot);
  advance_lr(opt);
  return r;
}

// ---------------------------------------------------------------- evaluation

namespace {

template <typename Fn>
void for_chunks(const Dataset& set, std::size_t chunk, Fn fn) {
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += chunk) {
    const std::size_t end = std::min(set.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    fn(gather(set, idx));
  }
}

}  // namespace

double evaluate(const Network& net, const Dataset& set, std::size_t chunk) {
  if (set.size() == 0) return 0.0;
  std::size_t correct = 0;
  for_chunks(set, chunk, [&](const Batch& b) {
    const Tensor4 logits = net.predict(b.x);
    const std::size_t k = logits.shape().c;
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
      const auto row = logits.sample(i);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.begin() + k) -
                                                 row.begin());
      if (best == static_cast<std::size_t>(b.labels[i])) ++correct;
    }
  });
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

double evaluate_loss(const Network& net, const Dataset& set, std::size_t chunk) {
  if (set.size() == 0) return kNaN;
  double total = 0.0;
  for_chunks(set, chunk, [&](const Batch& b) {
    total += cross_entropy(net.predict(b.x), b.y).loss * static_cast<double>(b.labels.size());
  });
  return total / static_cast<double>(set.size());
}

std::vector<double> probe_layer_losses(const Network& net, const Dataset& set, const AugSpec& aug,
                                       std::uint64_t seed, std::size_t chunk) {
  std::vector<double> out(net.num_taps(), kNaN);
  if (set.size() == 0) return out;
  for (std::size_t tap = 0; tap < net.num_taps(); ++tap) {
    Rng rng(seed, Stream::probe, tap);
    double total = 0.0;
    std::size_t counted = 0;
    for_chunks(set, chunk, [&](const Batch& b) {
      // A lone trailing sample cannot be mixed; it is evaluated unaugmented.
      const bool degenerate = aug.mixes_labels() && b.labels.size() < 2;
      const auto res = degenerate ? net.evaluate_with_tap(b.x, b.y, std::nullopt, AugSpec{}, rng)
                                  : net.evaluate_with_tap(b.x, b.y, tap, aug, rng);
      total += res.loss * static_cast<double>(b.labels.size());
      counted += b.labels.size();
    });
    out[tap] = total / static_cast<double>(counted);
  }
  return out;
}

// ---------------------------------------------------------------- audit

AuditMetrics audit_worst_layer(const SelectionAudit& audit) {
  if (audit.selected.size() != audit.counterfactual.size() ||
      audit.selected.size() != audit.epoch_of.size()) {
    throw AuditError("selection audit has inconsistent record lengths");
  }
  AuditMetrics m;
  m.worst_tally.assign(audit.positions, 0);
  for (std::size_t it = 0; it < audit.selected.size(); ++it) {
    const std::size_t e = audit.epoch_of[it];
    if (e >= audit.probes.size() || audit.probes[e].size() != audit.positions) {
      throw AuditError("no probe losses recorded for epoch " + std::to_string(e + 1));
    }
    const auto& p = audit.probes[e];
    const std::size_t worst =
        static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    if (!std::isfinite(p[worst])) {
      throw AuditError("non-finite probe loss at epoch " + std::to_string(e + 1));
    }
    ++m.worst_tally[worst];
    if (audit.selected[it] == worst) ++m.n_ada;
    if (audit.counterfactual[it] == worst) ++m.n_uni;
    ++m.n_all;
  }
  if (m.n_all == 0) throw AuditError("selection audit is empty");
  const double all = static_cast<double>(m.n_all);
  m.x = (static_cast<double>(m.n_ada) - static_cast<double>(m.n_uni)) / all;
  const auto [lo, hi] = std::minmax_element(m.worst_tally.begin(), m.worst_tally.end());
  m.y = static_cast<double>(*hi - *lo) / all;
  return m;
}

// ---------------------------------------------------------------- training loop

namespace {

Batch draw_batch(const Dataset& set, std::size_t batch_size, Rng& rng) {
  auto order = rng.permutation(set.size());
  order.resize(std::min(batch_size, set.size()));
  return gather(set, order);
}

}  // namespace

TrainResult train(Network& net, const DataSplits& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.size() == 0) throw ConfigError("training split is empty", "data");
  if (data.test.size() == 0) throw ConfigError("test split is empty", "data");
  if (data.train.sample_shape != net.input_shape()) {
    throw ShapeError("dataset samples do not match the network input");
  }

  const Dataset& heldout = data.val.size() > 0 ? data.val : data.test;
  const Dataset* reference_set = nullptr;
  if (cfg.reference == ReferenceSource::validation) {
    if (data.val.size() == 0) {
      throw ConfigError("reference 'validation' needs a validation split", "data.val_count");
    }
    reference_set = &data.val;
  } else if (cfg.reference == ReferenceSource::test) {
    reference_set = &data.test;
  }

  const std::size_t positions = net.num_taps();
  Selector selector(cfg.schedule, positions, cfg.adalase);
  const bool use_reference = selector.adaptive();

  // A single trailing sample cannot be mixed and is dropped for mixing kinds.
  auto epoch_batches = [&](std::size_t epoch) {
    auto batches = batch_iter(data.train.size(), cfg.batch_size, cfg.seed, epoch);
    if (cfg.train_aug.mixes_labels() && !batches.empty() && batches.back().size() < 2) {
      batches.pop_back();
    }
    return batches;
  };
  std::size_t total_steps = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) total_steps += epoch_batches(e).size();
  if (total_steps == 0) throw ConfigError("no usable training batches", "train.batch_size");

  Rng init_rng(cfg.seed, Stream::init);
  if (cfg.initialize) net.init_uniform(init_rng);
  OptimizerState opt = OptimizerState::make(net, cfg.base_lr, cfg.momentum, total_steps);
  RunStreams streams(cfg.seed);

  TrainResult result;
  result.audit.positions = positions;
  const auto probs0 = selector.probabilities();
  result.trajectory.emplace_back(probs0.begin(), probs0.end());
  const std::vector<double> uniform(positions, 1.0 / static_cast<double>(positions));

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochMetrics m;
    m.epoch = e + 1;
    m.lr = opt.lr;
    m.histogram.assign(positions, 0);
    double loss_sum = 0.0, ref_sum = 0.0;
    std::size_t iters = 0;

    for (const auto& idx : epoch_batches(e)) {
      const Batch batch = gather(data.train, idx);
      std::optional<Batch> ref;
      if (use_reference) {
        ref = reference_set != nullptr
                  ? draw_batch(*reference_set, cfg.batch_size, streams.reference)
                  : pseudo_val_batch(data.train, cfg.batch_size, cfg.pseudo_val_aug,
                                     streams.reference)
                        .batch;
      }
      const auto r =
          adalase_iteration(net, batch, ref ? &*ref : nullptr, selector, opt, cfg, streams);
      loss_sum += r.loss;
      ref_sum += r.reference_loss;
      ++iters;
      ++m.histogram[r.position];
      result.audit.selected.push_back(r.position);
      result.audit.counterfactual.push_back(sample_position(uniform, streams.counterfactual));
      result.audit.epoch_of.push_back(e);
    }
    if (cfg.adalase.avg_window == 0) selector.flush();

    m.train_loss = loss_sum / static_cast<double>(iters);
    m.reference_loss = use_reference ? ref_sum / static_cast<double>(iters) : kNaN;
    m.val_loss = data.val.size() > 0 ? evaluate_loss(net, data.val) : kNaN;
    m.test_acc = evaluate(net, data.test);
    const auto q = selector.probabilities();
    m.q.assign(q.begin(), q.end());
    if (cfg.probe) {
      m.probe_loss = probe_layer_losses(net, heldout, cfg.train_aug, cfg.seed, cfg.probe_batch);
      result.audit.probes.push_back(m.probe_loss);
    }
    m.param_hash = net.param_hash();
    result.trajectory.push_back(m.q);
    if (m.test_acc > result.best_test_acc || result.epochs.empty()) {
      result.best_test_acc = m.test_acc;
      result.best_epoch = m.epoch;
    }
    result.epochs.push_back(std::move(m));
  }
  return result;
}

}  // namespace adalase
