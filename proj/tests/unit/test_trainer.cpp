#include <doctest.h>

#include <cmath>

#include "adalase/error.hpp"
#include "adalase/trainer.hpp"
#include "helpers.hpp"

using namespace adalase;

namespace {

DataSplits toy_splits(std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                      SyntheticOptions opts = {}) {
  const Dataset all = gen_synthetic(SyntheticKind::striped_patches, n_train + n_test, seed, opts);
  std::vector<std::size_t> tr(n_train), te(n_test);
  for (std::size_t i = 0; i < n_train; ++i) tr[i] = i;
  for (std::size_t i = 0; i < n_test; ++i) te[i] = n_train + i;
  return {select(all, tr, Split::train), Dataset{}, select(all, te, Split::test)};
}

Network toy_mlp() { return make_mlp({1, 8, 8}, {1, 4, 4}, 2); }

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.train_aug = AugSpec{AugKind::cutout};
  cfg.reference = ReferenceSource::test;
  cfg.seed = 11;
  return cfg;
}

Batch batch_of(const Dataset& ds, std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return gather(ds, idx);
}

}  // namespace

TEST_CASE("cosine learning rate") {
  CHECK(cosine_lr(0, 100, 0.1) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(cosine_lr(100, 100, 0.1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(cosine_lr(50, 100, 0.1) - 0.05) < 1e-15);
  CHECK_THROWS_AS(cosine_lr(101, 100, 0.1), RangeError);
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.1), RangeError);
}

TEST_CASE("momentum SGD") {
  Network net = make_mlp({1, 1, 2}, {1, 1, 2}, 2);
  Rng rng(1);
  net.init_uniform(rng);
  const std::vector<double> theta0 = net.flat_params();
  FlatGrad g;
  g.values.assign(theta0.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = 0.01 * static_cast<double>(i + 1);

  SUBCASE("mu = 0 is plain SGD") {
    OptimizerState opt = OptimizerState::make(net, 0.1, 0.0, 10);
    sgd_momentum_step(net, g, opt);
    const auto theta1 = net.flat_params();
    for (std::size_t i = 0; i < theta0.size(); ++i) {
      CHECK(theta1[i] == doctest::Approx(theta0[i] - 0.1 * g.values[i]).epsilon(1e-14));
    }
  }
  SUBCASE("second step with constant gradient moves by lr * g * 1.9") {
    OptimizerState opt = OptimizerState::make(net, 0.1, 0.9, 10);
    sgd_momentum_step(net, g, opt);
    const auto theta1 = net.flat_params();
    sgd_momentum_step(net, g, opt);
    const auto theta2 = net.flat_params();
    for (std::size_t i = 0; i < theta0.size(); ++i) {
      CHECK(theta1[i] - theta2[i] == doctest::Approx(0.1 * g.values[i] * 1.9).epsilon(1e-10));
    }
  }
  SUBCASE("zero gradient keeps parameters fixed") {
    OptimizerState opt = OptimizerState::make(net, 0.1, 0.9, 10);
    FlatGrad zero;
    zero.values.assign(theta0.size(), 0.0);
    for (int i = 0; i < 5; ++i) sgd_momentum_step(net, zero, opt);
    CHECK(net.flat_params() == theta0);
  }
  SUBCASE("length mismatch") {
    OptimizerState opt = OptimizerState::make(net, 0.1, 0.9, 10);
    FlatGrad bad;
    bad.values.assign(theta0.size() + 1, 0.0);
    CHECK_THROWS_AS(sgd_momentum_step(net, bad, opt), ShapeError);
    CHECK(net.flat_params() == theta0);
  }
  SUBCASE("advance_lr follows the cosine schedule") {
    OptimizerState opt = OptimizerState::make(net, 0.1, 0.9, 4);
    CHECK(opt.lr == 0.1);
    advance_lr(opt);
    advance_lr(opt);
    CHECK(std::abs(opt.lr - 0.05) < 1e-15);
  }
}

TEST_CASE("adalase_iteration") {
  const DataSplits d = toy_splits(64, 16, 2);
  Network net = toy_mlp();
  Rng init(4);
  net.init_uniform(init);
  TrainConfig cfg = toy_config();
  cfg.train_aug = AugSpec{};
  cfg.adalase.avg_window = 1;
  const Batch b = batch_of(d.train, 16);

  SUBCASE("self-alignment gives dot = |g|^2 and raises q_l") {
    Network copy = net;
    copy.forward_with_tap(b.x, b.y, std::nullopt, AugSpec{}, init);
    const FlatGrad g = copy.backward();
    const double expected = testutil::naive_dot(g.values, g.values);

    Selector sel(RatioSchedule{}, net.num_taps(), cfg.adalase);
    OptimizerState opt = OptimizerState::make(net, cfg.base_lr, cfg.momentum, 10);
    RunStreams streams(cfg.seed);
    const std::vector<double> q0(sel.probabilities().begin(), sel.probabilities().end());
    const IterationResult r = adalase_iteration(net, b, &b, sel, opt, cfg, streams);
    CHECK(r.dot >= 0.0);
    CHECK(std::abs(r.dot - expected) <= 1e-12 * std::abs(expected));
    CHECK(sel.probabilities()[r.position] >= q0[r.position]);
  }
  SUBCASE("zero reference gradient is orthogonal: ratios unchanged") {
    // All-zero weights give uniform logits; uniform soft targets make the
    // reference gradient vanish exactly.
    net.set_flat_params(std::vector<double>(net.param_count(), 0.0));
    Batch ref = b;
    for (std::size_t r = 0; r < ref.y.rows(); ++r) {
      for (std::size_t c = 0; c < ref.y.classes(); ++c) ref.y.at(r, c) = 0.5;
    }
    Selector sel(RatioSchedule{}, net.num_taps(), cfg.adalase);
    OptimizerState opt = OptimizerState::make(net, cfg.base_lr, cfg.momentum, 10);
    RunStreams streams(cfg.seed);
    const IterationResult r = adalase_iteration(net, b, &ref, sel, opt, cfg, streams);
    CHECK(r.dot == 0.0);
    CHECK(sel.probabilities()[0] == 0.5);
    CHECK(sel.probabilities()[1] == 0.5);
  }
  SUBCASE("dot matches a naive inner product of both gradients") {
    cfg.train_aug = AugSpec{AugKind::cutout};
    Selector sel(RatioSchedule::parse("fixed:1"), net.num_taps(), cfg.adalase);
    const Batch ref = batch_of(d.test, 16);
    Network copy = net;
    RunStreams streams(cfg.seed);
    RunStreams twin(cfg.seed);
    copy.forward_with_tap(ref.x, ref.y, std::nullopt, AugSpec{}, twin.reference);
    const FlatGrad gr = copy.backward();
    copy.forward_with_tap(b.x, b.y, 1, cfg.train_aug, twin.train_aug);
    const FlatGrad gt = copy.backward();
    const double expected = testutil::naive_dot(gr.values, gt.values);

    OptimizerState opt = OptimizerState::make(net, cfg.base_lr, cfg.momentum, 10);
    const IterationResult r = adalase_iteration(net, b, &ref, sel, opt, cfg, streams);
    CHECK(r.position == 1);
    CHECK(std::abs(r.dot - expected) <= 1e-12 * std::max(std::abs(expected), 1e-300));
  }
  SUBCASE("a failing iteration leaves every state unchanged") {
    cfg.train_aug = AugSpec{AugKind::mixup};
    Selector sel(RatioSchedule{}, net.num_taps(), cfg.adalase);
    OptimizerState opt = OptimizerState::make(net, cfg.base_lr, cfg.momentum, 10);
    RunStreams streams(cfg.seed);
    adalase_iteration(net, b, &b, sel, opt, cfg, streams);
    const auto theta = net.flat_params();
    const auto velocity = opt.velocity;
    const std::size_t step = opt.step;
    const std::vector<double> q(sel.probabilities().begin(), sel.probabilities().end());
    const Batch single = batch_of(d.train, 1);
    CHECK_THROWS(adalase_iteration(net, single, &b, sel, opt, cfg, streams));
    CHECK(net.flat_params() == theta);
    CHECK(opt.velocity == velocity);
    CHECK(opt.step == step);
    CHECK(std::vector<double>(sel.probabilities().begin(), sel.probabilities().end()) == q);
  }
}

TEST_CASE("selector windows") {
  AdaLaseConfig cfg;
  cfg.avg_window = 2;
  Selector sel(RatioSchedule{}, 2, cfg);
  CHECK_FALSE(sel.record(0, 0.1));
  CHECK(sel.pending() == 1);
  CHECK(sel.record(1, -0.1));
  CHECK(sel.pending() == 0);
  CHECK(sel.probabilities()[0] > 0.5);

  cfg.freeze = true;
  Selector frozen(RatioSchedule{}, 2, cfg);
  for (int i = 0; i < 10; ++i) frozen.record(0, 1.0);
  frozen.flush();
  CHECK(frozen.probabilities()[0] == 0.5);

  Selector fixed(RatioSchedule::parse("linear_inc"), 3, AdaLaseConfig{});
  CHECK_FALSE(fixed.adaptive());
  CHECK_FALSE(fixed.record(0, 1.0));
}

TEST_CASE("train") {
  const DataSplits d = toy_splits(96, 32, 3);
  SUBCASE("same seed twice is bitwise identical") {
    Network a = toy_mlp(), b = toy_mlp();
    const TrainResult ra = train(a, d, toy_config());
    const TrainResult rb = train(b, d, toy_config());
    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (std::size_t e = 0; e < ra.epochs.size(); ++e) {
      CHECK(ra.epochs[e].train_loss == rb.epochs[e].train_loss);
      CHECK(ra.epochs[e].reference_loss == rb.epochs[e].reference_loss);
      CHECK(ra.epochs[e].test_acc == rb.epochs[e].test_acc);
      CHECK(ra.epochs[e].q == rb.epochs[e].q);
      CHECK(ra.epochs[e].probe_loss == rb.epochs[e].probe_loss);
      CHECK(ra.epochs[e].param_hash == rb.epochs[e].param_hash);
    }
    CHECK(ra.audit.selected == rb.audit.selected);
  }
  SUBCASE("fixed:0 augments only at P0") {
    TrainConfig cfg = toy_config();
    cfg.schedule = RatioSchedule::parse("fixed:0");
    Network net = toy_mlp();
    const TrainResult r = train(net, d, cfg);
    for (const auto& m : r.epochs) {
      CHECK(m.histogram[0] == 6);
      CHECK(m.histogram[1] == 0);
      CHECK(std::isnan(m.reference_loss));
    }
  }
  SUBCASE("uniform schedule matches frozen adaptive ratios bitwise") {
    TrainConfig uni = toy_config();
    uni.schedule = RatioSchedule::parse("uniform");
    TrainConfig frozen = toy_config();
    frozen.adalase.freeze = true;
    Network a = toy_mlp(), b = toy_mlp();
    const TrainResult ra = train(a, d, uni);
    const TrainResult rb = train(b, d, frozen);
    CHECK(a.flat_params() == b.flat_params());
    for (std::size_t e = 0; e < ra.epochs.size(); ++e) {
      CHECK(ra.epochs[e].param_hash == rb.epochs[e].param_hash);
    }
    CHECK(ra.audit.selected == rb.audit.selected);
  }
  SUBCASE("a window of one updates every iteration") {
    TrainConfig cfg = toy_config();
    cfg.adalase.avg_window = 1;
    Network net = toy_mlp();
    const TrainResult r = train(net, d, cfg);
    CHECK(r.trajectory.size() == 3);
    CHECK(r.trajectory[1] != r.trajectory[0]);
  }
  SUBCASE("loss decreases on zero-variance separable data") {
    // Every class-0 pixel is 0.25 and every class-1 pixel 0.75; full-batch steps.
    Dataset ds;
    ds.sample_shape = {1, 8, 8};
    ds.num_classes = 2;
    for (int i = 0; i < 64; ++i) {
      ds.labels.push_back(i % 2);
      ds.images.insert(ds.images.end(), 64, i % 2 == 0 ? 0.25f : 0.75f);
    }
    Network net = toy_mlp();
    Rng init(5);
    net.init_uniform(init);
    TrainConfig cfg = toy_config();
    cfg.train_aug = AugSpec{};
    cfg.schedule = RatioSchedule::parse("uniform");
    cfg.momentum = 0.0;
    Selector sel(cfg.schedule, net.num_taps(), cfg.adalase);
    const std::size_t steps = 30;
    OptimizerState opt = OptimizerState::make(net, cfg.base_lr, cfg.momentum, steps);
    RunStreams streams(cfg.seed);
    const Batch all = batch_of(ds, ds.size());
    double prev = INFINITY, first = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const IterationResult r = adalase_iteration(net, all, nullptr, sel, opt, cfg, streams);
      if (t == 0) first = r.loss;
      CHECK(r.loss <= prev + 1e-6);
      prev = r.loss;
    }
    CHECK(prev < first);
  }
  SUBCASE("empty data and bad shapes") {
    Network net = toy_mlp();
    DataSplits empty = d;
    empty.train = Dataset{};
    CHECK_THROWS_AS(train(net, empty, toy_config()), ConfigError);
    empty = d;
    empty.test = Dataset{};
    CHECK_THROWS_AS(train(net, empty, toy_config()), ConfigError);
    Network wrong = make_mlp({1, 4, 4}, {1, 2, 2}, 2);
    CHECK_THROWS_AS(train(wrong, d, toy_config()), ShapeError);
    TrainConfig cfg = toy_config();
    cfg.reference = ReferenceSource::validation;
    CHECK_THROWS_AS(train(net, d, cfg), ConfigError);
  }
  SUBCASE("config validation names the field") {
    TrainConfig cfg = toy_config();
    cfg.epochs = 0;
    try {
      cfg.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "train.epochs");
    }
    cfg = toy_config();
    cfg.train_aug = AugSpec{AugKind::mixup};
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("probe_layer_losses") {
  const DataSplits d = toy_splits(32, 40, 6);
  Network net = toy_mlp();
  Rng init(2);
  net.init_uniform(init);
  const std::uint64_t before = net.param_hash();
  const auto none = probe_layer_losses(net, d.test, AugSpec{}, 1);
  REQUIRE(none.size() == 2);
  CHECK(none[0] == none[1]);
  const auto cut = probe_layer_losses(net, d.test, AugSpec{AugKind::cutout}, 1);
  CHECK(cut.size() == 2);
  CHECK(std::isfinite(cut[0]));
  CHECK(cut[0] != cut[1]);
  CHECK(probe_layer_losses(net, d.test, AugSpec{AugKind::cutout}, 1) == cut);
  CHECK(net.param_hash() == before);
  CHECK(none[0] == doctest::Approx(evaluate_loss(net, d.test)).epsilon(1e-12));
}

TEST_CASE("audit_worst_layer") {
  SUBCASE("n_ada = 10, n_uni = 20, n_all = 100") {
    SelectionAudit a;
    a.positions = 2;
    a.probes = {{1.0, 2.0}};
    for (std::size_t i = 0; i < 100; ++i) {
      a.selected.push_back(i < 10 ? 1 : 0);
      a.counterfactual.push_back(i < 20 ? 1 : 0);
      a.epoch_of.push_back(0);
    }
    const AuditMetrics m = audit_worst_layer(a);
    CHECK(m.n_ada == 10);
    CHECK(m.n_uni == 20);
    CHECK(m.n_all == 100);
    CHECK(m.x == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(m.y == 1.0);
  }
  SUBCASE("identical selections give x = 0, alternating worst gives y = 0") {
    SelectionAudit a;
    a.positions = 2;
    a.probes = {{1.0, 2.0}, {3.0, 0.5}};
    for (std::size_t i = 0; i < 40; ++i) {
      a.selected.push_back(i % 2);
      a.counterfactual.push_back(i % 2);
      a.epoch_of.push_back(i / 20);
    }
    const AuditMetrics m = audit_worst_layer(a);
    CHECK(m.x == 0.0);
    CHECK(m.y == 0.0);
    CHECK(m.worst_tally[0] + m.worst_tally[1] == m.n_all);
  }
  SUBCASE("missing probes") {
    SelectionAudit a;
    a.positions = 2;
    a.selected = {0};
    a.counterfactual = {0};
    a.epoch_of = {0};
    CHECK_THROWS_AS(audit_worst_layer(a), AuditError);
    a.probes = {{NAN, NAN}};
    CHECK_THROWS_AS(audit_worst_layer(a), AuditError);
    CHECK_THROWS_AS(audit_worst_layer(SelectionAudit{}), AuditError);
  }
}

TEST_CASE("evaluate") {
  SUBCASE("memorized toy set") {
    const Dataset ds = gen_synthetic(SyntheticKind::two_gaussians, 32, 8);
    DataSplits same{ds, Dataset{}, ds};
    TrainConfig cfg = toy_config();
    cfg.epochs = 30;
    cfg.train_aug = AugSpec{};
    cfg.schedule = RatioSchedule::parse("uniform");
    cfg.probe = false;
    Network net = toy_mlp();
    train(net, same, cfg);
    CHECK(evaluate(net, ds) == 1.0);
  }
  SUBCASE("uniform logits on random 10-class labels") {
    Dataset ds;
    ds.sample_shape = {1, 2, 2};
    ds.num_classes = 10;
    Rng rng(12);
    for (int i = 0; i < 10000; ++i) {
      ds.labels.push_back(static_cast<int>(rng.uniform_index(10)));
      for (int k = 0; k < 4; ++k) ds.images.push_back(static_cast<float>(rng.uniform()));
    }
    Network net = make_mlp({1, 2, 2}, {1, 2, 2}, 10);
    net.set_flat_params(std::vector<double>(net.param_count(), 0.0));
    const double acc = evaluate(net, ds);
    CHECK(std::abs(acc - 0.1) <= 0.02);
    CHECK(evaluate(net, ds, 7) == acc);
    CHECK(evaluate(net, ds, 10000) == acc);
  }
}
