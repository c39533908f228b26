#include "adalase/network.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <utility>

#include "adalase/error.hpp"
#include "adalase/kernels.hpp"
#include "adalase/loss.hpp"

namespace adalase {

double grad_dot(const FlatGrad& a, const FlatGrad& b) {
  if (a.size() != b.size()) {
    throw ShapeError("grad_dot: length " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  return kernels::dot(a.values, b.values);
}

double grad_norm(const FlatGrad& g) { return std::sqrt(kernels::dot(g.values, g.values)); }

namespace {

void check_tap_policy(AugKind kind, std::size_t tap) {
  AugSpec probe{.kind = kind};
  if (tap > 0 && probe.input_only()) {
    throw PolicyError(to_string(kind) + " is only allowed at the input position P0, not P" +
                      std::to_string(tap));
  }
}

}  // namespace

Network::Network(MapShape input, std::vector<std::unique_ptr<Layer>> layers,
                 std::vector<std::size_t> tap_layers)
    : input_(input), layers_(std::move(layers)), taps_(std::move(tap_layers)) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  if (taps_.empty() || taps_.front() != 0) throw RangeError("tap 0 must precede the first layer");
  for (std::size_t i = 1; i < taps_.size(); ++i) {
    if (taps_[i] <= taps_[i - 1]) throw RangeError("tap positions must be strictly increasing");
  }
  if (taps_.back() >= layers_.size()) throw RangeError("tap position past the last layer");
  MapShape s = input_;
  for (const auto& l : layers_) s = l->output_shape(s);
  if (s.h != 1 || s.w != 1) throw ShapeError("network output must be (classes, 1, 1)");
  output_ = s;
  name_params();
}

Network::Network(const Network& other)
    : input_(other.input_),
      output_(other.output_),
      taps_(other.taps_),
      pending_(other.pending_),
      loss_grad_(other.loss_grad_),
      cached_tap_(other.cached_tap_),
      cached_trace_(other.cached_trace_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

void Network::name_params() {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (Param* p : layers_[i]->params()) {
      p->name = std::to_string(i) + "." + layers_[i]->kind() + "." + p->name;
    }
  }
}

MapShape Network::tap_shape(std::size_t tap) const {
  if (tap >= taps_.size()) throw RangeError("tap " + std::to_string(tap) + " out of range");
  MapShape s = input_;
  for (std::size_t i = 0; i < taps_[tap]; ++i) s = layers_[i]->output_shape(s);
  return s;
}

void Network::init_uniform(Rng& rng) {
  for (Param* p : params()) {
    if (p->is_bias) {
      std::fill(p->value.begin(), p->value.end(), 0.0);
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(p->fan_in));
    for (double& v : p->value) v = rng.uniform(-bound, bound);
  }
  pending_ = false;
}

void Network::check_input(const Tensor4& x, const SoftLabels& labels,
                          std::optional<std::size_t> tap) const {
  const Shape4& s = x.shape();
  if (!(MapShape{s.c, s.h, s.w} == input_)) {
    throw ShapeError("input " + s.str() + " does not match network input (" +
                     std::to_string(input_.c) + "," + std::to_string(input_.h) + "," +
                     std::to_string(input_.w) + ")");
  }
  if (labels.rows() != s.n) throw ShapeError("label rows do not match batch size");
  if (tap && *tap >= taps_.size()) {
    throw RangeError("tap " + std::to_string(*tap) + " out of range (K=" +
                     std::to_string(taps_.size()) + ")");
  }
}

struct Network::Pass {
  ForwardResult result;
  Tensor4 loss_grad;
  AugTrace trace;
};

template <typename Self, typename LayerCall>
Network::Pass Network::run(Self& self, const Tensor4& x, const SoftLabels& labels,
                           std::optional<std::size_t> tap, const AugTrace* trace,
                           const AugSpec* spec, Rng* rng, LayerCall call) {
  self.check_input(x, labels, tap);
  Pass pass;
  Tensor4 h = x;
  SoftLabels y = labels;
  for (std::size_t i = 0; i < self.layers_.size(); ++i) {
    if (tap && self.taps_[*tap] == i) {
      if (trace != nullptr) {
        check_tap_policy(trace->kind, *tap);
        pass.trace = *trace;
      } else {
        check_tap_policy(spec->kind, *tap);
        pass.trace = sample_trace(*spec, h.shape(), *rng);
      }
      AugOutcome o = apply_trace(pass.trace, h, y);
      h = std::move(o.tensor);
      y = std::move(o.labels);
    }
    h = call(*self.layers_[i], h);
  }
  CrossEntropy ce = cross_entropy(h, y);
  pass.result = {std::move(h), ce.loss, std::move(y)};
  pass.loss_grad = std::move(ce.grad);
  return pass;
}

namespace {

constexpr auto kTrain = [](Layer& l, const Tensor4& h) { return l.forward(h); };
constexpr auto kInfer = [](const Layer& l, const Tensor4& h) { return l.infer(h); };

}  // namespace

ForwardResult Network::forward_with_tap(const Tensor4& x, const SoftLabels& labels,
                                        std::optional<std::size_t> tap, const AugSpec& aug,
                                        Rng& rng) {
  pending_ = false;
  Pass p = run(*this, x, labels, tap, nullptr, &aug, &rng, kTrain);
  loss_grad_ = std::move(p.loss_grad);
  cached_tap_ = tap;
  cached_trace_ = std::move(p.trace);
  pending_ = true;
  return std::move(p.result);
}

ForwardResult Network::forward_with_trace(const Tensor4& x, const SoftLabels& labels,
                                          std::optional<std::size_t> tap,
                                          const AugTrace& trace) {
  pending_ = false;
  Pass p = run(*this, x, labels, tap, &trace, nullptr, nullptr, kTrain);
  loss_grad_ = std::move(p.loss_grad);
  cached_tap_ = tap;
  cached_trace_ = std::move(p.trace);
  pending_ = true;
  return std::move(p.result);
}

ForwardResult Network::evaluate_with_tap(const Tensor4& x, const SoftLabels& labels,
                                         std::optional<std::size_t> tap, const AugSpec& aug,
                                         Rng& rng) const {
  return run(*this, x, labels, tap, nullptr, &aug, &rng, kInfer).result;
}

ForwardResult Network::evaluate_with_trace(const Tensor4& x, const SoftLabels& labels,
                                           std::optional<std::size_t> tap,
                                           const AugTrace& trace) const {
  return run(*this, x, labels, tap, &trace, nullptr, nullptr, kInfer).result;
}

Tensor4 Network::predict(const Tensor4& x) const {
  check_input(x, SoftLabels(x.shape().n, 1), std::nullopt);
  Tensor4 h = x;
  for (const auto& l : layers_) h = l->infer(h);
  return h;
}

FlatGrad Network::backward() {
  if (!pending_) throw StateError("backward called before forward");
  Tensor4 g = loss_grad_;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g);
    // Nothing upstream of the input tap has parameters.
    if (cached_tap_ && taps_[*cached_tap_] == i && i > 0) g = backward_trace(cached_trace_, g);
  }
  pending_ = false;
  FlatGrad out;
  out.values.reserve(param_count());
  for (const Param* p : std::as_const(*this).params()) {
    out.values.insert(out.values.end(), p->grad.begin(), p->grad.end());
  }
  return out;
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) {
    auto ps = l->params();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::vector<const Param*> Network::params() const {
  std::vector<const Param*> out;
  for (const auto& l : layers_) {
    auto ps = std::as_const(*l).params();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Param* p : params()) n += p->size();
  return n;
}

std::vector<double> Network::flat_params() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (const Param* p : params()) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

void Network::set_flat_params(std::span<const double> values) {
  if (values.size() != param_count()) {
    throw ShapeError("set_flat_params: expected " + std::to_string(param_count()) +
                     " values, got " + std::to_string(values.size()));
  }
  std::size_t off = 0;
  for (Param* p : params()) {
    std::copy(values.begin() + off, values.begin() + off + p->size(), p->value.begin());
    off += p->size();
  }
}

std::uint64_t Network::param_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Param* p : params()) {
    for (double v : p->value) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double eps) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double plus = f(x);
    x[i] = orig - eps;
    const double minus = f(x);
    x[i] = orig;
    out[i] = (plus - minus) / (2.0 * eps);
  }
  return out;
}

FlatGrad finite_diff_grad(const Network& net, const Tensor4& x, const SoftLabels& labels,
                          double eps, std::optional<std::size_t> tap, const AugTrace* trace) {
  Network work = net;
  AugTrace none;
  if (trace == nullptr) {
    tap.reset();
    trace = &none;
  }
  auto loss = [&](std::span<const double> theta) {
    work.set_flat_params(theta);
    return work.evaluate_with_trace(x, labels, tap, *trace).loss;
  };
  return FlatGrad{central_difference(loss, work.flat_params(), eps)};
}

Network make_mlp(MapShape input, MapShape hidden, std::size_t classes) {
  std::vector<std::unique_ptr<Layer>> layers;
  layers.push_back(std::make_unique<Dense>(input.size(), hidden));
  layers.push_back(std::make_unique<Relu>());
  layers.push_back(std::make_unique<Dense>(hidden.size(), classes));
  return Network(input, std::move(layers), {0, 2});
}

Network make_tiny_resnet(MapShape input, std::size_t channels, std::size_t classes) {
  std::vector<std::unique_ptr<Layer>> layers;
  layers.push_back(std::make_unique<Conv2d>(input.c, channels));
  layers.push_back(std::make_unique<Relu>());
  layers.push_back(std::make_unique<ResidualBlock>(channels));
  layers.push_back(std::make_unique<MaxPool2>());
  layers.push_back(std::make_unique<ResidualBlock>(channels));
  layers.push_back(std::make_unique<GlobalAvgPool>());
  layers.push_back(std::make_unique<Dense>(channels, classes));
  return Network(input, std::move(layers), {0, 2, 3, 5});
}

}  // namespace adalase
