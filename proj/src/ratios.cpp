#include "adalase/ratios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adalase/error.hpp"
#include "adalase/log.hpp"

namespace adalase {

void AdaLaseConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("adalase.eta must be > 0", "adalase.eta");
  if (!(d_scale > 0.0 && d_scale < 1.0)) {
    throw ConfigError("adalase.d_scale must be in (0, 1)", "adalase.d_scale");
  }
}

AcceptanceRatios AcceptanceRatios::init(std::size_t positions, double d_scale) {
  if (positions < 2) throw ConfigError("acceptance ratios need K >= 2 positions");
  if (!(d_scale > 0.0 && d_scale < 1.0)) throw ConfigError("d_scale must be in (0, 1)");
  const double k = static_cast<double>(positions);
  return AcceptanceRatios(std::vector<double>(positions, 1.0 / k), d_scale / k);
}

AcceptanceRatios AcceptanceRatios::from_values(std::vector<double> q, double lower) {
  if (q.size() < 2) throw ValidationError("acceptance ratios need K >= 2 positions");
  if (!(lower > 0.0 && lower * static_cast<double>(q.size()) < 1.0)) {
    throw ValidationError("lower limit must satisfy 0 < d < 1/K");
  }
  double sum = 0.0;
  for (double v : q) {
    if (!(v >= lower && v <= 1.0 - lower)) throw ValidationError("ratio outside [d, 1-d]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("ratios do not sum to 1");
  return AcceptanceRatios(std::move(q), lower);
}

void AcceptanceRatios::apply_increments(
    std::span<const std::pair<std::size_t, double>> increments) {
  const double lo = lower(), hi = upper();
  for (const auto& [l, delta] : increments) {
    if (l >= q_.size()) throw RangeError("position " + std::to_string(l) + " out of range");
    q_[l] = std::clamp(q_[l] + delta, lo, hi);
  }
  normalize_with_bounds();
}

void AcceptanceRatios::normalize_with_bounds() {
  const double lo = lower(), hi = upper();
  const double sum = std::accumulate(q_.begin(), q_.end(), 0.0);
  for (double& v : q_) v /= sum;

  auto in_bounds = [&](double v) { return v >= lo && v <= hi; };
  if (std::all_of(q_.begin(), q_.end(), in_bounds)) return;

  // Pin violators at their bound and rescale the free entries to absorb the
  // difference; repeat until no free entry crosses a bound.
  std::vector<bool> pinned(q_.size(), false);
  for (std::size_t round = 0; round <= q_.size(); ++round) {
    bool any_new = false;
    for (std::size_t i = 0; i < q_.size(); ++i) {
      if (pinned[i]) continue;
      if (q_[i] < lo) {
        q_[i] = lo;
        pinned[i] = any_new = true;
      } else if (q_[i] > hi) {
        q_[i] = hi;
        pinned[i] = any_new = true;
      }
    }
    if (!any_new) break;
    double pinned_mass = 0.0, free_mass = 0.0;
    for (std::size_t i = 0; i < q_.size(); ++i) (pinned[i] ? pinned_mass : free_mass) += q_[i];
    if (free_mass <= 0.0) break;
    const double scale = (1.0 - pinned_mass) / free_mass;
    for (std::size_t i = 0; i < q_.size(); ++i) {
      if (!pinned[i]) q_[i] *= scale;
    }
  }
  // Absorb last-ulp rounding.
  for (double& v : q_) v = std::clamp(v, lo, hi);
}

std::size_t sample_position(std::span<const double> probabilities, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] <= 0.0) continue;
    cum += probabilities[i];
    last_positive = i;
    if (u < cum) return i;
  }
  return last_positive;
}

bool adalase_update(AcceptanceRatios& ratios, std::size_t l, double dot, const AdaLaseConfig& cfg) {
  if (l >= ratios.size()) throw RangeError("position " + std::to_string(l) + " out of range");
  if (!std::isfinite(dot)) {
    warn("rejected ratio update for P" + std::to_string(l) + " with non-finite dot " +
         std::to_string(dot));
    return false;
  }
  const std::pair<std::size_t, double> inc{l, cfg.eta * dot};
  ratios.apply_increments(std::span(&inc, 1));
  return true;
}

bool averaged_update(AcceptanceRatios& ratios, std::span<const WindowEntry> window,
                     const AdaLaseConfig& cfg) {
  std::vector<double> sum(ratios.size(), 0.0);
  std::vector<std::size_t> count(ratios.size(), 0);
  for (const auto& e : window) {
    if (e.position >= ratios.size()) {
      throw RangeError("position " + std::to_string(e.position) + " out of range");
    }
    if (!std::isfinite(e.dot)) {
      warn("dropped non-finite dot for P" + std::to_string(e.position));
      continue;
    }
    sum[e.position] += e.dot;
    ++count[e.position];
  }
  std::vector<std::pair<std::size_t, double>> inc;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (count[i] == 0) continue;
    inc.emplace_back(i, cfg.eta * (sum[i] / static_cast<double>(count[i])));
  }
  if (inc.empty()) return false;
  ratios.apply_increments(inc);
  return true;
}

RatioSchedule RatioSchedule::parse(const std::string& text) {
  static const std::pair<const char*, ScheduleShape> kNames[] = {
      {"uniform", ScheduleShape::uniform},       {"linear_inc", ScheduleShape::linear_inc},
      {"linear_dec", ScheduleShape::linear_dec}, {"mountain", ScheduleShape::mountain},
      {"valley", ScheduleShape::valley},         {"adaptive", ScheduleShape::adaptive},
  };
  for (const auto& [name, shape] : kNames) {
    if (text == name) return {shape, 0};
  }
  if (text.rfind("fixed:", 0) == 0) {
    const std::string idx = text.substr(6);
    if (!idx.empty() && std::all_of(idx.begin(), idx.end(), ::isdigit)) {
      return {ScheduleShape::fixed, static_cast<std::size_t>(std::stoul(idx))};
    }
  }
  throw ConfigError("unknown schedule '" + text +
                    "' (expected adaptive, uniform, fixed:N, linear_inc, linear_dec, mountain, "
                    "valley)");
}

std::string RatioSchedule::str() const {
  switch (shape) {
    case ScheduleShape::fixed: return "fixed:" + std::to_string(fixed_index);
    case ScheduleShape::uniform: return "uniform";
    case ScheduleShape::linear_inc: return "linear_inc";
    case ScheduleShape::linear_dec: return "linear_dec";
    case ScheduleShape::mountain: return "mountain";
    case ScheduleShape::valley: return "valley";
    case ScheduleShape::adaptive: return "adaptive";
  }
  return "adaptive";
}

std::vector<double> schedule_ratios(const RatioSchedule& schedule, std::size_t positions) {
  if (positions == 0) throw RangeError("schedule needs at least one position");
  std::vector<double> w(positions, 1.0);
  const std::size_t k = positions;
  switch (schedule.shape) {
    case ScheduleShape::uniform:
    case ScheduleShape::adaptive:
      break;
    case ScheduleShape::fixed:
      if (schedule.fixed_index >= k) {
        throw RangeError("fixed schedule index " + std::to_string(schedule.fixed_index) +
                         " >= K=" + std::to_string(k));
      }
      std::fill(w.begin(), w.end(), 0.0);
      w[schedule.fixed_index] = 1.0;
      return w;
    case ScheduleShape::linear_inc:
      for (std::size_t j = 0; j < k; ++j) w[j] = static_cast<double>(j + 1);
      break;
    case ScheduleShape::linear_dec:
      for (std::size_t j = 0; j < k; ++j) w[j] = static_cast<double>(k - j);
      break;
    // "Mountain" weights the positions next to the input and the output most;
    // "valley" weights them least.
    case ScheduleShape::mountain:
      for (std::size_t j = 0; j < k; ++j) w[j] = 1.0 / static_cast<double>(std::min(j + 1, k - j));
      break;
    case ScheduleShape::valley:
      for (std::size_t j = 0; j < k; ++j) w[j] = static_cast<double>(std::min(j + 1, k - j));
      break;
  }
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= s;
  return w;
}

}  // namespace adalase
