#pragma once

// Acceptance ratios over augmentation positions and their gradient-based
// update.
//
// One update moves the selected entry by eta * <dL_ref/dtheta, dL_train,l/dtheta>,
// clamps it to [d, 1-d], and renormalizes. Renormalization can push other
// entries across the bounds; those are pinned at the bound they crossed and
// the free entries are rescaled again until all bounds hold. When
// renormalization does not cross a bound this is exactly clamp-then-divide.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adalase/rng.hpp"

namespace adalase {

enum class DotNormalization { raw, cosine };

struct AdaLaseConfig {
  double eta = 1.0;
  /// Iterations per averaged update; 0 means once per epoch.
  std::size_t avg_window = 0;
  /// Lower limit is d = d_scale / K.
  double d_scale = 0.1;
  DotNormalization dot_normalization = DotNormalization::raw;
  /// Compute the reference gradient but never move the ratios.
  bool freeze = false;

  /// Throws ConfigError with the offending field name.
  void validate() const;
};

class AcceptanceRatios {
 public:
  /// q_i = 1/K, d = d_scale / K. Throws ConfigError for K < 2 or d_scale
  /// outside (0, 1).
  static AcceptanceRatios init(std::size_t positions, double d_scale);

  /// Explicit state, e.g. to resume a run. Throws ValidationError unless the
  /// values lie on the simplex within 1e-9 and inside [lower, 1 - lower].
  static AcceptanceRatios from_values(std::vector<double> q, double lower);

  std::size_t size() const { return q_.size(); }
  std::span<const double> values() const { return q_; }
  double operator[](std::size_t i) const { return q_[i]; }
  double lower() const { return lower_; }
  double upper() const { return 1.0 - lower_; }

  /// Adds `delta` to each listed entry, clamps the touched entries, and
  /// renormalizes onto the bounded simplex.
  void apply_increments(std::span<const std::pair<std::size_t, double>> increments);

 private:
  AcceptanceRatios(std::vector<double> q, double lower) : q_(std::move(q)), lower_(lower) {}
  void normalize_with_bounds();

  std::vector<double> q_;
  double lower_;
};

/// Categorical draw with the given probabilities.
std::size_t sample_position(std::span<const double> probabilities, Rng& rng);
inline std::size_t sample_position(const AcceptanceRatios& q, Rng& rng) {
  return sample_position(q.values(), rng);
}

/// One ratio update for position `l`. A non-finite `dot` is rejected: the
/// ratios stay unchanged, a warning is logged, and false is returned.
bool adalase_update(AcceptanceRatios& ratios, std::size_t l, double dot, const AdaLaseConfig& cfg);

struct WindowEntry {
  std::size_t position = 0;
  double dot = 0.0;
};

/// Applies the per-position mean dot of `window` in one step. Positions
/// absent from the window are only touched by renormalization. Non-finite
/// entries are dropped. Returns false when nothing was applied.
bool averaged_update(AcceptanceRatios& ratios, std::span<const WindowEntry> window,
                     const AdaLaseConfig& cfg);

enum class ScheduleShape { fixed, uniform, linear_inc, linear_dec, mountain, valley, adaptive };

struct RatioSchedule {
  ScheduleShape shape = ScheduleShape::adaptive;
  /// Position for `fixed`.
  std::size_t fixed_index = 0;

  /// "adaptive", "uniform", "fixed:2", ...
  static RatioSchedule parse(const std::string& text);
  std::string str() const;
};

/// Static selection probabilities of a schedule. `adaptive` starts uniform.
/// Throws RangeError when fixed_index >= K.
std::vector<double> schedule_ratios(const RatioSchedule& schedule, std::size_t positions);

}  // namespace adalase
