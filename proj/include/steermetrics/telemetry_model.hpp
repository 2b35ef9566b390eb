#pragma once

// Domain types shared by every pipeline stage. Nothing in here performs I/O.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steermetrics/error.hpp"

namespace steermetrics {

using Seconds = double;

/// Uniformly sampled signal: sample i sits at start_time + i / sample_rate.
///
/// Timestamps are always derived by index math, never by accumulation, so a
/// trace written out and read back lands on bit-identical grid times.
struct UniformTrace {
  Seconds start_time = 0.0;
  double sample_rate = 5.0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  Seconds time_at(std::size_t i) const noexcept {
    return start_time + static_cast<double>(i) / sample_rate;
  }
  Seconds end_time() const noexcept {
    return values.empty() ? start_time : time_at(values.size() - 1);
  }
  Seconds period() const noexcept { return 1.0 / sample_rate; }

  bool operator==(const UniformTrace&) const = default;
};

/// Steering wheel angle in degrees. Sign convention is whatever the vehicle
/// reports; every metric downstream is sign-symmetric.
struct SteeringTrace : UniformTrace {};

/// Vehicle speed in km/h.
struct SpeedTrace : UniformTrace {};

enum class Gesture { Tap, Drag, Swipe, Other };

constexpr std::string_view to_string(Gesture g) noexcept {
  switch (g) {
    case Gesture::Tap: return "tap";
    case Gesture::Drag: return "drag";
    case Gesture::Swipe: return "swipe";
    case Gesture::Other: return "other";
  }
  return "other";
}

inline std::optional<Gesture> parse_gesture(std::string_view s) noexcept {
  if (s == "tap") return Gesture::Tap;
  if (s == "drag") return Gesture::Drag;
  if (s == "swipe") return Gesture::Swipe;
  if (s == "other") return Gesture::Other;
  return std::nullopt;
}

struct UIEvent {
  Seconds time = 0.0;
  std::string element_id;
  Gesture gesture = Gesture::Tap;

  bool operator==(const UIEvent&) const = default;
};

enum class AdasFeature { CruiseControl, SteeringAssist };

constexpr std::string_view to_string(AdasFeature f) noexcept {
  return f == AdasFeature::CruiseControl ? "cruise_control" : "steering_assist";
}

inline std::optional<AdasFeature> parse_adas_feature(std::string_view s) noexcept {
  if (s == "cruise_control") return AdasFeature::CruiseControl;
  if (s == "steering_assist") return AdasFeature::SteeringAssist;
  return std::nullopt;
}

/// Closed interval [start, end] during which an assistance feature was on.
struct AdasInterval {
  Seconds start = 0.0;
  Seconds end = 0.0;
  AdasFeature feature = AdasFeature::CruiseControl;

  bool operator==(const AdasInterval&) const = default;
};

struct Drive {
  std::string drive_id;
  SteeringTrace steering;
  SpeedTrace speed;
  std::vector<UIEvent> ui_events;
  std::vector<AdasInterval> adas;

  Seconds span_start() const noexcept { return steering.start_time; }
  Seconds span_end() const noexcept { return steering.end_time(); }

  bool operator==(const Drive&) const = default;
};

enum class SequenceKind { Interaction, Baseline };

constexpr std::string_view to_string(SequenceKind k) noexcept {
  return k == SequenceKind::Interaction ? "interaction" : "baseline";
}

/// A time window of one drive. `core_*` bounds the interactions themselves,
/// `window_*` adds the buffer on each side and is what the metrics see.
struct Sequence {
  std::string drive_id;
  SequenceKind kind = SequenceKind::Interaction;
  Seconds core_start = 0.0;
  Seconds core_end = 0.0;
  Seconds window_start = 0.0;
  Seconds window_end = 0.0;
  std::vector<UIEvent> events;
  bool clipped = false;

  Seconds window_duration() const noexcept { return window_end - window_start; }
  Seconds core_duration() const noexcept { return core_end - core_start; }

  bool operator==(const Sequence&) const = default;
};

/// Residual predictor used by the entropy metric.
///   Quadratic: exact three-point polynomial extrapolation, 3x[n-1] - 3x[n-2] + x[n-3].
///   Nakayama:  the half-weighted second difference of the original steering
///              entropy formulation.
enum class Predictor { Quadratic, Nakayama };

struct PipelineConfig {
  Seconds t_max = 10.0;
  Seconds t_buffer = 2.0;
  double alpha_percentile = 0.90;
  std::vector<double> swrr_gaps{1.0, 2.0, 5.0};
  double lowpass_cutoff = 0.6;
  double curvature_threshold = 10.0;
  double curvature_fraction = 0.2;
  std::vector<double> speed_bucket_edges{0.0, 30.0, 60.0, 90.0, 120.0,
                                         std::numeric_limits<double>::infinity()};
  std::uint64_t rng_seed = 0;

  // Grid and ingestion knobs.
  double sample_rate = 5.0;
  Seconds max_gap = 1.0;
  std::size_t duration_bins = 10;
  Predictor predictor = Predictor::Quadratic;

  /// Throws Error{InvalidConfig} naming the first offending field.
  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (!(t_max > 0.0)) fail("t_max must be > 0");
    if (!(t_buffer >= 0.0)) fail("t_buffer must be >= 0");
    if (!(alpha_percentile > 0.0 && alpha_percentile < 1.0))
      fail("alpha_percentile must lie in (0, 1)");
    if (swrr_gaps.empty()) fail("swrr_gaps must not be empty");
    for (std::size_t i = 0; i < swrr_gaps.size(); ++i) {
      if (!(swrr_gaps[i] > 0.0)) fail("swrr_gaps must be positive");
      if (i > 0 && !(swrr_gaps[i] > swrr_gaps[i - 1])) fail("swrr_gaps must be ascending");
    }
    if (!(sample_rate > 0.0)) fail("sample_rate must be > 0");
    if (!(lowpass_cutoff > 0.0 && lowpass_cutoff < sample_rate / 2.0))
      fail("lowpass_cutoff must lie in (0, sample_rate / 2)");
    if (!(curvature_fraction >= 0.0 && curvature_fraction <= 1.0))
      fail("curvature_fraction must lie in [0, 1]");
    if (!(curvature_threshold >= 0.0)) fail("curvature_threshold must be >= 0");
    if (speed_bucket_edges.size() < 2) fail("speed_bucket_edges needs at least two edges");
    for (std::size_t i = 1; i < speed_bucket_edges.size(); ++i)
      if (!(speed_bucket_edges[i] > speed_bucket_edges[i - 1]))
        fail("speed_bucket_edges must be strictly ascending");
    if (!(max_gap > 0.0)) fail("max_gap must be > 0");
    if (duration_bins == 0) fail("duration_bins must be >= 1");
  }
};

enum class Curvature { Straight, Curved };

constexpr std::string_view to_string(Curvature c) noexcept {
  return c == Curvature::Straight ? "straight" : "curved";
}

struct SequenceMetrics {
  Sequence sequence;
  double steering_entropy = 0.0;
  std::map<double, double> swrr;  // gap in degrees -> reversals per minute
  double mean_speed = 0.0;
  Seconds duration = 0.0;
  Curvature curvature = Curvature::Straight;
  std::size_t n_interactions = 0;
  double interaction_density = 0.0;
};

struct AlphaEstimate {
  double alpha = 0.0;
  std::size_t n_baseline_sequences = 0;
  double percentile_used = 0.0;
};

/// One broken invariant. `index` is a sample or event index when one applies.
struct Violation {
  std::string field;
  std::string rule;
  std::optional<std::size_t> index;
  std::optional<Seconds> time;

  bool operator==(const Violation&) const = default;
};

namespace detail {

inline void check_trace(const UniformTrace& trace, const std::string& name, bool non_negative,
                        std::vector<Violation>& out) {
  if (!(trace.sample_rate > 0.0) || !std::isfinite(trace.sample_rate)) {
    out.push_back({name + ".sample_rate", "sample_rate must be finite and > 0", {}, {}});
    return;
  }
  if (!std::isfinite(trace.start_time))
    out.push_back({name + ".start_time", "start_time must be finite", {}, {}});
  if (trace.values.empty()) {
    out.push_back({name + ".values", "values must be non-empty", {}, {}});
    return;
  }
  for (std::size_t i = 0; i < trace.values.size(); ++i) {
    const double v = trace.values[i];
    if (!std::isfinite(v)) {
      out.push_back({name + ".values", "values must be finite", i, trace.time_at(i)});
      return;
    }
    if (non_negative && v < 0.0) {
      out.push_back({name + ".values", "values must be >= 0", i, trace.time_at(i)});
      return;
    }
  }
}

}  // namespace detail

/// Checks every Drive invariant and reports the first offender per rule.
inline std::vector<Violation> validate_drive(const Drive& drive) {
  std::vector<Violation> out;
  if (drive.drive_id.empty()) out.push_back({"drive_id", "drive_id must be non-empty", {}, {}});

  detail::check_trace(drive.steering, "steering", false, out);
  detail::check_trace(drive.speed, "speed", true, out);

  const bool have_span = !drive.steering.empty() && drive.steering.sample_rate > 0.0;
  if (have_span && !drive.speed.empty() && drive.speed.sample_rate > 0.0) {
    const bool overlap = drive.speed.start_time <= drive.steering.end_time() &&
                         drive.steering.start_time <= drive.speed.end_time();
    if (!overlap)
      out.push_back({"speed", "speed and steering must cover a common span", {}, {}});
  }

  for (std::size_t i = 0; i < drive.ui_events.size(); ++i) {
    if (drive.ui_events[i].element_id.empty()) {
      out.push_back({"ui_events.element_id", "element_id must be non-empty", i,
                     drive.ui_events[i].time});
      break;
    }
  }
  for (std::size_t i = 1; i < drive.ui_events.size(); ++i) {
    if (drive.ui_events[i].time < drive.ui_events[i - 1].time) {
      out.push_back({"ui_events", "ui_events must be sorted by time", i, drive.ui_events[i].time});
      break;
    }
  }
  if (have_span) {
    for (std::size_t i = 0; i < drive.ui_events.size(); ++i) {
      const Seconds t = drive.ui_events[i].time;
      if (!(t >= drive.span_start() && t <= drive.span_end())) {
        out.push_back({"ui_events.time", "event time must lie within the drive span", i, t});
        break;
      }
    }
  }

  for (std::size_t i = 0; i < drive.adas.size(); ++i) {
    if (!(drive.adas[i].start < drive.adas[i].end)) {
      out.push_back({"adas", "interval start must precede end", i, drive.adas[i].start});
      break;
    }
  }
  for (auto feature : {AdasFeature::CruiseControl, AdasFeature::SteeringAssist}) {
    std::vector<std::pair<AdasInterval, std::size_t>> same;
    for (std::size_t i = 0; i < drive.adas.size(); ++i)
      if (drive.adas[i].feature == feature) same.emplace_back(drive.adas[i], i);
    std::sort(same.begin(), same.end(),
              [](const auto& a, const auto& b) { return a.first.start < b.first.start; });
    for (std::size_t k = 1; k < same.size(); ++k) {
      if (same[k].first.start <= same[k - 1].first.end) {
        out.push_back({"adas", "intervals of one feature must not overlap", same[k].second,
                       same[k].first.start});
        break;
      }
    }
  }
  return out;
}

}  // namespace steermetrics
