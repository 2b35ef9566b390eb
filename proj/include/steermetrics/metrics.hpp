#pragma once

// Steering Entropy and Steering Wheel Reversal Rate.
//
// Entropy: each sample is predicted from the three before it; the prediction
// errors are binned on a scale set by alpha (a high percentile of baseline
// error magnitude) and the Shannon entropy of the bin proportions is taken
// with log base 9, so H lies in [0, 1]. The two outermost bins are unbounded
// and swallow outliers.
//
// Reversal rate: the low-passed angle is reduced to its stationary points and
// a reversal is counted whenever the angle swings back by at least `gap`
// degrees from the last counted turning point.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "steermetrics/error.hpp"
#include "steermetrics/filter.hpp"
#include "steermetrics/numeric.hpp"
#include "steermetrics/stats_report.hpp"
#include "steermetrics/telemetry_model.hpp"

namespace steermetrics {

/// Samples with start <= t_i <= end, by index arithmetic on the grid.
inline std::span<const double> window_samples(const UniformTrace& trace, Seconds start, Seconds end) {
  constexpr double eps = 1e-9;
  if (trace.empty() || !(start <= end))
    throw Error(ErrorCode::EmptyWindow, "window [" + std::to_string(start) + ", " +
                                            std::to_string(end) + "] is empty");
  const double first = std::ceil((start - trace.start_time) * trace.sample_rate - eps);
  const double last = std::floor((end - trace.start_time) * trace.sample_rate + eps);
  const double lo = std::max(first, 0.0);
  const double hi = std::min(last, static_cast<double>(trace.size() - 1));
  if (lo > hi)
    throw Error(ErrorCode::EmptyWindow, "no grid sample inside [" + std::to_string(start) + ", " +
                                            std::to_string(end) + "]");
  const auto i0 = static_cast<std::size_t>(lo);
  const auto i1 = static_cast<std::size_t>(hi);
  return std::span<const double>(trace.values).subspan(i0, i1 - i0 + 1);
}

struct ResidualSeries {
  std::vector<double> values;
  std::string source;  // identifies the sequence the residuals came from
};

/// Prediction error e_n = theta_n - predicted_n for n >= 3.
inline ResidualSeries taylor_residuals(std::span<const double> theta,
                                       Predictor predictor = Predictor::Quadratic) {
  if (theta.size() < 4)
    throw Error(ErrorCode::TooShort, "need at least 4 samples, got " + std::to_string(theta.size()));
  // Second-difference weight: 1 makes the predictor exact on quadratics.
  const double curvature_weight = predictor == Predictor::Quadratic ? 1.0 : 0.5;
  ResidualSeries out;
  out.values.reserve(theta.size() - 3);
  for (std::size_t n = 3; n < theta.size(); ++n) {
    const double d1 = theta[n - 1] - theta[n - 2];
    const double d2 = d1 - (theta[n - 2] - theta[n - 3]);
    const double predicted = theta[n - 1] + d1 + curvature_weight * d2;
    out.values.push_back(theta[n] - predicted);
  }
  return out;
}

/// Mean over baseline sequences of the per-sequence percentile of |e|.
/// Empty series are skipped.
inline AlphaEstimate estimate_alpha(std::span<const ResidualSeries> baseline, double percentile) {
  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> mags;
  for (const auto& series : baseline) {
    if (series.values.empty()) continue;
    mags.resize(series.values.size());
    std::transform(series.values.begin(), series.values.end(), mags.begin(),
                   [](double e) { return std::abs(e); });
    std::sort(mags.begin(), mags.end());
    sum += numeric::quantile_sorted(mags, percentile);
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::DegenerateBaseline, "no non-empty baseline residual series");
  AlphaEstimate a;
  a.alpha = sum / static_cast<double>(used);
  a.n_baseline_sequences = used;
  a.percentile_used = percentile;
  if (!(a.alpha > 0.0))
    throw Error(ErrorCode::DegenerateBaseline, "alpha is zero: every baseline residual is zero");
  return a;
}

inline constexpr std::size_t kEntropyBins = 9;
/// Bin boundaries in units of alpha, outer bins open-ended.
inline constexpr std::array<double, 4> kEntropyEdges{0.5, 1.0, 2.5, 5.0};

struct BinDistribution {
  std::array<double, kEntropyBins> p{};
};

struct EntropyResult {
  double entropy = 0.0;
  BinDistribution bins;
};

/// Bin index 0..8 of one residual; bin 4 is the central |e| < alpha/2 bin.
/// Membership depends only on |e| and its sign, so flipping every sign
/// mirrors the histogram exactly.
inline std::size_t entropy_bin(double e, double alpha) {
  const double m = std::abs(e);
  std::size_t level = 0;
  while (level < kEntropyEdges.size() && m >= kEntropyEdges[level] * alpha) ++level;
  return e < 0.0 ? 4 - level : 4 + level;
}

inline EntropyResult steering_entropy(const ResidualSeries& residuals, const AlphaEstimate& alpha) {
  if (!(alpha.alpha > 0.0) || !std::isfinite(alpha.alpha))
    throw Error(ErrorCode::InvalidAlpha, "alpha must be finite and > 0");
  if (residuals.values.empty()) throw Error(ErrorCode::TooShort, "no residuals");

  std::array<std::size_t, kEntropyBins> counts{};
  for (double e : residuals.values) ++counts[entropy_bin(e, alpha.alpha)];

  EntropyResult r;
  const double n = static_cast<double>(residuals.values.size());
  const double log9 = std::log(9.0);
  double h = 0.0;
  for (std::size_t i = 0; i < kEntropyBins; ++i) {
    const double p = static_cast<double>(counts[i]) / n;
    r.bins.p[i] = p;
    if (p > 0.0) h -= p * std::log(p) / log9;
  }
  r.entropy = std::clamp(h, 0.0, 1.0);
  return r;
}

/// Turning points of a sampled signal: positions where the sign of the first
/// difference flips. A flat run between a rise and a fall (or vice versa)
/// counts once, at its midpoint. Signal endpoints are never turning points.
inline std::vector<std::size_t> stationary_points(std::span<const double> x) {
  std::vector<std::size_t> out;
  if (x.size() < 3) return out;
  int prev_dir = 0;          // direction of the last non-flat step
  std::size_t flat_from = 0;  // first index of the current plateau
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double d = x[i] - x[i - 1];
    const int dir = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (dir == 0) continue;
    if (prev_dir != 0 && dir != prev_dir) out.push_back((flat_from + (i - 1)) / 2);
    prev_dir = dir;
    flat_from = i;
  }
  return out;
}

/// Number of gap-sized reversals among the turning points of `x`.
inline std::size_t count_reversals(std::span<const double> x, double gap) {
  const auto turns = stationary_points(x);
  if (turns.empty()) return 0;
  std::size_t count = 0;
  int direction = 0;  // direction of the last counted swing
  double anchor = x[turns.front()];
  double lo = anchor, hi = anchor;  // extremes seen before the first count
  for (std::size_t k = 1; k < turns.size(); ++k) {
    const double v = x[turns[k]];
    if (direction == 0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (v - lo >= gap && v == hi) {
        ++count;
        direction = 1;
        anchor = v;
      } else if (hi - v >= gap && v == lo) {
        ++count;
        direction = -1;
        anchor = v;
      }
    } else if (direction > 0) {
      if (v > anchor) anchor = v;
      else if (anchor - v >= gap) {
        ++count;
        direction = -1;
        anchor = v;
      }
    } else {
      if (v < anchor) anchor = v;
      else if (v - anchor >= gap) {
        ++count;
        direction = 1;
        anchor = v;
      }
    }
  }
  return count;
}

/// Reversals per minute of an already filtered window.
inline double swrr(std::span<const double> theta_filtered, double rate, double gap, Seconds duration) {
  (void)rate;
  if (!(duration > 0.0) || !(gap > 0.0)) return 0.0;
  return static_cast<double>(count_reversals(theta_filtered, gap)) / (duration / 60.0);
}

/// Entropy, reversal rates and context statistics of one sequence window.
inline SequenceMetrics compute_sequence_metrics(const Drive& drive, const Sequence& sequence,
                                                const AlphaEstimate& alpha, const PipelineConfig& cfg) {
  std::span<const double> theta;
  try {
    theta = window_samples(drive.steering, sequence.window_start, sequence.window_end);
  } catch (const Error&) {
    throw Error(ErrorCode::WindowTooShort, "sequence window holds no steering samples");
  }
  if (theta.size() < 4)
    throw Error(ErrorCode::WindowTooShort,
                "sequence window holds " + std::to_string(theta.size()) + " steering samples, need 4");

  SequenceMetrics m;
  m.sequence = sequence;
  m.steering_entropy = steering_entropy(taylor_residuals(theta, cfg.predictor), alpha).entropy;

  const auto filtered = lowpass(theta, drive.steering.sample_rate, cfg.lowpass_cutoff);
  m.duration = sequence.window_duration();
  for (double gap : cfg.swrr_gaps)
    m.swrr[gap] = swrr(filtered, drive.steering.sample_rate, gap, m.duration);

  try {
    const auto speed = window_samples(drive.speed, sequence.window_start, sequence.window_end);
    m.mean_speed = numeric::mean(speed);
  } catch (const Error&) {
    m.mean_speed = 0.0;
  }

  m.curvature = classify_curvature(theta, cfg);
  m.n_interactions = sequence.events.size();
  const double floor_period = drive.steering.period();
  m.interaction_density =
      static_cast<double>(m.n_interactions) / std::max(sequence.core_duration(), floor_period);
  return m;
}

}  // namespace steermetrics
