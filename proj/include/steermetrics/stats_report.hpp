#pragma once

// Curvature split, speed buckets, effect sizes and the comparison report.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steermetrics/config.hpp"
#include "steermetrics/error.hpp"
#include "steermetrics/filter.hpp"
#include "steermetrics/format.hpp"
#include "steermetrics/numeric.hpp"
#include "steermetrics/telemetry_model.hpp"

namespace steermetrics {

/// Curved iff more than `curvature_fraction` of the low-passed window exceeds
/// `curvature_threshold` degrees in magnitude.
inline Curvature classify_curvature(std::span<const double> theta_window, const PipelineConfig& cfg) {
  if (theta_window.empty()) return Curvature::Straight;
  const auto filtered = lowpass(theta_window, cfg.sample_rate, cfg.lowpass_cutoff);
  const auto above = std::count_if(filtered.begin(), filtered.end(), [&](double v) {
    return std::abs(v) > cfg.curvature_threshold;
  });
  const double fraction = static_cast<double>(above) / static_cast<double>(filtered.size());
  return fraction > cfg.curvature_fraction ? Curvature::Curved : Curvature::Straight;
}

/// Standardized mean difference (mean(a) - mean(b)) / pooled SD, no small-sample correction.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorCode::ZeroVariance, "cohens_d needs at least two values per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled = std::sqrt(((na - 1.0) * numeric::sample_variance(a) +
                                   (nb - 1.0) * numeric::sample_variance(b)) /
                                  (na + nb - 2.0));
  if (!(pooled > 0.0)) throw Error(ErrorCode::ZeroVariance, "pooled standard deviation is zero");
  return (numeric::mean(a) - numeric::mean(b)) / pooled;
}

inline std::string bucket_label(double lo, double hi) {
  return "[" + fmt::number(lo) + "," + fmt::number(hi) + ")";
}

inline std::vector<std::string> bucket_labels(std::span<const double> edges) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) out.push_back(bucket_label(edges[i], edges[i + 1]));
  return out;
}

/// Bucket index of a speed: half-open [e_i, e_{i+1}); anything at or beyond
/// the last finite edge lands in the top bucket, anything below the first in
/// the bottom one.
inline std::size_t speed_bucket(double speed, std::span<const double> edges) {
  const std::size_t buckets = edges.size() - 1;
  auto it = std::upper_bound(edges.begin(), edges.end(), speed);
  if (it == edges.begin()) return 0;
  return std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1, buckets - 1);
}

/// Indices of `metrics` per speed bucket.
inline std::vector<std::vector<std::size_t>> bucket_by_speed(std::span<const SequenceMetrics> metrics,
                                                             std::span<const double> edges) {
  std::vector<std::vector<std::size_t>> out(edges.size() >= 2 ? edges.size() - 1 : 0);
  if (out.empty()) return out;
  for (std::size_t i = 0; i < metrics.size(); ++i)
    out[speed_bucket(metrics[i].mean_speed, edges)].push_back(i);
  return out;
}

inline std::string swrr_metric_name(double gap) { return "swrr_" + fmt::number(gap); }

inline std::vector<std::string> metric_names(const PipelineConfig& cfg) {
  std::vector<std::string> names{"se"};
  for (double g : cfg.swrr_gaps) names.push_back(swrr_metric_name(g));
  return names;
}

inline double metric_value(const SequenceMetrics& m, const std::string& name) {
  if (name == "se") return m.steering_entropy;
  for (const auto& [gap, rate] : m.swrr)
    if (name == swrr_metric_name(gap)) return rate;
  throw Error(ErrorCode::InvalidConfig, "unknown metric '" + name + "'");
}

struct GroupStats {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> sd;
};

inline constexpr const char* kAllBuckets = "all";

struct ReportCell {
  std::string metric;
  Curvature condition = Curvature::Straight;
  std::string bucket;  // kAllBuckets or a bucket label
  GroupStats interaction;
  GroupStats baseline;
  std::optional<double> d;  // interaction minus baseline
};

struct EffectSize {
  std::string metric;
  Curvature condition = Curvature::Straight;
  double d = 0.0;
  std::size_t n_interaction = 0;
  std::size_t n_baseline = 0;
};

struct ComparisonReport {
  PipelineConfig config;
  std::vector<std::string> metrics;
  std::vector<std::string> buckets;
  std::vector<ReportCell> cells;
  std::vector<EffectSize> effect_sizes;

  const ReportCell* find(const std::string& metric, Curvature condition,
                         const std::string& bucket = kAllBuckets) const {
    for (const auto& c : cells)
      if (c.metric == metric && c.condition == condition && c.bucket == bucket) return &c;
    return nullptr;
  }

  std::optional<double> effect(const std::string& metric, Curvature condition) const {
    for (const auto& e : effect_sizes)
      if (e.metric == metric && e.condition == condition) return e.d;
    return std::nullopt;
  }
};

/// Group statistics and Cohen's d for every metric x curvature x (all + each
/// speed bucket). Cells with fewer than two sequences in either group keep
/// their counts but carry no statistics.
inline ComparisonReport build_report(std::span<const SequenceMetrics> interaction,
                                     std::span<const SequenceMetrics> baseline,
                                     const PipelineConfig& cfg) {
  ComparisonReport report;
  report.config = cfg;
  report.metrics = metric_names(cfg);
  report.buckets = bucket_labels(cfg.speed_bucket_edges);

  const auto bucket_i = bucket_by_speed(interaction, cfg.speed_bucket_edges);
  const auto bucket_b = bucket_by_speed(baseline, cfg.speed_bucket_edges);
  std::vector<std::size_t> which_i(interaction.size()), which_b(baseline.size());
  for (std::size_t k = 0; k < bucket_i.size(); ++k)
    for (auto idx : bucket_i[k]) which_i[idx] = k;
  for (std::size_t k = 0; k < bucket_b.size(); ++k)
    for (auto idx : bucket_b[k]) which_b[idx] = k;

  auto collect = [&](std::span<const SequenceMetrics> set, std::span<const std::size_t> which,
                     const std::string& metric, Curvature cond, std::optional<std::size_t> bucket) {
    std::vector<double> v;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set[i].curvature != cond) continue;
      if (bucket && which[i] != *bucket) continue;
      v.push_back(metric_value(set[i], metric));
    }
    return v;
  };
  auto stats = [](const std::vector<double>& v, bool computable) {
    GroupStats g;
    g.n = v.size();
    if (computable) {
      g.mean = numeric::mean(v);
      g.sd = std::sqrt(numeric::sample_variance(v));
    }
    return g;
  };

  for (const auto& metric : report.metrics) {
    for (auto cond : {Curvature::Straight, Curvature::Curved}) {
      for (std::size_t k = 0; k <= report.buckets.size(); ++k) {
        const std::optional<std::size_t> bucket =
            k == 0 ? std::nullopt : std::optional<std::size_t>(k - 1);
        const auto a = collect(interaction, which_i, metric, cond, bucket);
        const auto b = collect(baseline, which_b, metric, cond, bucket);
        const bool computable = a.size() >= 2 && b.size() >= 2;

        ReportCell cell;
        cell.metric = metric;
        cell.condition = cond;
        cell.bucket = bucket ? report.buckets[*bucket] : kAllBuckets;
        cell.interaction = stats(a, computable);
        cell.baseline = stats(b, computable);
        if (computable) {
          try {
            cell.d = cohens_d(a, b);
          } catch (const Error&) {
            // zero pooled variance: statistics stay, d stays empty
          }
        }
        if (!bucket && cell.d && std::isfinite(*cell.d))
          report.effect_sizes.push_back({metric, cond, *cell.d, a.size(), b.size()});
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

namespace detail {

inline std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string q = "\"";
  for (char ch : v) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

inline std::string opt_number(const std::optional<double>& v) { return v ? fmt::number(*v) : ""; }

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json group_json(const GroupStats& g) {
  nlohmann::ordered_json j;
  j["n"] = g.n;
  j["mean"] = opt_json(g.mean);
  j["sd"] = opt_json(g.sd);
  return j;
}

}  // namespace detail

/// One row per metric / condition / bucket / group.
inline void write_report_csv(const ComparisonReport& r, std::ostream& out) {
  out << "metric,condition,bucket,group,n,mean,sd,d\n";
  for (const auto& c : r.cells) {
    for (int g = 0; g < 2; ++g) {
      const auto& s = g == 0 ? c.interaction : c.baseline;
      out << c.metric << ',' << to_string(c.condition) << ',' << detail::csv_field(c.bucket) << ','
          << (g == 0 ? "interaction" : "baseline") << ',' << s.n << ','
          << detail::opt_number(s.mean) << ',' << detail::opt_number(s.sd) << ','
          << detail::opt_number(c.d) << '\n';
    }
  }
}

/// Nested form: metrics -> condition -> bucket -> {interaction, baseline, d}.
inline nlohmann::ordered_json report_to_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["config"] = to_json(r.config);
  j["buckets"] = r.buckets;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& c : r.cells) {
    auto& cell = metrics[c.metric][std::string(to_string(c.condition))][c.bucket];
    cell["interaction"] = detail::group_json(c.interaction);
    cell["baseline"] = detail::group_json(c.baseline);
    cell["d"] = detail::opt_json(c.d);
  }
  j["metrics"] = metrics;
  auto effects = nlohmann::ordered_json::array();
  for (const auto& e : r.effect_sizes) {
    nlohmann::ordered_json x;
    x["metric"] = e.metric;
    x["condition"] = std::string(to_string(e.condition));
    x["d"] = e.d;
    x["n_interaction"] = e.n_interaction;
    x["n_baseline"] = e.n_baseline;
    effects.push_back(x);
  }
  j["effect_sizes"] = effects;
  return j;
}

/// Paired per-bucket series of one metric for one condition, ready to plot.
inline void write_plot_csv(const ComparisonReport& r, const std::string& metric, Curvature condition,
                           std::ostream& out) {
  out << "bucket,interaction_mean,interaction_sd,interaction_n,baseline_mean,baseline_sd,baseline_n\n";
  for (const auto& label : r.buckets) {
    const ReportCell* c = r.find(metric, condition, label);
    if (!c) continue;
    out << detail::csv_field(label) << ',' << detail::opt_number(c->interaction.mean) << ','
        << detail::opt_number(c->interaction.sd) << ',' << c->interaction.n << ','
        << detail::opt_number(c->baseline.mean) << ',' << detail::opt_number(c->baseline.sd) << ','
        << c->baseline.n << '\n';
  }
}

}  // namespace steermetrics
