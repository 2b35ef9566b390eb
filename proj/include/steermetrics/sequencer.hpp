#pragma once

// Interaction sessionization and duration-stratified baseline sampling.

#include <algorithm>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steermetrics/error.hpp"
#include "steermetrics/numeric.hpp"
#include "steermetrics/random.hpp"
#include "steermetrics/telemetry_model.hpp"

namespace steermetrics {

struct TimeSpan {
  Seconds start = 0.0;
  Seconds end = 0.0;

  Seconds length() const noexcept { return end - start; }
  bool operator==(const TimeSpan&) const = default;
};

/// Groups UI events left to right: an event joins the open sequence iff its
/// gap to the previous event is strictly below t_max. Windows extend the
/// core by t_buffer on each side and are clipped to the drive span.
inline std::vector<Sequence> extract_interaction_sequences(const Drive& drive,
                                                           const PipelineConfig& cfg) {
  std::vector<Sequence> out;
  const auto& events = drive.ui_events;
  std::size_t i = 0;
  while (i < events.size()) {
    std::size_t j = i + 1;
    while (j < events.size() && events[j].time - events[j - 1].time < cfg.t_max) ++j;

    Sequence s;
    s.drive_id = drive.drive_id;
    s.kind = SequenceKind::Interaction;
    s.core_start = events[i].time;
    s.core_end = events[j - 1].time;
    s.events.assign(events.begin() + static_cast<std::ptrdiff_t>(i),
                    events.begin() + static_cast<std::ptrdiff_t>(j));
    s.window_start = s.core_start - cfg.t_buffer;
    s.window_end = s.core_end + cfg.t_buffer;
    if (s.window_start < drive.span_start()) {
      s.window_start = drive.span_start();
      s.clipped = true;
    }
    if (s.window_end > drive.span_end()) {
      s.window_end = drive.span_end();
      s.clipped = true;
    }
    out.push_back(std::move(s));
    i = j;
  }
  return out;
}

/// Drops every sequence whose window touches an ADAS interval (closed bounds).
inline std::vector<Sequence> filter_adas_active(std::vector<Sequence> sequences,
                                                std::span<const AdasInterval> adas) {
  std::erase_if(sequences, [&](const Sequence& s) {
    return std::any_of(adas.begin(), adas.end(), [&](const AdasInterval& iv) {
      return s.window_start <= iv.end && iv.start <= s.window_end;
    });
  });
  return sequences;
}

/// Maximal stretches of the drive free of interaction windows and ADAS.
inline std::vector<TimeSpan> eligible_baseline_spans(const Drive& drive, const PipelineConfig& cfg) {
  std::vector<TimeSpan> blocked;
  for (const auto& s : extract_interaction_sequences(drive, cfg))
    blocked.push_back({s.window_start, s.window_end});
  for (const auto& iv : drive.adas) blocked.push_back({iv.start, iv.end});
  std::sort(blocked.begin(), blocked.end(),
            [](const TimeSpan& a, const TimeSpan& b) { return a.start < b.start; });

  std::vector<TimeSpan> free;
  Seconds cursor = drive.span_start();
  for (const auto& b : blocked) {
    if (b.start > cursor) free.push_back({cursor, std::min(b.start, drive.span_end())});
    cursor = std::max(cursor, b.end);
    if (cursor >= drive.span_end()) break;
  }
  if (cursor < drive.span_end()) free.push_back({cursor, drive.span_end()});
  std::erase_if(free, [](const TimeSpan& s) { return !(s.length() > 0.0); });
  return free;
}

/// Histogram of interaction window durations the baselines must reproduce.
///
/// Edges are the distinct deciles (by default) of the durations. A single
/// distinct duration yields one degenerate bin [d, d].
struct StratificationPlan {
  std::vector<Seconds> duration_bin_edges;
  std::vector<std::size_t> targets;

  std::size_t bin_count() const noexcept { return targets.size(); }

  std::size_t bin_of(Seconds duration) const {
    if (duration_bin_edges.size() < 2) return 0;
    auto it = std::upper_bound(duration_bin_edges.begin(), duration_bin_edges.end(), duration);
    const auto idx = static_cast<std::ptrdiff_t>(it - duration_bin_edges.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
        idx, 0, static_cast<std::ptrdiff_t>(bin_count()) - 1));
  }

  TimeSpan bin_range(std::size_t b) const {
    if (duration_bin_edges.size() < 2) return {duration_bin_edges.front(), duration_bin_edges.front()};
    return {duration_bin_edges[b], duration_bin_edges[b + 1]};
  }
};

inline StratificationPlan make_stratification_plan(std::span<const Sequence> interactions,
                                                   std::size_t bins) {
  StratificationPlan plan;
  if (interactions.empty()) return plan;
  std::vector<double> durations;
  durations.reserve(interactions.size());
  for (const auto& s : interactions) durations.push_back(s.window_duration());
  std::sort(durations.begin(), durations.end());

  bins = std::max<std::size_t>(bins, 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    const double q = numeric::quantile_sorted(
        durations, static_cast<double>(k) / static_cast<double>(bins));
    if (plan.duration_bin_edges.empty() || q > plan.duration_bin_edges.back())
      plan.duration_bin_edges.push_back(q);
  }
  plan.targets.assign(std::max<std::size_t>(plan.duration_bin_edges.size(), 2) - 1, 0);
  for (double d : durations) ++plan.targets[plan.bin_of(d)];
  return plan;
}

struct BinShortfall {
  std::size_t bin = 0;
  TimeSpan range;
  std::size_t target = 0;
  std::size_t achieved = 0;
};

/// Baseline draw. A non-empty `shortfalls` is the InsufficientEligibleData
/// outcome: `sequences` then holds the partial sample.
struct BaselineSample {
  std::vector<Sequence> sequences;
  StratificationPlan plan;
  std::vector<std::size_t> achieved;
  std::vector<BinShortfall> shortfalls;

  bool complete() const noexcept { return shortfalls.empty(); }
};

/// Draws no-interaction snippets whose window-duration histogram matches the
/// interaction sequences bin for bin.
///
/// Bins are filled longest first. Each draw picks a duration uniformly inside
/// the bin (capped by the longest free span), picks a free span with
/// probability proportional to its number of admissible start positions, and
/// carves the snippet out of that span so later draws can never overlap it.
inline BaselineSample sample_baselines(std::span<const Drive> corpus,
                                       std::span<const Sequence> interactions,
                                       const PipelineConfig& cfg) {
  BaselineSample out;
  if (interactions.empty()) return out;
  out.plan = make_stratification_plan(interactions, cfg.duration_bins);
  out.achieved.assign(out.plan.bin_count(), 0);

  struct FreeSpan {
    std::size_t drive;
    TimeSpan span;
  };
  std::vector<FreeSpan> free;
  for (std::size_t d = 0; d < corpus.size(); ++d)
    for (const auto& s : eligible_baseline_spans(corpus[d], cfg)) free.push_back({d, s});

  struct Drawn {
    std::size_t drive;
    TimeSpan span;
  };
  std::vector<Drawn> drawn;
  Rng rng(cfg.rng_seed);
  std::vector<double> weights;

  for (std::size_t b = out.plan.bin_count(); b-- > 0;) {
    const TimeSpan range = out.plan.bin_range(b);
    const std::size_t target = out.plan.targets[b];
    while (out.achieved[b] < target) {
      double longest = 0.0;
      for (const auto& f : free) longest = std::max(longest, f.span.length());
      if (free.empty() || longest < range.start) break;

      const double hi = std::min(range.end, longest);
      const double dur = hi > range.start ? rng.uniform(range.start, hi) : range.start;

      weights.assign(free.size(), 0.0);
      double total = 0.0;
      std::size_t fits = 0;
      for (std::size_t k = 0; k < free.size(); ++k) {
        const double slack = free[k].span.length() - dur;
        if (slack >= 0.0) {
          weights[k] = slack;
          total += slack;
          ++fits;
        }
      }
      if (fits == 0) break;

      std::size_t pick = 0;
      if (total > 0.0) {
        double u = rng.uniform() * total;
        for (pick = 0; pick + 1 < free.size(); ++pick) {
          if (weights[pick] > 0.0 && u < weights[pick]) break;
          u -= weights[pick];
        }
        while (weights[pick] <= 0.0) --pick;  // guard against rounding at the tail
      } else {
        auto nth = static_cast<std::size_t>(rng.uniform() * static_cast<double>(fits));
        for (pick = 0;; ++pick) {
          if (free[pick].span.length() - dur >= 0.0 && nth-- == 0) break;
        }
      }

      const FreeSpan chosen = free[pick];
      const Seconds start = chosen.span.start + rng.uniform() * weights[pick];
      const Seconds end = start + dur;
      drawn.push_back({chosen.drive, {start, end}});
      ++out.achieved[b];

      free.erase(free.begin() + static_cast<std::ptrdiff_t>(pick));
      if (start > chosen.span.start) free.push_back({chosen.drive, {chosen.span.start, start}});
      if (chosen.span.end > end) free.push_back({chosen.drive, {end, chosen.span.end}});
      std::sort(free.begin(), free.end(), [](const FreeSpan& a, const FreeSpan& b) {
        return a.drive != b.drive ? a.drive < b.drive : a.span.start < b.span.start;
      });
    }
    if (out.achieved[b] < target)
      out.shortfalls.push_back({b, range, target, out.achieved[b]});
  }
  std::reverse(out.shortfalls.begin(), out.shortfalls.end());

  std::sort(drawn.begin(), drawn.end(), [](const Drawn& a, const Drawn& b) {
    return a.drive != b.drive ? a.drive < b.drive : a.span.start < b.span.start;
  });
  out.sequences.reserve(drawn.size());
  for (const auto& d : drawn) {
    Sequence s;
    s.drive_id = corpus[d.drive].drive_id;
    s.kind = SequenceKind::Baseline;
    s.window_start = d.span.start;
    s.window_end = d.span.end;
    s.core_start = d.span.start + cfg.t_buffer;
    s.core_end = d.span.end - cfg.t_buffer;
    if (s.core_start > s.core_end) s.core_start = s.core_end = 0.5 * (d.span.start + d.span.end);
    out.sequences.push_back(std::move(s));
  }
  return out;
}

/// One JSON object per line with keys drive_id, kind, core_start, core_end,
/// window_start, window_end, n_events, clipped.
inline void write_sequences_jsonl(std::span<const Sequence> sequences, std::ostream& out) {
  for (const auto& s : sequences) {
    nlohmann::ordered_json j;
    j["drive_id"] = s.drive_id;
    j["kind"] = std::string(to_string(s.kind));
    j["core_start"] = s.core_start;
    j["core_end"] = s.core_end;
    j["window_start"] = s.window_start;
    j["window_end"] = s.window_end;
    j["n_events"] = s.events.size();
    j["clipped"] = s.clipped;
    out << j.dump() << '\n';
  }
}

struct StoredSequence {
  Sequence sequence;  // events are not serialized; reattach from the Drive
  std::size_t n_events = 0;
};

inline std::vector<StoredSequence> read_sequences_jsonl(std::istream& in) {
  std::vector<StoredSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      StoredSequence s;
      s.sequence.drive_id = j.at("drive_id").get<std::string>();
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "interaction") s.sequence.kind = SequenceKind::Interaction;
      else if (kind == "baseline") s.sequence.kind = SequenceKind::Baseline;
      else throw std::invalid_argument("unknown kind " + kind);
      s.sequence.core_start = j.at("core_start").get<double>();
      s.sequence.core_end = j.at("core_end").get<double>();
      s.sequence.window_start = j.at("window_start").get<double>();
      s.sequence.window_end = j.at("window_end").get<double>();
      s.sequence.clipped = j.at("clipped").get<bool>();
      s.n_events = j.at("n_events").get<std::size_t>();
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::UnreadableSource,
                  "sequence line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Restores the UI events of a deserialized sequence from its drive.
inline void attach_events(Sequence& seq, const Drive& drive) {
  seq.events.clear();
  if (seq.kind != SequenceKind::Interaction) return;
  for (const auto& e : drive.ui_events)
    if (e.time >= seq.core_start && e.time <= seq.core_end) seq.events.push_back(e);
}

}  // namespace steermetrics
