#pragma once

// Seeded synthetic drives with labelled distraction episodes.
//
// Steering = smoothed road angle + correction process + optional sensor noise.
// The correction process holds a target angle that jumps to a fresh
// N(0, sd) draw at exponentially spaced instants and is followed through a
// first-order lag; its SD grows with the road angle (curve tracking). Inside
// a distraction episode the jumps become rarer (interval multiplier) and
// larger (magnitude multiplier), and the driver taps the touchscreen every
// few seconds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "steermetrics/error.hpp"
#include "steermetrics/random.hpp"
#include "steermetrics/telemetry_model.hpp"

namespace steermetrics::synth {

struct RoadSegment {
  Seconds start = 0.0;
  Seconds end = 0.0;
  double angle = 0.0;  // mean steering angle needed to follow the road, degrees
};

struct CorrectionModel {
  Seconds interval_mean = 1.0;
  double magnitude_sd = 1.0;
  Seconds smoothing = 0.3;
  double tracking_gain = 0.05;  // extra correction SD per degree of road angle
};

struct Episode {
  Seconds start = 0.0;
  Seconds end = 0.0;
  double magnitude_multiplier = 3.0;
  double interval_multiplier = 2.0;
};

struct SpeedStep {
  Seconds start = 0.0;
  double kmh = 80.0;
};

struct TapPattern {
  Seconds interval = 2.5;  // must stay below the sessionization gap
  Seconds margin = 2.0;    // first/last tap this far inside the episode
};

struct SynthConfig {
  std::string drive_id = "synth";
  Seconds duration = 600.0;
  double rate = 5.0;
  std::vector<RoadSegment> road;  // uncovered time is straight road
  Seconds road_smoothing = 2.0;
  CorrectionModel correction;
  double noise_sd = 0.2;  // sensor noise, degrees
  std::vector<Episode> episodes;
  std::vector<SpeedStep> speed{{0.0, 80.0}};
  TapPattern taps;
  std::uint64_t rng_seed = 0;

  /// Episodes closer than this (last tap to next first tap) would merge.
  static constexpr Seconds kSessionGap = 10.0;

  void validate() const;
};

struct EpisodeTruth {
  Episode episode;
  std::vector<Seconds> tap_times;
};

struct GroundTruth {
  std::string drive_id;
  std::vector<EpisodeTruth> episodes;
};

namespace detail {

inline std::vector<Seconds> tap_times(const Episode& ep, const TapPattern& taps) {
  std::vector<Seconds> out;
  const Seconds first = ep.start + taps.margin;
  const Seconds last = ep.end - taps.margin;
  if (first > last) {
    out.push_back(0.5 * (ep.start + ep.end));
    return out;
  }
  const auto n = static_cast<std::size_t>(std::floor((last - first) / taps.interval + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) out.push_back(first + static_cast<double>(k) * taps.interval);
  if (last - out.back() > 1e-9) out.push_back(last);
  return out;
}

[[noreturn]] inline void invalid(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

}  // namespace detail

inline void SynthConfig::validate() const {
  using detail::invalid;
  if (!(duration > 0.0)) invalid("duration must be > 0");
  if (!(rate > 0.0)) invalid("rate must be > 0");
  if (!(road_smoothing >= 0.0)) invalid("road_smoothing must be >= 0");
  if (!(correction.interval_mean > 0.0)) invalid("correction.interval_mean must be > 0");
  if (!(correction.magnitude_sd >= 0.0)) invalid("correction.magnitude_sd must be >= 0");
  if (!(correction.smoothing >= 0.0)) invalid("correction.smoothing must be >= 0");
  if (!(correction.tracking_gain >= 0.0)) invalid("correction.tracking_gain must be >= 0");
  if (!(noise_sd >= 0.0)) invalid("noise_sd must be >= 0");
  if (!(taps.interval > 0.0 && taps.interval < kSessionGap))
    invalid("taps.interval must lie in (0, 10) seconds");
  if (!(taps.margin >= 0.0)) invalid("taps.margin must be >= 0");
  for (const auto& r : road)
    if (!(r.start < r.end)) invalid("road segment start must precede end");
  if (speed.empty()) invalid("speed profile must not be empty");
  for (std::size_t i = 0; i < speed.size(); ++i) {
    if (!(speed[i].kmh >= 0.0)) invalid("speed.kmh must be >= 0");
    if (i > 0 && !(speed[i].start > speed[i - 1].start)) invalid("speed steps must be ascending");
  }
  std::optional<Seconds> prev_last_tap;
  for (const auto& ep : episodes) {
    if (!(ep.start < ep.end)) invalid("episode start must precede end");
    if (ep.start < 0.0 || ep.end > duration) invalid("episodes must lie within the duration");
    if (!(ep.magnitude_multiplier >= 1.0)) invalid("episode magnitude_multiplier must be >= 1");
    if (!(ep.interval_multiplier >= 1.0)) invalid("episode interval_multiplier must be >= 1");
    const auto taps_here = detail::tap_times(ep, taps);
    if (prev_last_tap && taps_here.front() - *prev_last_tap < kSessionGap)
      invalid("episodes must be ordered and separated so their taps do not merge");
    prev_last_tap = taps_here.back();
  }
}

inline const Episode* episode_at(const std::vector<Episode>& episodes, Seconds t) {
  for (const auto& ep : episodes)
    if (t >= ep.start && t <= ep.end) return &ep;
  return nullptr;
}

inline double road_angle_at(const std::vector<RoadSegment>& road, Seconds t) {
  for (const auto& r : road)
    if (t >= r.start && t < r.end) return r.angle;
  return 0.0;
}

inline double speed_at(const std::vector<SpeedStep>& speed, Seconds t) {
  double v = speed.front().kmh;
  for (const auto& s : speed)
    if (s.start <= t) v = s.kmh;
  return v;
}

/// Deterministic in `cfg`: the same config (seed included) gives a bit-identical drive.
inline std::pair<Drive, GroundTruth> generate_drive(const SynthConfig& cfg) {
  cfg.validate();
  Rng pulses(mix_seed(cfg.rng_seed, 1));
  Rng noise(mix_seed(cfg.rng_seed, 2));

  Drive d;
  d.drive_id = cfg.drive_id;
  d.steering.start_time = 0.0;
  d.steering.sample_rate = cfg.rate;
  d.speed.start_time = 0.0;
  d.speed.sample_rate = cfg.rate;
  const auto n = static_cast<std::size_t>(std::floor(cfg.duration * cfg.rate + 1e-9)) + 1;
  d.steering.values.reserve(n);
  d.speed.values.reserve(n);

  const double dt = 1.0 / cfg.rate;
  const double lag = cfg.correction.smoothing > 0.0 ? std::exp(-dt / cfg.correction.smoothing) : 0.0;
  const double road_lag = cfg.road_smoothing > 0.0 ? std::exp(-dt / cfg.road_smoothing) : 0.0;

  double target = 0.0;
  double correction = 0.0;
  double road = road_angle_at(cfg.road, 0.0);
  auto interval_mean = [&](Seconds t) {
    const Episode* ep = episode_at(cfg.episodes, t);
    return cfg.correction.interval_mean * (ep ? ep->interval_multiplier : 1.0);
  };
  Seconds next_pulse = pulses.exponential(interval_mean(0.0));

  for (std::size_t i = 0; i < n; ++i) {
    const Seconds t = d.steering.time_at(i);
    while (next_pulse <= t) {
      const Episode* ep = episode_at(cfg.episodes, next_pulse);
      const double lane = cfg.correction.magnitude_sd * (ep ? ep->magnitude_multiplier : 1.0);
      const double tracking = cfg.correction.tracking_gain * std::abs(road_angle_at(cfg.road, next_pulse));
      target = pulses.normal(0.0, std::hypot(lane, tracking));
      next_pulse += pulses.exponential(interval_mean(next_pulse));
    }
    correction = target + (correction - target) * lag;
    const double road_target = road_angle_at(cfg.road, t);
    road = road_target + (road - road_target) * road_lag;
    const double jitter = cfg.noise_sd > 0.0 ? noise.normal(0.0, cfg.noise_sd) : 0.0;
    d.steering.values.push_back(road + correction + jitter);
    d.speed.values.push_back(speed_at(cfg.speed, t));
  }

  static const char* kElements[] = {"media.next", "nav.zoom", "climate.temp", "phone.contacts",
                                    "media.list", "nav.search"};
  GroundTruth truth;
  truth.drive_id = cfg.drive_id;
  std::size_t tap_no = 0;
  for (const auto& ep : cfg.episodes) {
    EpisodeTruth et{ep, detail::tap_times(ep, cfg.taps)};
    for (Seconds t : et.tap_times) {
      const Gesture g = tap_no % 5 == 4 ? Gesture::Drag : Gesture::Tap;
      d.ui_events.push_back({t, kElements[tap_no % std::size(kElements)], g});
      ++tap_no;
    }
    truth.episodes.push_back(std::move(et));
  }
  return {std::move(d), std::move(truth)};
}

/// Random episode placement: one episode per equal slot of the drive.
struct RandomEpisodes {
  std::size_t per_drive = 0;
  Seconds min_duration = 6.0;
  Seconds max_duration = 20.0;
  double magnitude_multiplier = 3.0;
  double interval_multiplier = 2.0;
  Seconds min_separation = 30.0;
};

/// Winding road: alternating-sign bends of random length and angle.
struct WindingRoad {
  Seconds min_segment = 5.0;
  Seconds max_segment = 20.0;
  double min_angle = 5.0;
  double max_angle = 30.0;
};

/// Piecewise-constant random speed, one level per segment.
struct RandomSpeed {
  double min_kmh = 20.0;
  double max_kmh = 130.0;
  Seconds segment = 120.0;
};

struct CorpusConfig {
  std::size_t n_drives = 1;
  std::uint64_t seed = 0;
  std::string id_prefix = "drive";
  SynthConfig drive;  // template; drive_id, rng_seed and randomized parts are overwritten
  std::optional<RandomEpisodes> random_episodes;
  std::optional<WindingRoad> winding_road;
  std::optional<RandomSpeed> random_speed;

  void validate() const {
    if (n_drives == 0) detail::invalid("n_drives must be >= 1");
    if (random_episodes) {
      const auto& r = *random_episodes;
      if (!(r.min_duration > 0.0 && r.max_duration >= r.min_duration))
        detail::invalid("random_episodes durations must satisfy 0 < min_duration <= max_duration");
      if (r.per_drive > 0 &&
          drive.duration / static_cast<double>(r.per_drive) < r.max_duration + r.min_separation)
        detail::invalid("random_episodes do not fit: duration / per_drive < max_duration + min_separation");
    }
    if (winding_road && !(winding_road->min_segment > 0.0 &&
                          winding_road->max_segment >= winding_road->min_segment))
      detail::invalid("winding_road segments must satisfy 0 < min_segment <= max_segment");
    if (random_speed && !(random_speed->segment > 0.0 && random_speed->min_kmh >= 0.0 &&
                          random_speed->max_kmh >= random_speed->min_kmh))
      detail::invalid("random_speed must satisfy segment > 0 and 0 <= min_kmh <= max_kmh");
    drive.validate();
  }
};

/// Fills in the per-drive configuration; drive k is seeded with mix_seed(seed, k).
inline SynthConfig drive_config(const CorpusConfig& corpus, std::size_t k) {
  SynthConfig cfg = corpus.drive;
  cfg.rng_seed = mix_seed(corpus.seed, k);
  char id[32];
  std::snprintf(id, sizeof(id), "_%04zu", k);
  cfg.drive_id = corpus.id_prefix + id;
  Rng layout(mix_seed(cfg.rng_seed, 3));

  if (corpus.random_episodes && corpus.random_episodes->per_drive > 0) {
    const auto& r = *corpus.random_episodes;
    cfg.episodes.clear();
    const Seconds slot = cfg.duration / static_cast<double>(r.per_drive);
    for (std::size_t e = 0; e < r.per_drive; ++e) {
      const Seconds len = layout.uniform(r.min_duration, r.max_duration);
      const Seconds room = slot - len - r.min_separation;
      const Seconds start = static_cast<double>(e) * slot + 0.5 * r.min_separation +
                            layout.uniform() * std::max(room, 0.0);
      cfg.episodes.push_back({start, start + len, r.magnitude_multiplier, r.interval_multiplier});
    }
  }
  if (corpus.winding_road) {
    const auto& w = *corpus.winding_road;
    cfg.road.clear();
    double sign = layout.uniform() < 0.5 ? -1.0 : 1.0;
    for (Seconds t = 0.0; t < cfg.duration;) {
      const Seconds len = layout.uniform(w.min_segment, w.max_segment);
      cfg.road.push_back({t, std::min(t + len, cfg.duration + 1.0), sign * layout.uniform(w.min_angle, w.max_angle)});
      sign = -sign;
      t += len;
    }
  }
  if (corpus.random_speed) {
    const auto& s = *corpus.random_speed;
    cfg.speed.clear();
    for (Seconds t = 0.0; t < cfg.duration; t += s.segment)
      cfg.speed.push_back({t, layout.uniform(s.min_kmh, s.max_kmh)});
  }
  return cfg;
}

inline std::vector<std::pair<Drive, GroundTruth>> generate_corpus(const CorpusConfig& corpus) {
  corpus.validate();
  std::vector<std::pair<Drive, GroundTruth>> out;
  out.reserve(corpus.n_drives);
  for (std::size_t k = 0; k < corpus.n_drives; ++k) out.push_back(generate_drive(drive_config(corpus, k)));
  return out;
}

// --- JSON ------------------------------------------------------------------

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& dst, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(dst);
  } catch (const nlohmann::json::exception&) {
    invalid(path + key + " has the wrong type");
  }
}

}  // namespace detail

/// Corpus configuration as written by hand; see configs/ for examples.
inline CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
  using detail::read_field;
  if (!j.is_object()) detail::invalid("synth config must be a JSON object");
  CorpusConfig c;
  read_field(j, "n_drives", c.n_drives, "");
  read_field(j, "seed", c.seed, "");
  read_field(j, "id_prefix", c.id_prefix, "");
  auto& d = c.drive;
  read_field(j, "duration", d.duration, "");
  read_field(j, "rate", d.rate, "");
  read_field(j, "road_smoothing", d.road_smoothing, "");
  read_field(j, "noise_sd", d.noise_sd, "");

  if (j.contains("road")) {
    const auto& road = j.at("road");
    if (road.is_array()) {
      for (const auto& r : road) {
        RoadSegment s;
        read_field(r, "start", s.start, "road.");
        read_field(r, "end", s.end, "road.");
        read_field(r, "angle", s.angle, "road.");
        d.road.push_back(s);
      }
    } else if (road.is_object() && road.contains("winding")) {
      WindingRoad w;
      const auto& x = road.at("winding");
      read_field(x, "min_segment", w.min_segment, "road.winding.");
      read_field(x, "max_segment", w.max_segment, "road.winding.");
      read_field(x, "min_angle", w.min_angle, "road.winding.");
      read_field(x, "max_angle", w.max_angle, "road.winding.");
      c.winding_road = w;
    } else {
      detail::invalid("road must be a list of segments or {\"winding\": {...}}");
    }
  }
  if (j.contains("correction")) {
    const auto& x = j.at("correction");
    read_field(x, "interval_mean", d.correction.interval_mean, "correction.");
    read_field(x, "magnitude_sd", d.correction.magnitude_sd, "correction.");
    read_field(x, "smoothing", d.correction.smoothing, "correction.");
    read_field(x, "tracking_gain", d.correction.tracking_gain, "correction.");
  }
  if (j.contains("speed")) {
    const auto& sp = j.at("speed");
    if (sp.is_array()) {
      d.speed.clear();
      for (const auto& s : sp) {
        SpeedStep step;
        read_field(s, "start", step.start, "speed.");
        read_field(s, "kmh", step.kmh, "speed.");
        d.speed.push_back(step);
      }
    } else if (sp.is_object() && sp.contains("random")) {
      RandomSpeed r;
      const auto& x = sp.at("random");
      read_field(x, "min_kmh", r.min_kmh, "speed.random.");
      read_field(x, "max_kmh", r.max_kmh, "speed.random.");
      read_field(x, "segment", r.segment, "speed.random.");
      c.random_speed = r;
    } else {
      detail::invalid("speed must be a list of steps or {\"random\": {...}}");
    }
  }
  if (j.contains("episodes")) {
    for (const auto& e : j.at("episodes")) {
      Episode ep;
      read_field(e, "start", ep.start, "episodes.");
      read_field(e, "end", ep.end, "episodes.");
      read_field(e, "magnitude_multiplier", ep.magnitude_multiplier, "episodes.");
      read_field(e, "interval_multiplier", ep.interval_multiplier, "episodes.");
      d.episodes.push_back(ep);
    }
  }
  if (j.contains("random_episodes")) {
    RandomEpisodes r;
    const auto& x = j.at("random_episodes");
    read_field(x, "per_drive", r.per_drive, "random_episodes.");
    read_field(x, "min_duration", r.min_duration, "random_episodes.");
    read_field(x, "max_duration", r.max_duration, "random_episodes.");
    read_field(x, "magnitude_multiplier", r.magnitude_multiplier, "random_episodes.");
    read_field(x, "interval_multiplier", r.interval_multiplier, "random_episodes.");
    read_field(x, "min_separation", r.min_separation, "random_episodes.");
    c.random_episodes = r;
  }
  if (j.contains("taps")) {
    const auto& x = j.at("taps");
    read_field(x, "interval", d.taps.interval, "taps.");
    read_field(x, "margin", d.taps.margin, "taps.");
  }
  c.validate();
  return c;
}

inline nlohmann::ordered_json truth_to_json(const std::vector<GroundTruth>& truths) {
  nlohmann::ordered_json drives = nlohmann::ordered_json::array();
  for (const auto& t : truths) {
    nlohmann::ordered_json dj;
    dj["drive_id"] = t.drive_id;
    auto eps = nlohmann::ordered_json::array();
    for (const auto& e : t.episodes) {
      nlohmann::ordered_json ej;
      ej["start"] = e.episode.start;
      ej["end"] = e.episode.end;
      ej["magnitude_multiplier"] = e.episode.magnitude_multiplier;
      ej["interval_multiplier"] = e.episode.interval_multiplier;
      ej["taps"] = e.tap_times;
      eps.push_back(ej);
    }
    dj["episodes"] = eps;
    drives.push_back(dj);
  }
  nlohmann::ordered_json j;
  j["drives"] = drives;
  return j;
}

}  // namespace steermetrics::synth
