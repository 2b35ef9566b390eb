#pragma once

// Drive log parsing, grid regularization and Drive assembly.
//
// Log records (one per line):
//   {"t": 12.4, "kind": "steer", "value": -1.5}
//   {"t": 12.4, "kind": "speed", "value": 87.0}
//   {"t": 30.0, "kind": "adas", "feature": "cruise_control", "active": true}
//   {"t": 31.2, "kind": "ui", "element": "nav.search", "gesture": "tap"}
// The CSV variant carries the columns t,kind,value,feature,active,element,gesture
// with unused cells left empty.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "steermetrics/error.hpp"
#include "steermetrics/format.hpp"
#include "steermetrics/telemetry_model.hpp"

namespace steermetrics {

enum class LogFormat { Jsonl, Csv };

inline LogFormat parse_log_format(std::string_view s) {
  if (s == "jsonl" || s == "json") return LogFormat::Jsonl;
  if (s == "csv") return LogFormat::Csv;
  throw Error(ErrorCode::UnknownFormat, "unknown log format '" + std::string(s) + "'");
}

/// Picks the format from a file extension (.jsonl / .json / .csv).
inline LogFormat log_format_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".jsonl" || ext == ".json") return LogFormat::Jsonl;
  if (ext == ".csv") return LogFormat::Csv;
  throw Error(ErrorCode::UnknownFormat, "cannot infer log format from '" + path.string() + "'");
}

enum class RecordKind { Steer, Speed, Adas, Ui };

struct RawRecord {
  Seconds t = 0.0;
  RecordKind kind = RecordKind::Steer;
  double value = 0.0;  // steer: degrees, speed: km/h
  AdasFeature feature = AdasFeature::CruiseControl;
  bool active = false;
  std::string element;
  Gesture gesture = Gesture::Tap;
};

struct RejectedLine {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ParsedLog {
  std::vector<RawRecord> records;
  std::vector<RejectedLine> rejects;
};

namespace detail {

inline std::optional<RecordKind> parse_kind(std::string_view s) {
  if (s == "steer") return RecordKind::Steer;
  if (s == "speed") return RecordKind::Speed;
  if (s == "adas") return RecordKind::Adas;
  if (s == "ui") return RecordKind::Ui;
  return std::nullopt;
}

// Field bag shared by both formats so validation lives in one place.
struct LineFields {
  std::optional<double> t;
  std::string kind;
  std::optional<double> value;
  std::string feature;
  std::optional<bool> active;
  std::string element;
  std::string gesture;
};

inline std::variant<RawRecord, std::string> to_record(const LineFields& f) {
  if (!f.t) return std::string("missing or non-numeric t");
  if (!std::isfinite(*f.t)) return std::string("t must be finite");
  auto kind = parse_kind(f.kind);
  if (!kind) return "unknown kind '" + f.kind + "'";

  RawRecord r;
  r.t = *f.t;
  r.kind = *kind;
  switch (*kind) {
    case RecordKind::Steer:
    case RecordKind::Speed:
      if (!f.value) return std::string("missing or non-numeric value");
      if (!std::isfinite(*f.value)) return std::string("value must be finite");
      if (*kind == RecordKind::Speed && *f.value < 0.0) return std::string("negative speed");
      r.value = *f.value;
      break;
    case RecordKind::Adas: {
      auto feature = parse_adas_feature(f.feature);
      if (!feature) return "unknown adas feature '" + f.feature + "'";
      if (!f.active) return std::string("missing active flag");
      r.feature = *feature;
      r.active = *f.active;
      break;
    }
    case RecordKind::Ui: {
      if (f.element.empty()) return std::string("missing element");
      auto gesture = parse_gesture(f.gesture);
      if (!gesture) return "unknown gesture '" + f.gesture + "'";
      r.element = f.element;
      r.gesture = *gesture;
      break;
    }
  }
  return r;
}

inline std::variant<LineFields, std::string> parse_json_line(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::string("not a JSON object");
  LineFields f;
  if (auto it = j.find("t"); it != j.end() && it->is_number()) f.t = it->get<double>();
  if (auto it = j.find("kind"); it != j.end() && it->is_string()) f.kind = it->get<std::string>();
  if (auto it = j.find("value"); it != j.end() && it->is_number()) f.value = it->get<double>();
  if (auto it = j.find("feature"); it != j.end() && it->is_string())
    f.feature = it->get<std::string>();
  if (auto it = j.find("active"); it != j.end() && it->is_boolean()) f.active = it->get<bool>();
  if (auto it = j.find("element"); it != j.end() && it->is_string())
    f.element = it->get<std::string>();
  if (auto it = j.find("gesture"); it != j.end() && it->is_string())
    f.gesture = it->get<std::string>();
  return f;
}

// Splits one CSV line; double-quoted cells may contain commas and "" escapes.
inline std::optional<std::vector<std::string>> split_csv(std::string_view line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cells.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else if (c != '\r') {
      cells.back() += c;
    }
  }
  if (quoted) return std::nullopt;
  return cells;
}

inline std::variant<LineFields, std::string> parse_csv_line(std::string_view line) {
  auto cells = split_csv(line);
  if (!cells) return std::string("unterminated quote");
  if (cells->size() != 7) return "expected 7 columns, got " + std::to_string(cells->size());
  const auto& c = *cells;
  LineFields f;
  f.t = fmt::parse_number(c[0]);
  f.kind = c[1];
  if (!c[2].empty()) {
    f.value = fmt::parse_number(c[2]);
    if (!f.value) return std::string("non-numeric value");
  }
  f.feature = c[3];
  if (c[4] == "true" || c[4] == "1") f.active = true;
  else if (c[4] == "false" || c[4] == "0") f.active = false;
  else if (!c[4].empty()) return "bad active flag '" + c[4] + "'";
  f.element = c[5];
  f.gesture = c[6];
  return f;
}

inline bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace detail

/// Parses a drive log. Malformed lines are collected into `rejects` with
/// their 1-based line numbers; they never abort the read. Blank lines and a
/// leading CSV header are skipped silently.
inline ParsedLog read_drive_log(std::istream& source, LogFormat format) {
  if (!source) throw Error(ErrorCode::UnreadableSource, "stream is not readable");
  ParsedLog out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    if (format == LogFormat::Csv && line_no == 1 && line.rfind("t,kind", 0) == 0) continue;

    auto fields = format == LogFormat::Jsonl ? detail::parse_json_line(line)
                                             : detail::parse_csv_line(line);
    if (auto* why = std::get_if<std::string>(&fields)) {
      out.rejects.push_back({line_no, *why});
      continue;
    }
    auto rec = detail::to_record(std::get<detail::LineFields>(fields));
    if (auto* why = std::get_if<std::string>(&rec)) {
      out.rejects.push_back({line_no, *why});
      continue;
    }
    out.records.push_back(std::move(std::get<RawRecord>(rec)));
  }
  if (source.bad()) throw Error(ErrorCode::UnreadableSource, "read failed");
  return out;
}

inline ParsedLog read_drive_log(const std::filesystem::path& path) {
  const auto format = log_format_for(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableSource, "cannot open '" + path.string() + "'");
  return read_drive_log(in, format);
}

struct TimedValue {
  Seconds t = 0.0;
  double value = 0.0;
};

/// Resamples time-sorted records onto a uniform grid at `nominal_rate`.
///
/// Records further apart than `max_gap` start a new segment; the grid of each
/// segment is anchored at its first record and never extends past its last.
/// Records sharing a timestamp keep the later value.
inline std::vector<UniformTrace> regularize_trace(std::span<const TimedValue> records,
                                                  double nominal_rate, Seconds max_gap) {
  std::vector<UniformTrace> segments;
  if (records.empty() || !(nominal_rate > 0.0)) return segments;

  std::vector<TimedValue> pts;
  pts.reserve(records.size());
  for (const auto& r : records) {
    if (!pts.empty() && pts.back().t == r.t) pts.back() = r;
    else pts.push_back(r);
  }

  std::size_t run_begin = 0;
  for (std::size_t k = 1; k <= pts.size(); ++k) {
    if (k < pts.size() && pts[k].t - pts[k - 1].t <= max_gap) continue;

    const std::span<const TimedValue> run(pts.data() + run_begin, k - run_begin);
    UniformTrace seg;
    seg.start_time = run.front().t;
    seg.sample_rate = nominal_rate;
    const double steps = (run.back().t - seg.start_time) * nominal_rate;
    const auto n = static_cast<std::size_t>(std::floor(steps + 1e-9)) + 1;
    seg.values.reserve(n);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Seconds t = std::min(seg.time_at(i), run.back().t);
      while (j + 1 < run.size() && run[j + 1].t <= t) ++j;
      if (run[j].t == t || j + 1 == run.size()) {
        seg.values.push_back(run[j].value);
      } else {
        const double w = (t - run[j].t) / (run[j + 1].t - run[j].t);
        seg.values.push_back(run[j].value + w * (run[j + 1].value - run[j].value));
      }
    }
    segments.push_back(std::move(seg));
    run_begin = k;
  }
  return segments;
}

/// Converts on-change ADAS flags into closed activity intervals. A feature
/// still active at the end of the log runs to `span_end`; overlapping or
/// touching intervals of one feature are merged.
inline std::vector<AdasInterval> normalize_adas(std::span<const RawRecord> records,
                                                Seconds span_start, Seconds span_end) {
  std::vector<AdasInterval> out;
  for (auto feature : {AdasFeature::CruiseControl, AdasFeature::SteeringAssist}) {
    std::vector<AdasInterval> raw;
    std::optional<Seconds> open;
    for (const auto& r : records) {
      if (r.kind != RecordKind::Adas || r.feature != feature) continue;
      if (r.active && !open) {
        open = r.t;
      } else if (!r.active && open) {
        raw.push_back({*open, r.t, feature});
        open.reset();
      }
    }
    if (open) raw.push_back({*open, std::max(*open, span_end), feature});

    std::vector<AdasInterval> merged;
    for (auto iv : raw) {
      iv.start = std::max(iv.start, span_start);
      iv.end = std::min(iv.end, span_end);
      if (!(iv.start < iv.end)) continue;
      if (!merged.empty() && iv.start <= merged.back().end)
        merged.back().end = std::max(merged.back().end, iv.end);
      else
        merged.push_back(iv);
    }
    out.insert(out.end(), merged.begin(), merged.end());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const AdasInterval& a, const AdasInterval& b) { return a.start < b.start; });
  return out;
}

namespace detail {

// Linear interpolation inside one speed run; the caller guarantees t is covered.
inline double interpolate(std::span<const TimedValue> run, Seconds t) {
  auto it = std::upper_bound(run.begin(), run.end(), t,
                             [](Seconds x, const TimedValue& p) { return x < p.t; });
  if (it == run.begin()) return run.front().value;
  const auto& lo = *(it - 1);
  if (it == run.end() || lo.t == t) return lo.value;
  const double w = (t - lo.t) / (it->t - lo.t);
  return lo.value + w * (it->value - lo.value);
}

}  // namespace detail

/// Routes raw records into one or more validated Drives.
///
/// Each Drive holds exactly one contiguous steering segment with speed
/// resampled onto the same grid. When the log splits into several pieces the
/// ids are suffixed `_1`, `_2`, ... in time order.
inline std::vector<Drive> assemble_drive(std::vector<RawRecord> records,
                                         const std::string& drive_id,
                                         const PipelineConfig& cfg = {}) {
  std::stable_sort(records.begin(), records.end(),
                   [](const RawRecord& a, const RawRecord& b) { return a.t < b.t; });

  std::vector<TimedValue> steer;
  std::vector<TimedValue> speed;
  std::vector<UIEvent> ui;
  for (const auto& r : records) {
    switch (r.kind) {
      case RecordKind::Steer: steer.push_back({r.t, r.value}); break;
      case RecordKind::Speed: speed.push_back({r.t, r.value}); break;
      case RecordKind::Ui: ui.push_back({r.t, r.element, r.gesture}); break;
      case RecordKind::Adas: break;
    }
  }
  if (steer.empty()) throw Error(ErrorCode::EmptyDrive, drive_id + ": no steering samples");

  const auto steer_segments = regularize_trace(steer, cfg.sample_rate, cfg.max_gap);

  // Speed runs split on the same gap rule; grid points outside every run have no speed.
  std::vector<std::span<const TimedValue>> speed_runs;
  for (std::size_t b = 0, k = 1; k <= speed.size(); ++k) {
    if (k < speed.size() && speed[k].t - speed[k - 1].t <= cfg.max_gap) continue;
    speed_runs.emplace_back(speed.data() + b, k - b);
    b = k;
  }
  auto run_for = [&](Seconds t) -> const std::span<const TimedValue>* {
    for (const auto& run : speed_runs)
      if (t >= run.front().t && t <= run.back().t) return &run;
    return nullptr;
  };

  std::vector<Drive> pieces;
  for (const auto& seg : steer_segments) {
    std::size_t i = 0;
    while (i < seg.size()) {
      while (i < seg.size() && !run_for(seg.time_at(i))) ++i;
      if (i == seg.size()) break;
      Drive d;
      d.steering.start_time = seg.time_at(i);
      d.steering.sample_rate = seg.sample_rate;
      d.speed.start_time = d.steering.start_time;
      d.speed.sample_rate = seg.sample_rate;
      const auto* run = run_for(seg.time_at(i));
      while (i < seg.size()) {
        const Seconds t = seg.time_at(i);
        if (!(t >= run->front().t && t <= run->back().t)) break;
        d.steering.values.push_back(seg.values[i]);
        d.speed.values.push_back(detail::interpolate(*run, t));
        ++i;
      }
      pieces.push_back(std::move(d));
    }
  }
  if (pieces.empty())
    throw Error(ErrorCode::EmptyDrive, drive_id + ": no steering samples with speed coverage");

  const Seconds log_start = records.front().t;
  const Seconds log_end = records.back().t;
  const auto adas = normalize_adas(records, log_start, log_end);

  for (std::size_t k = 0; k < pieces.size(); ++k) {
    auto& d = pieces[k];
    d.drive_id = pieces.size() == 1 ? drive_id : drive_id + "_" + std::to_string(k + 1);
    for (const auto& e : ui)
      if (e.time >= d.span_start() && e.time <= d.span_end()) d.ui_events.push_back(e);
    for (auto iv : adas) {
      iv.start = std::max(iv.start, d.span_start());
      iv.end = std::min(iv.end, d.span_end());
      if (iv.start < iv.end) d.adas.push_back(iv);
    }
    if (auto v = validate_drive(d); !v.empty())
      throw Error(ErrorCode::EmptyDrive, d.drive_id + ": " + v.front().field + ": " + v.front().rule);
  }
  return pieces;
}

/// Writes a Drive in the JSONL log format, time-ordered. Numbers use the
/// shortest round-trip representation, so re-ingesting yields the same grid.
inline void write_drive_jsonl(const Drive& drive, std::ostream& out) {
  struct Line {
    Seconds t;
    int order;
    std::string text;
  };
  std::vector<Line> lines;
  lines.reserve(drive.steering.size() + drive.speed.size() + drive.ui_events.size() +
                2 * drive.adas.size());
  auto head = [](Seconds t, std::string_view kind) {
    return "{\"t\":" + fmt::number(t) + ",\"kind\":\"" + std::string(kind) + "\"";
  };
  for (std::size_t i = 0; i < drive.steering.size(); ++i) {
    const Seconds t = drive.steering.time_at(i);
    lines.push_back({t, 0, head(t, "steer") + ",\"value\":" + fmt::number(drive.steering.values[i]) + "}"});
  }
  for (std::size_t i = 0; i < drive.speed.size(); ++i) {
    const Seconds t = drive.speed.time_at(i);
    lines.push_back({t, 1, head(t, "speed") + ",\"value\":" + fmt::number(drive.speed.values[i]) + "}"});
  }
  for (const auto& iv : drive.adas) {
    const std::string feature = ",\"feature\":\"" + std::string(to_string(iv.feature)) + "\"";
    lines.push_back({iv.start, 2, head(iv.start, "adas") + feature + ",\"active\":true}"});
    lines.push_back({iv.end, 2, head(iv.end, "adas") + feature + ",\"active\":false}"});
  }
  for (const auto& e : drive.ui_events) {
    lines.push_back({e.time, 3, head(e.time, "ui") + ",\"element\":" + nlohmann::json(e.element_id).dump() +
                                    ",\"gesture\":\"" + std::string(to_string(e.gesture)) + "\"}"});
  }
  std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    return a.t != b.t ? a.t < b.t : a.order < b.order;
  });
  for (const auto& l : lines) out << l.text << '\n';
}

}  // namespace steermetrics
