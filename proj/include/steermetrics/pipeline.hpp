#pragma once

// Batch commands behind the steermetrics CLI: synth, extract, report.
// Exit codes: 0 ok, 1 I/O or data problem, 2 configuration or validation.

#include <glob.h>
#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "steermetrics/config.hpp"
#include "steermetrics/error.hpp"
#include "steermetrics/ingest.hpp"
#include "steermetrics/metrics.hpp"
#include "steermetrics/parallel.hpp"
#include "steermetrics/sequencer.hpp"
#include "steermetrics/stats_report.hpp"
#include "steermetrics/synth.hpp"
#include "steermetrics/telemetry_model.hpp"

namespace steermetrics {

inline constexpr const char* kToolName = "steermetrics";
inline constexpr const char* kToolVersion = "0.3.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitConfig = 2;

namespace fs = std::filesystem;

struct RunOptions {
  std::optional<std::string> config;
  std::vector<std::string> inputs;
  std::string out = ".";
  std::optional<std::string> sequences;  // report: directory holding extract output
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;  // report: csv | json; both when unset
  std::size_t jobs = 0;
};

namespace detail {

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableSource, "cannot open '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

inline bool is_log_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".jsonl" || ext == ".csv";
}

class Stopwatch {
 public:
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    laps_[stage] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    for (const auto& [k, v] : laps_) j[k] = v;
    return j;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::map<std::string, double> laps_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::UnreadableSource, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::UnreadableSource, "write failed for '" + path.string() + "'");
}

/// timings.json holds one object per command so `report --all` keeps the
/// extract stage times next to its own.
inline void record_timings(const fs::path& out, const std::string& command, const Stopwatch& clock) {
  nlohmann::ordered_json all = nlohmann::ordered_json::object();
  if (std::ifstream in(out / "timings.json"); in) {
    auto prev = nlohmann::ordered_json::parse(in, nullptr, false);
    if (prev.is_object()) all = std::move(prev);
  }
  all[command] = clock.to_json();
  write_text(out / "timings.json", all.dump(2) + "\n");
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw Error(ErrorCode::UnreadableSource, "cannot create output directory '" + dir.string() + "'");
}

}  // namespace detail

/// Expands files, directories (their *.jsonl / *.csv) and glob patterns into
/// a sorted, de-duplicated file list.
inline std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::set<fs::path> files;
  for (const auto& in : inputs) {
    if (in.find_first_of("*?[") != std::string::npos) {
      glob_t g{};
      if (::glob(in.c_str(), 0, nullptr, &g) == 0)
        for (std::size_t i = 0; i < g.gl_pathc; ++i) files.insert(g.gl_pathv[i]);
      ::globfree(&g);
    } else if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && detail::is_log_file(e.path())) files.insert(e.path());
    } else if (fs::exists(in)) {
      files.insert(in);
    } else {
      throw Error(ErrorCode::UnreadableSource, "input '" + in + "' does not exist");
    }
  }
  return {files.begin(), files.end()};
}

struct LoadedCorpus {
  std::vector<Drive> drives;
  std::vector<fs::path> files;
  std::size_t rejected_lines = 0;
  std::vector<std::string> warnings;
};

/// Ingests every file (one drive log per file, id = file stem) in parallel;
/// drives come back in file order.
inline LoadedCorpus load_corpus(const std::vector<fs::path>& files, const PipelineConfig& cfg,
                                std::size_t jobs) {
  struct Slot {
    std::vector<Drive> drives;
    std::size_t rejects = 0;
    std::string warning;
  };
  std::vector<Slot> slots(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    try {
      auto parsed = read_drive_log(files[i]);
      slots[i].rejects = parsed.rejects.size();
      if (!parsed.rejects.empty())
        slots[i].warning = files[i].string() + ": " + std::to_string(parsed.rejects.size()) +
                           " rejected line(s), first at line " +
                           std::to_string(parsed.rejects.front().line) + " (" +
                           parsed.rejects.front().reason + ")";
      slots[i].drives = assemble_drive(std::move(parsed.records), files[i].stem().string(), cfg);
    } catch (const Error& e) {
      slots[i].warning = files[i].string() + ": skipped: " + e.what();
    }
  });

  LoadedCorpus c;
  c.files = files;
  std::set<std::string> ids;
  for (auto& s : slots) {
    c.rejected_lines += s.rejects;
    if (!s.warning.empty()) c.warnings.push_back(s.warning);
    for (auto& d : s.drives) {
      if (!ids.insert(d.drive_id).second)
        throw Error(ErrorCode::UnreadableSource, "duplicate drive id '" + d.drive_id + "'");
      c.drives.push_back(std::move(d));
    }
  }
  return c;
}

inline PipelineConfig resolve_config(const RunOptions& opts) {
  PipelineConfig cfg = opts.config ? load_pipeline_config(*opts.config) : PipelineConfig{};
  if (opts.seed) cfg.rng_seed = *opts.seed;
  cfg.validate();
  return cfg;
}

inline nlohmann::ordered_json manifest_inputs(const std::vector<fs::path>& files) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : files) {
    nlohmann::ordered_json e;
    e["path"] = f.string();
    e["sha256"] = detail::sha256_file(f);
    arr.push_back(e);
  }
  return arr;
}

inline nlohmann::ordered_json manifest_head(const PipelineConfig& cfg, const std::string& command) {
  nlohmann::ordered_json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config"] = to_json(cfg);
  return m;
}

// --- synth -----------------------------------------------------------------

/// Writes one <drive_id>.jsonl per generated drive plus truth.json.
inline int cmd_synth(const std::string& config_path, const std::string& out_dir, std::ostream& log,
                     std::ostream& err) {
  synth::CorpusConfig corpus;
  try {
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config '" + config_path + "'");
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, "config is not valid JSON");
    corpus = synth::corpus_config_from_json(j);
  } catch (const Error& e) {
    err << "synth: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    detail::ensure_dir(out_dir);
    std::vector<synth::GroundTruth> truths;
    for (std::size_t k = 0; k < corpus.n_drives; ++k) {
      auto [drive, truth] = synth::generate_drive(synth::drive_config(corpus, k));
      std::ostringstream os;
      write_drive_jsonl(drive, os);
      detail::write_text(fs::path(out_dir) / (drive.drive_id + ".jsonl"), os.str());
      truths.push_back(std::move(truth));
    }
    detail::write_text(fs::path(out_dir) / "truth.json", synth::truth_to_json(truths).dump(2) + "\n");
    log << "wrote " << corpus.n_drives << " drive(s) to " << out_dir << '\n';
  } catch (const Error& e) {
    err << "synth: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

// --- extract ---------------------------------------------------------------

struct ExtractResult {
  std::vector<Sequence> interactions;
  std::size_t adas_dropped = 0;
  BaselineSample baselines;
};

/// In-memory extract stage: sessionize, drop ADAS-contaminated windows,
/// draw the stratified baseline sample.
inline ExtractResult extract_sequences(std::span<const Drive> drives, const PipelineConfig& cfg,
                                       std::size_t jobs = 1) {
  std::vector<std::vector<Sequence>> per_drive(drives.size());
  std::vector<std::size_t> found(drives.size());
  parallel_for(drives.size(), jobs, [&](std::size_t i) {
    auto seqs = extract_interaction_sequences(drives[i], cfg);
    found[i] = seqs.size();
    per_drive[i] = filter_adas_active(std::move(seqs), drives[i].adas);
  });
  ExtractResult r;
  for (std::size_t i = 0; i < drives.size(); ++i) {
    r.adas_dropped += found[i] - per_drive[i].size();
    for (auto& s : per_drive[i]) r.interactions.push_back(std::move(s));
  }
  if (!r.interactions.empty()) r.baselines = sample_baselines(drives, r.interactions, cfg);
  return r;
}

inline int cmd_extract(const RunOptions& opts, std::ostream& log, std::ostream& err) {
  PipelineConfig cfg;
  try {
    cfg = resolve_config(opts);
  } catch (const Error& e) {
    err << "extract: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    detail::Stopwatch clock;
    const std::size_t jobs = resolve_jobs(opts.jobs);
    const auto files = expand_inputs(opts.inputs);
    auto corpus = load_corpus(files, cfg, jobs);
    for (const auto& w : corpus.warnings) err << "warning: " << w << '\n';
    clock.lap("ingest");
    if (corpus.drives.empty()) {
      err << "extract: no valid drives\n";
      return kExitData;
    }

    const auto result = extract_sequences(corpus.drives, cfg, jobs);
    clock.lap("sequencing");
    log << result.interactions.size() << " interaction sequences extracted\n";
    if (result.interactions.empty()) {
      err << "extract: no interaction sequences\n";
      return kExitData;
    }
    for (const auto& s : result.baselines.shortfalls)
      err << "warning: duration bin [" << fmt::number(s.range.start) << ", "
          << fmt::number(s.range.end) << "] short of baselines: " << s.achieved << " of "
          << s.target << '\n';

    detail::ensure_dir(opts.out);
    const fs::path out(opts.out);
    std::ostringstream is, bs;
    write_sequences_jsonl(result.interactions, is);
    write_sequences_jsonl(result.baselines.sequences, bs);
    detail::write_text(out / "interaction_sequences.jsonl", is.str());
    detail::write_text(out / "baseline_sequences.jsonl", bs.str());

    auto m = manifest_head(cfg, "extract");
    m["inputs"] = manifest_inputs(files);
    nlohmann::ordered_json counts;
    counts["drives"] = corpus.drives.size();
    counts["rejected_lines"] = corpus.rejected_lines;
    counts["interaction_sequences"] = result.interactions.size();
    counts["adas_dropped"] = result.adas_dropped;
    counts["baseline_sequences"] = result.baselines.sequences.size();
    counts["shortfall_bins"] = result.baselines.shortfalls.size();
    m["counts"] = counts;
    nlohmann::ordered_json plan;
    plan["duration_bin_edges"] = result.baselines.plan.duration_bin_edges;
    plan["targets"] = result.baselines.plan.targets;
    plan["achieved"] = result.baselines.achieved;
    m["stratification"] = plan;
    m["alpha"] = nullptr;
    clock.lap("write");
    detail::write_text(out / "manifest.json", m.dump(2) + "\n");
    detail::record_timings(out, "extract", clock);
  } catch (const Error& e) {
    err << "extract: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

// --- report ----------------------------------------------------------------

struct ReportResult {
  AlphaEstimate alpha;
  std::vector<SequenceMetrics> interaction;
  std::vector<SequenceMetrics> baseline;
  ComparisonReport report;
  std::size_t skipped = 0;  // windows too short for the metrics
};

/// In-memory report stage. Sequences must already carry their events.
inline ReportResult compute_report(std::span<const Drive> drives, std::span<const Sequence> interactions,
                                   std::span<const Sequence> baselines, const PipelineConfig& cfg,
                                   std::size_t jobs = 1) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < drives.size(); ++i) index[drives[i].drive_id] = i;
  auto drive_of = [&](const Sequence& s) -> const Drive& {
    auto it = index.find(s.drive_id);
    if (it == index.end())
      throw Error(ErrorCode::UnreadableSource, "sequence refers to unknown drive '" + s.drive_id + "'");
    return drives[it->second];
  };

  std::vector<ResidualSeries> residuals(baselines.size());
  parallel_for(baselines.size(), jobs, [&](std::size_t i) {
    const auto& s = baselines[i];
    try {
      const auto theta = window_samples(drive_of(s).steering, s.window_start, s.window_end);
      if (theta.size() >= 4) residuals[i] = taylor_residuals(theta, cfg.predictor);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyWindow) throw;
    }
  });

  ReportResult r;
  r.alpha = estimate_alpha(residuals, cfg.alpha_percentile);

  auto run = [&](std::span<const Sequence> seqs, std::vector<SequenceMetrics>& dst) {
    std::vector<std::optional<SequenceMetrics>> slots(seqs.size());
    parallel_for(seqs.size(), jobs, [&](std::size_t i) {
      try {
        slots[i] = compute_sequence_metrics(drive_of(seqs[i]), seqs[i], r.alpha, cfg);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::WindowTooShort) throw;
      }
    });
    for (auto& s : slots) {
      if (s) dst.push_back(std::move(*s));
      else ++r.skipped;
    }
  };
  run(interactions, r.interaction);
  run(baselines, r.baseline);
  r.report = build_report(r.interaction, r.baseline, cfg);
  return r;
}

inline void write_metrics_jsonl(std::span<const SequenceMetrics> metrics, std::ostream& out) {
  for (const auto& m : metrics) {
    nlohmann::ordered_json j;
    j["drive_id"] = m.sequence.drive_id;
    j["kind"] = std::string(to_string(m.sequence.kind));
    j["window_start"] = m.sequence.window_start;
    j["window_end"] = m.sequence.window_end;
    j["steering_entropy"] = m.steering_entropy;
    nlohmann::ordered_json sw;
    for (const auto& [gap, rate] : m.swrr) sw[fmt::number(gap)] = rate;
    j["swrr"] = sw;
    j["mean_speed"] = m.mean_speed;
    j["duration"] = m.duration;
    j["curvature"] = std::string(to_string(m.curvature));
    j["n_interactions"] = m.n_interactions;
    j["interaction_density"] = m.interaction_density;
    out << j.dump() << '\n';
  }
}

inline int cmd_report(const RunOptions& opts, std::ostream& log, std::ostream& err) {
  PipelineConfig cfg;
  try {
    cfg = resolve_config(opts);
    if (opts.format && *opts.format != "csv" && *opts.format != "json")
      throw Error(ErrorCode::InvalidConfig, "--format must be csv or json");
  } catch (const Error& e) {
    err << "report: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    detail::Stopwatch clock;
    const std::size_t jobs = resolve_jobs(opts.jobs);
    const fs::path seq_dir(opts.sequences.value_or(opts.out));
    auto read_set = [&](const char* name) {
      std::ifstream in(seq_dir / name);
      if (!in) throw Error(ErrorCode::UnreadableSource, "missing " + (seq_dir / name).string());
      return read_sequences_jsonl(in);
    };
    const auto stored_i = read_set("interaction_sequences.jsonl");
    const auto stored_b = read_set("baseline_sequences.jsonl");
    if (stored_b.empty()) throw Error(ErrorCode::UnreadableSource, "no baseline sequences");
    if (stored_i.empty()) throw Error(ErrorCode::UnreadableSource, "no interaction sequences");

    const auto files = expand_inputs(opts.inputs);
    auto corpus = load_corpus(files, cfg, jobs);
    for (const auto& w : corpus.warnings) err << "warning: " << w << '\n';
    if (corpus.drives.empty()) throw Error(ErrorCode::UnreadableSource, "no valid drives");
    clock.lap("ingest");

    std::map<std::string, const Drive*> by_id;
    for (const auto& d : corpus.drives) by_id[d.drive_id] = &d;
    auto restore = [&](const std::vector<StoredSequence>& stored) {
      std::vector<Sequence> out;
      out.reserve(stored.size());
      for (const auto& s : stored) {
        auto it = by_id.find(s.sequence.drive_id);
        if (it == by_id.end())
          throw Error(ErrorCode::UnreadableSource, "unknown drive '" + s.sequence.drive_id + "'");
        Sequence seq = s.sequence;
        attach_events(seq, *it->second);
        if (seq.events.size() != s.n_events)
          throw Error(ErrorCode::UnreadableSource,
                      "event count mismatch for a sequence of '" + seq.drive_id + "'");
        out.push_back(std::move(seq));
      }
      return out;
    };
    const auto interactions = restore(stored_i);
    const auto baselines = restore(stored_b);

    ReportResult result;
    try {
      result = compute_report(corpus.drives, interactions, baselines, cfg, jobs);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateBaseline) {
        err << "report: " << e.what() << '\n';
        return kExitConfig;
      }
      throw;
    }
    clock.lap("metrics");

    detail::ensure_dir(opts.out);
    const fs::path out(opts.out);
    std::ostringstream ms;
    write_metrics_jsonl(result.interaction, ms);
    write_metrics_jsonl(result.baseline, ms);
    detail::write_text(out / "metrics.jsonl", ms.str());
    if (!opts.format || *opts.format == "csv") {
      std::ostringstream rs;
      write_report_csv(result.report, rs);
      detail::write_text(out / "report.csv", rs.str());
    }
    if (!opts.format || *opts.format == "json")
      detail::write_text(out / "report.json", report_to_json(result.report).dump(2) + "\n");
    {
      std::ostringstream ps;
      write_plot_csv(result.report, "se", Curvature::Straight, ps);
      detail::write_text(out / "plot_se.csv", ps.str());
    }
    if (std::find(cfg.swrr_gaps.begin(), cfg.swrr_gaps.end(), 2.0) != cfg.swrr_gaps.end()) {
      std::ostringstream ps;
      write_plot_csv(result.report, swrr_metric_name(2.0), Curvature::Straight, ps);
      detail::write_text(out / "plot_swrr_2.csv", ps.str());
    }

    auto m = manifest_head(cfg, "report");
    m["inputs"] = manifest_inputs(files);
    if (std::ifstream prev(seq_dir / "manifest.json"); prev) {
      const auto x = nlohmann::ordered_json::parse(prev, nullptr, false);
      if (!x.is_discarded() && x.value("command", "") == "extract") {
        nlohmann::ordered_json carried;
        carried["counts"] = x.value("counts", nlohmann::ordered_json::object());
        carried["stratification"] = x.value("stratification", nlohmann::ordered_json::object());
        m["extract"] = carried;
      } else if (!x.is_discarded() && x.contains("extract")) {
        m["extract"] = x["extract"];  // report rerun over its own output
      }
    }
    nlohmann::ordered_json counts;
    counts["drives"] = corpus.drives.size();
    counts["rejected_lines"] = corpus.rejected_lines;
    counts["interaction_sequences"] = interactions.size();
    counts["baseline_sequences"] = baselines.size();
    counts["interaction_metrics"] = result.interaction.size();
    counts["baseline_metrics"] = result.baseline.size();
    counts["skipped_windows"] = result.skipped;
    m["counts"] = counts;
    nlohmann::ordered_json alpha;
    alpha["alpha"] = result.alpha.alpha;
    alpha["n_baseline_sequences"] = result.alpha.n_baseline_sequences;
    alpha["percentile_used"] = result.alpha.percentile_used;
    m["alpha"] = alpha;
    clock.lap("write");
    detail::write_text(out / "manifest.json", m.dump(2) + "\n");
    detail::record_timings(out, "report", clock);

    for (const auto& e : result.report.effect_sizes)
      log << "d(" << e.metric << ", " << to_string(e.condition) << ") = " << fmt::number(e.d)
          << "  [n=" << e.n_interaction << " vs " << e.n_baseline << "]\n";
  } catch (const Error& e) {
    err << "report: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace steermetrics
