// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion,
// followed by the measured numbers, and exits non-zero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "steermetrics.hpp"

using namespace steermetrics;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { notes.push_back("     " + what); }
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("steermetrics_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<Drive> drives_of(std::vector<std::pair<Drive, synth::GroundTruth>> corpus) {
  std::vector<Drive> out;
  for (auto& [d, t] : corpus) out.push_back(std::move(d));
  return out;
}

synth::CorpusConfig episode_corpus(std::size_t n_drives, std::uint64_t seed, double magnitude,
                                   double interval) {
  synth::CorpusConfig c;
  c.n_drives = n_drives;
  c.seed = seed;
  c.random_episodes = synth::RandomEpisodes{};
  c.random_episodes->per_drive = 10;
  c.random_episodes->magnitude_multiplier = magnitude;
  c.random_episodes->interval_multiplier = interval;
  return c;
}

ReportResult run_pipeline(std::span<const Drive> drives, ExtractResult* keep = nullptr) {
  const PipelineConfig cfg;
  auto ex = extract_sequences(drives, cfg);
  auto r = compute_report(drives, ex.interactions, ex.baselines.sequences, cfg);
  if (keep) *keep = std::move(ex);
  return r;
}

// 1. Metric correctness against brute-force oracles.
Outcome metric_correctness() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);

  std::size_t swrr_mismatch = 0, swrr_checks = 0, total_reversals = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto sig = oracle::random_piecewise_linear(rng);
    const auto turns = oracle::turning_vertices(sig.vertices);
    const double duration = static_cast<double>(sig.samples.size() - 1) / 5.0;
    for (double gap : {1.0, 2.0, 5.0}) {
      const auto expected = oracle::reversal_count(turns, gap);
      total_reversals += expected;
      ++swrr_checks;
      if (duration <= 0.0) {
        if (swrr(sig.samples, 5.0, gap, 1.0) != 0.0) ++swrr_mismatch;
        continue;
      }
      const double rate = swrr(sig.samples, 5.0, gap, duration);
      if (std::llround(rate * duration / 60.0) != static_cast<long long>(expected)) ++swrr_mismatch;
    }
  }
  o.check(swrr_mismatch == 0, "swrr vs extremum-pair oracle: " + std::to_string(swrr_mismatch) +
                                  " mismatches in " + std::to_string(swrr_checks) + " checks (" +
                                  std::to_string(total_reversals) + " reversals)");

  double worst = 0.0;
  std::uniform_int_distribution<int> len(1, 400);
  std::uniform_real_distribution<double> scale(0.01, 20.0), unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double alpha = scale(rng);
    std::normal_distribution<double> nd(0.0, alpha * scale(rng) / 5.0);
    std::vector<double> e(static_cast<std::size_t>(len(rng)));
    for (auto& x : e) {
      const double u = unit(rng);
      if (u < 0.05) {
        // land exactly on a bin edge
        const double edges[] = {0.5, 1.0, 2.5, 5.0};
        x = (u < 0.025 ? -1.0 : 1.0) * edges[static_cast<int>(unit(rng) * 4)] * alpha;
      } else {
        x = nd(rng);
      }
    }
    const double h = steering_entropy(ResidualSeries{e, "acceptance"}, {alpha, 1, 0.9}).entropy;
    worst = std::max(worst, std::abs(h - oracle::entropy(e, alpha)));
  }
  o.check(worst <= 1e-12, "steering_entropy vs histogram oracle over 1000 sets: max |diff| = " + num(worst));

  const double elapsed = seconds_since(t0);
  o.check(elapsed < 10.0, "runtime " + num(elapsed, 3) + " s (limit 10 s)");
  return o;
}

// 2. Analytic invariants.
Outcome analytic_invariants() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  o.check(steering_entropy(taylor_residuals(std::vector<double>(50, 3.7)), {1.0, 1, 0.9}).entropy == 0.0,
          "H = 0 on constant steering");
  {
    const std::vector<double> reps{-9, -3, -1.5, -0.7, 0, 0.7, 1.5, 3, 9};
    std::vector<double> e;
    for (int k = 0; k < 20; ++k) e.insert(e.end(), reps.begin(), reps.end());
    const double h = steering_entropy(ResidualSeries{e, ""}, {1.0, 1, 0.9}).entropy;
    o.check(std::abs(h - 1.0) < 1e-12, "H = 1 on uniform nine-bin residuals (H = " + num(h, 17) + ")");
  }

  double worst_quad = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double a = 10 * u(rng), b = u(rng), c = 0.1 * u(rng);
    const auto n = 4 + static_cast<int>(196 * (u(rng) + 1) / 2);
    std::vector<double> theta;
    for (int i = 0; i < n; ++i) theta.push_back(a + b * i + c * i * i);
    for (double e : taylor_residuals(theta).values) worst_quad = std::max(worst_quad, std::abs(e));
  }
  o.check(worst_quad < 1e-9, "residuals on 100 random quadratics: max |e| = " + num(worst_quad));

  // Random windows: filtered random walks with occasional bursts.
  std::vector<std::vector<double>> windows;
  std::normal_distribution<double> step(0.0, 0.6);
  std::uniform_int_distribution<int> len(20, 300);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> w(static_cast<std::size_t>(len(rng)));
    double x = 10 * u(rng);
    const double burst = 1.0 + 3.0 * (u(rng) + 1.0);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = x += step(rng) * (i % 37 < 9 ? burst : 1.0);
    windows.push_back(std::move(w));
  }

  std::size_t non_monotone = 0, swrr_variant = 0;
  bool se_in_range = true;
  for (const auto& w : windows) {
    const auto f = lowpass(w, 5.0, 0.6);
    const double duration = static_cast<double>(w.size() - 1) / 5.0;
    const double r1 = swrr(f, 5.0, 1.0, duration), r2 = swrr(f, 5.0, 2.0, duration),
                 r5 = swrr(f, 5.0, 5.0, duration);
    if (!(r1 >= r2 && r2 >= r5)) ++non_monotone;

    std::vector<double> flipped(w.size()), shifted(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      flipped[i] = -w[i];
      shifted[i] = w[i] + 12.5;
    }
    for (double gap : {1.0, 2.0, 5.0}) {
      const double base = swrr(f, 5.0, gap, duration);
      if (swrr(lowpass(flipped, 5.0, 0.6), 5.0, gap, duration) != base ||
          swrr(lowpass(shifted, 5.0, 0.6), 5.0, gap, duration) != base)
        ++swrr_variant;
    }
  }
  o.check(non_monotone == 0, "SWRR(1) >= SWRR(2) >= SWRR(5) on 1000 random windows: " +
                                 std::to_string(non_monotone) + " violations");
  o.check(swrr_variant == 0, "SWRR unchanged under sign flip and offset: " + std::to_string(swrr_variant) +
                                 " differences");

  // SE with alpha re-estimated from the transformed baseline windows.
  auto se_all = [&](const std::function<double(double)>& map) {
    std::vector<ResidualSeries> res;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      std::vector<double> w(windows[k].size());
      std::transform(windows[k].begin(), windows[k].end(), w.begin(), map);
      res.push_back(taylor_residuals(w));
    }
    std::vector<ResidualSeries> baseline(res.begin(), res.begin() + 500);
    const auto alpha = estimate_alpha(baseline, 0.9);
    std::vector<double> h;
    for (std::size_t k = 500; k < res.size(); ++k) h.push_back(steering_entropy(res[k], alpha).entropy);
    return h;
  };
  const auto h0 = se_all([](double x) { return x; });
  const auto hf = se_all([](double x) { return -x; });
  const auto hs = se_all([](double x) { return x + 12.5; });
  const auto hk = se_all([](double x) { return 2.5 * x; });
  double d_flip = 0, d_shift = 0, d_scale = 0;
  for (std::size_t i = 0; i < h0.size(); ++i) {
    se_in_range = se_in_range && h0[i] >= 0.0 && h0[i] <= 1.0;
    d_flip = std::max(d_flip, std::abs(h0[i] - hf[i]));
    d_shift = std::max(d_shift, std::abs(h0[i] - hs[i]));
    d_scale = std::max(d_scale, std::abs(h0[i] - hk[i]));
  }
  o.check(se_in_range, "SE within [0, 1] on 500 windows");
  o.check(d_flip < 1e-12 && d_shift < 1e-12,
          "SE unchanged under sign flip (max diff " + num(d_flip) + ") and offset (max diff " + num(d_shift) + ")");
  o.check(d_scale < 1e-9, "SE unchanged under scaling with alpha re-estimated (max diff " + num(d_scale) + ")");
  return o;
}

// 3. Sessionization against a left-to-right grouping oracle.
Outcome sessionization() {
  Outcome o;
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t bad_groups = 0, bad_windows = 0, clipped = 0, sequences = 0, boundary_gaps = 0;
  const PipelineConfig cfg;

  for (int trial = 0; trial < 500; ++trial) {
    Drive d;
    d.drive_id = "s" + std::to_string(trial);
    d.steering.start_time = std::floor(u(rng) * 20.0);
    const double length = 60.0 + std::floor(u(rng) * 400.0);
    const auto n = static_cast<std::size_t>(length * 5.0) + 1;
    d.steering.values.assign(n, 0.0);
    d.speed.start_time = d.steering.start_time;
    d.speed.values.assign(n, 50.0);

    // Gaps on a 0.1 s lattice so that exactly-10 s gaps occur.
    std::vector<double> times;
    double t = d.span_start() + std::floor(u(rng) * 40.0) / 10.0;
    while (t <= d.span_end()) {
      times.push_back(t);
      const double pick = u(rng);
      double gap;
      if (pick < 0.15) gap = 10.0;
      else if (pick < 0.25) gap = 9.9;
      else if (pick < 0.7) gap = std::ceil(u(rng) * 60.0) / 10.0;
      else gap = 10.0 + std::ceil(u(rng) * 300.0) / 10.0;
      if (gap == 10.0) ++boundary_gaps;
      t = std::round((t + gap) * 10.0) / 10.0;
    }
    for (double x : times) d.ui_events.push_back({x, "e", Gesture::Tap});

    const auto seqs = extract_interaction_sequences(d, cfg);
    const auto ids = oracle::group_ids(times, cfg.t_max);
    sequences += seqs.size();
    const std::size_t expected_groups = times.empty() ? 0 : ids.back() + 1;
    if (seqs.size() != expected_groups) {
      ++bad_groups;
      continue;
    }
    std::size_t k = 0;
    for (std::size_t g = 0; g < seqs.size(); ++g) {
      const auto& s = seqs[g];
      bool ok = !s.events.empty() && s.core_start == s.events.front().time &&
                s.core_end == s.events.back().time;
      for (const auto& e : s.events) ok = ok && k < times.size() && e.time == times[k] && ids[k++] == g;
      if (!ok) ++bad_groups;

      const double lo = s.core_start - cfg.t_buffer, hi = s.core_end + cfg.t_buffer;
      const bool needs_clip = lo < d.span_start() || hi > d.span_end();
      bool win_ok = needs_clip == s.clipped;
      if (s.clipped) {
        clipped += 1;
        win_ok = win_ok && s.window_start == std::max(lo, d.span_start()) &&
                 s.window_end == std::min(hi, d.span_end());
      } else {
        win_ok = win_ok && s.window_start == lo && s.window_end == hi;
      }
      if (!win_ok) ++bad_windows;
    }
    if (k != times.size()) ++bad_groups;
  }
  o.check(bad_groups == 0, "grouping matches the strict-gap oracle on 500 streams: " +
                               std::to_string(bad_groups) + " mismatches");
  o.check(bad_windows == 0, "windows equal core +/- 2 s unless flagged clipped: " +
                                std::to_string(bad_windows) + " violations");
  o.note(std::to_string(sequences) + " sequences, " + std::to_string(clipped) + " clipped, " +
         std::to_string(boundary_gaps) + " gaps of exactly 10 s");
  return o;
}

// 4. Stratified baseline sampling.
Outcome stratification() {
  Outcome o;
  std::size_t corpora_ok = 0, overlaps = 0, total_i = 0, total_b = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto c = episode_corpus(20, seed, 3.0, 2.0);
    c.random_episodes->min_duration = 1.0;
    c.random_episodes->max_duration = 25.0;
    auto drives = drives_of(synth::generate_corpus(c));
    // Sprinkle assistance intervals so some sequences are dropped and the
    // eligible spans are fragmented.
    Rng rng(mix_seed(seed, 99));
    for (auto& d : drives) {
      for (auto f : {AdasFeature::CruiseControl, AdasFeature::SteeringAssist}) {
        for (double t = rng.uniform(0.0, 120.0); t < d.span_end(); t += rng.uniform(60.0, 240.0)) {
          const double end = std::min(t + rng.uniform(5.0, 30.0), d.span_end());
          d.adas.push_back({t, end, f});
          t = end;
        }
      }
      std::sort(d.adas.begin(), d.adas.end(),
                [](const AdasInterval& a, const AdasInterval& b) { return a.start < b.start; });
    }

    PipelineConfig cfg;
    cfg.rng_seed = seed;
    const auto ex = extract_sequences(drives, cfg);
    const auto& sample = ex.baselines;
    total_i += ex.interactions.size();
    total_b += sample.sequences.size();

    // Independent histogram with the plan's edges: half-open bins, last one closed.
    const auto& edges = sample.plan.duration_bin_edges;
    auto histogram = [&](const std::vector<Sequence>& seqs) {
      std::vector<std::size_t> h(std::max<std::size_t>(edges.size(), 2) - 1, 0);
      for (const auto& s : seqs) {
        const double w = s.window_duration();
        std::size_t b = 0;
        while (b + 2 < edges.size() && w >= edges[b + 1]) ++b;
        ++h[b];
      }
      return h;
    };
    const bool counts_equal = histogram(ex.interactions) == histogram(sample.sequences) &&
                              ex.interactions.size() == sample.sequences.size() && sample.complete();
    if (counts_equal) ++corpora_ok;

    // Interval sweep per drive over baselines, every interaction window
    // (before the assistance filter) and assistance intervals.
    for (const auto& d : drives) {
      struct Iv {
        double a, b;
        bool baseline, closed;
      };
      std::vector<Iv> ivs;
      for (const auto& s : extract_interaction_sequences(d, cfg)) ivs.push_back({s.window_start, s.window_end, false, false});
      for (const auto& iv : d.adas) ivs.push_back({iv.start, iv.end, false, true});
      for (const auto& s : sample.sequences)
        if (s.drive_id == d.drive_id) ivs.push_back({s.window_start, s.window_end, true, false});
      std::sort(ivs.begin(), ivs.end(), [](const Iv& x, const Iv& y) { return x.a < y.a; });
      for (std::size_t i = 0; i < ivs.size(); ++i) {
        for (std::size_t j = i + 1; j < ivs.size() && ivs[j].a <= ivs[i].b; ++j) {
          if (!ivs[i].baseline && !ivs[j].baseline) continue;
          const bool closed = ivs[i].closed || ivs[j].closed;
          const bool hit = closed ? ivs[j].a <= ivs[i].b : ivs[j].a < ivs[i].b;
          if (hit) ++overlaps;
        }
      }
    }
  }
  o.check(corpora_ok == 5, "per-bin and total baseline counts equal interaction counts on " +
                               std::to_string(corpora_ok) + "/5 corpora");
  o.check(overlaps == 0, "baselines overlapping interaction windows, assistance or each other: " +
                             std::to_string(overlaps));
  o.note(std::to_string(total_i) + " interaction and " + std::to_string(total_b) + " baseline sequences");
  return o;
}

// 5. Sensitivity on synthetic distraction episodes.
Outcome sensitivity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();

  const auto distracted = drives_of(synth::generate_corpus(episode_corpus(50, 1, 3.0, 2.0)));
  ExtractResult ex;
  const auto r = run_pipeline(distracted, &ex);
  const auto* se = r.report.find("se", Curvature::Straight);
  const auto* sw = r.report.find("swrr_2", Curvature::Straight);
  o.note(std::to_string(ex.interactions.size()) + " episodes extracted, " +
         std::to_string(ex.baselines.sequences.size()) + " baselines, alpha = " + num(r.alpha.alpha));
  const bool have = se && se->d && sw && sw->d;
  o.check(have && *se->d > 0.2 && *se->interaction.mean > *se->baseline.mean,
          "SE: d = " + (have ? num(*se->d) : "n/a") + " (straight, n = " +
              (se ? std::to_string(se->interaction.n) + " vs " + std::to_string(se->baseline.n) : "0") + ")");
  o.check(have && *sw->d > 0.2 && *sw->interaction.mean > *sw->baseline.mean,
          "2 deg SWRR: d = " + (have ? num(*sw->d) : "n/a"));

  const auto null_drives = drives_of(synth::generate_corpus(episode_corpus(50, 1, 1.0, 1.0)));
  const auto n = run_pipeline(null_drives);
  const auto null_se = n.report.effect("se", Curvature::Straight);
  const auto null_sw = n.report.effect("swrr_2", Curvature::Straight);
  o.check(null_se && std::abs(*null_se) < 0.1, "null corpus SE: |d| = " + (null_se ? num(std::abs(*null_se)) : "n/a"));
  o.check(null_sw && std::abs(*null_sw) < 0.1,
          "null corpus 2 deg SWRR: |d| = " + (null_sw ? num(std::abs(*null_sw)) : "n/a"));

  const double elapsed = seconds_since(t0);
  o.check(elapsed < 60.0, "runtime " + num(elapsed, 3) + " s (limit 60 s)");
  return o;
}

// 6. Straight-road separation exceeds curved-road separation.
Outcome curvature_ordering() {
  Outcome o;
  auto c = episode_corpus(100, 1, 3.0, 2.0);
  std::vector<Drive> drives;
  for (std::size_t k = 0; k < c.n_drives; ++k) {
    auto ck = c;
    if (k % 2 == 1) ck.winding_road = synth::WindingRoad{};
    drives.push_back(synth::generate_drive(synth::drive_config(ck, k)).first);
  }
  const auto r = run_pipeline(drives);
  for (const auto& metric : r.report.metrics) {
    const auto s = r.report.effect(metric, Curvature::Straight);
    const auto cv = r.report.effect(metric, Curvature::Curved);
    const auto* cell_s = r.report.find(metric, Curvature::Straight);
    const auto* cell_c = r.report.find(metric, Curvature::Curved);
    const std::string line = metric + ": d(straight) = " + (s ? num(*s) : "n/a") +
                             ", d(curved) = " + (cv ? num(*cv) : "n/a") + "  [n " +
                             std::to_string(cell_s->interaction.n) + "/" +
                             std::to_string(cell_s->baseline.n) + " vs " +
                             std::to_string(cell_c->interaction.n) + "/" +
                             std::to_string(cell_c->baseline.n) + "]";
    if (metric == "se" || metric == "swrr_2")
      o.check(s && cv && *s > *cv, line);
    else
      o.note(line);
  }
  return o;
}

// 7. Determinism and throughput of extract + report through files.
Outcome determinism_and_performance() {
  Outcome o;
  const auto dir = scratch("perf");
  {
    std::ofstream cfg(dir / "synth.json");
    cfg << R"({"n_drives": 100, "seed": 7, "id_prefix": "perf", "duration": 1999.8,
               "road": {"winding": {}}, "speed": {"random": {}},
               "random_episodes": {"per_drive": 20}})";
  }
  std::ostringstream log, err;
  if (cmd_synth((dir / "synth.json").string(), (dir / "drives").string(), log, err) != 0) {
    o.check(false, "synth failed: " + err.str());
    return o;
  }
  std::size_t samples = 0;
  for (const auto& e : fs::directory_iterator(dir / "drives")) {
    if (e.path().extension() != ".jsonl") continue;
    auto parsed = read_drive_log(e.path());
    for (const auto& r : parsed.records) samples += r.kind == RecordKind::Steer;
  }

  auto run_once = [&](const std::string& out, std::size_t jobs) {
    RunOptions opts;
    opts.inputs = {(dir / "drives").string()};
    opts.out = (dir / out).string();
    opts.jobs = jobs;
    const auto t0 = std::chrono::steady_clock::now();
    const int a = cmd_extract(opts, log, err);
    const int b = a == 0 ? cmd_report(opts, log, err) : a;
    return std::make_pair(b, seconds_since(t0));
  };
  const auto [rc1, t1] = run_once("run1", 1);
  const auto [rc2, t2] = run_once("run2", 4);
  o.check(rc1 == 0 && rc2 == 0, "extract + report exit codes " + std::to_string(rc1) + ", " + std::to_string(rc2));
  o.check(samples == 1000000 && t1 < 30.0,
          std::to_string(samples) + " steering samples: extract + report in " + num(t1, 3) +
              " s on one thread (limit 30 s)");
  o.note("second run with 4 worker threads: " + num(t2, 3) + " s");

  std::size_t differing = 0;
  std::string list;
  for (const char* f : {"manifest.json", "report.csv", "report.json", "metrics.jsonl", "plot_se.csv",
                        "plot_swrr_2.csv", "interaction_sequences.jsonl", "baseline_sequences.jsonl"}) {
    const auto a = slurp(dir / "run1" / f), b = slurp(dir / "run2" / f);
    if (a.empty() || a != b) {
      ++differing;
      list += std::string(" ") + f;
    }
  }
  o.check(differing == 0, "byte-identical manifests, reports and sequence files across runs" +
                              (differing ? ":" + list : std::string()));
  fs::remove_all(dir);
  return o;
}

// 8. Ingestion round-trip and malformed-line handling.
Outcome ingestion_round_trip() {
  Outcome o;
  const auto dir = scratch("roundtrip");
  {
    std::ofstream cfg(dir / "synth.json");
    cfg << R"({"n_drives": 8, "seed": 12, "duration": 400, "road": {"winding": {}},
               "speed": {"random": {"segment": 45}}, "random_episodes": {"per_drive": 4}})";
  }
  std::ostringstream log, err;
  const int rc = cmd_synth((dir / "synth.json").string(), (dir / "drives").string(), log, err);
  o.check(rc == 0, "synth exit code " + std::to_string(rc));

  std::ifstream cin(dir / "synth.json");
  const auto corpus = synth::generate_corpus(synth::corpus_config_from_json(nlohmann::json::parse(cin)));
  std::size_t equal = 0, samples = 0;
  for (const auto& [drive, truth] : corpus) {
    const auto parsed = read_drive_log(dir / "drives" / (drive.drive_id + ".jsonl"));
    const auto back = assemble_drive(parsed.records, drive.drive_id);
    samples += drive.steering.size();
    if (parsed.rejects.empty() && back.size() == 1 && back[0] == drive) ++equal;
  }
  o.check(equal == corpus.size(), std::to_string(equal) + "/" + std::to_string(corpus.size()) +
                                      " drives bitwise equal after JSONL round-trip (" +
                                      std::to_string(samples) + " grid samples)");

  const fs::path data(STEERMETRICS_TEST_DATA);
  const auto jl = read_drive_log(data / "malformed.jsonl");
  const auto cs = read_drive_log(data / "malformed.csv");
  o.check(jl.rejects.size() == 8 && jl.records.size() == 103,
          "malformed.jsonl: " + std::to_string(jl.rejects.size()) + " rejects, " +
              std::to_string(jl.records.size()) + " records kept");
  o.check(cs.rejects.size() == 6 && cs.records.size() == 102,
          "malformed.csv: " + std::to_string(cs.rejects.size()) + " rejects, " +
              std::to_string(cs.records.size()) + " records kept");
  bool assembled = true;
  try {
    assembled = assemble_drive(jl.records, "malformed").size() == 1 &&
                assemble_drive(cs.records, "malformed_csv").size() == 1;
  } catch (const Error&) {
    assembled = false;
  }
  o.check(assembled, "drives with rejected lines still assemble");
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "metric correctness (oracle equivalence)", metric_correctness},
      {2, "analytic invariants", analytic_invariants},
      {3, "sessionization correctness", sessionization},
      {4, "stratification contract", stratification},
      {5, "sensitivity on synthetic distraction", sensitivity},
      {6, "curvature-condition ordering", curvature_ordering},
      {7, "determinism and performance", determinism_and_performance},
      {8, "ingestion round-trip", ingestion_round_trip},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.check(false, std::string("exception: ") + e.what());
    }
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << '\n';
    for (const auto& n : out.notes) std::cout << "        " << n << '\n';
    std::cout.flush();
    failed += out.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed == 0 ? 0 : 1;
}
