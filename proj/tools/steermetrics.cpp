// steermetrics: steering-based distraction metrics over drive logs.
//
//   steermetrics synth   --config synth.json --out drives/
//   steermetrics extract --input drives/ --config pipeline.json --out run/
//   steermetrics report  --input drives/ --config pipeline.json --out run/
//   steermetrics report  --all --input drives/ --out run/

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "steermetrics/pipeline.hpp"

namespace {

void add_run_flags(CLI::App* cmd, steermetrics::RunOptions& opts, std::optional<std::uint64_t>& seed,
                   std::string& config, std::size_t& jobs) {
  cmd->add_option("--config", config, "Pipeline configuration (JSON)");
  cmd->add_option("--input", opts.inputs, "Drive log file, directory or glob (repeatable)")->required();
  cmd->add_option("--out", opts.out, "Output directory")->required();
  cmd->add_option("--seed", seed, "Override the configured rng_seed");
  cmd->add_option("--jobs", jobs, "Worker threads (fallback: STEERMETRICS_JOBS)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steering entropy and reversal-rate analysis of drive logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(steermetrics::kToolVersion));

  std::string synth_config;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
  synth->add_option("--config", synth_config, "Synthetic corpus configuration (JSON)")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  steermetrics::RunOptions extract_opts;
  std::optional<std::uint64_t> extract_seed;
  std::string extract_config;
  std::size_t extract_jobs = 0;
  auto* extract = app.add_subcommand("extract", "Extract interaction and baseline sequences");
  add_run_flags(extract, extract_opts, extract_seed, extract_config, extract_jobs);

  steermetrics::RunOptions report_opts;
  std::optional<std::uint64_t> report_seed;
  std::string report_config;
  std::size_t report_jobs = 0;
  std::string report_format;
  std::string report_sequences;
  bool report_all = false;
  auto* report = app.add_subcommand("report", "Compute metrics and the comparison report");
  add_run_flags(report, report_opts, report_seed, report_config, report_jobs);
  report->add_option("--sequences", report_sequences, "Directory with extract output (default: --out)");
  report->add_option("--format", report_format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  report->add_flag("--all", report_all, "Run extract first, then report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : steermetrics::kExitConfig;
  }

  auto finish = [](steermetrics::RunOptions& o, const std::string& config,
                   const std::optional<std::uint64_t>& seed, std::size_t jobs) {
    if (!config.empty()) o.config = config;
    o.seed = seed;
    o.jobs = jobs;
  };

  if (*synth) return steermetrics::cmd_synth(synth_config, synth_out, std::cout, std::cerr);

  if (*extract) {
    finish(extract_opts, extract_config, extract_seed, extract_jobs);
    return steermetrics::cmd_extract(extract_opts, std::cout, std::cerr);
  }

  finish(report_opts, report_config, report_seed, report_jobs);
  if (!report_format.empty()) report_opts.format = report_format;
  if (!report_sequences.empty()) report_opts.sequences = report_sequences;
  if (report_all) {
    if (const int rc = steermetrics::cmd_extract(report_opts, std::cout, std::cerr); rc != 0) return rc;
    report_opts.sequences = report_opts.out;
  }
  return steermetrics::cmd_report(report_opts, std::cout, std::cerr);
}
