#pragma once

// JSON form of PipelineConfig. Unknown keys are rejected so typos surface
// as configuration errors instead of silently falling back to defaults.

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "steermetrics/error.hpp"
#include "steermetrics/telemetry_model.hpp"

namespace steermetrics {

inline nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["t_max"] = cfg.t_max;
  j["t_buffer"] = cfg.t_buffer;
  j["alpha_percentile"] = cfg.alpha_percentile;
  j["swrr_gaps"] = cfg.swrr_gaps;
  j["lowpass_cutoff"] = cfg.lowpass_cutoff;
  j["curvature_threshold"] = cfg.curvature_threshold;
  j["curvature_fraction"] = cfg.curvature_fraction;
  auto edges = nlohmann::ordered_json::array();
  for (double e : cfg.speed_bucket_edges) {
    if (std::isinf(e)) edges.push_back("inf");
    else edges.push_back(e);
  }
  j["speed_bucket_edges"] = edges;
  j["rng_seed"] = cfg.rng_seed;
  j["sample_rate"] = cfg.sample_rate;
  j["max_gap"] = cfg.max_gap;
  j["duration_bins"] = cfg.duration_bins;
  j["predictor"] = cfg.predictor == Predictor::Quadratic ? "quadratic" : "nakayama";
  return j;
}

/// Overlays the keys present in `j` onto the defaults and validates.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  static const std::set<std::string> known{
      "t_max", "t_buffer", "alpha_percentile", "swrr_gaps", "lowpass_cutoff",
      "curvature_threshold", "curvature_fraction", "speed_bucket_edges", "rng_seed",
      "sample_rate", "max_gap", "duration_bins", "predictor"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");

  PipelineConfig cfg;
  auto field = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::InvalidConfig, std::string(key) + " has the wrong type");
    }
  };
  field("t_max", cfg.t_max);
  field("t_buffer", cfg.t_buffer);
  field("alpha_percentile", cfg.alpha_percentile);
  field("swrr_gaps", cfg.swrr_gaps);
  field("lowpass_cutoff", cfg.lowpass_cutoff);
  field("curvature_threshold", cfg.curvature_threshold);
  field("curvature_fraction", cfg.curvature_fraction);
  field("rng_seed", cfg.rng_seed);
  field("sample_rate", cfg.sample_rate);
  field("max_gap", cfg.max_gap);
  field("duration_bins", cfg.duration_bins);
  if (j.contains("speed_bucket_edges")) {
    const auto& edges = j.at("speed_bucket_edges");
    if (!edges.is_array()) throw Error(ErrorCode::InvalidConfig, "speed_bucket_edges must be an array");
    cfg.speed_bucket_edges.clear();
    for (const auto& e : edges) {
      if (e.is_number()) cfg.speed_bucket_edges.push_back(e.get<double>());
      else if (e.is_null() || (e.is_string() && e.get<std::string>() == "inf"))
        cfg.speed_bucket_edges.push_back(std::numeric_limits<double>::infinity());
      else throw Error(ErrorCode::InvalidConfig, "speed_bucket_edges entries must be numbers or \"inf\"");
    }
  }
  if (j.contains("predictor")) {
    const auto p = j.at("predictor");
    if (p == "quadratic") cfg.predictor = Predictor::Quadratic;
    else if (p == "nakayama") cfg.predictor = Predictor::Nakayama;
    else throw Error(ErrorCode::InvalidConfig, "predictor must be \"quadratic\" or \"nakayama\"");
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, "config '" + path + "' is not valid JSON");
  return pipeline_config_from_json(j);
}

}  // namespace steermetrics
