#pragma once

#include "steermetrics/config.hpp"
#include "steermetrics/error.hpp"
#include "steermetrics/filter.hpp"
#include "steermetrics/ingest.hpp"
#include "steermetrics/metrics.hpp"
#include "steermetrics/pipeline.hpp"
#include "steermetrics/sequencer.hpp"
#include "steermetrics/stats_report.hpp"
#include "steermetrics/synth.hpp"
#include "steermetrics/telemetry_model.hpp"
