#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "porflow/harness/config.hpp"
#include "porflow/metrics/metrics.hpp"
#include "porflow/picnn/picnn.hpp"
#include "porflow/sim/newton.hpp"

// Workflows behind the command-line verbs. Each writes into
// <out>/<command>/ together with a manifest.json; <out>/resolved.case holds
// the fully resolved configuration.

namespace porflow::harness {

struct RunOptions {
  std::filesystem::path out_dir;           // defaults to cfg.output_dir
  std::optional<std::filesystem::path> checkpoints;  // defaults to <out>/train/checkpoints
  std::ostream* log = nullptr;             // progress lines
};

std::filesystem::path output_root(const CaseConfig& cfg, const RunOptions& opts);
std::filesystem::path checkpoint_dir(const CaseConfig& cfg, const RunOptions& opts);

sim::Trajectory run_simulate(const CaseConfig& cfg, const RunOptions& opts);

// WBP per producer and step taken from a Newton run on the case schedule.
std::vector<std::vector<double>> oracle_observations(const CaseConfig& cfg, const sim::Trajectory& reference);

picnn::CheckpointSet run_train(const CaseConfig& cfg, const RunOptions& opts);

sim::Trajectory run_infer(const CaseConfig& cfg, const RunOptions& opts);

struct CompareResult {
  std::vector<metrics::StepErrors> errors;
  sim::Trajectory predicted;
  sim::Trajectory reference;
};
CompareResult run_compare(const CaseConfig& cfg, const RunOptions& opts);

std::vector<metrics::SpeedupRow> run_bench(const CaseConfig& cfg, const RunOptions& opts);

struct SweepEntry {
  double period = 0.0;
  int schedule = 0;
  double mean_mape_pressure = 0.0;
  double mean_mape_saturation = 0.0;
};
struct SweepResult {
  std::vector<SweepEntry> entries;
  // Ensemble means per period, in cfg.sweep.periods order.
  std::vector<double> periods;
  std::vector<double> mean_mape_pressure;
  std::vector<double> mean_mape_saturation;
};
SweepResult run_sweep(const CaseConfig& cfg, const RunOptions& opts);

// Worker count for parallel fan-out: PORFLOW_THREADS if set, else the
// hardware concurrency, never more than jobs.
int worker_count(int jobs);

}  // namespace porflow::harness
