#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "porflow/core/model.hpp"
#include "porflow/nn/unet.hpp"
#include "porflow/picnn/picnn.hpp"
#include "porflow/sim/newton.hpp"

// Case files (`*.case`) are JSON documents. The grammar, every key and its
// default are documented in docs/case-format.md. load_config() materializes
// all defaults, converts lengths to feet, and keeps the result as a JSON
// document (`resolved`) that is itself a loadable case file.

namespace porflow::harness {

struct SweepConfig {
  int n_schedules = 10;
  std::vector<double> periods{50.0, 10.0};  // days
  double rate_lo = 1000.0;  // STB/day
  double rate_hi = 1500.0;
  double bhp_lo = 2300.0;  // psia
  double bhp_hi = 2500.0;
  std::uint64_t seed = 2024;
};

struct BenchConfig {
  std::vector<int> sizes{64, 100, 150};
  int steps = 3;
  int repeats = 3;
  double dt = 2.0;
  bool include_training = false;
};

struct CaseConfig {
  std::string name;
  ReservoirCase reservoir;
  ControlSchedule schedule;
  sim::NewtonConfig solver;
  nn::NetworkSpec network;
  picnn::TrainerConfig trainer;
  std::optional<picnn::ScalingParams> scaling;
  picnn::ControlBounds bounds;
  bool train_with_observations = false;
  std::vector<int> snapshot_steps;  // steps exported as images
  std::filesystem::path output_dir;
  std::uint64_t seed = 42;
  SweepConfig sweep;
  BenchConfig bench;

  nlohmann::json resolved;          // fully materialized document
  std::vector<std::string> defaults_applied;  // dotted keys filled in by defaults

  // Scaling actually used by training: the explicit one or the documented default.
  picnn::ScalingParams effective_scaling() const;
  // Hash of the resolved document without output.dir.
  std::uint64_t config_hash() const;
};

// Parses and validates a case file. Relative paths inside it resolve against
// the file's directory.
CaseConfig load_config(const std::filesystem::path& path);
CaseConfig load_config_text(const std::string& text, const std::filesystem::path& base_dir = ".",
                            const std::string& source_name = "<string>");

// Applies command-line overrides and re-resolves the document.
void apply_overrides(CaseConfig& cfg, std::optional<std::uint64_t> seed, std::optional<double> sigma,
                     std::optional<int> max_epochs, std::optional<std::filesystem::path> out_dir);

std::string resolved_dump(const CaseConfig& cfg);

}  // namespace porflow::harness
