#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "porflow/core/model.hpp"
#include "porflow/metrics/metrics.hpp"
#include "porflow/picnn/picnn.hpp"
#include "porflow/sim/newton.hpp"

// Artifact writers. Every CSV is UTF-8 with a header row; numbers are
// printed with 10 significant digits so identical inputs give identical
// bytes. Schemas:
//   fields.csv    step,time,i,j,pressure,sw          (one row per step and cell)
//   steps.csv     step,time,newton_iterations,step_cuts,final_residual
//   mape.csv      step,time,mape_pressure,mape_saturation
//   wells.csv     step,time,well,wbp_pred,wbp_ref,oil_rate_pred,oil_rate_ref,water_rate_pred,water_rate_ref
//   training.csv  step,epochs_used,final_loss,physics_loss,data_loss,reached_sigma
//   bench.csv     case,nx,ny,dofs,parameters,sim_seconds_per_step,infer_seconds_per_step,train_seconds,speedup
//   error_map_<field>_step<k>.csv  i,j,relative_error
//
// trajectory.bin (little-endian): magic "PFTRAJ\0\0", u32 version 1, u32 nx,
// u32 ny, u32 state count, f64 dt, then per state nx*ny f64 pressures
// followed by nx*ny f64 water saturations (row-major, i fastest).
//
// Images are binary PPM (P6), one pixel per cell, row j = 0 at the top,
// coloured with a fixed viridis map between the field's min and max. The
// range used for each image is recorded in the run manifest.

namespace porflow::harness {

class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t config_hash, std::uint64_t seed);
  void add_file(const std::string& relative_path);
  void add_image(const std::string& relative_path, double lo, double hi);
  nlohmann::json& extra() { return extra_; }
  // Writes manifest.json (no timestamps) into dir.
  void write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  std::uint64_t config_hash_;
  std::uint64_t seed_;
  std::vector<std::string> files_;
  nlohmann::json images_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
};

void ensure_dir(const std::filesystem::path& dir);
// Atomic text write.
void write_text(const std::filesystem::path& path, const std::string& text);

std::string fmt_num(double v);

void write_fields_csv(const std::filesystem::path& path, const sim::Trajectory& traj, const GridSpec& grid,
                      double dt);
void write_steps_csv(const std::filesystem::path& path, const sim::Trajectory& traj, double dt);
void write_mape_csv(const std::filesystem::path& path, std::span<const metrics::StepErrors> errors, double dt);

struct WellRow {
  int step = 0;
  metrics::WellQuantities predicted;
  metrics::WellQuantities reference;
};
void write_wells_csv(const std::filesystem::path& path, std::span<const WellRow> rows, double dt);
void write_training_csv(const std::filesystem::path& path, std::span<const picnn::StepReport> reports);
void write_bench_csv(const std::filesystem::path& path, std::span<const metrics::SpeedupRow> rows);
void write_error_map_csv(const std::filesystem::path& path, std::span<const double> map, const GridSpec& grid);

void write_trajectory_binary(const std::filesystem::path& path, const sim::Trajectory& traj,
                             const GridSpec& grid, double dt);
sim::Trajectory read_trajectory_binary(const std::filesystem::path& path, GridSpec* grid = nullptr,
                                       double* dt = nullptr);

struct Rgb {
  unsigned char r, g, b;
};
// t in [0, 1] (clamped).
Rgb viridis(double t);

// Writes a P6 image and returns the {lo, hi} range used (lo == hi maps to mid colour).
std::pair<double, double> write_field_image(const std::filesystem::path& path, std::span<const double> field,
                                            const GridSpec& grid);

}  // namespace porflow::harness
