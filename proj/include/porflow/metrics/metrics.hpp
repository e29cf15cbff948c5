#pragma once

#include <span>
#include <string>
#include <vector>

#include "porflow/core/model.hpp"
#include "porflow/sim/newton.hpp"

namespace porflow::metrics {

// mean |y - y_hat| / max |y|, the max taken over the reference field.
double mape(std::span<const double> y, std::span<const double> y_hat);

// (x_pred - x_ref) / x_ref per pixel.
std::vector<double> relative_error_map(std::span<const double> x_pred, std::span<const double> x_ref);

struct WellQuantities {
  std::string well;
  double wbp = 0.0;      // psia
  double oil_rate = 0.0;  // STB/day, positive when producing
  double water_rate = 0.0;
};

// Per producer, in reservoir.producer_indices() order.
std::vector<WellQuantities> extract_well_quantities(const State& state, const ReservoirCase& reservoir,
                                                    std::span<const double> controls);

struct StepErrors {
  int step = 0;
  double mape_pressure = 0.0;
  double mape_saturation = 0.0;
};

// Per-step MAPE of a predicted trajectory against a reference; both start at the initial state.
std::vector<StepErrors> trajectory_errors(const sim::Trajectory& predicted, const sim::Trajectory& reference);

struct SpeedupRow {
  std::string case_name;
  int nx = 0;
  int ny = 0;
  std::size_t dofs = 0;
  std::size_t parameters = 0;
  double simulation_seconds = 0.0;  // per step
  double inference_seconds = 0.0;   // per step
  double training_seconds = 0.0;    // whole run, 0 when not measured
  double speedup = 0.0;             // simulation / inference
};

struct SpeedupInput {
  std::string case_name;
  int nx = 0;
  int ny = 0;
  std::size_t parameters = 0;
  double simulation_seconds = 0.0;
  double inference_seconds = 0.0;
  double training_seconds = 0.0;
};

std::vector<SpeedupRow> speedup_report(std::span<const SpeedupInput> cases);

double median(std::vector<double> values);

}  // namespace porflow::metrics
