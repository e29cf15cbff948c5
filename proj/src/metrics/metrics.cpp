#include "porflow/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "porflow/fvm/discretization.hpp"

namespace porflow::metrics {

double mape(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) raise(ErrorKind::DimensionMismatch, "mape: field sizes differ");
  if (y.empty()) raise(ErrorKind::DegenerateReference, "mape: empty reference field");
  double denom = 0.0;
  for (double v : y) denom = std::max(denom, std::abs(v));
  if (denom == 0.0) raise(ErrorKind::DegenerateReference, "mape: reference field is identically zero");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += std::abs(y[i] - y_hat[i]);
  return sum / static_cast<double>(y.size()) / denom;
}

std::vector<double> relative_error_map(std::span<const double> x_pred, std::span<const double> x_ref) {
  if (x_pred.size() != x_ref.size()) raise(ErrorKind::DimensionMismatch, "relative error: field sizes differ");
  std::vector<double> out(x_ref.size());
  for (std::size_t i = 0; i < x_ref.size(); ++i) {
    if (x_ref[i] == 0.0)
      raise(ErrorKind::DivisionByZeroPixel, "relative error: reference is zero at pixel " + std::to_string(i));
    out[i] = (x_pred[i] - x_ref[i]) / x_ref[i];
  }
  return out;
}

std::vector<WellQuantities> extract_well_quantities(const State& state, const ReservoirCase& reservoir,
                                                    std::span<const double> controls) {
  const fvm::WellSources q = fvm::well_source_terms(state, reservoir, controls);
  std::vector<WellQuantities> out;
  for (std::size_t w : reservoir.producer_indices()) {
    const auto cell = static_cast<std::size_t>(reservoir.well_cell(w));
    out.push_back({reservoir.wells[w].name, state.pressure[cell], -q.q_o[cell], -q.q_w[cell]});
  }
  return out;
}

std::vector<StepErrors> trajectory_errors(const sim::Trajectory& predicted, const sim::Trajectory& reference) {
  if (predicted.steps() != reference.steps())
    raise(ErrorKind::DimensionMismatch, "trajectories have different step counts");
  std::vector<StepErrors> out;
  for (std::size_t k = 1; k <= reference.steps(); ++k)
    out.push_back({static_cast<int>(k), mape(reference.states[k].pressure, predicted.states[k].pressure),
                   mape(reference.states[k].sw, predicted.states[k].sw)});
  return out;
}

std::vector<SpeedupRow> speedup_report(std::span<const SpeedupInput> cases) {
  std::vector<SpeedupRow> rows;
  for (const SpeedupInput& c : cases) {
    SpeedupRow r;
    r.case_name = c.case_name;
    r.nx = c.nx;
    r.ny = c.ny;
    r.dofs = 2 * static_cast<std::size_t>(c.nx) * c.ny;
    r.parameters = c.parameters;
    r.simulation_seconds = c.simulation_seconds;
    r.inference_seconds = c.inference_seconds;
    r.training_seconds = c.training_seconds;
    r.speedup = c.inference_seconds > 0.0 ? c.simulation_seconds / c.inference_seconds : 0.0;
    rows.push_back(r);
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace porflow::metrics
