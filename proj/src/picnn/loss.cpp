#include <cmath>

#include "porflow/picnn/picnn.hpp"

namespace porflow::picnn {

double smooth_l1_value(double d, double beta) {
  const double a = std::abs(d);
  return a < beta ? 0.5 * d * d / beta : a - 0.5 * beta;
}

double smooth_l1_slope(double d, double beta) {
  if (std::abs(d) < beta) return d / beta;
  return d > 0.0 ? 1.0 : -1.0;
}

double smooth_l1(std::span<const double> values, double beta, std::span<double> grad) {
  if (!(beta > 0.0)) raise(ErrorKind::InvalidArgument, "smooth_l1: beta must be positive");
  if (values.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(values.size());
  double sum = 0.0;
  for (double d : values) sum += smooth_l1_value(d, beta);
  if (!grad.empty()) {
    if (grad.size() != values.size()) raise(ErrorKind::DimensionMismatch, "smooth_l1: gradient size");
    for (std::size_t i = 0; i < values.size(); ++i) grad[i] = smooth_l1_slope(values[i], beta) * inv_n;
  }
  return sum * inv_n;
}

double physics_loss(const fvm::Discretization& disc, const State& state_k, const State& state_km1,
                    std::span<const double> controls, double dt, double beta, StateGradient* grad) {
  const fvm::ResidualBundle r = disc.residual(state_k, state_km1, controls, dt);
  if (grad == nullptr) return smooth_l1(r.r_o, beta) + smooth_l1(r.r_w, beta);

  const std::size_t n = disc.cells();
  std::vector<double> g_o(n), g_w(n);
  const double loss = smooth_l1(r.r_o, beta, g_o) + smooth_l1(r.r_w, beta, g_w);
  grad->pressure.assign(n, 0.0);
  grad->sw.assign(n, 0.0);
  disc.residual_vjp(state_k, state_km1, controls, dt, g_o, g_w, grad->pressure, grad->sw);
  return loss;
}

double data_loss(const ReservoirCase& reservoir, const State& state,
                 std::span<const double> observed_wbp, std::span<double> grad_p) {
  const auto producers = reservoir.producer_indices();
  if (observed_wbp.size() != producers.size())
    raise(ErrorKind::MissingObservation, "one observed WBP per producer is required");
  if (producers.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(producers.size());
  double sum = 0.0;
  for (std::size_t p = 0; p < producers.size(); ++p) {
    if (!std::isfinite(observed_wbp[p]))
      raise(ErrorKind::MissingObservation, "missing WBP observation for '" + reservoir.wells[producers[p]].name + "'");
    const auto cell = static_cast<std::size_t>(reservoir.well_cell(producers[p]));
    const double d = state.pressure[cell] - observed_wbp[p];
    sum += std::abs(d);
    if (!grad_p.empty()) grad_p[cell] += (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) * inv_n;
  }
  return sum * inv_n;
}

}  // namespace porflow::picnn
