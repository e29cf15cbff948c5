#pragma once

// Physics-loss gradient with respect to network weights, checked against
// central differences of the full forward + residual + smooth-L1 chain.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracle.hpp"
#include "porflow/fvm/discretization.hpp"
#include "porflow/nn/unet.hpp"
#include "porflow/picnn/picnn.hpp"

namespace porflow::testing {

struct GradCheckResult {
  int checked = 0;
  double worst_relative = 0.0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

inline GradCheckResult physics_gradient_check(const nn::NetworkSpec& spec, int n_params, std::uint64_t seed) {
  const ReservoirCase rc = small_case(4, 4, seed);
  const fvm::Discretization disc(rc);
  ControlSchedule sched;
  sched.dt = 2.0;
  sched.n_steps = 1;
  sched.values = {{1200.0}, {2400.0}};

  picnn::StepProblem problem;
  problem.disc = &disc;
  problem.state_km1 = rc.initial;
  problem.controls = sched.controls_at(1);
  problem.dt = 2.0;
  problem.scaling = picnn::ScalingParams::defaults(rc, sched);

  nn::ParallelUNet<double> net(spec);
  net.init_kaiming(seed);
  int h = 0, w = 0;
  const auto input = picnn::network_input<double>(problem, spec.size_multiple(), &h, &w);

  net.zero_grad();
  picnn::OutputGradient<double> og;
  (void)picnn::evaluate_loss<double>(net, problem, input, h, w, &og);
  net.backward(og.pressure, og.saturation);
  const std::vector<double> grad(net.gradients().begin(), net.gradients().end());

  GradCheckResult res;
  std::mt19937_64 rng(seed * 7919 + 1);
  std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
  // Draw among parameters that actually influence the loss; exactly-zero
  // gradients (e.g. convolutions feeding a 1x1 normalization) carry no signal.
  int attempts = 0;
  while (res.checked < n_params && attempts++ < 100 * n_params) {
    const std::size_t i = pick(rng);
    if (grad[i] == 0.0) continue;
    const double p0 = net.parameters()[i];
    const double step = 1e-5 * std::max(1.0, std::abs(p0));
    net.parameters()[i] = p0 + step;
    const double lp = picnn::evaluate_loss<double>(net, problem, input, h, w).total;
    net.parameters()[i] = p0 - step;
    const double lm = picnn::evaluate_loss<double>(net, problem, input, h, w).total;
    net.parameters()[i] = p0;
    const double fd = (lp - lm) / (2.0 * step);
    const double rel = std::abs(fd - grad[i]) / std::max(std::abs(fd), std::abs(grad[i]));
    res.worst_relative = std::max(res.worst_relative, rel);
    res.analytic.push_back(grad[i]);
    res.numeric.push_back(fd);
    ++res.checked;
  }
  return res;
}

}  // namespace porflow::testing
