#include <chrono>
#include <cmath>
#include <string>

#include "porflow/picnn/picnn.hpp"
#include "porflow/simd/kernels.hpp"

namespace porflow::picnn {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

template <class T>
std::vector<T> network_input(const StepProblem& problem, int multiple, int* height, int* width) {
  const ControlImage img =
      pad_image(rasterize_controls(problem.disc->reservoir(), problem.controls, problem.bounds), multiple);
  *height = img.height;
  *width = img.width;
  return std::vector<T>(img.data.begin(), img.data.end());
}

template <class T>
LossBreakdown evaluate_loss(nn::ParallelUNet<T>& net, const StepProblem& problem,
                            std::span<const T> input, int height, int width, OutputGradient<T>* grad) {
  const fvm::Discretization& disc = *problem.disc;
  const ReservoirCase& rc = disc.reservoir();
  const TrainerConfig& cfg = problem.config;
  const auto out = net.forward(input, height, width, grad != nullptr);

  LossBreakdown lb;
  lb.state = decode_output<T>(out, rc.grid, problem.scaling);
  for (std::size_t c = 0; c < lb.state.size(); ++c)
    if (!std::isfinite(lb.state.pressure[c]) || !std::isfinite(lb.state.sw[c]))
      raise(ErrorKind::DivergedTraining, "network output became non-finite");
  StateGradient sg;
  lb.physics = physics_loss(disc, lb.state, problem.state_km1, problem.controls, problem.dt,
                            cfg.smooth_l1_beta, grad != nullptr ? &sg : nullptr);
  lb.total = cfg.physics_weight * lb.physics;
  std::vector<double> data_grad;
  if (problem.observed_wbp) {
    if (grad != nullptr) data_grad.assign(disc.cells(), 0.0);
    lb.data = data_loss(rc, lb.state, *problem.observed_wbp, data_grad);
    lb.total += cfg.data_weight * lb.data;
  }
  if (grad == nullptr) return lb;

  const double p_span = problem.scaling.p_max - problem.scaling.p_min;
  const double s_span = 1.0 - problem.scaling.s_or - problem.scaling.s_wc;
  grad->pressure.assign(out.pressure.size(), T(0));
  grad->saturation.assign(out.saturation.size(), T(0));
  for (int j = 0; j < rc.grid.ny; ++j)
    for (int i = 0; i < rc.grid.nx; ++i) {
      const auto c = static_cast<std::size_t>(rc.grid.index(i, j));
      const auto px = static_cast<std::size_t>(j) * width + i;
      double dp = cfg.physics_weight * sg.pressure[c];
      if (!data_grad.empty()) dp += cfg.data_weight * data_grad[c];
      grad->pressure[px] = static_cast<T>(dp * p_span);
      grad->saturation[px] = static_cast<T>(cfg.physics_weight * sg.sw[c] * s_span);
    }
  return lb;
}

template std::vector<float> network_input<float>(const StepProblem&, int, int*, int*);
template std::vector<double> network_input<double>(const StepProblem&, int, int*, int*);
template LossBreakdown evaluate_loss<float>(nn::ParallelUNet<float>&, const StepProblem&,
                                            std::span<const float>, int, int, OutputGradient<float>*);
template LossBreakdown evaluate_loss<double>(nn::ParallelUNet<double>&, const StepProblem&,
                                             std::span<const double>, int, int,
                                             OutputGradient<double>*);

Adam::Adam(std::size_t n, const TrainerConfig& cfg) : cfg_(cfg), m_(n, 0.0f), v_(n, 0.0f) {}

void Adam::step(std::span<float> weights, std::span<const float> grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
  simd::Ops<float>::adam_update(weights.size(), weights.data(), grads.data(), m_.data(), v_.data(),
                                static_cast<float>(cfg_.adam_beta1), static_cast<float>(cfg_.adam_beta2),
                                static_cast<float>(lr / bc1), static_cast<float>(1.0 / std::sqrt(bc2)),
                                static_cast<float>(cfg_.adam_eps));
}

StepTraining train_timestep(nn::ParallelUNet<float>& net, const StepProblem& problem) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainerConfig& cfg = problem.config;
  int h = 0, w = 0;
  const std::vector<float> input = network_input<float>(problem, net.spec().size_multiple(), &h, &w);

  // Moments and schedule start fresh every timestep; only the weights carry over.
  Adam adam(net.parameter_count(), cfg);
  OutputGradient<float> og;
  StepTraining result;
  for (int epoch = 0;; ++epoch) {
    LossBreakdown lb = evaluate_loss<float>(net, problem, input, h, w, &og);
    if (!std::isfinite(lb.total))
      raise(ErrorKind::DivergedTraining, "loss became non-finite at epoch " + std::to_string(epoch));
    if (problem.on_epoch) problem.on_epoch(epoch, lb.total);
    const bool reached = lb.total <= cfg.sigma;
    if (reached || epoch >= cfg.max_epochs) {
      result.state = std::move(lb.state);
      result.report.epochs_used = epoch;
      result.report.final_loss = lb.total;
      result.report.physics_loss = lb.physics;
      result.report.data_loss = lb.data;
      result.report.reached_sigma = reached;
      break;
    }
    net.zero_grad();
    net.backward(og.pressure, og.saturation);
    adam.step(net.parameters(), net.gradients(), cfg.learning_rate(epoch));
  }
  result.report.wall_seconds = seconds_since(t0);
  return result;
}

CheckpointSet train_all(const ReservoirCase& reservoir, const ControlSchedule& schedule,
                        const TrainOptions& options) {
  reservoir.validate();
  schedule.validate(reservoir.wells);
  options.config.validate();
  options.bounds.validate();
  const ScalingParams scaling = options.scaling.value_or(ScalingParams::defaults(reservoir, schedule));
  scaling.validate_against(reservoir, schedule);
  if (!options.observed_wbp.empty() &&
      options.observed_wbp.size() != static_cast<std::size_t>(schedule.n_steps))
    raise(ErrorKind::MissingObservation, "observations must cover every step");

  const fvm::Discretization disc(reservoir);
  nn::ParallelUNet<float> net(options.spec);
  net.init_kaiming(options.config.seed);

  CheckpointSet set;
  set.spec = options.spec;
  set.scaling = scaling;
  set.bounds = options.bounds;
  set.layout = net.layout();

  StepProblem problem;
  problem.disc = &disc;
  problem.state_km1 = reservoir.initial;
  problem.dt = schedule.dt;
  problem.scaling = scaling;
  problem.bounds = options.bounds;
  problem.config = options.config;
  for (int k = 1; k <= schedule.n_steps; ++k) {
    problem.controls = schedule.controls_at(k);
    if (options.on_epoch)
      problem.on_epoch = [&options, k](int epoch, double loss) { options.on_epoch(k, epoch, loss); };
    if (!options.observed_wbp.empty()) problem.observed_wbp = options.observed_wbp[static_cast<std::size_t>(k - 1)];
    StepTraining st;
    try {
      st = train_timestep(net, problem);
    } catch (const Error& e) {
      raise(e.kind(), "step " + std::to_string(k) + ": " + e.what());
    }
    st.report.step = k;
    set.weights.emplace_back(net.parameters().begin(), net.parameters().end());
    set.reports.push_back(st.report);
    set.states.push_back(st.state);
    if (options.on_step) options.on_step(st.report);
    problem.state_km1 = std::move(st.state);
  }
  return set;
}

sim::Trajectory infer_trajectory(const CheckpointSet& checkpoints, const ReservoirCase& reservoir,
                                 const ControlSchedule& schedule) {
  if (checkpoints.steps() < static_cast<std::size_t>(schedule.n_steps))
    raise(ErrorKind::MissingCheckpoint, "checkpoint set covers " + std::to_string(checkpoints.steps()) +
                                            " steps, schedule needs " + std::to_string(schedule.n_steps));
  nn::ParallelUNet<float> net(checkpoints.spec);
  if (net.parameter_count() != (checkpoints.weights.empty() ? 0 : checkpoints.weights[0].size()))
    raise(ErrorKind::SpecHashMismatch, "checkpoint weights do not match the network spec");

  sim::Trajectory traj;
  traj.states.push_back(reservoir.initial);
  for (int k = 1; k <= schedule.n_steps; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> controls = schedule.controls_at(k);
    const ControlImage img =
        pad_image(rasterize_controls(reservoir, controls, checkpoints.bounds), net.spec().size_multiple());
    const auto& weights = checkpoints.weights[static_cast<std::size_t>(k - 1)];
    std::copy(weights.begin(), weights.end(), net.parameters().begin());
    const auto out = net.forward(img.data, img.height, img.width, false);
    traj.states.push_back(decode_output<float>(out, reservoir.grid, checkpoints.scaling));
    traj.step_seconds.push_back(seconds_since(t0));
    traj.diagnostics.push_back({});
  }
  return traj;
}

}  // namespace porflow::picnn
