#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "porflow/core/model.hpp"
#include "porflow/fvm/discretization.hpp"
#include "porflow/nn/unet.hpp"
#include "porflow/sim/newton.hpp"

// Physics-informed per-timestep surrogate: rasterized controls in, a state
// out, trained against the discrete residual of the finite-volume model.

namespace porflow::picnn {

// Normalization of the two control channels.
struct ControlBounds {
  double bhp_lo = 2300.0;  // psia
  double bhp_hi = 2500.0;
  double rate_hi = 1500.0;  // STB/day

  void validate() const;
};

// Affine maps applied after the sigmoid heads.
struct ScalingParams {
  double s_wc = 0.2;
  double s_or = 0.2;
  double p_min = 2100.0;
  double p_max = 3500.0;

  void validate() const;
  // p_min below every scheduled BHP.
  void validate_against(const ReservoirCase& reservoir, const ControlSchedule& schedule) const;
  // p_min = min scheduled BHP - 200, p_max = initial pressure + 500.
  static ScalingParams defaults(const ReservoirCase& reservoir, const ControlSchedule& schedule);

  double pressure(double x) const { return p_min + (p_max - p_min) * x; }
  double saturation(double x) const { return s_wc + (1.0 - s_or - s_wc) * x; }
};

struct TrainerConfig {
  double lr0 = 0.01;
  double lr_decay = 0.995;
  int decay_every = 100;  // epochs
  double smooth_l1_beta = 10.0;
  double sigma = 0.05;  // target loss
  int max_epochs = 2000;
  double physics_weight = 1.0;  // alpha_w
  double data_weight = 0.01;    // beta_w
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;

  void validate() const;
  double learning_rate(int epoch) const;
};

// Two-channel H x W image, channel-major. Pixel (row j, col i) is cell (i, j).
struct ControlImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int channel, int row, int col) const {
    return data[(static_cast<std::size_t>(channel) * height + row) * width + col];
  }
};

ControlImage rasterize_controls(const ReservoirCase& reservoir, std::span<const double> controls,
                                const ControlBounds& bounds);

// Zero-pads an image to the next multiple of `multiple` in both directions.
ControlImage pad_image(const ControlImage& image, int multiple);

// Crops the network output back to the grid and applies the scaling layers.
template <class T>
State decode_output(const typename nn::ParallelUNet<T>::Output& out, const GridSpec& grid,
                    const ScalingParams& scaling);

// Mean-reduced smooth-L1 against a zero target. When grad is non-empty it
// receives d(loss)/d(values).
double smooth_l1(std::span<const double> values, double beta, std::span<double> grad = {});
// Elementwise pieces, exposed for the continuity checks.
double smooth_l1_value(double d, double beta);
double smooth_l1_slope(double d, double beta);

struct StateGradient {
  std::vector<double> pressure;
  std::vector<double> sw;
};

// smooth_l1(r_o) + smooth_l1(r_w) of the residual at state_k; fills grad
// (d loss / d state_k) when non-null.
double physics_loss(const fvm::Discretization& disc, const State& state_k, const State& state_km1,
                    std::span<const double> controls, double dt, double beta,
                    StateGradient* grad = nullptr);

// Mean absolute well-block-pressure mismatch over producers; observed_wbp is
// ordered like reservoir.producer_indices(). Adds d/dP into grad_p when given.
double data_loss(const ReservoirCase& reservoir, const State& state,
                 std::span<const double> observed_wbp, std::span<double> grad_p = {});

// Everything the loss of one timestep depends on besides the weights.
struct StepProblem {
  const fvm::Discretization* disc = nullptr;
  State state_km1;
  std::vector<double> controls;
  double dt = 1.0;
  ScalingParams scaling;
  ControlBounds bounds;
  TrainerConfig config;
  std::optional<std::vector<double>> observed_wbp;
  // Called after every loss evaluation; epoch counts updates so far.
  std::function<void(int epoch, double loss)> on_epoch;
};

struct LossBreakdown {
  double total = 0.0;
  double physics = 0.0;
  double data = 0.0;
  State state;
};

// Network input for a step: rasterized, padded controls.
template <class T>
std::vector<T> network_input(const StepProblem& problem, int multiple, int* height, int* width);

// d loss / d (sigmoid outputs), on the padded image.
template <class T>
struct OutputGradient {
  std::vector<T> pressure;
  std::vector<T> saturation;
};

// One forward pass plus loss. With grad non-null the forward cache is kept and
// grad receives what net.backward() needs.
template <class T>
LossBreakdown evaluate_loss(nn::ParallelUNet<T>& net, const StepProblem& problem,
                            std::span<const T> input, int height, int width,
                            OutputGradient<T>* grad = nullptr);

class Adam {
 public:
  Adam(std::size_t n, const TrainerConfig& cfg);
  void step(std::span<float> weights, std::span<const float> grads, double lr);
  int steps_taken() const { return t_; }

 private:
  TrainerConfig cfg_;
  std::vector<float> m_, v_;
  int t_ = 0;
};

struct StepReport {
  int step = 0;  // k, 1-based
  int epochs_used = 0;  // optimizer updates performed
  double final_loss = 0.0;
  double physics_loss = 0.0;
  double data_loss = 0.0;
  bool reached_sigma = false;
  double wall_seconds = 0.0;
};

struct StepTraining {
  State state;
  StepReport report;
};

// Trains net in place for one timestep: forward, loss, stop test, backward, update.
StepTraining train_timestep(nn::ParallelUNet<float>& net, const StepProblem& problem);

struct CheckpointSet {
  nn::NetworkSpec spec;
  ScalingParams scaling;
  ControlBounds bounds;
  std::vector<nn::TensorInfo> layout;
  std::vector<std::vector<float>> weights;  // weights[k-1] after training step k
  std::vector<StepReport> reports;
  std::vector<State> states;  // training-time predictions, states[k-1] for step k

  std::size_t steps() const { return weights.size(); }
};

struct TrainOptions {
  TrainerConfig config;
  nn::NetworkSpec spec;
  std::optional<ScalingParams> scaling;  // defaults() when empty
  ControlBounds bounds;
  // observed_wbp[k-1] per producer; empty for physics-only training.
  std::vector<std::vector<double>> observed_wbp;
  std::function<void(const StepReport&)> on_step;
  std::function<void(int step, int epoch, double loss)> on_epoch;
};

// Sequential training with weight transfer between consecutive steps.
CheckpointSet train_all(const ReservoirCase& reservoir, const ControlSchedule& schedule,
                        const TrainOptions& options);

// Forward passes only, step by step from the case's initial state.
sim::Trajectory infer_trajectory(const CheckpointSet& checkpoints, const ReservoirCase& reservoir,
                                 const ControlSchedule& schedule);

}  // namespace porflow::picnn
