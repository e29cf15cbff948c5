#pragma once

#include <Eigen/SparseCore>

#include <span>
#include <vector>

#include "porflow/core/model.hpp"
#include "porflow/fvm/discretization.hpp"

namespace porflow::sim {

enum class JacobianMode { FiniteDifference, Analytic };

struct NewtonConfig {
  double residual_tol = 1e-6;  // on the pore-volume-scaled infinity norm
  int max_newton_iters = 25;
  JacobianMode jacobian_mode = JacobianMode::FiniteDifference;
  double linear_solver_tol = 1e-9;
  double damping = 0.2;  // max |dSw| per Newton iteration
  int max_step_cuts = 4;

  void validate() const;
};

struct StepDiagnostics {
  int iterations = 0;
  int step_cuts = 0;
  std::vector<double> residual_norms;  // scaled norm before each Newton update, then final
  double wall_seconds = 0.0;
};

struct Trajectory {
  std::vector<State> states;  // states[0] is the initial condition
  std::vector<StepDiagnostics> diagnostics;  // one per step, diagnostics[k-1] for step k
  std::vector<double> step_seconds;  // wall-clock per step

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

// Graph-coloured central-difference Jacobian. Cells sharing a colour are at
// least three stencil hops apart, so one perturbed residual per colour and
// unknown type recovers every column: 5 colours x 2 unknowns x 2 sides.
Eigen::SparseMatrix<double> finite_difference_jacobian(const fvm::Discretization& disc,
                                                       const State& state_k, const State& state_km1,
                                                       std::span<const double> controls, double dt);

Eigen::SparseMatrix<double> assemble_jacobian(const fvm::Discretization& disc, const State& state_k,
                                              const State& state_km1,
                                              std::span<const double> controls, double dt,
                                              JacobianMode mode);

struct StepResult {
  State state;
  StepDiagnostics diagnostics;
};

// Fully-implicit step; on Newton failure the interval is split in two
// half steps, recursively, at most cfg.max_step_cuts levels deep.
StepResult newton_solve_timestep(const fvm::Discretization& disc, const State& state_km1,
                                 std::span<const double> controls, double dt,
                                 const NewtonConfig& cfg);

Trajectory simulate(const fvm::Discretization& disc, const ControlSchedule& schedule,
                    const NewtonConfig& cfg);
Trajectory simulate(const ReservoirCase& reservoir, const ControlSchedule& schedule,
                    const NewtonConfig& cfg);

}  // namespace porflow::sim
