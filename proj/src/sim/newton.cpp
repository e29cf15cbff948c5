#include "porflow/sim/newton.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace porflow::sim {

void NewtonConfig::validate() const {
  if (!(residual_tol > 0.0)) raise(ErrorKind::ValidationError, "solver: residual_tol must be positive");
  if (max_newton_iters < 1) raise(ErrorKind::ValidationError, "solver: max_newton_iters must be >= 1");
  if (!(linear_solver_tol > 0.0))
    raise(ErrorKind::ValidationError, "solver: linear_solver_tol must be positive");
  if (!(damping > 0.0)) raise(ErrorKind::ValidationError, "solver: damping must be positive");
  if (max_step_cuts < 0) raise(ErrorKind::ValidationError, "solver: max_step_cuts must be >= 0");
}

Eigen::SparseMatrix<double> finite_difference_jacobian(const fvm::Discretization& disc,
                                                       const State& state_k, const State& state_km1,
                                                       std::span<const double> controls, double dt) {
  const GridSpec& grid = disc.reservoir().grid;
  const std::size_t n = disc.cells();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(n * 20);

  auto neighbours = [&grid](int cell, int* out) {
    const int i = grid.col(cell), j = grid.row(cell);
    int count = 0;
    out[count++] = cell;
    if (i > 0) out[count++] = cell - 1;
    if (i + 1 < grid.nx) out[count++] = cell + 1;
    if (j > 0) out[count++] = cell - grid.nx;
    if (j + 1 < grid.ny) out[count++] = cell + grid.nx;
    return count;
  };

  std::vector<double> h(n);
  for (int unknown = 0; unknown < 2; ++unknown) {
    for (int colour = 0; colour < 5; ++colour) {
      State plus = state_k, minus = state_k;
      bool any = false;
      for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
          if ((i + 2 * j) % 5 != colour) continue;
          const auto c = static_cast<std::size_t>(grid.index(i, j));
          std::vector<double>& xp = unknown == 0 ? plus.pressure : plus.sw;
          std::vector<double>& xm = unknown == 0 ? minus.pressure : minus.sw;
          const double x = unknown == 0 ? state_k.pressure[c] : state_k.sw[c];
          h[c] = std::max(1e-6 * std::abs(x), 1e-8);
          xp[c] = x + h[c];
          xm[c] = x - h[c];
          any = true;
        }
      }
      if (!any) continue;
      const fvm::ResidualBundle rp = disc.residual(plus, state_km1, controls, dt);
      const fvm::ResidualBundle rm = disc.residual(minus, state_km1, controls, dt);
      for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
          if ((i + 2 * j) % 5 != colour) continue;
          const int c = grid.index(i, j);
          const auto col = static_cast<int>(unknown * n) + c;
          const double inv = 0.5 / h[static_cast<std::size_t>(c)];
          int rows[5];
          const int count = neighbours(c, rows);
          for (int r = 0; r < count; ++r) {
            const auto row = static_cast<std::size_t>(rows[r]);
            entries.emplace_back(rows[r], col, (rp.r_o[row] - rm.r_o[row]) * inv);
            entries.emplace_back(static_cast<int>(n) + rows[r], col, (rp.r_w[row] - rm.r_w[row]) * inv);
          }
        }
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(2 * n);
  Eigen::SparseMatrix<double> jac(dim, dim);
  jac.setFromTriplets(entries.begin(), entries.end());
  jac.makeCompressed();
  return jac;
}

Eigen::SparseMatrix<double> assemble_jacobian(const fvm::Discretization& disc, const State& state_k,
                                              const State& state_km1,
                                              std::span<const double> controls, double dt,
                                              JacobianMode mode) {
  if (mode == JacobianMode::Analytic) return disc.jacobian(state_k, state_km1, controls, dt);
  return finite_difference_jacobian(disc, state_k, state_km1, controls, dt);
}

namespace {

Eigen::VectorXd stack(const fvm::ResidualBundle& r) {
  const auto n = static_cast<Eigen::Index>(r.r_o.size());
  Eigen::VectorXd v(2 * n);
  for (Eigen::Index c = 0; c < n; ++c) {
    v[c] = r.r_o[static_cast<std::size_t>(c)];
    v[n + c] = r.r_w[static_cast<std::size_t>(c)];
  }
  return v;
}

Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& jac, const Eigen::VectorXd& rhs,
                             double tol) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(jac);
  lu.factorize(jac);
  if (lu.info() != Eigen::Success)
    raise(ErrorKind::SingularJacobian, "sparse LU factorization failed: " + lu.lastErrorMessage());
  Eigen::VectorXd x = lu.solve(rhs);
  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  Eigen::VectorXd res = rhs - jac * x;
  for (int refine = 0; refine < 3 && res.norm() / rhs_norm >= tol; ++refine) {
    x += lu.solve(res);
    res = rhs - jac * x;
  }
  if (!x.allFinite() || res.norm() / rhs_norm >= tol)
    raise(ErrorKind::SingularJacobian, "linear solve did not reach the requested accuracy");
  return x;
}

bool newton_attempt(const fvm::Discretization& disc, const State& state_km1,
                    std::span<const double> controls, double dt, const NewtonConfig& cfg,
                    State& state, StepDiagnostics& diag) {
  const std::size_t n = disc.cells();
  state = state_km1;
  for (int iter = 0;; ++iter) {
    const fvm::ResidualBundle r = disc.residual(state, state_km1, controls, dt);
    const double norm = disc.scaled_residual_norm(r, dt);
    diag.residual_norms.push_back(norm);
    if (!std::isfinite(norm)) return false;
    if (norm < cfg.residual_tol) return true;
    if (iter >= cfg.max_newton_iters) return false;

    const Eigen::SparseMatrix<double> jac =
        assemble_jacobian(disc, state, state_km1, controls, dt, cfg.jacobian_mode);
    const Eigen::VectorXd delta = solve_linear(jac, -stack(r), cfg.linear_solver_tol);
    double max_ds = 0.0;
    for (std::size_t c = 0; c < n; ++c)
      max_ds = std::max(max_ds, std::abs(delta[static_cast<Eigen::Index>(n + c)]));
    const double scale = max_ds > cfg.damping ? cfg.damping / max_ds : 1.0;
    for (std::size_t c = 0; c < n; ++c) {
      state.pressure[c] += scale * delta[static_cast<Eigen::Index>(c)];
      state.sw[c] += scale * delta[static_cast<Eigen::Index>(n + c)];
    }
    ++diag.iterations;
  }
}

StepResult solve_with_cuts(const fvm::Discretization& disc, const State& state_km1,
                           std::span<const double> controls, double dt, const NewtonConfig& cfg,
                           int depth) {
  StepResult out;
  try {
    if (newton_attempt(disc, state_km1, controls, dt, cfg, out.state, out.diagnostics))
      return out;
  } catch (const Error& e) {
    // FVF blow-ups from a wild iterate are treated like non-convergence.
    if (e.kind() != ErrorKind::NonPhysicalFvf && e.kind() != ErrorKind::SingularJacobian) throw;
    if (depth >= cfg.max_step_cuts) throw;
  }
  if (depth >= cfg.max_step_cuts) {
    std::ostringstream os;
    os << "Newton did not converge after " << depth << " step cuts (dt = " << dt << " days)";
    raise(ErrorKind::NonConvergence, os.str());
  }
  StepResult first = solve_with_cuts(disc, state_km1, controls, 0.5 * dt, cfg, depth + 1);
  StepResult second = solve_with_cuts(disc, first.state, controls, 0.5 * dt, cfg, depth + 1);
  StepResult merged;
  merged.state = std::move(second.state);
  merged.diagnostics.iterations =
      out.diagnostics.iterations + first.diagnostics.iterations + second.diagnostics.iterations;
  merged.diagnostics.step_cuts =
      1 + std::max(first.diagnostics.step_cuts, second.diagnostics.step_cuts);
  merged.diagnostics.residual_norms = std::move(second.diagnostics.residual_norms);
  return merged;
}

}  // namespace

StepResult newton_solve_timestep(const fvm::Discretization& disc, const State& state_km1,
                                 std::span<const double> controls, double dt,
                                 const NewtonConfig& cfg) {
  cfg.validate();
  if (!(dt > 0.0)) raise(ErrorKind::InvalidArgument, "dt must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  StepResult out = solve_with_cuts(disc, state_km1, controls, dt, cfg, 0);
  out.diagnostics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Trajectory simulate(const fvm::Discretization& disc, const ControlSchedule& schedule,
                    const NewtonConfig& cfg) {
  const ReservoirCase& rc = disc.reservoir();
  schedule.validate(rc.wells);
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(schedule.n_steps) + 1);
  traj.states.push_back(rc.initial);
  for (int k = 1; k <= schedule.n_steps; ++k) {
    const std::vector<double> controls = schedule.controls_at(k);
    StepResult step;
    try {
      step = newton_solve_timestep(disc, traj.states.back(), controls, schedule.dt, cfg);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "step " << k << ": " << e.what();
      throw Error(e.kind(), os.str());
    }
    traj.step_seconds.push_back(step.diagnostics.wall_seconds);
    traj.diagnostics.push_back(std::move(step.diagnostics));
    traj.states.push_back(std::move(step.state));
  }
  return traj;
}

Trajectory simulate(const ReservoirCase& reservoir, const ControlSchedule& schedule,
                    const NewtonConfig& cfg) {
  return simulate(fvm::Discretization(reservoir), schedule, cfg);
}

}  // namespace porflow::sim
