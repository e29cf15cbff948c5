#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "porflow/core/error.hpp"

// Physical description of a two-phase (oil-water) reservoir case.
// Field units throughout: psia, ft, cp, mD, STB/day, days.

namespace porflow {

struct UnitConstants {
  // Darcy constant for field units: mD*ft*psi/cp -> bbl/day.
  double darcy_const = 1.127e-3;
  double cubic_ft_per_bbl = 5.614583;
  double ft_per_m = 3.280839895;

  void validate() const;
};

struct GridSpec {
  int nx = 1;
  int ny = 1;
  double dx = 1.0;  // ft
  double dy = 1.0;
  double dz = 1.0;

  std::size_t cell_count() const { return static_cast<std::size_t>(nx) * ny; }
  int index(int i, int j) const { return j * nx + i; }
  int col(int cell) const { return cell % nx; }
  int row(int cell) const { return cell / nx; }
  bool contains(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }
  double cell_volume() const { return dx * dy * dz; }

  void validate() const;
};

struct RockModel {
  std::vector<double> perm;       // mD, one entry per cell
  std::vector<double> porosity;   // one entry (uniform) or one per cell
  double compressibility = 0.0;   // 1/psia
  double pressure_ref = 3000.0;   // psia, reference for pore compressibility

  double porosity_ref(std::size_t cell) const {
    return porosity.size() == 1 ? porosity[0] : porosity[cell];
  }
  // phi(p) = phi_ref * (1 + c_r (p - p_ref)); returns {phi, dphi/dp}.
  std::pair<double, double> porosity_at(std::size_t cell, double p) const;

  void validate(const GridSpec& grid) const;
};

enum class Phase { Oil, Water };

struct PhaseProps {
  double viscosity = 1.0;        // cp
  double compressibility = 0.0;  // 1/psia
  double fvf_ref = 1.0;          // rb/STB
  double pressure_ref = 3000.0;  // psia
  double density = 0.0;          // lbm/ft3, metadata only
};

struct FluidModel {
  PhaseProps oil{1.13, 1.0e-5, 1.0, 3000.0, 53.0};
  PhaseProps water{1.0, 3.0e-6, 1.0, 3000.0, 62.4};

  const PhaseProps& phase(Phase p) const { return p == Phase::Oil ? oil : water; }
  void validate() const;
};

struct CoreyRelPerm {
  double s_wc = 0.2;
  double s_or = 0.2;
  double n_w = 2.0;
  double n_o = 3.0;
  double krw0 = 0.6;
  double kro0 = 0.9;

  double sw_min() const { return s_wc; }
  double sw_max() const { return 1.0 - s_or; }
  void validate() const;
};

struct RelPermPair {
  double krw = 0.0;
  double kro = 0.0;
};

// krw = krw0 S^nw, kro = kro0 (1-S)^no with S clamped to [0, 1].
RelPermPair corey_relperm(double sw, const CoreyRelPerm& model);

struct RelPermEval {
  double krw = 0.0;
  double kro = 0.0;
  double dkrw = 0.0;  // d/dsw; zero outside the mobile window
  double dkro = 0.0;
};

RelPermEval corey_relperm_eval(double sw, const CoreyRelPerm& model);

struct FluidEval {
  double fvf = 1.0;
  double dfvf_dp = 0.0;
  double viscosity = 1.0;
};

// Linearized compressibility: B(p) = B_ref / (1 + c (p - p_ref)); constant viscosity.
// Throws NonPhysicalFvf when the denominator is not positive.
FluidEval fluid_props_at(double p, const PhaseProps& props);
FluidEval fluid_props_at(double p, Phase phase, const FluidModel& model);

enum class WellKind { RateInjector, BhpProducer };

struct WellSpec {
  std::string name;
  WellKind kind = WellKind::RateInjector;
  int i = 0;
  int j = 0;
  double radius = 0.3;  // ft
  double skin = 0.0;

  bool is_injector() const { return kind == WellKind::RateInjector; }
};

// Piecewise-constant controls on the timestep grid. values[w][k-1] is the
// control of well w during step k (rate for injectors, BHP for producers).
struct ControlSchedule {
  double dt = 1.0;  // days
  int n_steps = 0;
  std::vector<std::vector<double>> values;

  // Controls of every well active during step k (1-based).
  std::vector<double> controls_at(int k) const;
  double total_time() const { return dt * n_steps; }
  void validate(std::span<const WellSpec> wells) const;
};

struct State {
  std::vector<double> pressure;
  std::vector<double> sw;

  State() = default;
  State(std::size_t n, double p, double s) : pressure(n, p), sw(n, s) {}

  std::size_t size() const { return pressure.size(); }
  double so(std::size_t cell) const { return 1.0 - sw[cell]; }
  void validate(std::size_t cells) const;
};

enum class TransmissibilityMode {
  Paper,     // K_i K_j / (K_i + K_j) with full centre distance
  TwoPoint,  // 2 K_i K_j / (K_i + K_j), the half-cell two-point flux
};

struct ReservoirCase {
  GridSpec grid;
  RockModel rock;
  FluidModel fluid;
  CoreyRelPerm relperm;
  std::vector<WellSpec> wells;
  State initial;
  UnitConstants units;
  TransmissibilityMode transmissibility = TransmissibilityMode::Paper;

  std::size_t cells() const { return grid.cell_count(); }
  int well_cell(std::size_t w) const { return grid.index(wells[w].i, wells[w].j); }
  std::vector<std::size_t> producer_indices() const;
  std::vector<std::size_t> injector_indices() const;

  void validate() const;
};

}  // namespace porflow
