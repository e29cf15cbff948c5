#pragma once

#include <Eigen/SparseCore>

#include <span>
#include <vector>

#include "porflow/core/model.hpp"

// Two-point finite-volume discretization of the oil/water mass balances.
//
// Unknown ordering everywhere in this module is the block layout
// [P_0 .. P_{N-1}, Sw_0 .. Sw_{N-1}] and residual rows are [r_o; r_w].
// Sign convention: Q > 0 is flow into the reservoir and
//   r = A(x_k) (x_k - x_{k-1}) / dt + T(x_k) P_k - Q(x_k, u_k).

namespace porflow::fvm {

double harmonic_perm(double k_i, double k_j,
                     TransmissibilityMode mode = TransmissibilityMode::Paper);

struct Face {
  int a = 0;  // a < b
  int b = 0;
  double g = 0.0;  // darcy_const * K_ab * A / d
};

struct FaceTransmissibility {
  std::vector<Face> faces;
  std::size_t x_faces = 0;  // faces[0, x_faces) connect (i, j)-(i+1, j)
};

FaceTransmissibility geometric_transmissibility(
    const GridSpec& grid, const RockModel& rock, const UnitConstants& units,
    TransmissibilityMode mode = TransmissibilityMode::Paper);

// Upstream weighting: kr_i if p_i > p_j, otherwise kr_j.
inline double upstream_relperm(double p_i, double p_j, double kr_i, double kr_j) {
  return p_i > p_j ? kr_i : kr_j;
}

// Peaceman well index, skin outside the logarithm.
double well_index(const GridSpec& grid, const RockModel& rock, const WellSpec& well,
                  const UnitConstants& units);

struct WellSources {
  std::vector<double> q_o;  // STB/day, positive into the reservoir
  std::vector<double> q_w;
  std::vector<std::size_t> crossflow_wells;  // producers with P_cell < P_wf
};

struct AccumulationCoeffs {
  std::vector<double> a_op, a_os, a_wp, a_ws;
};

struct ResidualBundle {
  std::vector<double> r_o;
  std::vector<double> r_w;
};

struct SystemMatrices {
  AccumulationCoeffs accumulation;
  Eigen::SparseMatrix<double> t_op;
  Eigen::SparseMatrix<double> t_wp;
  std::vector<double> q_o;
  std::vector<double> q_w;
};

// Precomputed geometry (face transmissibilities, well indices, volumes) for
// one case, plus every state-dependent evaluation built on top of it. The
// Newton solver and the physics loss both go through residual() here.
class Discretization {
 public:
  explicit Discretization(ReservoirCase reservoir);

  const ReservoirCase& reservoir() const { return case_; }
  const FaceTransmissibility& transmissibility() const { return trans_; }
  std::span<const double> well_indices() const { return well_index_; }
  std::size_t cells() const { return case_.cells(); }
  // Bulk cell volume in reservoir barrels.
  double bulk_volume() const { return bulk_volume_; }
  // Pore volume per day (bbl/day) of a cell, the scale of a unit saturation change.
  double pore_rate_scale(std::size_t cell, double dt) const;

  WellSources well_sources(const State& state, std::span<const double> controls) const;
  AccumulationCoeffs accumulation(const State& state) const;
  SystemMatrices system_matrices(const State& state, std::span<const double> controls) const;

  ResidualBundle residual(const State& state_k, const State& state_km1,
                          std::span<const double> controls, double dt) const;

  // Analytic d r / d x_k, 2N x 2N in block ordering.
  Eigen::SparseMatrix<double> jacobian(const State& state_k, const State& state_km1,
                                       std::span<const double> controls, double dt) const;

  // Vector-Jacobian product: returns (J^T g) split into pressure and saturation parts.
  void residual_vjp(const State& state_k, const State& state_km1,
                    std::span<const double> controls, double dt, std::span<const double> g_o,
                    std::span<const double> g_w, std::span<double> grad_p,
                    std::span<double> grad_sw) const;

  // max_i |r_i| / (V_i phi_i / dt) over both phases.
  double scaled_residual_norm(const ResidualBundle& r, double dt) const;

 private:
  template <class Sink>
  void evaluate(const State& xk, const State& xkm1, std::span<const double> controls, double dt,
                ResidualBundle* out, Sink& sink) const;

  void check(const State& s) const;

  // Peaceman producer rates (negative = out of the reservoir) and their derivatives.
  struct ProducerTerm {
    double q_o = 0.0, q_w = 0.0;
    double dqo_dp = 0.0, dqo_ds = 0.0, dqw_dp = 0.0, dqw_ds = 0.0;
  };
  ProducerTerm producer_term(std::size_t w, double p, double sw, double bhp) const;

  ReservoirCase case_;
  FaceTransmissibility trans_;
  std::vector<double> well_index_;
  double bulk_volume_ = 0.0;
};

ResidualBundle assemble_residual(const State& state_k, const State& state_km1,
                                 std::span<const double> controls, double dt,
                                 const ReservoirCase& reservoir);

WellSources well_source_terms(const State& state, const ReservoirCase& reservoir,
                              std::span<const double> controls);

AccumulationCoeffs accumulation_coeffs(const State& state, const ReservoirCase& reservoir);

}  // namespace porflow::fvm
