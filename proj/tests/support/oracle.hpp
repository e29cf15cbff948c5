#pragma once

// Test-only reference implementations written independently of the library:
// cell-by-cell enumeration instead of the face loop, every property
// recomputed from the raw case description.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "porflow/core/model.hpp"

namespace porflow::testing {

struct OracleResidual {
  std::vector<double> r_o;
  std::vector<double> r_w;
};

inline double oracle_fvf(double p, const PhaseProps& ph) {
  return ph.fvf_ref / (1.0 + ph.compressibility * (p - ph.pressure_ref));
}

inline double oracle_kr(double sw, const CoreyRelPerm& m, bool water) {
  double s = (sw - m.s_wc) / (1.0 - m.s_wc - m.s_or);
  s = s < 0.0 ? 0.0 : (s > 1.0 ? 1.0 : s);
  return water ? m.krw0 * std::pow(s, m.n_w) : m.kro0 * std::pow(1.0 - s, m.n_o);
}

// Accumulation + flux + source balance per cell, neighbours visited explicitly.
inline OracleResidual oracle_residual(const ReservoirCase& rc, const State& xk, const State& xkm1,
                                      const std::vector<double>& controls, double dt) {
  const GridSpec& g = rc.grid;
  const std::size_t n = rc.cells();
  OracleResidual out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const double vb = g.dx * g.dy * g.dz / rc.units.cubic_ft_per_bbl;
  const double ct_o = rc.fluid.oil.compressibility + rc.rock.compressibility;
  const double ct_w = rc.fluid.water.compressibility + rc.rock.compressibility;

  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int c = j * g.nx + i;
      const double p = xk.pressure[c];
      const double s = xk.sw[c];
      const double phi0 = rc.rock.porosity.size() == 1 ? rc.rock.porosity[0] : rc.rock.porosity[c];
      const double phi = phi0 * (1.0 + rc.rock.compressibility * (p - rc.rock.pressure_ref));
      const double bo = oracle_fvf(p, rc.fluid.oil);
      const double bw = oracle_fvf(p, rc.fluid.water);
      const double dp = p - xkm1.pressure[c];
      const double ds = s - xkm1.sw[c];
      double ro = vb * phi / bo * ((1.0 - s) * ct_o * dp - ds) / dt;
      double rw = vb * phi / bw * (s * ct_w * dp + ds) / dt;

      const int di[4] = {-1, 1, 0, 0};
      const int dj[4] = {0, 0, -1, 1};
      for (int e = 0; e < 4; ++e) {
        const int ni = i + di[e], nj = j + dj[e];
        if (ni < 0 || nj < 0 || ni >= g.nx || nj >= g.ny) continue;
        const int m = nj * g.nx + ni;
        const double area_over_d = di[e] != 0 ? g.dy * g.dz / g.dx : g.dx * g.dz / g.dy;
        double kh = rc.rock.perm[c] * rc.rock.perm[m] / (rc.rock.perm[c] + rc.rock.perm[m]);
        if (rc.transmissibility == TransmissibilityMode::TwoPoint) kh *= 2.0;
        const double geo = rc.units.darcy_const * kh * area_over_d;
        const double pm = xk.pressure[m];
        const int up = p > pm ? c : m;
        // Ties go to the higher-index cell, matching the face orientation a < b.
        const int up_tie = p == pm ? std::max(c, m) : up;
        const double kro = oracle_kr(xk.sw[up_tie], rc.relperm, false);
        const double krw = oracle_kr(xk.sw[up_tie], rc.relperm, true);
        const double bo_f = 0.5 * (bo + oracle_fvf(pm, rc.fluid.oil));
        const double bw_f = 0.5 * (bw + oracle_fvf(pm, rc.fluid.water));
        ro += geo * kro / (rc.fluid.oil.viscosity * bo_f) * (p - pm);
        rw += geo * krw / (rc.fluid.water.viscosity * bw_f) * (p - pm);
      }
      out.r_o[c] = ro;
      out.r_w[c] = rw;
    }
  }

  for (std::size_t w = 0; w < rc.wells.size(); ++w) {
    const WellSpec& well = rc.wells[w];
    const int c = well.j * g.nx + well.i;
    if (well.kind == WellKind::RateInjector) {
      out.r_w[c] -= controls[w];
      continue;
    }
    const double re = 0.14 * std::sqrt(g.dx * g.dx + g.dy * g.dy);
    const double wi = 2.0 * std::numbers::pi * rc.units.darcy_const * rc.rock.perm[c] * g.dz /
                      (std::log(re / well.radius) + well.skin);
    const double p = xk.pressure[c];
    const double s = xk.sw[c];
    const double qo = -oracle_kr(s, rc.relperm, false) /
                      (rc.fluid.oil.viscosity * oracle_fvf(p, rc.fluid.oil)) * wi * (p - controls[w]);
    const double qw = -oracle_kr(s, rc.relperm, true) /
                      (rc.fluid.water.viscosity * oracle_fvf(p, rc.fluid.water)) * wi * (p - controls[w]);
    out.r_o[c] -= qo;
    out.r_w[c] -= qw;
  }
  return out;
}

// Small heterogeneous case: injector in the first cell, producer in the last.
inline ReservoirCase small_case(int nx, int ny, std::uint64_t seed = 5) {
  ReservoirCase rc;
  rc.grid = GridSpec{nx, ny, 65.6168, 65.6168, 65.6168};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> perm(20.0, 400.0);
  rc.rock.perm.resize(rc.grid.cell_count());
  for (double& k : rc.rock.perm) k = perm(rng);
  rc.rock.porosity = {0.2};
  rc.rock.compressibility = 3e-6;
  rc.wells = {WellSpec{"I1", WellKind::RateInjector, 0, 0, 0.3, 0.0},
              WellSpec{"P1", WellKind::BhpProducer, nx - 1, ny - 1, 0.3, 0.0}};
  rc.initial = State(rc.grid.cell_count(), 3000.0, 0.2);
  return rc;
}

// A plausible state pair: pressures around 3000 psia, saturations across the mobile window.
inline void random_states(const ReservoirCase& rc, std::uint64_t seed, State& xk, State& xkm1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> p(2600.0, 3400.0), s(0.15, 0.85), dp(-30.0, 30.0), ds(-0.05, 0.05);
  const std::size_t n = rc.cells();
  xk = State(n, 0.0, 0.0);
  xkm1 = State(n, 0.0, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    xk.pressure[c] = p(rng);
    xk.sw[c] = s(rng);
    xkm1.pressure[c] = xk.pressure[c] + dp(rng);
    xkm1.sw[c] = xk.sw[c] + ds(rng);
  }
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace porflow::testing
