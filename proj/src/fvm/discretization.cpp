#include "porflow/fvm/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace porflow::fvm {

double harmonic_perm(double k_i, double k_j, TransmissibilityMode mode) {
  const double h = k_i * k_j / (k_i + k_j);
  return mode == TransmissibilityMode::TwoPoint ? 2.0 * h : h;
}

FaceTransmissibility geometric_transmissibility(const GridSpec& grid, const RockModel& rock,
                                                const UnitConstants& units,
                                                TransmissibilityMode mode) {
  FaceTransmissibility out;
  const double ax = grid.dy * grid.dz / grid.dx;
  const double ay = grid.dx * grid.dz / grid.dy;
  out.faces.reserve(static_cast<std::size_t>((grid.nx - 1) * grid.ny + grid.nx * (grid.ny - 1)));
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i + 1 < grid.nx; ++i) {
      const int a = grid.index(i, j);
      const int b = grid.index(i + 1, j);
      out.faces.push_back({a, b, units.darcy_const * harmonic_perm(rock.perm[a], rock.perm[b], mode) * ax});
    }
  }
  out.x_faces = out.faces.size();
  for (int j = 0; j + 1 < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const int a = grid.index(i, j);
      const int b = grid.index(i, j + 1);
      out.faces.push_back({a, b, units.darcy_const * harmonic_perm(rock.perm[a], rock.perm[b], mode) * ay});
    }
  }
  return out;
}

double well_index(const GridSpec& grid, const RockModel& rock, const WellSpec& well,
                  const UnitConstants& units) {
  if (!grid.contains(well.i, well.j))
    raise(ErrorKind::InvalidWellGeometry, "well '" + well.name + "' lies outside the grid");
  const double r_e = 0.14 * std::sqrt(grid.dx * grid.dx + grid.dy * grid.dy);
  if (!(r_e > well.radius))
    raise(ErrorKind::InvalidWellGeometry,
          "well '" + well.name + "': effective radius does not exceed the wellbore radius");
  const double denom = std::log(r_e / well.radius) + well.skin;
  if (!(denom > 0.0))
    raise(ErrorKind::InvalidWellGeometry, "well '" + well.name + "': ln(r_e/r_w) + s must be positive");
  const double k = rock.perm[static_cast<std::size_t>(grid.index(well.i, well.j))];
  return 2.0 * std::numbers::pi * units.darcy_const * k * grid.dz / denom;
}

namespace {

struct CellProps {
  FluidEval oil;
  FluidEval water;
  RelPermEval kr;
  double phi = 0.0;
  double dphi = 0.0;
};

struct NullSink {
  void operator()(std::size_t, std::size_t, double) const {}
  static constexpr bool active = false;
};

struct TripletSink {
  std::vector<Eigen::Triplet<double>> entries;
  void operator()(std::size_t row, std::size_t col, double v) {
    entries.emplace_back(static_cast<int>(row), static_cast<int>(col), v);
  }
  static constexpr bool active = true;
};

struct VjpSink {
  std::span<const double> g;  // [g_o; g_w]
  std::span<double> grad;     // [grad_p; grad_sw]
  void operator()(std::size_t row, std::size_t col, double v) { grad[col] += g[row] * v; }
  static constexpr bool active = true;
};

}  // namespace

Discretization::Discretization(ReservoirCase reservoir) : case_(std::move(reservoir)) {
  case_.validate();
  trans_ = geometric_transmissibility(case_.grid, case_.rock, case_.units, case_.transmissibility);
  well_index_.reserve(case_.wells.size());
  for (const auto& w : case_.wells)
    well_index_.push_back(well_index(case_.grid, case_.rock, w, case_.units));
  bulk_volume_ = case_.grid.cell_volume() / case_.units.cubic_ft_per_bbl;
}

double Discretization::pore_rate_scale(std::size_t cell, double dt) const {
  return bulk_volume_ * case_.rock.porosity_ref(cell) / dt;
}

void Discretization::check(const State& s) const {
  if (s.pressure.size() != cells() || s.sw.size() != cells())
    raise(ErrorKind::DimensionMismatch, "state dimensions do not match the grid");
}

template <class Sink>
void Discretization::evaluate(const State& xk, const State& xkm1, std::span<const double> controls,
                              double dt, ResidualBundle* out, Sink& sink) const {
  check(xk);
  check(xkm1);
  if (controls.size() != case_.wells.size())
    raise(ErrorKind::DimensionMismatch, "one control value per well is required");
  if (!(dt > 0.0)) raise(ErrorKind::InvalidArgument, "dt must be positive");

  const std::size_t n = cells();
  const auto& fluid = case_.fluid;
  const double ct_o = fluid.oil.compressibility + case_.rock.compressibility;
  const double ct_w = fluid.water.compressibility + case_.rock.compressibility;
  const double inv_dt = 1.0 / dt;

  std::vector<CellProps> props(n);
  for (std::size_t c = 0; c < n; ++c) {
    CellProps& cp = props[c];
    cp.oil = fluid_props_at(xk.pressure[c], fluid.oil);
    cp.water = fluid_props_at(xk.pressure[c], fluid.water);
    cp.kr = corey_relperm_eval(xk.sw[c], case_.relperm);
    std::tie(cp.phi, cp.dphi) = case_.rock.porosity_at(c, xk.pressure[c]);
  }

  std::vector<double> r_o(n, 0.0), r_w(n, 0.0);
  const std::size_t sw0 = n;  // column offset of saturation unknowns
  const std::size_t rw0 = n;  // row offset of water equations

  // Accumulation.
  for (std::size_t c = 0; c < n; ++c) {
    const CellProps& cp = props[c];
    const double dp = xk.pressure[c] - xkm1.pressure[c];
    const double s = xk.sw[c];
    const double ds = s - xkm1.sw[c];

    const double f_o = bulk_volume_ * cp.phi / cp.oil.fvf;
    const double f_w = bulk_volume_ * cp.phi / cp.water.fvf;
    const double bracket_o = (1.0 - s) * ct_o * dp - ds;
    const double bracket_w = s * ct_w * dp + ds;
    r_o[c] += f_o * bracket_o * inv_dt;
    r_w[c] += f_w * bracket_w * inv_dt;

    if constexpr (Sink::active) {
      const double df_o = bulk_volume_ * (cp.dphi / cp.oil.fvf -
                                          cp.phi * cp.oil.dfvf_dp / (cp.oil.fvf * cp.oil.fvf));
      const double df_w = bulk_volume_ * (cp.dphi / cp.water.fvf -
                                          cp.phi * cp.water.dfvf_dp / (cp.water.fvf * cp.water.fvf));
      sink(c, c, (df_o * bracket_o + f_o * (1.0 - s) * ct_o) * inv_dt);
      sink(c, sw0 + c, f_o * (-ct_o * dp - 1.0) * inv_dt);
      sink(rw0 + c, c, (df_w * bracket_w + f_w * s * ct_w) * inv_dt);
      sink(rw0 + c, sw0 + c, f_w * (ct_w * dp + 1.0) * inv_dt);
    }
  }

  // Inter-cell flux, upstream relative permeability, averaged B and mu.
  const double mu_o = fluid.oil.viscosity;
  const double mu_w = fluid.water.viscosity;
  for (const Face& f : trans_.faces) {
    const auto a = static_cast<std::size_t>(f.a);
    const auto b = static_cast<std::size_t>(f.b);
    const double dp = xk.pressure[a] - xk.pressure[b];
    const std::size_t up = xk.pressure[a] > xk.pressure[b] ? a : b;

    for (int phase = 0; phase < 2; ++phase) {
      const bool oil = phase == 0;
      const FluidEval& ea = oil ? props[a].oil : props[a].water;
      const FluidEval& eb = oil ? props[b].oil : props[b].water;
      const double mu = oil ? mu_o : mu_w;
      const double kr = oil ? props[up].kr.kro : props[up].kr.krw;
      const double b_avg = 0.5 * (ea.fvf + eb.fvf);
      const double t = f.g * kr / (mu * b_avg);
      const double flux = t * dp;
      std::vector<double>& r = oil ? r_o : r_w;
      r[a] += flux;
      r[b] -= flux;

      if constexpr (Sink::active) {
        const std::size_t row_a = oil ? a : rw0 + a;
        const std::size_t row_b = oil ? b : rw0 + b;
        const double dkr = oil ? props[up].kr.dkro : props[up].kr.dkrw;
        const double dt_db = -t / b_avg;  // d t / d b_avg
        const double dflux_dpa = t + dt_db * 0.5 * ea.dfvf_dp * dp;
        const double dflux_dpb = -t + dt_db * 0.5 * eb.dfvf_dp * dp;
        const double dflux_dsup = f.g * dkr / (mu * b_avg) * dp;
        sink(row_a, a, dflux_dpa);
        sink(row_a, b, dflux_dpb);
        sink(row_b, a, -dflux_dpa);
        sink(row_b, b, -dflux_dpb);
        if (dflux_dsup != 0.0) {
          sink(row_a, sw0 + up, dflux_dsup);
          sink(row_b, sw0 + up, -dflux_dsup);
        }
      }
    }
  }

  // Wells: rate injectors add water directly; BHP producers follow the well model.
  for (std::size_t w = 0; w < case_.wells.size(); ++w) {
    const WellSpec& well = case_.wells[w];
    const auto c = static_cast<std::size_t>(case_.grid.index(well.i, well.j));
    if (well.is_injector()) {
      r_w[c] -= controls[w];
      continue;
    }
    const ProducerTerm q = producer_term(w, xk.pressure[c], xk.sw[c], controls[w]);
    r_o[c] -= q.q_o;
    r_w[c] -= q.q_w;
    if constexpr (Sink::active) {
      sink(c, c, -q.dqo_dp);
      sink(rw0 + c, c, -q.dqw_dp);
      if (q.dqo_ds != 0.0) sink(c, sw0 + c, -q.dqo_ds);
      if (q.dqw_ds != 0.0) sink(rw0 + c, sw0 + c, -q.dqw_ds);
    }
  }

  if (out != nullptr) {
    out->r_o = std::move(r_o);
    out->r_w = std::move(r_w);
  }
}

Discretization::ProducerTerm Discretization::producer_term(std::size_t w, double p, double sw,
                                                           double bhp) const {
  const RelPermEval kr = corey_relperm_eval(sw, case_.relperm);
  const double wi = well_index_[w];
  const double drawdown = p - bhp;
  ProducerTerm out;
  for (int phase = 0; phase < 2; ++phase) {
    const bool oil = phase == 0;
    const FluidEval e = fluid_props_at(p, oil ? case_.fluid.oil : case_.fluid.water);
    const double k = oil ? kr.kro : kr.krw;
    const double dk = oil ? kr.dkro : kr.dkrw;
    const double m = k / (e.viscosity * e.fvf);
    const double dm_dp = -m * e.dfvf_dp / e.fvf;
    const double q = -m * wi * drawdown;
    const double dq_dp = -wi * (m + dm_dp * drawdown);
    const double dq_ds = -wi * dk / (e.viscosity * e.fvf) * drawdown;
    if (oil) {
      out.q_o = q;
      out.dqo_dp = dq_dp;
      out.dqo_ds = dq_ds;
    } else {
      out.q_w = q;
      out.dqw_dp = dq_dp;
      out.dqw_ds = dq_ds;
    }
  }
  return out;
}

ResidualBundle Discretization::residual(const State& state_k, const State& state_km1,
                                        std::span<const double> controls, double dt) const {
  ResidualBundle out;
  NullSink sink;
  evaluate(state_k, state_km1, controls, dt, &out, sink);
  return out;
}

Eigen::SparseMatrix<double> Discretization::jacobian(const State& state_k, const State& state_km1,
                                                     std::span<const double> controls,
                                                     double dt) const {
  TripletSink sink;
  sink.entries.reserve(cells() * 24);
  evaluate(state_k, state_km1, controls, dt, nullptr, sink);
  const auto dim = static_cast<Eigen::Index>(2 * cells());
  Eigen::SparseMatrix<double> jac(dim, dim);
  jac.setFromTriplets(sink.entries.begin(), sink.entries.end());
  jac.makeCompressed();
  return jac;
}

void Discretization::residual_vjp(const State& state_k, const State& state_km1,
                                  std::span<const double> controls, double dt,
                                  std::span<const double> g_o, std::span<const double> g_w,
                                  std::span<double> grad_p, std::span<double> grad_sw) const {
  const std::size_t n = cells();
  if (g_o.size() != n || g_w.size() != n || grad_p.size() != n || grad_sw.size() != n)
    raise(ErrorKind::DimensionMismatch, "vjp buffers must have one entry per cell");
  std::vector<double> g(2 * n), grad(2 * n, 0.0);
  std::copy(g_o.begin(), g_o.end(), g.begin());
  std::copy(g_w.begin(), g_w.end(), g.begin() + static_cast<std::ptrdiff_t>(n));
  VjpSink sink{g, grad};
  evaluate(state_k, state_km1, controls, dt, nullptr, sink);
  std::copy(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(n), grad_p.begin());
  std::copy(grad.begin() + static_cast<std::ptrdiff_t>(n), grad.end(), grad_sw.begin());
}

double Discretization::scaled_residual_norm(const ResidualBundle& r, double dt) const {
  double norm = 0.0;
  for (std::size_t c = 0; c < cells(); ++c) {
    const double scale = pore_rate_scale(c, dt);
    norm = std::max({norm, std::abs(r.r_o[c]) / scale, std::abs(r.r_w[c]) / scale});
  }
  return norm;
}

WellSources Discretization::well_sources(const State& state, std::span<const double> controls) const {
  check(state);
  if (controls.size() != case_.wells.size())
    raise(ErrorKind::DimensionMismatch, "one control value per well is required");
  WellSources out;
  out.q_o.assign(cells(), 0.0);
  out.q_w.assign(cells(), 0.0);
  for (std::size_t w = 0; w < case_.wells.size(); ++w) {
    const WellSpec& well = case_.wells[w];
    const auto c = static_cast<std::size_t>(case_.grid.index(well.i, well.j));
    if (well.is_injector()) {
      out.q_w[c] += controls[w];
      continue;
    }
    const double p = state.pressure[c];
    if (p < controls[w]) out.crossflow_wells.push_back(w);
    const ProducerTerm q = producer_term(w, p, state.sw[c], controls[w]);
    out.q_o[c] += q.q_o;
    out.q_w[c] += q.q_w;
  }
  return out;
}

AccumulationCoeffs Discretization::accumulation(const State& state) const {
  check(state);
  const std::size_t n = cells();
  const double ct_o = case_.fluid.oil.compressibility + case_.rock.compressibility;
  const double ct_w = case_.fluid.water.compressibility + case_.rock.compressibility;
  AccumulationCoeffs a;
  a.a_op.resize(n);
  a.a_os.resize(n);
  a.a_wp.resize(n);
  a.a_ws.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double p = state.pressure[c];
    const double phi = case_.rock.porosity_at(c, p).first;
    const double bo = fluid_props_at(p, case_.fluid.oil).fvf;
    const double bw = fluid_props_at(p, case_.fluid.water).fvf;
    const double so = 1.0 - state.sw[c];
    a.a_op[c] = bulk_volume_ * phi / bo * so * ct_o;
    a.a_os[c] = -bulk_volume_ * phi / bo;
    a.a_wp[c] = bulk_volume_ * phi / bw * state.sw[c] * ct_w;
    a.a_ws[c] = bulk_volume_ * phi / bw;
  }
  return a;
}

SystemMatrices Discretization::system_matrices(const State& state,
                                               std::span<const double> controls) const {
  SystemMatrices m;
  m.accumulation = accumulation(state);
  const auto n = static_cast<Eigen::Index>(cells());
  std::vector<Eigen::Triplet<double>> to, tw;
  for (const Face& f : trans_.faces) {
    const double pa = state.pressure[f.a];
    const double pb = state.pressure[f.b];
    const auto ra = corey_relperm(state.sw[f.a], case_.relperm);
    const auto rb = corey_relperm(state.sw[f.b], case_.relperm);
    const double bo = 0.5 * (fluid_props_at(pa, case_.fluid.oil).fvf + fluid_props_at(pb, case_.fluid.oil).fvf);
    const double bw = 0.5 * (fluid_props_at(pa, case_.fluid.water).fvf + fluid_props_at(pb, case_.fluid.water).fvf);
    const double lo = f.g * upstream_relperm(pa, pb, ra.kro, rb.kro) / (case_.fluid.oil.viscosity * bo);
    const double lw = f.g * upstream_relperm(pa, pb, ra.krw, rb.krw) / (case_.fluid.water.viscosity * bw);
    for (auto [list, t] : {std::pair{&to, lo}, std::pair{&tw, lw}}) {
      list->emplace_back(f.a, f.a, t);
      list->emplace_back(f.b, f.b, t);
      list->emplace_back(f.a, f.b, -t);
      list->emplace_back(f.b, f.a, -t);
    }
  }
  m.t_op.resize(n, n);
  m.t_wp.resize(n, n);
  m.t_op.setFromTriplets(to.begin(), to.end());
  m.t_wp.setFromTriplets(tw.begin(), tw.end());
  WellSources q = well_sources(state, controls);
  m.q_o = std::move(q.q_o);
  m.q_w = std::move(q.q_w);
  return m;
}

ResidualBundle assemble_residual(const State& state_k, const State& state_km1,
                                 std::span<const double> controls, double dt,
                                 const ReservoirCase& reservoir) {
  return Discretization(reservoir).residual(state_k, state_km1, controls, dt);
}

WellSources well_source_terms(const State& state, const ReservoirCase& reservoir,
                              std::span<const double> controls) {
  return Discretization(reservoir).well_sources(state, controls);
}

AccumulationCoeffs accumulation_coeffs(const State& state, const ReservoirCase& reservoir) {
  return Discretization(reservoir).accumulation(state);
}

}  // namespace porflow::fvm
