#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "porflow/fvm/discretization.hpp"
#include "porflow/harness/presets.hpp"
#include "porflow/sim/newton.hpp"

using namespace porflow;

namespace {

double water_in_place(const ReservoirCase& rc, const State& s) {
  const double vb = rc.grid.cell_volume() / rc.units.cubic_ft_per_bbl;
  double total = 0.0;
  for (std::size_t c = 0; c < rc.cells(); ++c) {
    const double phi = rc.rock.porosity_at(c, s.pressure[c]).first;
    total += vb * phi * s.sw[c] / testing::oracle_fvf(s.pressure[c], rc.fluid.water);
  }
  return total;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("every accepted step meets the residual tolerance") {
  harness::PresetOptions o;
  o.n = 12;
  const auto rc = harness::waterflood_case(o);
  const auto sched = harness::baseline_schedule(2.0, 20.0, 10.0);
  fvm::Discretization d(rc);
  const auto traj = sim::simulate(d, sched, {});
  REQUIRE(traj.steps() == 10);
  for (int k = 1; k <= 10; ++k) {
    const auto r = d.residual(traj.states[k], traj.states[k - 1], sched.controls_at(k), 2.0);
    CHECK(d.scaled_residual_norm(r, 2.0) < 1e-6);
    CHECK(traj.diagnostics[k - 1].residual_norms.back() < 1e-6);
  }
}

TEST_CASE("analytic and finite-difference Newton agree") {
  const auto rc = testing::small_case(6, 6);
  ControlSchedule s;
  s.dt = 2.0;
  s.n_steps = 3;
  s.values = {{1000, 1200, 1100}, {2400, 2350, 2450}};
  sim::NewtonConfig a;
  a.jacobian_mode = sim::JacobianMode::Analytic;
  const auto ta = sim::simulate(rc, s, a);
  const auto tf = sim::simulate(rc, s, {});
  for (std::size_t c = 0; c < rc.cells(); ++c) {
    CHECK(ta.states[3].pressure[c] == doctest::Approx(tf.states[3].pressure[c]).epsilon(1e-6));
    CHECK(ta.states[3].sw[c] == doctest::Approx(tf.states[3].sw[c]).epsilon(1e-6));
  }
}

TEST_CASE("water balance closes with injection and production") {
  const auto rc = testing::small_case(6, 6, 4);
  ControlSchedule s;
  s.dt = 2.0;
  s.n_steps = 10;
  s.values = {std::vector<double>(10, 1500.0), std::vector<double>(10, 2400.0)};
  const auto traj = sim::simulate(rc, s, {});
  double net = 0.0;
  for (int k = 1; k <= 10; ++k) {
    const auto q = fvm::well_source_terms(traj.states[k], rc, s.controls_at(k));
    for (double v : q.q_w) net += v * s.dt;
  }
  const double delta = water_in_place(rc, traj.states.back()) - water_in_place(rc, traj.states.front());
  CHECK(std::abs(net - delta) <= 1e-3 * std::abs(delta));
}

TEST_CASE("saturation stays in the mobile window without compressibility") {
  auto rc = testing::small_case(6, 6, 2);
  rc.rock.compressibility = 0.0;
  rc.fluid.oil.compressibility = 0.0;
  rc.fluid.water.compressibility = 0.0;
  rc.wells = {WellSpec{"I1", WellKind::RateInjector, 0, 0, 0.3, 0.0},
              WellSpec{"P1", WellKind::BhpProducer, 5, 5, 0.3, 0.0}};
  // Incompressible: the BHP producer withdraws whatever is injected.
  ControlSchedule s;
  s.dt = 2.0;
  s.n_steps = 5;
  s.values = {std::vector<double>(5, 300.0), std::vector<double>(5, 2900.0)};
  const auto traj = sim::simulate(rc, s, {});
  for (const auto& st : traj.states)
    for (double sw : st.sw) {
      CHECK(sw >= 0.2 - 1e-9);
      CHECK(sw <= 0.8 + 1e-9);
    }
}

TEST_CASE("newton failure surfaces as NonConvergence") {
  const auto rc = testing::small_case(4, 4);
  ControlSchedule s;
  s.dt = 2.0;
  s.n_steps = 1;
  s.values = {{1000.0}, {2400.0}};
  sim::NewtonConfig cfg;
  cfg.max_newton_iters = 1;
  cfg.max_step_cuts = 0;
  try {
    (void)sim::simulate(rc, s, cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonConvergence);
  }
}

TEST_CASE("invalid newton configuration is rejected") {
  sim::NewtonConfig cfg;
  cfg.residual_tol = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

}  // TEST_SUITE
