#include <doctest.h>

#include <Eigen/SparseCore>
#include <cmath>

#include "oracle.hpp"
#include "porflow/fvm/discretization.hpp"
#include "porflow/sim/newton.hpp"

using namespace porflow;

namespace {

double relative_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a[i] - b[i]));
  return gap / std::max(testing::max_abs(b), 1e-300);
}

}  // namespace

TEST_SUITE("fvm") {

TEST_CASE("harmonic transmissibility of equal permeabilities") {
  CHECK(fvm::harmonic_perm(100.0, 100.0) == 50.0);
  CHECK(fvm::harmonic_perm(100.0, 100.0, TransmissibilityMode::TwoPoint) == 100.0);
  CHECK(fvm::harmonic_perm(50.0, 200.0) == doctest::Approx(40.0).epsilon(1e-15));
}

TEST_CASE("face list covers every neighbour pair once") {
  const auto rc = testing::small_case(5, 3);
  const auto t = fvm::geometric_transmissibility(rc.grid, rc.rock, rc.units);
  CHECK(t.faces.size() == static_cast<std::size_t>(4 * 3 + 5 * 2));
  CHECK(t.x_faces == 12);
  for (const auto& f : t.faces) CHECK(f.a < f.b);
}

TEST_CASE("residual matches the cell-by-cell oracle") {
  for (auto [nx, ny] : {std::pair{2, 1}, std::pair{4, 4}, std::pair{3, 5}}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto rc = testing::small_case(nx, ny, seed);
      State xk, xkm1;
      testing::random_states(rc, seed * 31, xk, xkm1);
      const std::vector<double> u{1200.0, 2400.0};
      const auto r = fvm::assemble_residual(xk, xkm1, u, 2.0, rc);
      const auto o = testing::oracle_residual(rc, xk, xkm1, u, 2.0);
      CHECK(relative_gap(r.r_o, o.r_o) < 1e-10);
      CHECK(relative_gap(r.r_w, o.r_w) < 1e-10);
    }
  }
}

TEST_CASE("two-point mode doubles the flux term") {
  auto rc = testing::small_case(3, 3);
  rc.transmissibility = TransmissibilityMode::TwoPoint;
  State xk, xkm1;
  testing::random_states(rc, 9, xk, xkm1);
  const std::vector<double> u{1000.0, 2350.0};
  const auto r = fvm::assemble_residual(xk, xkm1, u, 1.0, rc);
  const auto o = testing::oracle_residual(rc, xk, xkm1, u, 1.0);
  CHECK(relative_gap(r.r_o, o.r_o) < 1e-10);
}

TEST_CASE("uniform state with no wells has zero residual") {
  auto rc = testing::small_case(4, 4);
  rc.wells.clear();
  const State s(rc.cells(), 3000.0, 0.4);
  const auto r = fvm::assemble_residual(s, s, {}, 1.0, rc);
  CHECK(testing::max_abs(r.r_o) == 0.0);
  CHECK(testing::max_abs(r.r_w) == 0.0);
}

TEST_CASE("fluxes cancel: residual sum equals accumulation minus sources") {
  const auto rc = testing::small_case(4, 4, 3);
  State xk, xkm1;
  testing::random_states(rc, 4, xk, xkm1);
  const std::vector<double> u{1000.0, 2400.0};
  fvm::Discretization d(rc);
  const auto r = d.residual(xk, xkm1, u, 2.0);
  const auto a = d.accumulation(xk);
  const auto q = d.well_sources(xk, u);
  double lhs = 0.0, rhs = 0.0, scale = 0.0;
  for (std::size_t c = 0; c < rc.cells(); ++c) {
    lhs += r.r_w[c];
    const double acc = (a.a_wp[c] * (xk.pressure[c] - xkm1.pressure[c]) + a.a_ws[c] * (xk.sw[c] - xkm1.sw[c])) / 2.0;
    rhs += acc - q.q_w[c];
    scale += std::abs(acc) + std::abs(q.q_w[c]);
  }
  CHECK(std::abs(lhs - rhs) < 1e-10 * scale);
}

TEST_CASE("analytic Jacobian agrees with the finite-difference Jacobian") {
  const auto rc = testing::small_case(5, 4, 8);
  State xk, xkm1;
  testing::random_states(rc, 12, xk, xkm1);
  const std::vector<double> u{1300.0, 2450.0};
  fvm::Discretization d(rc);
  const Eigen::MatrixXd ja = Eigen::MatrixXd(d.jacobian(xk, xkm1, u, 2.0));
  const Eigen::MatrixXd jf = Eigen::MatrixXd(sim::finite_difference_jacobian(d, xk, xkm1, u, 2.0));
  CHECK((ja - jf).cwiseAbs().maxCoeff() < 1e-5 * ja.cwiseAbs().maxCoeff());
}

TEST_CASE("vector-Jacobian product equals J transpose times g") {
  const auto rc = testing::small_case(4, 3, 2);
  State xk, xkm1;
  testing::random_states(rc, 7, xk, xkm1);
  const std::vector<double> u{1100.0, 2300.0};
  fvm::Discretization d(rc);
  const std::size_t n = rc.cells();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> go(n), gw(n), gp(n), gs(n);
  for (auto& v : go) v = nd(rng);
  for (auto& v : gw) v = nd(rng);
  d.residual_vjp(xk, xkm1, u, 2.0, go, gw, gp, gs);
  Eigen::VectorXd g(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = go[i];
    g[n + i] = gw[i];
  }
  const Eigen::VectorXd ref = d.jacobian(xk, xkm1, u, 2.0).transpose() * g;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(gp[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    CHECK(gs[i] == doctest::Approx(ref[n + i]).epsilon(1e-12));
  }
}

TEST_CASE("producer below the wellbore pressure is flagged as crossflow") {
  const auto rc = testing::small_case(2, 1);
  State s(rc.cells(), 2200.0, 0.3);
  const auto q = fvm::well_source_terms(s, rc, std::vector<double>{1000.0, 2400.0});
  REQUIRE(q.crossflow_wells.size() == 1);
  CHECK(q.crossflow_wells[0] == 1);
  CHECK(q.q_o[1] > 0.0);
}

TEST_CASE("peaceman index for a square cell") {
  const auto rc = testing::small_case(2, 2);
  const double wi = fvm::well_index(rc.grid, rc.rock, rc.wells[0], rc.units);
  const double re = 0.14 * std::sqrt(2.0) * rc.grid.dx;
  CHECK(wi == doctest::Approx(2 * std::numbers::pi * 1.127e-3 * rc.rock.perm[0] * rc.grid.dz / std::log(re / 0.3))
                  .epsilon(1e-14));
}

TEST_CASE("wellbore radius larger than the cell is rejected") {
  auto rc = testing::small_case(2, 2);
  rc.wells[0].radius = 100.0;
  CHECK_THROWS_AS(fvm::Discretization{rc}, Error);
}

}  // TEST_SUITE
