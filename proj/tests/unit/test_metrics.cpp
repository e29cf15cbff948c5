#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "oracle.hpp"
#include "porflow/metrics/metrics.hpp"

using namespace porflow;

TEST_SUITE("metrics") {

TEST_CASE("mape hand case") {
  CHECK(std::abs(metrics::mape(std::vector<double>{100, 200}, std::vector<double>{90, 210}) - 0.05) < 1e-12);
  const std::vector<double> y{3.0, -4.0, 5.0};
  CHECK(metrics::mape(y, y) == 0.0);
}

TEST_CASE("mape is scale-invariant and permutation-symmetric") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1.0, 10.0);
  std::vector<double> y(50), yh(50);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = u(rng);
    yh[i] = u(rng);
  }
  const double base = metrics::mape(y, yh);
  for (double c : {-3.0, 0.01, 250.0}) {
    std::vector<double> a(y), b(yh);
    for (auto& v : a) v *= c;
    for (auto& v : b) v *= c;
    CHECK(metrics::mape(a, b) == doctest::Approx(base).epsilon(1e-12));
  }
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> py(y.size()), pyh(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    py[i] = y[perm[i]];
    pyh[i] = yh[perm[i]];
  }
  CHECK(metrics::mape(py, pyh) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mape rejects an all-zero reference") {
  try {
    (void)metrics::mape(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateReference);
  }
}

TEST_CASE("relative error map") {
  const std::vector<double> ref{100.0, 250.0, 0.4};
  std::vector<double> pred(ref);
  for (double v : metrics::relative_error_map(pred, ref)) CHECK(v == 0.0);
  for (auto& v : pred) v *= 1.025;
  const auto m = metrics::relative_error_map(pred, ref);
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(m[i] == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(ref[i] * (1.0 + m[i]) == doctest::Approx(pred[i]).epsilon(1e-12));
  }
  CHECK(metrics::relative_error_map(std::vector<double>{90.0}, std::vector<double>{100.0})[0] < 0.0);
  try {
    (void)metrics::relative_error_map(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 0.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DivisionByZeroPixel);
    CHECK(std::string(e.what()).find('1') != std::string::npos);
  }
}

TEST_CASE("well quantities") {
  const auto rc = testing::small_case(3, 3);
  State s(rc.cells(), 3000.0, 0.2);
  s.pressure[8] = 2800.0;
  auto q = metrics::extract_well_quantities(s, rc, std::vector<double>{1000.0, 2800.0});
  REQUIRE(q.size() == 1);
  CHECK(q[0].well == "P1");
  CHECK(q[0].wbp == 2800.0);
  CHECK(q[0].oil_rate == 0.0);
  CHECK(q[0].water_rate == 0.0);
  q = metrics::extract_well_quantities(s, rc, std::vector<double>{1000.0, 2400.0});
  CHECK(q[0].oil_rate > 0.0);
  CHECK(q[0].water_rate == 0.0);
  const auto src = fvm::well_source_terms(s, rc, std::vector<double>{1000.0, 2400.0});
  CHECK(q[0].oil_rate == -src.q_o[8]);
}

TEST_CASE("speedup report") {
  std::vector<metrics::SpeedupInput> in{{"a", 64, 64, 10, 2.0, 2.0, 0.0}, {"b", 100, 100, 10, 3.0, 0.5, 1.0}};
  const auto rows = metrics::speedup_report(in);
  CHECK(rows[0].dofs == 8192);
  CHECK(rows[0].speedup == 1.0);
  CHECK(rows[1].speedup == 6.0);
  CHECK(metrics::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(metrics::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("trajectory errors skip the shared initial state") {
  sim::Trajectory a, b;
  a.states = {State(2, 100.0, 0.5), State(2, 110.0, 0.5)};
  b.states = {State(2, 100.0, 0.5), State(2, 100.0, 0.5)};
  const auto e = metrics::trajectory_errors(a, b);
  REQUIRE(e.size() == 1);
  CHECK(e[0].step == 1);
  CHECK(e[0].mape_pressure == doctest::Approx(0.1));
  CHECK(e[0].mape_saturation == 0.0);
}

}  // TEST_SUITE
