#include "porflow/harness/schedule_gen.hpp"

#include <cmath>
#include <random>

namespace porflow::harness {

void ControlSuite::validate() const {
  auto fail = [](const char* msg) { raise(ErrorKind::ValidationError, std::string("control suite: ") + msg); };
  if (n_schedules < 1) fail("n_schedules must be >= 1");
  if (!(dt > 0.0) || !(total_time > 0.0) || !(period > 0.0)) fail("dt, total_time and period must be positive");
  const double steps = total_time / dt;
  if (std::abs(steps - std::round(steps)) > 1e-9) fail("total_time must be a multiple of dt");
  const double per = period / dt;
  if (std::abs(per - std::round(per)) > 1e-9) fail("period must be a multiple of dt");
  if (!(rate_lo >= 0.0 && rate_lo <= rate_hi)) fail("need 0 <= rate_lo <= rate_hi");
  if (!(bhp_lo > 0.0 && bhp_lo <= bhp_hi)) fail("need 0 < bhp_lo <= bhp_hi");
}

std::vector<ControlSchedule> gen_control_suite(const ControlSuite& suite, std::span<const WellSpec> wells) {
  suite.validate();
  const int n_steps = static_cast<int>(std::lround(suite.total_time / suite.dt));
  const int per_segment = static_cast<int>(std::lround(suite.period / suite.dt));
  const int segments = (n_steps + per_segment - 1) / per_segment;

  std::vector<ControlSchedule> out;
  for (int s = 0; s < suite.n_schedules; ++s) {
    std::seed_seq seq{static_cast<std::uint32_t>(suite.seed), static_cast<std::uint32_t>(suite.seed >> 32),
                      static_cast<std::uint32_t>(s)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ControlSchedule sched;
    sched.dt = suite.dt;
    sched.n_steps = n_steps;
    for (const WellSpec& w : wells) {
      const double lo = w.is_injector() ? suite.rate_lo : suite.bhp_lo;
      const double hi = w.is_injector() ? suite.rate_hi : suite.bhp_hi;
      std::vector<double> segment_values(static_cast<std::size_t>(segments));
      for (double& v : segment_values) v = lo + (hi - lo) * unit(rng);
      std::vector<double> values(static_cast<std::size_t>(n_steps));
      for (int k = 0; k < n_steps; ++k) values[static_cast<std::size_t>(k)] = segment_values[static_cast<std::size_t>(k / per_segment)];
      sched.values.push_back(std::move(values));
    }
    out.push_back(std::move(sched));
  }
  return out;
}

}  // namespace porflow::harness
