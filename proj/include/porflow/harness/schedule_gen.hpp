#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "porflow/core/model.hpp"

namespace porflow::harness {

// Randomized piecewise-constant control schedules for generalization tests.
struct ControlSuite {
  int n_schedules = 10;
  double dt = 2.0;           // days
  double total_time = 100.0;  // days
  double period = 50.0;      // days between control changes, a multiple of dt
  double rate_lo = 1000.0;   // STB/day, injectors
  double rate_hi = 1500.0;
  double bhp_lo = 2300.0;    // psia, producers
  double bhp_hi = 2500.0;
  std::uint64_t seed = 2024;

  void validate() const;
};

// Each well draws one uniform value per period segment. Schedule s uses its
// own stream derived from (seed, s), so suites of different sizes share
// their common prefix.
std::vector<ControlSchedule> gen_control_suite(const ControlSuite& suite, std::span<const WellSpec> wells);

}  // namespace porflow::harness
