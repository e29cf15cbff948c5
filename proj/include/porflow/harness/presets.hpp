#pragma once

#include <cstdint>
#include <vector>

#include "porflow/core/model.hpp"

// Bundled reservoir setups: property values from the oil-water waterflood
// study (20 m cells, 3000 psia, Corey 0.2/0.2/2/3/0.6/0.9) on any square grid.

namespace porflow::harness {

struct LognormalField {
  double geometric_mean_md = 100.0;
  double log_std = 1.0;
  double correlation_length = 3.0;  // cells, Gaussian kernel standard deviation
  std::uint64_t seed = 7;
};

// Seeded log-normal permeability: white noise smoothed by a separable
// Gaussian kernel, standardized, then exponentiated.
std::vector<double> lognormal_permeability(const GridSpec& grid, const LognormalField& field);

// Three injectors and two producers at fixed fractional positions.
std::vector<WellSpec> default_wells(int nx, int ny);

struct PresetOptions {
  int n = 64;
  bool heterogeneous = true;
  LognormalField field{};
  double homogeneous_perm_md = 100.0;
};

ReservoirCase waterflood_case(const PresetOptions& opts);

// Stepwise controls for default_wells(): values change every period_days.
ControlSchedule baseline_schedule(double dt, double total_time, double period_days);

}  // namespace porflow::harness
