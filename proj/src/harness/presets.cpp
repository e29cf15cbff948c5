#include "porflow/harness/presets.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace porflow::harness {

std::vector<double> lognormal_permeability(const GridSpec& grid, const LognormalField& field) {
  const std::size_t n = grid.cell_count();
  std::mt19937_64 rng(field.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(n);
  for (double& v : noise) v = normal(rng);

  std::vector<double> smooth = noise;
  if (field.correlation_length > 0.0) {
    const int radius = static_cast<int>(std::ceil(3.0 * field.correlation_length));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (int d = -radius; d <= radius; ++d) {
      const double x = d / field.correlation_length;
      kernel[static_cast<std::size_t>(d + radius)] = std::exp(-0.5 * x * x);
    }
    std::vector<double> tmp(n, 0.0);
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          const int ii = std::clamp(i + d, 0, grid.nx - 1);
          acc += kernel[static_cast<std::size_t>(d + radius)] * noise[static_cast<std::size_t>(grid.index(ii, j))];
        }
        tmp[static_cast<std::size_t>(grid.index(i, j))] = acc;
      }
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          const int jj = std::clamp(j + d, 0, grid.ny - 1);
          acc += kernel[static_cast<std::size_t>(d + radius)] * tmp[static_cast<std::size_t>(grid.index(i, jj))];
        }
        smooth[static_cast<std::size_t>(grid.index(i, j))] = acc;
      }
  }

  double mean = 0.0;
  for (double v : smooth) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : smooth) var += (v - mean) * (v - mean);
  const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n)) : 0.0;

  std::vector<double> perm(n);
  const double log_mean = std::log(field.geometric_mean_md);
  for (std::size_t c = 0; c < n; ++c) {
    const double z = sd > 0.0 ? (smooth[c] - mean) / sd : 0.0;
    perm[c] = std::max(std::exp(log_mean + field.log_std * z), 0.1);
  }
  return perm;
}

std::vector<WellSpec> default_wells(int nx, int ny) {
  auto at = [](int n, double frac) {
    return std::clamp(static_cast<int>(std::lround(frac * (n - 1))), 0, n - 1);
  };
  std::vector<WellSpec> wells;
  wells.push_back({"I1", WellKind::RateInjector, at(nx, 0.12), at(ny, 0.12), 0.3, 0.0});
  wells.push_back({"I2", WellKind::RateInjector, at(nx, 0.12), at(ny, 0.88), 0.3, 0.0});
  wells.push_back({"I3", WellKind::RateInjector, at(nx, 0.45), at(ny, 0.50), 0.3, 0.0});
  wells.push_back({"P1", WellKind::BhpProducer, at(nx, 0.88), at(ny, 0.25), 0.3, 0.0});
  wells.push_back({"P2", WellKind::BhpProducer, at(nx, 0.88), at(ny, 0.75), 0.3, 0.0});
  return wells;
}

ReservoirCase waterflood_case(const PresetOptions& opts) {
  ReservoirCase rc;
  const double cell_ft = 20.0 * rc.units.ft_per_m;
  rc.grid = GridSpec{opts.n, opts.n, cell_ft, cell_ft, cell_ft};
  rc.rock.porosity = {0.2};
  rc.rock.compressibility = 3.0e-6;
  rc.rock.pressure_ref = 3000.0;
  rc.rock.perm = opts.heterogeneous ? lognormal_permeability(rc.grid, opts.field)
                                    : std::vector<double>(rc.grid.cell_count(), opts.homogeneous_perm_md);
  rc.fluid = FluidModel{};
  rc.relperm = CoreyRelPerm{};
  rc.wells = default_wells(opts.n, opts.n);
  rc.initial = State(rc.grid.cell_count(), 3000.0, rc.relperm.s_wc);
  return rc;
}

ControlSchedule baseline_schedule(double dt, double total_time, double period_days) {
  // Per-segment values cycle through these lists.
  static const std::vector<std::vector<double>> pattern = {
      {1200.0, 1400.0}, {1400.0, 1100.0}, {1000.0, 1300.0},  // injectors, STB/day
      {2450.0, 2350.0}, {2400.0, 2480.0},                    // producers, psia
  };
  ControlSchedule s;
  s.dt = dt;
  s.n_steps = static_cast<int>(std::lround(total_time / dt));
  s.values.resize(pattern.size());
  for (std::size_t w = 0; w < pattern.size(); ++w)
    for (int k = 1; k <= s.n_steps; ++k) {
      const double t_start = (k - 1) * dt;
      const auto segment = static_cast<std::size_t>(std::floor(t_start / period_days + 1e-9));
      s.values[w].push_back(pattern[w][segment % pattern[w].size()]);
    }
  return s;
}

}  // namespace porflow::harness
