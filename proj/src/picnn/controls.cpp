#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "porflow/picnn/picnn.hpp"

namespace porflow::picnn {

void ControlBounds::validate() const {
  if (!(bhp_lo < bhp_hi)) raise(ErrorKind::ValidationError, "control bounds: bhp_lo must be < bhp_hi");
  if (!(rate_hi > 0.0)) raise(ErrorKind::ValidationError, "control bounds: rate_hi must be positive");
}

void ScalingParams::validate() const {
  if (!(p_min < p_max)) raise(ErrorKind::ValidationError, "scaling: p_min must be < p_max");
  if (!(s_wc >= 0.0 && s_or >= 0.0 && s_wc + s_or < 1.0))
    raise(ErrorKind::ValidationError, "scaling: need s_wc, s_or >= 0 and s_wc + s_or < 1");
}

void ScalingParams::validate_against(const ReservoirCase& reservoir,
                                     const ControlSchedule& schedule) const {
  validate();
  for (std::size_t w : reservoir.producer_indices())
    for (double bhp : schedule.values[w])
      if (!(p_min < bhp))
        raise(ErrorKind::ValidationError,
              "scaling: p_min must lie below every scheduled BHP (well '" + reservoir.wells[w].name + "')");
}

ScalingParams ScalingParams::defaults(const ReservoirCase& reservoir, const ControlSchedule& schedule) {
  double min_bhp = std::numeric_limits<double>::infinity();
  for (std::size_t w : reservoir.producer_indices())
    for (double bhp : schedule.values[w]) min_bhp = std::min(min_bhp, bhp);
  const double p_init = *std::max_element(reservoir.initial.pressure.begin(), reservoir.initial.pressure.end());
  if (!std::isfinite(min_bhp)) min_bhp = p_init;
  ScalingParams s;
  s.s_wc = reservoir.relperm.s_wc;
  s.s_or = reservoir.relperm.s_or;
  s.p_min = min_bhp - 200.0;
  s.p_max = p_init + 500.0;
  return s;
}

void TrainerConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) raise(ErrorKind::ValidationError, std::string("trainer: ") + name + " must be positive");
  };
  positive(lr0, "lr0");
  positive(lr_decay, "lr_decay");
  positive(decay_every, "decay_every");
  positive(smooth_l1_beta, "smooth_l1_beta");
  positive(sigma, "sigma");
  if (max_epochs < 0) raise(ErrorKind::ValidationError, "trainer: max_epochs must be >= 0");
  if (!(physics_weight >= 0.0) || !(data_weight >= 0.0))
    raise(ErrorKind::ValidationError, "trainer: loss weights must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    raise(ErrorKind::ValidationError, "trainer: Adam betas must lie in [0, 1)");
  positive(adam_eps, "adam_eps");
}

double TrainerConfig::learning_rate(int epoch) const {
  return lr0 * std::pow(lr_decay, epoch / decay_every);
}

ControlImage rasterize_controls(const ReservoirCase& reservoir, std::span<const double> controls,
                                const ControlBounds& bounds) {
  bounds.validate();
  if (controls.size() != reservoir.wells.size())
    raise(ErrorKind::DimensionMismatch, "one control value per well is required");
  ControlImage img;
  img.height = reservoir.grid.ny;
  img.width = reservoir.grid.nx;
  img.data.assign(2 * static_cast<std::size_t>(img.height) * img.width, 0.0f);
  for (std::size_t w = 0; w < reservoir.wells.size(); ++w) {
    const WellSpec& well = reservoir.wells[w];
    const double u = controls[w];
    double value = 0.0;
    int channel = 0;
    if (well.is_injector()) {
      if (u < 0.0 || u > bounds.rate_hi)
        raise(ErrorKind::OutOfRangeControl, "injection rate of '" + well.name + "' outside [0, rate_hi]");
      value = u / bounds.rate_hi;
      channel = 1;
    } else {
      if (u < bounds.bhp_lo || u > bounds.bhp_hi)
        raise(ErrorKind::OutOfRangeControl, "BHP of '" + well.name + "' outside [bhp_lo, bhp_hi]");
      value = (u - bounds.bhp_lo) / (bounds.bhp_hi - bounds.bhp_lo);
    }
    img.data[(static_cast<std::size_t>(channel) * img.height + well.j) * img.width + well.i] =
        static_cast<float>(value);
  }
  return img;
}

ControlImage pad_image(const ControlImage& image, int multiple) {
  auto up = [multiple](int n) { return (n + multiple - 1) / multiple * multiple; };
  ControlImage out;
  out.height = up(image.height);
  out.width = up(image.width);
  const std::size_t channels = image.data.size() / (static_cast<std::size_t>(image.height) * image.width);
  out.data.assign(channels * out.height * out.width, 0.0f);
  for (std::size_t c = 0; c < channels; ++c)
    for (int r = 0; r < image.height; ++r)
      std::copy_n(image.data.begin() + static_cast<std::ptrdiff_t>((c * image.height + r) * image.width),
                  image.width,
                  out.data.begin() + static_cast<std::ptrdiff_t>((c * out.height + r) * out.width));
  return out;
}

template <class T>
State decode_output(const typename nn::ParallelUNet<T>::Output& out, const GridSpec& grid,
                    const ScalingParams& scaling) {
  if (out.height < grid.ny || out.width < grid.nx)
    raise(ErrorKind::ShapeMismatch, "network output smaller than the grid");
  State s;
  s.pressure.resize(grid.cell_count());
  s.sw.resize(grid.cell_count());
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const auto px = static_cast<std::size_t>(j) * out.width + i;
      const auto c = static_cast<std::size_t>(grid.index(i, j));
      s.pressure[c] = scaling.pressure(static_cast<double>(out.pressure[px]));
      s.sw[c] = scaling.saturation(static_cast<double>(out.saturation[px]));
    }
  return s;
}

template State decode_output<float>(const nn::ParallelUNet<float>::Output&, const GridSpec&,
                                    const ScalingParams&);
template State decode_output<double>(const nn::ParallelUNet<double>::Output&, const GridSpec&,
                                     const ScalingParams&);

}  // namespace porflow::picnn
