#include "porflow/core/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace porflow {

namespace {

[[noreturn]] void invalid(const std::string& what) { raise(ErrorKind::ValidationError, what); }

}  // namespace

void UnitConstants::validate() const {
  if (!(darcy_const > 0.0) || !(cubic_ft_per_bbl > 0.0) || !(ft_per_m > 0.0))
    invalid("units: all conversion constants must be positive");
}

void GridSpec::validate() const {
  if (nx < 1 || ny < 1) invalid("grid: nx and ny must be >= 1");
  if (!(dx > 0.0) || !(dy > 0.0) || !(dz > 0.0)) invalid("grid: dx, dy, dz must be positive");
}

std::pair<double, double> RockModel::porosity_at(std::size_t cell, double p) const {
  const double phi0 = porosity_ref(cell);
  return {phi0 * (1.0 + compressibility * (p - pressure_ref)), phi0 * compressibility};
}

void RockModel::validate(const GridSpec& grid) const {
  if (perm.size() != grid.cell_count()) invalid("rock: permeability must have one entry per cell");
  for (double k : perm)
    if (!(k > 0.0) || !std::isfinite(k)) invalid("rock: permeability must be positive");
  if (porosity.size() != 1 && porosity.size() != grid.cell_count())
    invalid("rock: porosity must be scalar or per-cell");
  for (double phi : porosity)
    if (!(phi > 0.0 && phi < 1.0)) invalid("rock: porosity must lie in (0, 1)");
  if (!(compressibility >= 0.0)) invalid("rock: compressibility must be >= 0");
}

void FluidModel::validate() const {
  for (const PhaseProps* p : {&oil, &water}) {
    const char* name = p == &oil ? "oil" : "water";
    if (!(p->viscosity > 0.0)) invalid(std::string("fluids.") + name + ": viscosity must be positive");
    if (!(p->compressibility >= 0.0))
      invalid(std::string("fluids.") + name + ": compressibility must be >= 0");
    if (!(p->fvf_ref > 0.0)) invalid(std::string("fluids.") + name + ": fvf_ref must be positive");
  }
}

void CoreyRelPerm::validate() const {
  if (!(s_wc >= 0.0 && s_wc < 1.0)) invalid("relperm: s_wc must lie in [0, 1)");
  if (!(s_or >= 0.0 && s_or < 1.0)) invalid("relperm: s_or must lie in [0, 1)");
  if (!(s_wc + s_or < 1.0)) invalid("relperm: s_wc + s_or must be < 1");
  if (!(n_w >= 1.0) || !(n_o >= 1.0)) invalid("relperm: Corey exponents must be >= 1");
  if (!(krw0 > 0.0 && krw0 <= 1.0) || !(kro0 > 0.0 && kro0 <= 1.0))
    invalid("relperm: end points must lie in (0, 1]");
}

RelPermEval corey_relperm_eval(double sw, const CoreyRelPerm& m) {
  const double span = 1.0 - m.s_or - m.s_wc;
  const double s_raw = (sw - m.s_wc) / span;
  const double s = std::clamp(s_raw, 0.0, 1.0);
  const bool mobile = s_raw > 0.0 && s_raw < 1.0;
  RelPermEval out;
  out.krw = m.krw0 * std::pow(s, m.n_w);
  out.kro = m.kro0 * std::pow(1.0 - s, m.n_o);
  if (mobile) {
    out.dkrw = m.krw0 * m.n_w * std::pow(s, m.n_w - 1.0) / span;
    out.dkro = -m.kro0 * m.n_o * std::pow(1.0 - s, m.n_o - 1.0) / span;
  }
  return out;
}

RelPermPair corey_relperm(double sw, const CoreyRelPerm& model) {
  const RelPermEval e = corey_relperm_eval(sw, model);
  return {e.krw, e.kro};
}

FluidEval fluid_props_at(double p, const PhaseProps& props) {
  const double denom = 1.0 + props.compressibility * (p - props.pressure_ref);
  if (!(denom > 0.0)) {
    std::ostringstream os;
    os << "formation volume factor undefined at p = " << p << " psia";
    raise(ErrorKind::NonPhysicalFvf, os.str());
  }
  FluidEval out;
  out.fvf = props.fvf_ref / denom;
  out.dfvf_dp = -props.fvf_ref * props.compressibility / (denom * denom);
  out.viscosity = props.viscosity;
  return out;
}

FluidEval fluid_props_at(double p, Phase phase, const FluidModel& model) {
  return fluid_props_at(p, model.phase(phase));
}

std::vector<double> ControlSchedule::controls_at(int k) const {
  if (k < 1 || k > n_steps) raise(ErrorKind::InvalidArgument, "control step out of range");
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v[static_cast<std::size_t>(k - 1)]);
  return out;
}

void ControlSchedule::validate(std::span<const WellSpec> wells) const {
  if (!(dt > 0.0)) invalid("schedule: dt must be positive");
  if (n_steps < 1) invalid("schedule: at least one step is required");
  if (values.size() != wells.size()) invalid("schedule: one control series per well is required");
  for (std::size_t w = 0; w < wells.size(); ++w) {
    if (values[w].size() != static_cast<std::size_t>(n_steps))
      invalid("schedule: well '" + wells[w].name + "' has a control series of the wrong length");
    for (double v : values[w]) {
      if (wells[w].is_injector() && !(v >= 0.0))
        invalid("schedule: injection rate of '" + wells[w].name + "' must be >= 0");
      if (!wells[w].is_injector() && !(v > 0.0))
        invalid("schedule: BHP of '" + wells[w].name + "' must be positive");
    }
  }
}

void State::validate(std::size_t cells) const {
  if (pressure.size() != cells || sw.size() != cells)
    raise(ErrorKind::DimensionMismatch, "state size does not match the grid");
  for (std::size_t c = 0; c < cells; ++c) {
    if (!std::isfinite(pressure[c]) || !(pressure[c] > 0.0))
      invalid("state: pressure must be finite and positive");
    if (!(sw[c] >= 0.0 && sw[c] <= 1.0)) invalid("state: water saturation must lie in [0, 1]");
  }
}

std::vector<std::size_t> ReservoirCase::producer_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < wells.size(); ++w)
    if (!wells[w].is_injector()) out.push_back(w);
  return out;
}

std::vector<std::size_t> ReservoirCase::injector_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < wells.size(); ++w)
    if (wells[w].is_injector()) out.push_back(w);
  return out;
}

void ReservoirCase::validate() const {
  grid.validate();
  rock.validate(grid);
  fluid.validate();
  relperm.validate();
  units.validate();
  std::set<int> occupied;
  for (const auto& w : wells) {
    if (!grid.contains(w.i, w.j))
      invalid("well '" + w.name + "' lies outside the grid");
    if (!(w.radius > 0.0)) invalid("well '" + w.name + "': radius must be positive");
    if (!occupied.insert(grid.index(w.i, w.j)).second)
      invalid("well '" + w.name + "' shares a cell with another well");
  }
  initial.validate(cells());
}

}  // namespace porflow
