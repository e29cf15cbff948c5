#include "porflow/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "porflow/harness/presets.hpp"
#include "porflow/harness/schedule_gen.hpp"

namespace porflow::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  raise(ErrorKind::ValidationError, "field '" + field + "': " + what);
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Walks one JSON object, filling defaults in place and recording them.
class Section {
 public:
  Section(json& node, std::string path, std::vector<std::string>& log)
      : node_(node), path_(std::move(path)), log_(log) {
    if (node_.is_null()) node_ = json::object();
    if (!node_.is_object()) invalid(path_, "expected an object");
  }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    json& v = slot(key, def ? json(*def) : json());
    if (!v.is_number()) invalid(join(path_, key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) invalid(join(path_, key), "must be finite");
    return d;
  }
  double positive(const std::string& key, std::optional<double> def = std::nullopt) {
    const double d = number(key, def);
    if (!(d > 0.0)) invalid(join(path_, key), "must be > 0");
    return d;
  }
  double non_negative(const std::string& key, std::optional<double> def = std::nullopt) {
    const double d = number(key, def);
    if (!(d >= 0.0)) invalid(join(path_, key), "must be >= 0");
    return d;
  }
  long long integer(const std::string& key, std::optional<long long> def = std::nullopt) {
    json& v = slot(key, def ? json(*def) : json());
    if (!v.is_number_integer()) invalid(join(path_, key), "expected an integer");
    return v.get<long long>();
  }
  std::uint64_t unsigned_integer(const std::string& key, std::optional<std::uint64_t> def = std::nullopt) {
    json& v = slot(key, def ? json(*def) : json());
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      invalid(join(path_, key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, std::optional<bool> def = std::nullopt) {
    json& v = slot(key, def ? json(*def) : json());
    if (!v.is_boolean()) invalid(join(path_, key), "expected true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& key, std::optional<std::string> def = std::nullopt,
                   std::initializer_list<const char*> choices = {}) {
    json& v = slot(key, def ? json(*def) : json());
    if (!v.is_string()) invalid(join(path_, key), "expected a string");
    const std::string s = v.get<std::string>();
    if (choices.size() > 0 &&
        std::none_of(choices.begin(), choices.end(), [&](const char* c) { return s == c; })) {
      std::string list;
      for (const char* c : choices) list += std::string(list.empty() ? "" : ", ") + c;
      invalid(join(path_, key), "must be one of: " + list);
    }
    return s;
  }
  Section child(const std::string& key) {
    if (!node_.contains(key)) {
      node_[key] = json::object();
      log_.push_back(join(path_, key));
    }
    return Section(node_[key], join(path_, key), log_);
  }
  json& raw(const std::string& key, const json& def) { return slot(key, def); }
  bool has(const std::string& key) const { return node_.contains(key); }
  const std::string& path() const { return path_; }

  void only(std::initializer_list<const char*> allowed) const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }))
        invalid(join(path_, it.key()), "unknown key");
  }

 private:
  json& slot(const std::string& key, const json& def) {
    if (!node_.contains(key)) {
      if (def.is_null()) invalid(join(path_, key), "is required");
      node_[key] = def;
      log_.push_back(join(path_, key));
    }
    return node_[key];
  }

  json& node_;
  std::string path_;
  std::vector<std::string>& log_;
};

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

PhaseProps read_phase(Section s, const PhaseProps& def) {
  s.only({"viscosity", "compressibility", "fvf_ref", "pressure_ref", "density"});
  PhaseProps p;
  p.viscosity = s.positive("viscosity", def.viscosity);
  p.compressibility = s.non_negative("compressibility", def.compressibility);
  p.fvf_ref = s.positive("fvf_ref", def.fvf_ref);
  p.pressure_ref = s.number("pressure_ref", def.pressure_ref);
  p.density = s.non_negative("density", def.density);
  return p;
}

std::vector<double> read_perm_file(const fs::path& path, std::size_t expected, const std::string& field) {
  std::ifstream is(path);
  if (!is) invalid(field, "cannot open permeability file '" + path.string() + "'");
  std::vector<double> values;
  double v = 0.0;
  while (is >> v) values.push_back(v);
  if (!is.eof()) invalid(field, "permeability file contains a non-numeric token");
  if (values.size() != expected)
    invalid(field, "permeability file has " + std::to_string(values.size()) + " values, grid needs " +
                       std::to_string(expected));
  return values;
}

CaseConfig build(json doc, const fs::path& base_dir) {
  CaseConfig cfg;
  std::vector<std::string>& log = cfg.defaults_applied;
  Section root(doc, "", log);
  root.only({"name", "units", "grid", "rock", "fluids", "relperm", "wells", "initial", "transmissibility",
             "schedule", "solver", "network", "trainer", "scaling", "control_bounds", "output", "seed",
             "sweep", "bench"});
  cfg.name = root.text("name", std::string("case"));
  cfg.seed = root.unsigned_integer("seed", 42);

  // Units: lengths are converted to feet and the dump declares feet.
  Section units = root.child("units");
  units.only({"length"});
  const std::string length_unit = units.text("length", std::string("ft"), {"ft", "m"});
  const double to_ft = length_unit == "m" ? UnitConstants{}.ft_per_m : 1.0;
  units.raw("length", "ft") = "ft";

  ReservoirCase& rc = cfg.reservoir;
  Section grid = root.child("grid");
  grid.only({"nx", "ny", "dx", "dy", "dz"});
  const long long nx = grid.integer("nx");
  const long long ny = grid.integer("ny");
  if (nx < 1 || nx > 4096) invalid("grid.nx", "must be in [1, 4096]");
  if (ny < 1 || ny > 4096) invalid("grid.ny", "must be in [1, 4096]");
  rc.grid.nx = static_cast<int>(nx);
  rc.grid.ny = static_cast<int>(ny);
  for (const char* key : {"dx", "dy", "dz"}) {
    // 20 m cells unless stated otherwise.
    const double v = grid.positive(key, length_unit == "m" ? 20.0 : 20.0 * UnitConstants{}.ft_per_m) * to_ft;
    grid.raw(key, 0.0) = v;
    (key[1] == 'x' ? rc.grid.dx : key[1] == 'y' ? rc.grid.dy : rc.grid.dz) = v;
  }

  Section rock = root.child("rock");
  rock.only({"porosity", "compressibility", "pressure_ref", "permeability"});
  const double phi = rock.positive("porosity", 0.2);
  if (phi >= 1.0) invalid("rock.porosity", "must be < 1");
  rc.rock.porosity = {phi};
  rc.rock.compressibility = rock.non_negative("compressibility", 3.0e-6);
  rc.rock.pressure_ref = rock.number("pressure_ref", 3000.0);
  Section perm = rock.child("permeability");
  const std::string perm_kind = perm.text("kind", std::string("lognormal"), {"lognormal", "uniform", "file"});
  if (perm_kind == "lognormal") {
    perm.only({"kind", "geometric_mean_md", "log_std", "correlation_length", "seed"});
    LognormalField f;
    f.geometric_mean_md = perm.positive("geometric_mean_md", f.geometric_mean_md);
    f.log_std = perm.non_negative("log_std", f.log_std);
    f.correlation_length = perm.non_negative("correlation_length", f.correlation_length);
    f.seed = perm.unsigned_integer("seed", f.seed);
    rc.rock.perm = lognormal_permeability(rc.grid, f);
  } else if (perm_kind == "uniform") {
    perm.only({"kind", "value_md"});
    rc.rock.perm.assign(rc.grid.cell_count(), perm.positive("value_md", 100.0));
  } else {
    perm.only({"kind", "path"});
    fs::path p = perm.text("path");
    if (p.is_relative()) p = fs::absolute(base_dir / p);
    perm.raw("path", "") = p.string();
    rc.rock.perm = read_perm_file(p, rc.grid.cell_count(), "rock.permeability.path");
  }

  Section fluids = root.child("fluids");
  fluids.only({"oil", "water"});
  rc.fluid.oil = read_phase(fluids.child("oil"), FluidModel{}.oil);
  rc.fluid.water = read_phase(fluids.child("water"), FluidModel{}.water);

  Section kr = root.child("relperm");
  kr.only({"s_wc", "s_or", "n_w", "n_o", "krw0", "kro0"});
  const CoreyRelPerm kd;
  rc.relperm.s_wc = kr.non_negative("s_wc", kd.s_wc);
  rc.relperm.s_or = kr.non_negative("s_or", kd.s_or);
  rc.relperm.n_w = kr.positive("n_w", kd.n_w);
  rc.relperm.n_o = kr.positive("n_o", kd.n_o);
  rc.relperm.krw0 = kr.positive("krw0", kd.krw0);
  rc.relperm.kro0 = kr.positive("kro0", kd.kro0);
  if (rc.relperm.s_wc + rc.relperm.s_or >= 1.0) invalid("relperm", "s_wc + s_or must be < 1");

  json& wells = root.raw("wells", "default");
  if (wells.is_string()) {
    if (wells.get<std::string>() != "default") invalid("wells", "expected \"default\" or a list of wells");
    rc.wells = default_wells(rc.grid.nx, rc.grid.ny);
    wells = json::array();
    for (const WellSpec& w : rc.wells)
      wells.push_back({{"name", w.name}, {"kind", w.is_injector() ? "injector" : "producer"}, {"i", w.i},
                       {"j", w.j}, {"radius", w.radius}, {"skin", w.skin}});
  } else if (wells.is_array()) {
    for (std::size_t n = 0; n < wells.size(); ++n) {
      Section ws(wells[n], "wells[" + std::to_string(n) + "]", log);
      ws.only({"name", "kind", "i", "j", "radius", "skin"});
      WellSpec w;
      w.name = ws.text("name");
      w.kind = ws.text("kind", std::nullopt, {"injector", "producer"}) == "injector" ? WellKind::RateInjector
                                                                                   : WellKind::BhpProducer;
      w.i = static_cast<int>(ws.integer("i"));
      w.j = static_cast<int>(ws.integer("j"));
      w.radius = ws.positive("radius", 0.3 / to_ft) * to_ft;
      ws.raw("radius", 0.0) = w.radius;
      w.skin = ws.number("skin", 0.0);
      rc.wells.push_back(w);
    }
  } else {
    invalid("wells", "expected \"default\" or a list of wells");
  }
  {
    std::set<std::string> names;
    for (const WellSpec& w : rc.wells)
      if (!names.insert(w.name).second) invalid("wells", "duplicate well name '" + w.name + "'");
  }

  Section init = root.child("initial");
  init.only({"pressure", "sw"});
  const double p0 = init.positive("pressure", 3000.0);
  const double s0 = init.number("sw", rc.relperm.s_wc);
  rc.initial = State(rc.grid.cell_count(), p0, s0);

  const std::string trans = root.text("transmissibility", std::string("paper"), {"paper", "two_point"});
  rc.transmissibility = trans == "paper" ? TransmissibilityMode::Paper : TransmissibilityMode::TwoPoint;

  try {
    rc.validate();
  } catch (const Error& e) {
    raise(ErrorKind::ValidationError, e.what());
  }

  Section sched = root.child("schedule");
  const std::string kind = sched.text("kind", std::string("baseline"), {"baseline", "constant", "explicit", "random"});
  const double dt = sched.positive("dt", 2.0);
  if (kind == "explicit") {
    sched.only({"kind", "dt", "controls"});
    json& controls = sched.raw("controls", json());
    if (!controls.is_object()) invalid("schedule.controls", "expected an object keyed by well name");
    cfg.schedule.dt = dt;
    for (const WellSpec& w : rc.wells) {
      if (!controls.contains(w.name)) invalid("schedule.controls", "no controls for well '" + w.name + "'");
      const json& series = controls[w.name];
      if (!series.is_array()) invalid("schedule.controls." + w.name, "expected a list of numbers");
      std::vector<double> values;
      for (const json& v : series) {
        if (!v.is_number()) invalid("schedule.controls." + w.name, "expected a list of numbers");
        values.push_back(v.get<double>());
      }
      cfg.schedule.values.push_back(values);
    }
    cfg.schedule.n_steps = static_cast<int>(cfg.schedule.values.empty() ? 0 : cfg.schedule.values[0].size());
  } else {
    const double total = sched.positive("total_time", 100.0);
    const double steps = total / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9)
      invalid("schedule.total_time", "must be a whole number of time steps (dt)");
    if (kind == "baseline") {
      sched.only({"kind", "dt", "total_time", "period"});
      const double period = sched.positive("period", 50.0);
      if (rc.wells.size() != 5 || rc.injector_indices() != std::vector<std::size_t>{0, 1, 2})
        invalid("schedule.kind", "'baseline' needs three injectors followed by two producers");
      cfg.schedule = baseline_schedule(dt, total, period);
    } else if (kind == "constant") {
      sched.only({"kind", "dt", "total_time", "controls"});
      json& controls = sched.raw("controls", json());
      if (!controls.is_object()) invalid("schedule.controls", "expected an object keyed by well name");
      cfg.schedule.dt = dt;
      cfg.schedule.n_steps = static_cast<int>(std::lround(steps));
      for (const WellSpec& w : rc.wells) {
        if (!controls.contains(w.name) || !controls[w.name].is_number())
          invalid("schedule.controls", "no numeric control for well '" + w.name + "'");
        cfg.schedule.values.emplace_back(static_cast<std::size_t>(cfg.schedule.n_steps),
                                         controls[w.name].get<double>());
      }
    } else {
      sched.only({"kind", "dt", "total_time", "period", "rate_lo", "rate_hi", "bhp_lo", "bhp_hi", "seed"});
      ControlSuite suite;
      suite.n_schedules = 1;
      suite.dt = dt;
      suite.total_time = total;
      suite.period = sched.positive("period", 50.0);
      suite.rate_lo = sched.non_negative("rate_lo", suite.rate_lo);
      suite.rate_hi = sched.positive("rate_hi", suite.rate_hi);
      suite.bhp_lo = sched.positive("bhp_lo", suite.bhp_lo);
      suite.bhp_hi = sched.positive("bhp_hi", suite.bhp_hi);
      suite.seed = sched.unsigned_integer("seed", 7);
      try {
        cfg.schedule = gen_control_suite(suite, rc.wells).front();
      } catch (const Error& e) {
        raise(ErrorKind::ValidationError, std::string("schedule: ") + e.what());
      }
    }
  }
  try {
    cfg.schedule.validate(rc.wells);
  } catch (const Error& e) {
    raise(ErrorKind::ValidationError, e.what());
  }

  Section solver = root.child("solver");
  solver.only({"residual_tol", "max_newton_iters", "jacobian", "linear_solver_tol", "damping", "max_step_cuts"});
  const sim::NewtonConfig nd;
  cfg.solver.residual_tol = solver.positive("residual_tol", nd.residual_tol);
  cfg.solver.max_newton_iters = static_cast<int>(solver.integer("max_newton_iters", nd.max_newton_iters));
  cfg.solver.jacobian_mode = solver.text("jacobian", std::string("finite_difference"),
                                         {"finite_difference", "analytic"}) == "analytic"
                                 ? sim::JacobianMode::Analytic
                                 : sim::JacobianMode::FiniteDifference;
  cfg.solver.linear_solver_tol = solver.positive("linear_solver_tol", nd.linear_solver_tol);
  cfg.solver.damping = solver.positive("damping", nd.damping);
  cfg.solver.max_step_cuts = static_cast<int>(solver.integer("max_step_cuts", nd.max_step_cuts));
  try {
    cfg.solver.validate();
  } catch (const Error& e) {
    raise(ErrorKind::ValidationError, e.what());
  }

  Section net = root.child("network");
  net.only({"input_channels", "depth", "base_channels"});
  cfg.network.input_channels = static_cast<int>(net.integer("input_channels", 2));
  cfg.network.depth = static_cast<int>(net.integer("depth", 3));
  cfg.network.base_channels = static_cast<int>(net.integer("base_channels", 32));
  if (cfg.network.input_channels != 2) invalid("network.input_channels", "control images have 2 channels");
  cfg.network.validate();

  Section tr = root.child("trainer");
  tr.only({"lr0", "lr_decay", "decay_every", "smooth_l1_beta", "sigma", "max_epochs", "physics_weight",
           "data_weight", "use_observations"});
  const picnn::TrainerConfig td;
  cfg.trainer.lr0 = tr.positive("lr0", td.lr0);
  cfg.trainer.lr_decay = tr.positive("lr_decay", td.lr_decay);
  cfg.trainer.decay_every = static_cast<int>(tr.integer("decay_every", td.decay_every));
  cfg.trainer.smooth_l1_beta = tr.positive("smooth_l1_beta", td.smooth_l1_beta);
  cfg.trainer.sigma = tr.positive("sigma", td.sigma);
  cfg.trainer.max_epochs = static_cast<int>(tr.integer("max_epochs", td.max_epochs));
  cfg.trainer.physics_weight = tr.non_negative("physics_weight", td.physics_weight);
  cfg.trainer.data_weight = tr.non_negative("data_weight", td.data_weight);
  cfg.train_with_observations = tr.boolean("use_observations", false);
  cfg.trainer.seed = cfg.seed;
  try {
    cfg.trainer.validate();
  } catch (const Error& e) {
    raise(ErrorKind::ValidationError, e.what());
  }

  Section sc = root.child("scaling");
  sc.only({"p_min", "p_max"});
  json& pmin = sc.raw("p_min", "auto");
  json& pmax = sc.raw("p_max", "auto");
  auto auto_or_number = [](const json& v, const char* field) {
    if (v.is_string() && v.get<std::string>() == "auto") return false;
    if (!v.is_number()) invalid(field, "expected a number or \"auto\"");
    return true;
  };
  const bool pmin_set = auto_or_number(pmin, "scaling.p_min");
  const bool pmax_set = auto_or_number(pmax, "scaling.p_max");
  if (pmin_set || pmax_set) {
    picnn::ScalingParams s = picnn::ScalingParams::defaults(rc, cfg.schedule);
    if (pmin_set) s.p_min = pmin.get<double>();
    if (pmax_set) s.p_max = pmax.get<double>();
    cfg.scaling = s;
  }
  try {
    cfg.effective_scaling().validate_against(rc, cfg.schedule);
  } catch (const Error& e) {
    raise(ErrorKind::ValidationError, e.what());
  }

  Section cb = root.child("control_bounds");
  cb.only({"bhp_lo", "bhp_hi", "rate_hi"});
  cfg.bounds.bhp_lo = cb.positive("bhp_lo", 2300.0);
  cfg.bounds.bhp_hi = cb.positive("bhp_hi", 2500.0);
  cfg.bounds.rate_hi = cb.positive("rate_hi", 1500.0);
  try {
    cfg.bounds.validate();
    for (int k = 1; k <= cfg.schedule.n_steps; ++k) picnn::rasterize_controls(rc, cfg.schedule.controls_at(k), cfg.bounds);
  } catch (const Error& e) {
    raise(ErrorKind::ValidationError, std::string("control_bounds: ") + e.what());
  }

  Section out = root.child("output");
  out.only({"dir", "snapshot_steps"});
  cfg.output_dir = out.text("dir", "out/" + cfg.name);
  const int n = cfg.schedule.n_steps;
  json& snaps = out.raw("snapshot_steps", json::array({std::max(1, n / 5), std::max(1, 2 * n / 5), n}));
  if (!snaps.is_array()) invalid("output.snapshot_steps", "expected a list of step indices");
  for (const json& s : snaps) {
    if (!s.is_number_integer() || s.get<int>() < 1 || s.get<int>() > n)
      invalid("output.snapshot_steps", "entries must be integers in [1, " + std::to_string(n) + "]");
    cfg.snapshot_steps.push_back(s.get<int>());
  }
  std::sort(cfg.snapshot_steps.begin(), cfg.snapshot_steps.end());
  cfg.snapshot_steps.erase(std::unique(cfg.snapshot_steps.begin(), cfg.snapshot_steps.end()), cfg.snapshot_steps.end());

  Section sw = root.child("sweep");
  sw.only({"n_schedules", "periods", "rate_lo", "rate_hi", "bhp_lo", "bhp_hi", "seed"});
  cfg.sweep.n_schedules = static_cast<int>(sw.integer("n_schedules", cfg.sweep.n_schedules));
  if (cfg.sweep.n_schedules < 1) invalid("sweep.n_schedules", "must be >= 1");
  json& periods = sw.raw("periods", cfg.sweep.periods);
  if (!periods.is_array() || periods.empty()) invalid("sweep.periods", "expected a non-empty list of days");
  cfg.sweep.periods.clear();
  for (const json& p : periods) {
    if (!p.is_number() || !(p.get<double>() > 0.0)) invalid("sweep.periods", "entries must be positive numbers");
    const double ratio = p.get<double>() / cfg.schedule.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9) invalid("sweep.periods", "each period must be a multiple of dt");
    cfg.sweep.periods.push_back(p.get<double>());
  }
  cfg.sweep.rate_lo = sw.non_negative("rate_lo", cfg.sweep.rate_lo);
  cfg.sweep.rate_hi = sw.positive("rate_hi", cfg.sweep.rate_hi);
  cfg.sweep.bhp_lo = sw.positive("bhp_lo", cfg.sweep.bhp_lo);
  cfg.sweep.bhp_hi = sw.positive("bhp_hi", cfg.sweep.bhp_hi);
  cfg.sweep.seed = sw.unsigned_integer("seed", cfg.sweep.seed);
  if (cfg.sweep.rate_lo > cfg.sweep.rate_hi) invalid("sweep", "rate_lo must be <= rate_hi");
  if (cfg.sweep.bhp_lo > cfg.sweep.bhp_hi) invalid("sweep", "bhp_lo must be <= bhp_hi");
  if (cfg.sweep.rate_hi > cfg.bounds.rate_hi || cfg.sweep.bhp_lo < cfg.bounds.bhp_lo ||
      cfg.sweep.bhp_hi > cfg.bounds.bhp_hi)
    invalid("sweep", "ranges must lie within control_bounds");

  Section bench = root.child("bench");
  bench.only({"sizes", "steps", "repeats", "dt", "include_training"});
  json& sizes = bench.raw("sizes", cfg.bench.sizes);
  if (!sizes.is_array() || sizes.empty()) invalid("bench.sizes", "expected a non-empty list of grid sizes");
  cfg.bench.sizes.clear();
  for (const json& s : sizes) {
    if (!s.is_number_integer() || s.get<int>() < 8) invalid("bench.sizes", "entries must be integers >= 8");
    cfg.bench.sizes.push_back(s.get<int>());
  }
  cfg.bench.steps = static_cast<int>(bench.integer("steps", cfg.bench.steps));
  cfg.bench.repeats = static_cast<int>(bench.integer("repeats", cfg.bench.repeats));
  cfg.bench.dt = bench.positive("dt", cfg.bench.dt);
  cfg.bench.include_training = bench.boolean("include_training", cfg.bench.include_training);
  if (cfg.bench.steps < 1) invalid("bench.steps", "must be >= 1");
  if (cfg.bench.repeats < 1) invalid("bench.repeats", "must be >= 1");

  cfg.resolved = std::move(doc);
  return cfg;
}

}  // namespace

picnn::ScalingParams CaseConfig::effective_scaling() const {
  return scaling.value_or(picnn::ScalingParams::defaults(reservoir, schedule));
}

std::uint64_t CaseConfig::config_hash() const {
  // Where results are written does not change them.
  json doc = resolved;
  if (doc.contains("output")) doc["output"].erase("dir");
  const std::string s = doc.dump();
  return nn::fnv1a64(s.data(), s.size());
}

CaseConfig load_config_text(const std::string& text, const fs::path& base_dir, const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string msg = e.what();
    if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    raise(ErrorKind::ParseError,
          source_name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }
  if (!doc.is_object()) raise(ErrorKind::ParseError, source_name + ":1:1: top level must be an object");
  return build(std::move(doc), base_dir);
}

CaseConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) raise(ErrorKind::ValidationError, "cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return load_config_text(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path(),
                          path.string());
}

void apply_overrides(CaseConfig& cfg, std::optional<std::uint64_t> seed, std::optional<double> sigma,
                     std::optional<int> max_epochs, std::optional<fs::path> out_dir) {
  json doc = cfg.resolved;
  if (seed) doc["seed"] = *seed;
  if (sigma) doc["trainer"]["sigma"] = *sigma;
  if (max_epochs) doc["trainer"]["max_epochs"] = *max_epochs;
  if (out_dir) doc["output"]["dir"] = out_dir->string();
  auto defaults = cfg.defaults_applied;
  cfg = build(std::move(doc), ".");
  cfg.defaults_applied = std::move(defaults);
}

std::string resolved_dump(const CaseConfig& cfg) { return cfg.resolved.dump(2) + "\n"; }

}  // namespace porflow::harness
