#include "porflow/harness/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "porflow/harness/export.hpp"
#include "porflow/harness/presets.hpp"
#include "porflow/harness/schedule_gen.hpp"
#include "porflow/picnn/checkpoint.hpp"

namespace porflow::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log_line(const RunOptions& opts, const std::string& line) {
  if (opts.log != nullptr) *opts.log << line << std::endl;
}

void write_resolved(const CaseConfig& cfg, const fs::path& root) {
  write_text(root / "resolved.case", resolved_dump(cfg));
}

std::string step_tag(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "step%04d", k);
  return buf;
}

std::vector<WellRow> well_rows(const CaseConfig& cfg, const ControlSchedule& schedule,
                               const sim::Trajectory& predicted, const sim::Trajectory& reference) {
  std::vector<WellRow> rows;
  for (int k = 1; k <= schedule.n_steps; ++k) {
    const auto controls = schedule.controls_at(k);
    const auto p = metrics::extract_well_quantities(predicted.states[static_cast<std::size_t>(k)], cfg.reservoir, controls);
    const auto r = metrics::extract_well_quantities(reference.states[static_cast<std::size_t>(k)], cfg.reservoir, controls);
    for (std::size_t w = 0; w < p.size(); ++w) rows.push_back({k, p[w], r[w]});
  }
  return rows;
}

}  // namespace

fs::path output_root(const CaseConfig& cfg, const RunOptions& opts) {
  return opts.out_dir.empty() ? cfg.output_dir : opts.out_dir;
}

fs::path checkpoint_dir(const CaseConfig& cfg, const RunOptions& opts) {
  return opts.checkpoints.value_or(output_root(cfg, opts) / "train" / "checkpoints");
}

int worker_count(int jobs) {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("PORFLOW_THREADS"); env != nullptr) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = cap;
  }
  return std::max(1, std::min(n, jobs));
}

sim::Trajectory run_simulate(const CaseConfig& cfg, const RunOptions& opts) {
  const fs::path root = output_root(cfg, opts);
  const fs::path dir = root / "simulate";
  ensure_dir(dir);
  write_resolved(cfg, root);
  log_line(opts, "simulate: " + std::to_string(cfg.schedule.n_steps) + " steps on " +
                     std::to_string(cfg.reservoir.grid.nx) + "x" + std::to_string(cfg.reservoir.grid.ny));
  const auto t0 = std::chrono::steady_clock::now();
  const sim::Trajectory traj = sim::simulate(cfg.reservoir, cfg.schedule, cfg.solver);
  const double total = seconds_since(t0);

  RunManifest manifest("simulate", cfg.config_hash(), cfg.seed);
  write_fields_csv(dir / "fields.csv", traj, cfg.reservoir.grid, cfg.schedule.dt);
  write_steps_csv(dir / "steps.csv", traj, cfg.schedule.dt);
  write_trajectory_binary(dir / "trajectory.bin", traj, cfg.reservoir.grid, cfg.schedule.dt);
  for (const char* f : {"fields.csv", "steps.csv", "trajectory.bin", "timings.json"}) manifest.add_file(f);
  for (int k : cfg.snapshot_steps) {
    const State& s = traj.states[static_cast<std::size_t>(k)];
    for (const auto& [name, field] : {std::pair{"pressure", &s.pressure}, std::pair{"sw", &s.sw}}) {
      const std::string file = std::string(name) + "_" + step_tag(k) + ".ppm";
      const auto [lo, hi] = write_field_image(dir / file, *field, cfg.reservoir.grid);
      manifest.add_image(file, lo, hi);
    }
  }
  manifest.write(dir);
  write_text(dir / "timings.json", json{{"total_seconds", total}, {"step_seconds", traj.step_seconds}}.dump(2) + "\n");
  log_line(opts, "simulate: done in " + fmt_num(total) + " s");
  return traj;
}

std::vector<std::vector<double>> oracle_observations(const CaseConfig& cfg, const sim::Trajectory& reference) {
  std::vector<std::vector<double>> obs;
  for (std::size_t k = 1; k < reference.states.size(); ++k) {
    std::vector<double> row;
    for (std::size_t w : cfg.reservoir.producer_indices())
      row.push_back(reference.states[k].pressure[static_cast<std::size_t>(cfg.reservoir.well_cell(w))]);
    obs.push_back(std::move(row));
  }
  return obs;
}

picnn::CheckpointSet run_train(const CaseConfig& cfg, const RunOptions& opts) {
  const fs::path root = output_root(cfg, opts);
  const fs::path dir = root / "train";
  ensure_dir(dir);
  write_resolved(cfg, root);

  picnn::TrainOptions to;
  to.config = cfg.trainer;
  to.spec = cfg.network;
  to.scaling = cfg.effective_scaling();
  to.bounds = cfg.bounds;
  if (cfg.train_with_observations) {
    log_line(opts, "train: running the simulator for WBP observations");
    to.observed_wbp = oracle_observations(cfg, sim::simulate(cfg.reservoir, cfg.schedule, cfg.solver));
  }
  to.on_step = [&opts](const picnn::StepReport& r) {
    log_line(opts, "train: step " + std::to_string(r.step) + " epochs " + std::to_string(r.epochs_used) +
                       " loss " + fmt_num(r.final_loss) + (r.reached_sigma ? "" : " (sigma not reached)"));
  };
  const auto t0 = std::chrono::steady_clock::now();
  picnn::CheckpointSet set = picnn::train_all(cfg.reservoir, cfg.schedule, to);
  const double total = seconds_since(t0);

  picnn::save_checkpoints(set, dir / "checkpoints");
  sim::Trajectory predicted;
  predicted.states.push_back(cfg.reservoir.initial);
  for (const State& s : set.states) predicted.states.push_back(s);
  write_training_csv(dir / "training.csv", set.reports);
  write_fields_csv(dir / "fields.csv", predicted, cfg.reservoir.grid, cfg.schedule.dt);

  RunManifest manifest("train", cfg.config_hash(), cfg.seed);
  for (const char* f : {"training.csv", "fields.csv", "checkpoints/manifest.json", "timings.json"}) manifest.add_file(f);
  for (std::size_t k = 1; k <= set.steps(); ++k)
    manifest.add_file("checkpoints/" + picnn::checkpoint_file_name(static_cast<int>(k)));
  manifest.extra()["parameters"] = set.weights.empty() ? 0 : set.weights[0].size();
  manifest.extra()["used_observations"] = cfg.train_with_observations;
  manifest.write(dir);
  json timings = {{"total_seconds", total}, {"step_seconds", json::array()}};
  for (const picnn::StepReport& r : set.reports) timings["step_seconds"].push_back(r.wall_seconds);
  write_text(dir / "timings.json", timings.dump(2) + "\n");
  log_line(opts, "train: done in " + fmt_num(total) + " s");
  return set;
}

sim::Trajectory run_infer(const CaseConfig& cfg, const RunOptions& opts) {
  const fs::path root = output_root(cfg, opts);
  const fs::path dir = root / "infer";
  ensure_dir(dir);
  write_resolved(cfg, root);
  const picnn::CheckpointSet set = picnn::load_checkpoints(checkpoint_dir(cfg, opts), &cfg.network);
  const sim::Trajectory traj = picnn::infer_trajectory(set, cfg.reservoir, cfg.schedule);

  RunManifest manifest("infer", cfg.config_hash(), cfg.seed);
  write_fields_csv(dir / "fields.csv", traj, cfg.reservoir.grid, cfg.schedule.dt);
  write_trajectory_binary(dir / "trajectory.bin", traj, cfg.reservoir.grid, cfg.schedule.dt);
  for (const char* f : {"fields.csv", "trajectory.bin", "timings.json"}) manifest.add_file(f);
  for (int k : cfg.snapshot_steps) {
    const State& s = traj.states[static_cast<std::size_t>(k)];
    for (const auto& [name, field] : {std::pair{"pressure", &s.pressure}, std::pair{"sw", &s.sw}}) {
      const std::string file = std::string(name) + "_" + step_tag(k) + ".ppm";
      const auto [lo, hi] = write_field_image(dir / file, *field, cfg.reservoir.grid);
      manifest.add_image(file, lo, hi);
    }
  }
  manifest.write(dir);
  write_text(dir / "timings.json", json{{"step_seconds", traj.step_seconds}}.dump(2) + "\n");
  log_line(opts, "infer: " + std::to_string(traj.steps()) + " steps");
  return traj;
}

CompareResult run_compare(const CaseConfig& cfg, const RunOptions& opts) {
  const fs::path root = output_root(cfg, opts);
  const fs::path dir = root / "compare";
  ensure_dir(dir);
  write_resolved(cfg, root);
  CompareResult res;
  const picnn::CheckpointSet set = picnn::load_checkpoints(checkpoint_dir(cfg, opts), &cfg.network);
  res.predicted = picnn::infer_trajectory(set, cfg.reservoir, cfg.schedule);
  log_line(opts, "compare: running the reference simulation");
  res.reference = sim::simulate(cfg.reservoir, cfg.schedule, cfg.solver);
  res.errors = metrics::trajectory_errors(res.predicted, res.reference);

  RunManifest manifest("compare", cfg.config_hash(), cfg.seed);
  write_mape_csv(dir / "mape.csv", res.errors, cfg.schedule.dt);
  write_wells_csv(dir / "wells.csv", well_rows(cfg, cfg.schedule, res.predicted, res.reference), cfg.schedule.dt);
  manifest.add_file("mape.csv");
  manifest.add_file("wells.csv");
  const GridSpec& grid = cfg.reservoir.grid;
  for (int k : cfg.snapshot_steps) {
    const State& p = res.predicted.states[static_cast<std::size_t>(k)];
    const State& r = res.reference.states[static_cast<std::size_t>(k)];
    for (const auto& [name, pf, rf] : {std::tuple{"pressure", &p.pressure, &r.pressure},
                                       std::tuple{"sw", &p.sw, &r.sw}}) {
      const std::string tag = std::string(name) + "_" + step_tag(k);
      const std::vector<double> map = metrics::relative_error_map(*pf, *rf);
      write_error_map_csv(dir / ("error_map_" + tag + ".csv"), map, grid);
      manifest.add_file("error_map_" + tag + ".csv");
      for (const auto& [kind, field] : {std::pair{"pred", pf}, std::pair{"ref", rf}, std::pair{"error", &map}}) {
        const std::string file = std::string(kind) + "_" + tag + ".ppm";
        const auto [lo, hi] = write_field_image(dir / file, *field, grid);
        manifest.add_image(file, lo, hi);
      }
    }
  }
  double worst_p = 0.0, worst_s = 0.0;
  for (const auto& e : res.errors) {
    worst_p = std::max(worst_p, e.mape_pressure);
    worst_s = std::max(worst_s, e.mape_saturation);
  }
  manifest.extra()["max_mape_pressure"] = worst_p;
  manifest.extra()["max_mape_saturation"] = worst_s;
  manifest.write(dir);
  log_line(opts, "compare: max MAPE pressure " + fmt_num(worst_p) + ", saturation " + fmt_num(worst_s));
  return res;
}

std::vector<metrics::SpeedupRow> run_bench(const CaseConfig& cfg, const RunOptions& opts) {
  const fs::path root = output_root(cfg, opts);
  const fs::path dir = root / "bench";
  ensure_dir(dir);
  write_resolved(cfg, root);
  const BenchConfig& b = cfg.bench;
  std::vector<metrics::SpeedupInput> inputs;
  for (int n : b.sizes) {
    PresetOptions po;
    po.n = n;
    po.heterogeneous = false;
    const ReservoirCase rc = waterflood_case(po);
    const ControlSchedule sched = baseline_schedule(b.dt, b.dt * b.steps, 50.0);
    const fvm::Discretization disc(rc);

    std::vector<double> sim_runs;
    for (int r = 0; r < b.repeats; ++r) {
      const sim::Trajectory t = sim::simulate(disc, sched, cfg.solver);
      double sum = 0.0;
      for (double s : t.step_seconds) sum += s;
      sim_runs.push_back(sum / static_cast<double>(t.step_seconds.size()));
    }

    nn::ParallelUNet<float> net(cfg.network);
    net.init_kaiming(cfg.seed);
    const picnn::ControlImage img =
        picnn::pad_image(picnn::rasterize_controls(rc, sched.controls_at(1), cfg.bounds), net.spec().size_multiple());
    (void)net.forward(img.data, img.height, img.width, false);  // warm-up
    std::vector<double> inf_runs;
    for (int r = 0; r < b.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int k = 1; k <= b.steps; ++k) {
        const auto out = net.forward(img.data, img.height, img.width, false);
        (void)picnn::decode_output<float>(out, rc.grid, picnn::ScalingParams::defaults(rc, sched));
      }
      inf_runs.push_back(seconds_since(t0) / b.steps);
    }

    double train_seconds = 0.0;
    if (b.include_training) {
      picnn::TrainOptions to;
      to.config = cfg.trainer;
      to.spec = cfg.network;
      to.bounds = cfg.bounds;
      const auto t0 = std::chrono::steady_clock::now();
      (void)picnn::train_all(rc, sched, to);
      train_seconds = seconds_since(t0);
    }
    inputs.push_back({"homogeneous_" + std::to_string(n), n, n, net.parameter_count(), metrics::median(sim_runs),
                      metrics::median(inf_runs), train_seconds});
    log_line(opts, "bench: " + std::to_string(n) + "x" + std::to_string(n) + " sim/step " +
                       fmt_num(inputs.back().simulation_seconds) + " s, infer/step " +
                       fmt_num(inputs.back().inference_seconds) + " s");
  }
  const auto rows = metrics::speedup_report(inputs);
  write_bench_csv(dir / "bench.csv", rows);
  RunManifest manifest("bench", cfg.config_hash(), cfg.seed);
  manifest.add_file("bench.csv");
  manifest.extra()["timing"] = "median over repeats of the mean per-step wall clock";
  manifest.write(dir);
  return rows;
}

SweepResult run_sweep(const CaseConfig& cfg, const RunOptions& opts) {
  const fs::path root = output_root(cfg, opts);
  const fs::path dir = root / "sweep";
  ensure_dir(dir);
  write_resolved(cfg, root);
  const picnn::CheckpointSet set = picnn::load_checkpoints(checkpoint_dir(cfg, opts), &cfg.network);

  struct Job {
    double period;
    int index;
    ControlSchedule schedule;
  };
  std::vector<Job> jobs;
  for (double period : cfg.sweep.periods) {
    ControlSuite suite;
    suite.n_schedules = cfg.sweep.n_schedules;
    suite.dt = cfg.schedule.dt;
    suite.total_time = cfg.schedule.total_time();
    suite.period = period;
    suite.rate_lo = cfg.sweep.rate_lo;
    suite.rate_hi = cfg.sweep.rate_hi;
    suite.bhp_lo = cfg.sweep.bhp_lo;
    suite.bhp_hi = cfg.sweep.bhp_hi;
    suite.seed = cfg.sweep.seed;
    auto schedules = gen_control_suite(suite, cfg.reservoir.wells);
    for (std::size_t s = 0; s < schedules.size(); ++s) jobs.push_back({period, static_cast<int>(s), std::move(schedules[s])});
  }

  std::vector<SweepEntry> entries(jobs.size());
  std::vector<std::exception_ptr> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        const Job& job = jobs[j];
        const sim::Trajectory ref = sim::simulate(cfg.reservoir, job.schedule, cfg.solver);
        const sim::Trajectory pred = picnn::infer_trajectory(set, cfg.reservoir, job.schedule);
        const auto errors = metrics::trajectory_errors(pred, ref);
        char sub[64];
        std::snprintf(sub, sizeof sub, "period_%s/schedule_%02d", fmt_num(job.period).c_str(), job.index);
        write_mape_csv(dir / sub / "mape.csv", errors, cfg.schedule.dt);
        write_wells_csv(dir / sub / "wells.csv", well_rows(cfg, job.schedule, pred, ref), cfg.schedule.dt);
        SweepEntry e{job.period, job.index, 0.0, 0.0};
        for (const auto& err : errors) {
          e.mean_mape_pressure += err.mape_pressure;
          e.mean_mape_saturation += err.mape_saturation;
        }
        e.mean_mape_pressure /= static_cast<double>(errors.size());
        e.mean_mape_saturation /= static_cast<double>(errors.size());
        entries[j] = e;
        std::lock_guard lock(log_mutex);
        log_line(opts, "sweep: period " + fmt_num(job.period) + " schedule " + std::to_string(job.index) +
                           " mean MAPE p " + fmt_num(e.mean_mape_pressure) + " sw " + fmt_num(e.mean_mape_saturation));
      } catch (...) {
        failures[j] = std::current_exception();
      }
    }
  };
  const int workers = worker_count(static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  SweepResult res;
  res.entries = entries;
  std::string summary = "period,schedule,mean_mape_pressure,mean_mape_saturation\n";
  for (const SweepEntry& e : entries)
    summary += fmt_num(e.period) + "," + std::to_string(e.schedule) + "," + fmt_num(e.mean_mape_pressure) + "," +
               fmt_num(e.mean_mape_saturation) + "\n";
  std::string ensemble = "period,schedules,mean_mape_pressure,mean_mape_saturation\n";
  for (double period : cfg.sweep.periods) {
    double sp = 0.0, ss = 0.0;
    int n = 0;
    for (const SweepEntry& e : entries)
      if (e.period == period) {
        sp += e.mean_mape_pressure;
        ss += e.mean_mape_saturation;
        ++n;
      }
    res.periods.push_back(period);
    res.mean_mape_pressure.push_back(sp / n);
    res.mean_mape_saturation.push_back(ss / n);
    ensemble += fmt_num(period) + "," + std::to_string(n) + "," + fmt_num(sp / n) + "," + fmt_num(ss / n) + "\n";
  }
  write_text(dir / "summary.csv", summary);
  write_text(dir / "ensemble.csv", ensemble);
  RunManifest manifest("sweep", cfg.config_hash(), cfg.seed);
  manifest.add_file("summary.csv");
  manifest.add_file("ensemble.csv");
  manifest.extra()["periods"] = cfg.sweep.periods;
  manifest.extra()["schedules_per_period"] = cfg.sweep.n_schedules;
  manifest.write(dir);
  return res;
}

}  // namespace porflow::harness
