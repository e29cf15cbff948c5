#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "porflow/core/error.hpp"
#include "porflow/harness/config.hpp"
#include "porflow/harness/experiments.hpp"

namespace {

using porflow::ErrorKind;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
      return 2;
    case ErrorKind::NonConvergence:
    case ErrorKind::SingularJacobian:
      return 3;
    case ErrorKind::DivergedTraining:
      return 4;
    default:
      return 1;
  }
}

void report(const std::string& command, const std::string& kind, const std::string& message) {
  nlohmann::json rec = {{"status", "error"}, {"command", command}, {"error", kind}, {"message", message}};
  std::cerr << rec.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"porflow: two-phase reservoir simulator and physics-informed surrogate"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma;
  std::optional<int> max_epochs;
  std::optional<std::string> checkpoints;
  bool quiet = false;

  const std::pair<const char*, const char*> verbs[] = {
      {"simulate", "run the Newton simulator on the case schedule"},
      {"train", "train one network per timestep against the physics loss"},
      {"infer", "predict the case schedule from saved checkpoints"},
      {"compare", "per-step MAPE, well quantities and error maps against the simulator"},
      {"bench", "per-step wall clock of simulator and inference across grid sizes"},
      {"sweep", "generalization to randomized control schedules"},
  };
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "case file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "random seed (overrides seed)");
    sub->add_option("--sigma", sigma, "target training loss (overrides trainer.sigma)")->check(CLI::PositiveNumber);
    sub->add_option("--max-epochs", max_epochs, "epoch cap per step (overrides trainer.max_epochs)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--checkpoints", checkpoints, "checkpoint directory (default <out>/train/checkpoints)");
    sub->add_flag("--quiet", quiet, "suppress progress lines");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), "UsageError", e.what());
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    porflow::harness::CaseConfig cfg = porflow::harness::load_config(config_path);
    std::optional<std::filesystem::path> out;
    if (out_dir) out = *out_dir;
    porflow::harness::apply_overrides(cfg, seed, sigma, max_epochs, out);

    porflow::harness::RunOptions opts;
    opts.out_dir = cfg.output_dir;
    if (checkpoints) opts.checkpoints = *checkpoints;
    opts.log = quiet ? nullptr : &std::cerr;

    if (command == "simulate") {
      porflow::harness::run_simulate(cfg, opts);
    } else if (command == "train") {
      porflow::harness::run_train(cfg, opts);
    } else if (command == "infer") {
      porflow::harness::run_infer(cfg, opts);
    } else if (command == "compare") {
      porflow::harness::run_compare(cfg, opts);
    } else if (command == "bench") {
      porflow::harness::run_bench(cfg, opts);
    } else {
      porflow::harness::run_sweep(cfg, opts);
    }
    std::cout << nlohmann::json{{"status", "ok"}, {"command", command},
                                {"out", (porflow::harness::output_root(cfg, opts) / command).string()}}
                     .dump()
              << std::endl;
    return 0;
  } catch (const porflow::Error& e) {
    report(command, porflow::to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report(command, "InternalError", e.what());
    return 1;
  }
}
