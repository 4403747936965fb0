// exporec command line: world generation, static gamma sweeps, closed-loop
// simulation, and replay of external impression logs.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "exporec/io.hpp"
#include "exporec/loop.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
};

exporec::ExperimentConfig load_config(const GlobalOpts& opts) {
  exporec::ExperimentConfig config =
      opts.config_path.empty() ? exporec::ExperimentConfig{}
                               : exporec::io::load_experiment_config(opts.config_path);
  if (opts.seed_override) {
    config.seeds = {*opts.seed_override};
    config.validate();
  }
  return config;
}

fs::path ensure_out_dir(const GlobalOpts& opts) {
  fs::path dir(opts.out_dir);
  fs::create_directories(dir);
  return dir;
}

void info(const GlobalOpts& opts, const std::string& msg) {
  if (!opts.quiet) std::cout << msg << '\n';
}

// Timestamps live only here; every other output is a pure function of the
// config, so determinism checks hash the data files and skip the manifest.
void write_manifest(const fs::path& dir, const exporec::ExperimentConfig& config,
                    const std::string& command, const json& extra) {
  json j;
  j["tool"] = "exporec";
  j["version"] = 1;
  j["command"] = command;
  j["config"] = json::parse(exporec::io::experiment_config_to_json(config));
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  j["generated_unix_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  j.update(extra);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << j.dump(2) << '\n';
}

void write_sweep_outputs(const fs::path& dir, const exporec::ExperimentConfig& config,
                         const exporec::SweepResult& sweep, const std::string& command,
                         const GlobalOpts& opts) {
  const exporec::GammaChoice choice =
      exporec::grid_search_gamma(sweep, {exporec::SelectionRule::Kind::MaxPositive});
  exporec::io::write_sweep_csv(dir / "sweep.csv", sweep);
  exporec::io::write_aggregate_csv(dir / "aggregate.csv", sweep);
  exporec::io::write_sweep_long_csv(dir / "sweep_long.csv", sweep);
  exporec::io::write_chosen_gamma_json(dir / "chosen_gamma.json", choice);

  json extra;
  for (const auto& [seed, rho] : sweep.exposure_spearman)
    extra["exposure_spearman"][std::to_string(seed)] = rho;
  for (const auto& cell : sweep.cells)
    extra["model_fingerprints"][std::to_string(cell.seed)] =
        std::to_string(cell.model_fingerprint);
  write_manifest(dir, config, command, extra);

  info(opts, "chosen gamma: " + exporec::io::fmt_double(choice.gamma));
  info(opts, "wrote sweep.csv aggregate.csv sweep_long.csv chosen_gamma.json to " +
                 dir.string());
}

int run_generate_world(const GlobalOpts& opts) {
  const exporec::ExperimentConfig config = load_config(opts);
  const fs::path dir = ensure_out_dir(opts);
  exporec::WorldConfig wc = config.world;
  if (opts.seed_override) wc.seed = *opts.seed_override;
  const exporec::World world = exporec::generate_world(wc);
  exporec::io::save_world(dir / "world.json", world);
  info(opts, "wrote " + (dir / "world.json").string());
  return 0;
}

int run_sweep(const GlobalOpts& opts) {
  const exporec::ExperimentConfig config = load_config(opts);
  const fs::path dir = ensure_out_dir(opts);
  const exporec::SweepResult sweep = exporec::run_static_sweep(config);
  write_sweep_outputs(dir, config, sweep, "sweep", opts);
  return 0;
}

int run_loop(const GlobalOpts& opts, std::optional<double> gamma_flag) {
  const exporec::ExperimentConfig config = load_config(opts);
  const double gamma = gamma_flag.value_or(config.scoring.gamma);
  if (gamma < 0.0) throw exporec::ConfigError("gamma must be >= 0");
  const fs::path dir = ensure_out_dir(opts);
  const exporec::ClosedLoopResult result = exporec::run_closed_loop(config, gamma);
  exporec::io::write_loop_trace_csv(dir / "loop_trace.csv", result);
  for (std::size_t s = 0; s < result.seeds.size(); ++s) {
    exporec::io::write_impressions_csv(
        dir / ("logs_seed" + std::to_string(result.seeds[s]) + ".csv"),
        result.logs_per_seed[s]);
  }
  write_manifest(dir, config, "loop", json{{"gamma", gamma}});
  info(opts, "wrote loop_trace.csv and per-seed logs to " + dir.string());
  return 0;
}

int run_replay(const GlobalOpts& opts, const std::string& logs_path) {
  const exporec::ExperimentConfig config = load_config(opts);
  const std::vector<exporec::ImpressionRecord> logs =
      exporec::io::read_impressions_csv(logs_path);
  if (logs.empty()) throw exporec::DataError("empty log file: " + logs_path);
  const fs::path dir = ensure_out_dir(opts);
  const exporec::SweepResult sweep = exporec::run_sweep_on_logs(config, logs);
  write_sweep_outputs(dir, config, sweep, "replay", opts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exposure-corrected retrieval experiments"};
  app.require_subcommand(1);

  GlobalOpts opts;
  app.add_option("--config", opts.config_path, "Experiment config JSON (defaults when omitted)");
  app.add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed-override", opts.seed_override,
                 "Replace the config's seed list with this single seed");
  app.add_flag("--quiet", opts.quiet, "Suppress progress output");

  auto* gen = app.add_subcommand("generate-world", "Generate and save a synthetic world");
  auto* sweep = app.add_subcommand("sweep", "Static gamma sweep plus grid search");
  auto* loop = app.add_subcommand("loop", "Closed feedback loop with per-round retraining");
  std::optional<double> gamma_flag;
  loop->add_option("--gamma", gamma_flag, "Correction strength (default: config scoring.gamma)");
  auto* replay = app.add_subcommand("replay", "Train and sweep on an external impression log");
  std::string logs_path;
  replay->add_option("--logs", logs_path, "Impression log CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error=usage msg=\"" << e.what() << "\"\n";
    return 1;
  }

  try {
    if (gen->parsed()) return run_generate_world(opts);
    if (sweep->parsed()) return run_sweep(opts);
    if (loop->parsed()) return run_loop(opts, gamma_flag);
    if (replay->parsed()) return run_replay(opts, logs_path);
  } catch (const exporec::ConfigError& e) {
    std::cerr << "error=config msg=\"" << e.what() << "\"\n";
    return 1;
  } catch (const exporec::DataError& e) {
    std::cerr << "error=data msg=\"" << e.what() << "\"\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error=runtime msg=\"" << e.what() << "\"\n";
    return 2;
  }
  return 0;
}
