// Command-line front door: run single experiments, sweep the full grid,
// record/replay deterministic sequences, and serve the pose backend.
#include "viot/harness.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

namespace {

using namespace viot;

struct RunOptions {
  std::string script = "trans-easy";
  double frame_rate = 60.0;
  double imu_rate = 200.0;
  double duration = 30.0;
  std::string backend = "gt";
  std::string transport = "sim";
  std::string addr;
  std::uint64_t seed = 0;
  bool disable_bscm = false;
  bool disable_pia = false;
  bool disable_backend = false;
  std::string out;
  std::string series;
  std::string format = "csv";
  std::string record;
};

void add_run_options(CLI::App* cmd, RunOptions& o, bool with_record) {
  cmd->add_option("--script", o.script, "Motion script, e.g. trans-easy or circ-hard")
      ->check(CLI::IsMember(
          {"trans-easy", "trans-medium", "trans-hard", "circ-easy", "circ-medium", "circ-hard"}));
  cmd->add_option("--frame-rate", o.frame_rate, "Camera frame rate in Hz")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--imu-rate", o.imu_rate, "Inertial sample rate in Hz")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--duration", o.duration, "Run length in seconds")->check(CLI::PositiveNumber);
  cmd->add_option("--backend", o.backend, "Pose backend: gt or noisy")
      ->check(CLI::IsMember({"gt", "noisy"}));
  cmd->add_option("--transport", o.transport, "Backend link: sim or tcp")
      ->check(CLI::IsMember({"sim", "tcp"}));
  cmd->add_option("--addr", o.addr, "Backend address HOST:PORT (tcp transport)");
  cmd->add_option("--seed", o.seed, "Seed for noise, latency draws, and perturbations");
  cmd->add_flag("--disable-bscm", o.disable_bscm, "Skip bias self-correction");
  cmd->add_flag("--disable-pia", o.disable_pia, "Skip per-frame pose inspection");
  cmd->add_flag("--disable-backend", o.disable_backend, "Never request refinements");
  cmd->add_option("--out", o.out, "Summary output path (default: stdout)");
  cmd->add_option("--series", o.series, "Per-frame error series CSV path");
  cmd->add_option("--format", o.format, "Summary format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  if (with_record)
    cmd->add_option("--record", o.record, "Write the event sequence to this file");
}

harness::ExperimentConfig to_config(const RunOptions& o) {
  harness::ExperimentConfig cfg;
  cfg.script = motion::parse_script(o.script);
  cfg.script.duration = o.duration;
  cfg.script.perturbation_seed = o.seed;
  cfg.frame_rate = o.frame_rate;
  cfg.imu_rate = o.imu_rate;
  cfg.seed = o.seed;
  cfg.backend.mode = o.backend == "gt" ? backend::BackendMode::gt : backend::BackendMode::noisy;
  cfg.transport = o.transport == "tcp" ? harness::Transport::tcp : harness::Transport::sim;
  cfg.tcp_address = o.addr.empty() ? "127.0.0.1:" + std::to_string(netlink::kDefaultPort)
                                   : o.addr;
  cfg.disable_bscm = o.disable_bscm;
  cfg.disable_pia = o.disable_pia;
  cfg.disable_backend = o.disable_backend;
  cfg.record_path = o.record;
  return cfg;
}

void emit(const harness::MetricsReport& report, const RunOptions& o) {
  const auto format =
      o.format == "json" ? harness::ReportFormat::json : harness::ReportFormat::csv;
  if (o.out.empty()) {
    std::cout << (format == harness::ReportFormat::csv ? harness::summary_csv(report)
                                                       : harness::report_json(report));
  } else {
    harness::emit_report(report, format, o.out);
  }
  if (!o.series.empty()) harness::emit_series(report, o.series);
}

int cmd_serve(const std::string& addr, const std::string& backend_mode, std::uint64_t seed) {
  auto [host, port] = netlink::parse_address(addr);
  backend::BackendConfig cfg;
  cfg.mode =
      backend_mode == "gt" ? backend::BackendMode::gt : backend::BackendMode::noisy;
  cfg.rng_seed = seed;
  netlink::Listener listener(host, port);
  std::fprintf(stderr, "serving %s backend on %s:%u\n", backend_mode.c_str(), host.c_str(),
               unsigned(listener.port()));
  backend::serve(listener, cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flexible-frame-rate visual-inertial object pose tracking testbed"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run one tracking experiment");
  add_run_options(run, run_opts, /*with_record=*/false);

  RunOptions rec_opts;
  auto* record = app.add_subcommand("record", "Run an experiment and record its event sequence");
  add_run_options(record, rec_opts, /*with_record=*/true);

  std::string replay_path, grid_out;
  RunOptions replay_opts;
  auto* replay = app.add_subcommand("replay", "Recompute metrics from a recorded sequence");
  replay->add_option("path", replay_path, "SequenceRecord file")->required();
  replay->add_option("--out", replay_opts.out, "Summary output path (default: stdout)");
  replay->add_option("--series", replay_opts.series, "Per-frame error series CSV path");
  replay->add_option("--format", replay_opts.format, "Summary format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  std::uint64_t grid_seed = 0;
  double grid_duration = 30.0;
  auto* grid = app.add_subcommand("grid", "Sweep all scripts x frame rates x backends");
  grid->add_option("--out", grid_out, "Grid CSV output path (default: stdout)");
  grid->add_option("--seed", grid_seed, "Seed shared by every run in the sweep");
  grid->add_option("--duration", grid_duration, "Run length in seconds")
      ->check(CLI::PositiveNumber);

  std::string serve_addr = "0.0.0.0:" + std::to_string(viot::netlink::kDefaultPort);
  std::string serve_backend = "gt";
  std::uint64_t serve_seed = 0;
  auto* serve = app.add_subcommand("serve", "Serve the pose refinement backend over TCP");
  serve->add_option("--addr", serve_addr, "Bind address HOST:PORT");
  serve->add_option("--backend", serve_backend, "gt or noisy")
      ->check(CLI::IsMember({"gt", "noisy"}));
  serve->add_option("--seed", serve_seed, "Noise seed (noisy mode)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      emit(viot::harness::run_experiment(to_config(run_opts)), run_opts);
    } else if (record->parsed()) {
      if (rec_opts.record.empty()) throw std::invalid_argument("record requires --record PATH");
      emit(viot::harness::run_experiment(to_config(rec_opts)), rec_opts);
    } else if (replay->parsed()) {
      emit(viot::harness::replay_sequence(replay_path), replay_opts);
    } else if (grid->parsed()) {
      viot::harness::ExperimentConfig base;
      base.seed = grid_seed;
      base.script.duration = grid_duration;
      const std::string csv = viot::harness::run_grid(base);
      if (grid_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(grid_out);
        if (!out) throw std::runtime_error("cannot open output file: " + grid_out);
        out << csv;
      }
    } else if (serve->parsed()) {
      return cmd_serve(serve_addr, serve_backend, serve_seed);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
