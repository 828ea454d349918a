#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dynemu/conditioner.hpp"
#include "dynemu/logspm.hpp"

namespace dynemu {

// Parsed run configuration; paths inside the config file are resolved
// relative to its directory.
struct RunConfig {
  std::string model_id;
  double t0 = 0.0;
  double dt = 1.0;
  int intervals = 0;
  std::vector<double> explicit_times;  // non-empty overrides (t0, dt, intervals)
  std::string forcing_path;
  std::string ranges_path;
  LogSpmFixed fixed;
  double noise_frac = 0.1;
  MetricFlavor flavor = MetricFlavor::kSquaredEuclidean;
  std::vector<double> jitter_schedule = kDefaultJitterSchedule;
  int conditioning_stride = 1;
  int substeps = 10;
  std::uint64_t seed = 0;

  std::array<std::pair<double, double>, LogSpmParams::kThetaDim> ranges{};
  Eigen::MatrixXd forcing_full;  // all (i_rain, i_pet) rows from the forcing file
  std::string config_hash;
};

RunConfig load_run_config(const std::string& path);

TimeGrid make_grid(const RunConfig& cfg, int intervals_override = 0);
SimulationModel make_model(const RunConfig& cfg);
MetricSpec make_metric(const RunConfig& cfg);
ConditionSetup make_setup(const RunConfig& cfg);
InputTrajectory make_input(const RunConfig& cfg, const TimeGrid& grid,
                           const Eigen::VectorXd& theta);

std::vector<Eigen::VectorXd> read_param_sets(const std::string& path);

// Subcommand bodies; the CLI maps thrown errors onto exit codes.
void cmd_design(const RunConfig& cfg, int n, std::uint64_t seed, bool latin_hypercube,
                const std::string& out_path);
void cmd_simulate(const RunConfig& cfg, const std::string& designs_path,
                  const std::string& out_path, bool full_state);
void cmd_condition(const RunConfig& cfg, const std::string& designs_path,
                   const std::string& runs_path, const std::string& artifact_path,
                   const std::string& report_path);
void cmd_emulate(const RunConfig& cfg, const std::string& artifact_path,
                 const std::string& params_path, int index, bool variance,
                 const std::string& out_path);
void cmd_validate(const RunConfig& cfg, const std::string& artifact_path,
                  const std::string& params_path, const std::string& out_path);

struct BenchOptions {
  std::vector<int> sweep_intervals;  // N values, timed at n = fixed_n
  std::vector<int> sweep_designs;    // n values, timed at N = fixed_intervals
  int fixed_n = 20;
  int fixed_intervals = 200;
  int reps = 5;
  int max_cond_times = 50;  // conditioning stride keeps factor size bounded
};

BenchOptions parse_sweep(const std::string& sweep_spec);

struct BenchResult {
  // sweep axis ("N" or "n"), N, n, rep, emulate_seconds
  std::vector<std::tuple<std::string, int, int, int, double>> samples;
  double slope_intervals = 0.0;
  double slope_designs = 0.0;
};

BenchResult run_bench(const RunConfig& cfg, const BenchOptions& options);

void cmd_bench(const RunConfig& cfg, const BenchOptions& options,
               const std::string& out_path);

}  // namespace dynemu
