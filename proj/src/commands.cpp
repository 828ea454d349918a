#include "dynemu/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "dynemu/artifact_io.hpp"
#include "dynemu/csv.hpp"
#include "dynemu/emulator.hpp"
#include "dynemu/hash.hpp"
#include "dynemu/rng.hpp"
#include "dynemu/simulator.hpp"
#include "dynemu/version.hpp"

namespace dynemu {

namespace {

using nlohmann::json;

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("failed writing: " + path);
}

std::vector<std::pair<std::string, std::string>> provenance_comments(
    const RunConfig& cfg, std::uint64_t seed) {
  return {{"tool_version", kToolVersion},
          {"model", cfg.model_id},
          {"config", cfg.config_hash},
          {"seed", std::to_string(seed)}};
}

json provenance_json(const RunConfig& cfg, std::uint64_t seed) {
  return json{{"tool_version", kToolVersion},
              {"model", cfg.model_id},
              {"config", cfg.config_hash},
              {"seed", seed}};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t k = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = k * sxx - sx * sx;
  if (denom == 0.0) return 0.0;
  return (k * sxy - sx * sy) / denom;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  const json j = parse_json_file(path);
  RunConfig cfg;
  try {
    cfg.model_id = j.at("model").get<std::string>();
    if (cfg.model_id != "logspm") {
      throw ConfigError("unknown model '" + cfg.model_id + "' (available: logspm)");
    }
    const auto& grid = j.at("grid");
    if (grid.contains("times")) {
      cfg.explicit_times = grid.at("times").get<std::vector<double>>();
      if (cfg.explicit_times.size() < 2) {
        throw ConfigError("grid.times needs at least two entries");
      }
      cfg.t0 = cfg.explicit_times.front();
      cfg.intervals = static_cast<int>(cfg.explicit_times.size()) - 1;
    } else {
      cfg.t0 = grid.at("t0").get<double>();
      cfg.dt = grid.at("dt").get<double>();
      cfg.intervals = grid.at("intervals").get<int>();
    }
    cfg.forcing_path = j.at("forcing").get<std::string>();
    cfg.ranges_path = j.at("ranges").get<std::string>();
    const auto& fixed = j.at("logspm");
    cfg.fixed.a_w = fixed.at("A_W").get<double>();
    cfg.fixed.h_s1 = fixed.at("h_s1").get<double>();
    cfg.fixed.h_s2 = fixed.at("h_s2").get<double>();
    const auto xi0 = fixed.at("xi0").get<std::vector<double>>();
    if (xi0.size() != 3) throw ConfigError("logspm xi0 must have 3 components");
    cfg.fixed.xi0 = Eigen::Vector3d(xi0[0], xi0[1], xi0[2]);
    cfg.noise_frac = fixed.at("noise_frac").get<double>();
    if (j.contains("metric")) {
      const auto flavor = j.at("metric").at("flavor").get<std::string>();
      if (flavor == "squared_euclidean") {
        cfg.flavor = MetricFlavor::kSquaredEuclidean;
      } else if (flavor == "euclidean") {
        cfg.flavor = MetricFlavor::kEuclidean;
      } else {
        throw ConfigError("unknown metric flavor: " + flavor);
      }
    }
    if (j.contains("jitter_schedule")) {
      cfg.jitter_schedule = j.at("jitter_schedule").get<std::vector<double>>();
    }
    if (j.contains("conditioning_stride")) {
      cfg.conditioning_stride = j.at("conditioning_stride").get<int>();
    }
    if (j.contains("substeps")) cfg.substeps = j.at("substeps").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }

  const auto dir = std::filesystem::path(path).parent_path();
  auto resolve = [&dir](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (dir / fp).string();
  };
  cfg.forcing_path = resolve(cfg.forcing_path);
  cfg.ranges_path = resolve(cfg.ranges_path);

  const json ranges = parse_json_file(cfg.ranges_path);
  const auto& names = LogSpmParams::theta_names();
  for (int i = 0; i < LogSpmParams::kThetaDim; ++i) {
    if (!ranges.contains(names[i])) {
      throw ConfigError(cfg.ranges_path + ": missing range for " + names[i]);
    }
    const auto pair = ranges.at(names[i]).get<std::vector<double>>();
    if (pair.size() != 2 || !(pair[0] <= pair[1])) {
      throw ConfigError(cfg.ranges_path + ": invalid range for " + std::string(names[i]));
    }
    cfg.ranges[static_cast<std::size_t>(i)] = {pair[0], pair[1]};
  }

  const CsvTable forcing = read_csv(cfg.forcing_path);
  const int col_rain = forcing.column("i_rain");
  const int col_pet = forcing.column("i_pet");
  if (col_rain < 0 || col_pet < 0) {
    throw ConfigError(cfg.forcing_path + ": needs columns i_rain and i_pet");
  }
  cfg.forcing_full.resize(static_cast<Eigen::Index>(forcing.rows.size()), 2);
  for (std::size_t r = 0; r < forcing.rows.size(); ++r) {
    cfg.forcing_full(static_cast<Eigen::Index>(r), 0) =
        forcing.rows[r][static_cast<std::size_t>(col_rain)];
    cfg.forcing_full(static_cast<Eigen::Index>(r), 1) =
        forcing.rows[r][static_cast<std::size_t>(col_pet)];
  }

  std::ifstream raw(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
  cfg.config_hash = to_hex(fnv1a64(bytes.data(), bytes.size()));
  return cfg;
}

TimeGrid make_grid(const RunConfig& cfg, int intervals_override) {
  const int intervals = intervals_override > 0 ? intervals_override : cfg.intervals;
  if (!cfg.explicit_times.empty()) {
    if (intervals + 1 > static_cast<int>(cfg.explicit_times.size())) {
      throw ConfigError("grid.times has fewer entries than requested intervals");
    }
    return TimeGrid(Eigen::Map<const Eigen::VectorXd>(cfg.explicit_times.data(),
                                                      intervals + 1));
  }
  return TimeGrid::uniform(cfg.t0, cfg.dt, intervals);
}

SimulationModel make_model(const RunConfig& cfg) { return make_logspm_model(cfg.fixed); }

MetricSpec make_metric(const RunConfig& cfg) {
  MetricSpec ms = logspm_default_metric(cfg.ranges);
  ms.flavor = cfg.flavor;
  return ms;
}

ConditionSetup make_setup(const RunConfig& cfg) {
  ConditionSetup setup;
  setup.metric = make_metric(cfg);
  LogSpmParams p;
  p.xi0 = cfg.fixed.xi0;
  setup.cct = logspm_noise_spec(p, cfg.noise_frac);
  setup.xi0 = cfg.fixed.xi0;
  setup.jitter_schedule = cfg.jitter_schedule;
  setup.conditioning_stride = cfg.conditioning_stride;
  return setup;
}

InputTrajectory make_input(const RunConfig& cfg, const TimeGrid& grid,
                           const Eigen::VectorXd& theta) {
  const int intervals = grid.intervals();
  if (cfg.forcing_full.rows() < intervals) {
    throw ConfigError("forcing file has fewer rows than grid intervals");
  }
  InputTrajectory input;
  input.params = theta;
  input.forcing = cfg.forcing_full.topRows(intervals);
  input.grid_ref = grid.id();
  return input;
}

std::vector<Eigen::VectorXd> read_param_sets(const std::string& path) {
  const json j = parse_json_file(path);
  try {
    const auto names = j.at("names").get<std::vector<std::string>>();
    const auto& expected = LogSpmParams::theta_names();
    if (names.size() != static_cast<std::size_t>(LogSpmParams::kThetaDim)) {
      throw ConfigError(path + ": expected 8 parameter names");
    }
    for (int i = 0; i < LogSpmParams::kThetaDim; ++i) {
      if (names[static_cast<std::size_t>(i)] != expected[i]) {
        throw ConfigError(path + ": parameter order must match " + std::string(expected[i]));
      }
    }
    std::vector<Eigen::VectorXd> sets;
    for (const auto& row : j.at("sets")) {
      const auto vals = row.get<std::vector<double>>();
      if (vals.size() != static_cast<std::size_t>(LogSpmParams::kThetaDim)) {
        throw ConfigError(path + ": each set needs 8 values");
      }
      sets.push_back(Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                                       LogSpmParams::kThetaDim));
    }
    if (sets.empty()) throw ConfigError(path + ": no parameter sets");
    return sets;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void cmd_design(const RunConfig& cfg, int n, std::uint64_t seed, bool latin_hypercube,
                const std::string& out_path) {
  if (n < 1) throw ConfigError("design: need n >= 1");
  CounterRng rng(seed);
  std::vector<std::vector<double>> sets(static_cast<std::size_t>(n),
                                        std::vector<double>(LogSpmParams::kThetaDim));
  if (latin_hypercube) {
    for (int c = 0; c < LogSpmParams::kThetaDim; ++c) {
      std::vector<int> strata(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) strata[static_cast<std::size_t>(i)] = i;
      for (int i = n - 1; i > 0; --i) {
        const int pick = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(strata[static_cast<std::size_t>(i)], strata[static_cast<std::size_t>(pick)]);
      }
      const auto& [lo, hi] = cfg.ranges[static_cast<std::size_t>(c)];
      for (int i = 0; i < n; ++i) {
        const double u = (strata[static_cast<std::size_t>(i)] + rng.uniform01()) / n;
        sets[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = lo + u * (hi - lo);
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < LogSpmParams::kThetaDim; ++c) {
        const auto& [lo, hi] = cfg.ranges[static_cast<std::size_t>(c)];
        sets[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
            lo + rng.uniform01() * (hi - lo);
      }
    }
  }

  json out;
  out["model"] = cfg.model_id;
  out["n"] = n;
  out["seed"] = seed;
  out["sampler"] = latin_hypercube ? "latin_hypercube" : "uniform";
  out["names"] = LogSpmParams::theta_names();
  out["sets"] = sets;
  out["provenance"] = provenance_json(cfg, seed);
  write_text_file(out_path, out.dump(2) + "\n");
}

void cmd_simulate(const RunConfig& cfg, const std::string& designs_path,
                  const std::string& out_path, bool full_state) {
  const auto sets = read_param_sets(designs_path);
  const TimeGrid grid = make_grid(cfg);
  const SimulationModel model = make_model(cfg);

  std::vector<std::string> header = {"time", "replica"};
  for (int d = 0; d < model.obs_dim; ++d) header.push_back("y" + std::to_string(d));
  if (full_state) {
    for (int d = 0; d < model.state_dim; ++d) header.push_back("x" + std::to_string(d));
  }
  std::vector<std::vector<std::string>> rows;
  rows.reserve(sets.size() * static_cast<std::size_t>(grid.intervals() + 1));
  for (std::size_t a = 0; a < sets.size(); ++a) {
    const InputTrajectory input = make_input(cfg, grid, sets[a]);
    const Eigen::MatrixXd states =
        integrate_ode(model, input, grid, cfg.fixed.xi0, cfg.substeps);
    const Eigen::MatrixXd h_obs = model.observation(input.params);
    for (int i = 0; i <= grid.intervals(); ++i) {
      const Eigen::VectorXd y = h_obs * states.row(i).transpose();
      std::vector<std::string> row = {format_double(grid.t(i)), std::to_string(a)};
      for (Eigen::Index d = 0; d < y.size(); ++d) row.push_back(format_double(y[d]));
      if (full_state) {
        for (Eigen::Index d = 0; d < states.cols(); ++d) {
          row.push_back(format_double(states(i, d)));
        }
      }
      rows.push_back(std::move(row));
    }
  }
  write_csv(out_path, provenance_comments(cfg, cfg.seed), header, rows);
}

namespace {

int grid_index_of(const TimeGrid& grid, double t) {
  const Eigen::VectorXd& times = grid.times();
  const double* begin = times.data();
  const double* end = begin + times.size();
  const double* it = std::lower_bound(begin, end, t);
  int best = -1;
  double best_err = std::numeric_limits<double>::infinity();
  for (int c : {static_cast<int>(it - begin) - 1, static_cast<int>(it - begin)}) {
    if (c < 0 || c >= static_cast<int>(times.size())) continue;
    const double err = std::abs(times[c] - t);
    if (err < best_err) {
      best_err = err;
      best = c;
    }
  }
  double min_dt = std::numeric_limits<double>::infinity();
  for (int l = 0; l < grid.intervals(); ++l) min_dt = std::min(min_dt, grid.dt(l));
  return (best >= 0 && best_err <= 1e-6 * min_dt) ? best : -1;
}

ObservationSet observations_from_runs(const TimeGrid& grid, const std::string& runs_path,
                                      int n, int obs_dim) {
  const CsvTable runs = read_csv(runs_path);
  const int col_time = runs.column("time");
  const int col_replica = runs.column("replica");
  if (col_time < 0 || col_replica < 0) {
    throw ConfigError(runs_path + ": needs columns time and replica");
  }
  std::vector<int> col_y(static_cast<std::size_t>(obs_dim));
  for (int d = 0; d < obs_dim; ++d) {
    col_y[static_cast<std::size_t>(d)] = runs.column("y" + std::to_string(d));
    if (col_y[static_cast<std::size_t>(d)] < 0) {
      throw ConfigError(runs_path + ": missing column y" + std::to_string(d));
    }
  }
  ObservationSet obs = ObservationSet::zeros(grid.intervals(), n, obs_dim);
  std::vector<int> seen(static_cast<std::size_t>(grid.intervals()) *
                            static_cast<std::size_t>(n),
                        0);
  for (const auto& row : runs.rows) {
    const double t = row[static_cast<std::size_t>(col_time)];
    const int a = static_cast<int>(row[static_cast<std::size_t>(col_replica)]);
    if (a < 0 || a >= n) throw ConfigError(runs_path + ": replica index out of range");
    const int i = grid_index_of(grid, t);
    if (i < 0) throw ConfigError(runs_path + ": time does not lie on the grid");
    if (i == 0) continue;  // the shared initial condition is not conditioned on
    for (int d = 0; d < obs_dim; ++d) {
      obs.at(i, a)[d] = row[static_cast<std::size_t>(col_y[static_cast<std::size_t>(d)])];
    }
    seen[(static_cast<std::size_t>(i) - 1) * static_cast<std::size_t>(n) +
         static_cast<std::size_t>(a)] = 1;
  }
  for (int v : seen) {
    if (v == 0) throw ConfigError(runs_path + ": missing observations for some (time, replica)");
  }
  return obs;
}

}  // namespace

void cmd_condition(const RunConfig& cfg, const std::string& designs_path,
                   const std::string& runs_path, const std::string& artifact_path,
                   const std::string& report_path) {
  const auto sets = read_param_sets(designs_path);
  const TimeGrid grid = make_grid(cfg);
  const SimulationModel model = make_model(cfg);
  const ConditionSetup setup = make_setup(cfg);

  DesignSet design;
  for (const auto& theta : sets) design.inputs.push_back(make_input(cfg, grid, theta));
  const ObservationSet obs =
      observations_from_runs(grid, runs_path, design.size(), model.obs_dim);

  const ConditionedEmulator ce = condition(model, design, obs, grid, setup);
  save_artifact(ce, artifact_path,
                {{"tool_version", kToolVersion},
                 {"config", cfg.config_hash},
                 {"seed", std::to_string(cfg.seed)}});

  json report;
  report["dim"] = ce.factor.lower.rows();
  report["n"] = ce.n();
  report["intervals"] = ce.num_intervals();
  report["conditioned_times"] = ce.cond_times.size();
  report["applied_jitter"] = ce.factor.applied_jitter;
  report["applied_jitter_rel"] = ce.factor.applied_jitter_rel;
  report["assembly_seconds"] = ce.assembly_seconds;
  report["factorization_seconds"] = ce.factorization_seconds;
  report["solve_residual"] = ce.solve_residual;
  report["provenance"] = provenance_json(cfg, cfg.seed);
  const std::string report_out =
      report_path.empty() ? artifact_path + ".report.json" : report_path;
  write_text_file(report_out, report.dump(2) + "\n");
}

void cmd_emulate(const RunConfig& cfg, const std::string& artifact_path,
                 const std::string& params_path, int index, bool variance,
                 const std::string& out_path) {
  const SimulationModel model = make_model(cfg);
  const ConditionedEmulator ce = load_artifact(model, artifact_path);
  const auto sets = read_param_sets(params_path);
  if (index < 0 || index >= static_cast<int>(sets.size())) {
    throw ConfigError("emulate: parameter set index out of range");
  }
  const InputTrajectory x_new =
      make_input(cfg, ce.grid, sets[static_cast<std::size_t>(index)]);

  EmulationResult result = emulate_mean(ce, x_new);
  if (variance) result.variance = emulate_variance(ce, x_new);

  std::vector<std::string> header = {"time"};
  const int obs_dim = ce.obs_dim();
  for (int d = 0; d < obs_dim; ++d) header.push_back("mean" + std::to_string(d));
  if (variance) {
    for (int d = 0; d < obs_dim; ++d) header.push_back("var" + std::to_string(d));
  }
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i <= ce.num_intervals(); ++i) {
    std::vector<std::string> row = {format_double(ce.grid.t(i))};
    for (int d = 0; d < obs_dim; ++d) {
      row.push_back(format_double(result.mean[static_cast<std::size_t>(i)][d]));
    }
    if (variance) {
      for (int d = 0; d < obs_dim; ++d) {
        row.push_back(format_double(result.variance[static_cast<std::size_t>(i)](d, d)));
      }
    }
    rows.push_back(std::move(row));
  }
  write_csv(out_path, provenance_comments(cfg, cfg.seed), header, rows);
  std::cout << "emulate_seconds=" << format_double(result.emulate_seconds) << "\n";
}

void cmd_validate(const RunConfig& cfg, const std::string& artifact_path,
                  const std::string& params_path, const std::string& out_path) {
  const SimulationModel model = make_model(cfg);
  const ConditionedEmulator ce = load_artifact(model, artifact_path);
  const auto sets = read_param_sets(params_path);
  const TimeGrid& grid = ce.grid;
  const int intervals = grid.intervals();

  json per_set = json::array();
  std::vector<double> d_cond_all;
  std::vector<double> d_prior_all;
  const std::string stem = out_path.size() > 5 && out_path.ends_with(".json")
                               ? out_path.substr(0, out_path.size() - 5)
                               : out_path;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const InputTrajectory input = make_input(cfg, grid, sets[k]);
    const Eigen::MatrixXd states = integrate_ode(model, input, grid, ce.xi0, cfg.substeps);
    const Eigen::MatrixXd h_obs = model.observation(input.params);
    std::vector<Eigen::VectorXd> truth(static_cast<std::size_t>(intervals));
    for (int i = 1; i <= intervals; ++i) {
      truth[static_cast<std::size_t>(i) - 1] = h_obs * states.row(i).transpose();
    }

    const EmulationResult emu = emulate_mean(ce, input);
    const double d_cond = d_value(emu.mean, truth);

    // Baseline: the unconditioned (prior) mean of the linearized system.
    const ReplicaKernels rk = assemble_replica_kernels(model, input, grid, ce.cond_threshold);
    const MeanTrajectory prior = mean_recursion(rk, ce.xi0);
    const double d_prior = d_value(prior.z, truth);

    d_cond_all.push_back(d_cond);
    d_prior_all.push_back(d_prior);
    per_set.push_back({{"index", k},
                       {"d_conditioned", d_cond},
                       {"d_prior", d_prior}});

    std::vector<std::string> header = {"time"};
    const int obs_dim = ce.obs_dim();
    for (int d = 0; d < obs_dim; ++d) header.push_back("truth" + std::to_string(d));
    for (int d = 0; d < obs_dim; ++d) header.push_back("emulated" + std::to_string(d));
    header.push_back("rain");
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i <= intervals; ++i) {
      std::vector<std::string> row = {format_double(grid.t(i))};
      const Eigen::VectorXd y_true = h_obs * states.row(i).transpose();
      for (Eigen::Index d = 0; d < y_true.size(); ++d) {
        row.push_back(format_double(y_true[d]));
      }
      for (Eigen::Index d = 0; d < y_true.size(); ++d) {
        row.push_back(format_double(emu.mean[static_cast<std::size_t>(i)][d]));
      }
      const int rain_interval = i < intervals ? i : intervals - 1;
      row.push_back(format_double(input.forcing(rain_interval, 0)));
      rows.push_back(std::move(row));
    }
    write_csv(stem + "_set" + std::to_string(k) + ".csv",
              provenance_comments(cfg, cfg.seed), header, rows);
  }

  json report;
  report["sets"] = per_set;
  report["summary"] = {{"median_conditioned", median(d_cond_all)},
                       {"median_prior", median(d_prior_all)},
                       {"conditioned_beats_prior",
                        median(d_cond_all) < median(d_prior_all)}};
  report["provenance"] = provenance_json(cfg, cfg.seed);
  write_text_file(out_path, report.dump(2) + "\n");
}

BenchOptions parse_sweep(const std::string& sweep_spec) {
  BenchOptions options;
  auto log_points = [](int lo, int hi, int count) {
    std::vector<int> out;
    for (int k = 0; k < count; ++k) {
      const double f = static_cast<double>(k) / (count - 1);
      const int v = static_cast<int>(std::lround(lo * std::pow(double(hi) / lo, f)));
      if (out.empty() || out.back() != v) out.push_back(v);
    }
    return out;
  };
  std::stringstream ss(sweep_spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto eq = part.find('=');
    const auto colon = part.find(':');
    if (eq == std::string::npos || colon == std::string::npos || colon < eq) {
      throw ConfigError("bench: sweep format is N=lo:hi,n=lo:hi");
    }
    const std::string axis = part.substr(0, eq);
    const int lo = std::stoi(part.substr(eq + 1, colon - eq - 1));
    const int hi = std::stoi(part.substr(colon + 1));
    if (lo < 1 || hi < lo) throw ConfigError("bench: invalid sweep bounds");
    if (axis == "N") {
      options.sweep_intervals = log_points(lo, hi, 4);
    } else if (axis == "n") {
      options.sweep_designs = log_points(lo, hi, 4);
    } else {
      throw ConfigError("bench: unknown sweep axis '" + axis + "'");
    }
  }
  return options;
}

BenchResult run_bench(const RunConfig& cfg, const BenchOptions& options) {
  BenchResult result;
  const SimulationModel model = make_model(cfg);

  auto run_point = [&](int intervals, int n, const std::string& axis) {
    const TimeGrid grid = make_grid(cfg, intervals);
    ConditionSetup setup = make_setup(cfg);
    setup.conditioning_stride =
        std::max(1, (intervals + options.max_cond_times - 1) / options.max_cond_times);

    // Designs and one held-out input, deterministic in the config seed.
    CounterRng rng(cfg.seed, 777);
    auto draw_theta = [&]() {
      Eigen::VectorXd theta(LogSpmParams::kThetaDim);
      for (int c = 0; c < LogSpmParams::kThetaDim; ++c) {
        const auto& [lo, hi] = cfg.ranges[static_cast<std::size_t>(c)];
        theta[c] = lo + rng.uniform01() * (hi - lo);
      }
      return theta;
    };
    DesignSet design;
    for (int a = 0; a < n; ++a) design.inputs.push_back(make_input(cfg, grid, draw_theta()));
    const InputTrajectory x_new = make_input(cfg, grid, draw_theta());

    ObservationSet obs = ObservationSet::zeros(intervals, n, model.obs_dim);
    for (int a = 0; a < n; ++a) {
      const Eigen::MatrixXd states =
          integrate_ode(model, design.inputs[static_cast<std::size_t>(a)], grid,
                        cfg.fixed.xi0, cfg.substeps);
      const Eigen::MatrixXd h_obs =
          model.observation(design.inputs[static_cast<std::size_t>(a)].params);
      for (int i = 1; i <= intervals; ++i) {
        obs.at(i, a) = h_obs * states.row(i).transpose();
      }
    }
    const ConditionedEmulator ce = condition(model, design, obs, grid, setup);

    std::vector<double> seconds;
    for (int rep = 0; rep < options.reps; ++rep) {
      const EmulationResult r = emulate_mean(ce, x_new);
      seconds.push_back(r.emulate_seconds);
      result.samples.emplace_back(axis, intervals, n, rep, r.emulate_seconds);
    }
    return median(seconds);
  };

  std::vector<double> xs, ys;
  for (int intervals : options.sweep_intervals) {
    xs.push_back(intervals);
    ys.push_back(run_point(intervals, options.fixed_n, "N"));
  }
  if (xs.size() >= 2) result.slope_intervals = loglog_slope(xs, ys);
  xs.clear();
  ys.clear();
  for (int n : options.sweep_designs) {
    xs.push_back(n);
    ys.push_back(run_point(options.fixed_intervals, n, "n"));
  }
  if (xs.size() >= 2) result.slope_designs = loglog_slope(xs, ys);
  return result;
}

void cmd_bench(const RunConfig& cfg, const BenchOptions& options,
               const std::string& out_path) {
  const BenchResult result = run_bench(cfg, options);
  auto comments = provenance_comments(cfg, cfg.seed);
  comments.emplace_back("timing_scope", "emulation step only (conditioning excluded)");
  comments.emplace_back("slope_N", format_double(result.slope_intervals));
  comments.emplace_back("slope_n", format_double(result.slope_designs));
  std::vector<std::vector<std::string>> rows;
  for (const auto& [axis, intervals, n, rep, seconds] : result.samples) {
    rows.push_back({axis, std::to_string(intervals), std::to_string(n),
                    std::to_string(rep), format_double(seconds)});
  }
  write_csv(out_path, comments, {"sweep", "N", "n", "rep", "emulate_seconds"}, rows);
  std::cout << "slope_N=" << format_double(result.slope_intervals)
            << " slope_n=" << format_double(result.slope_designs) << "\n";
}

}  // namespace dynemu
