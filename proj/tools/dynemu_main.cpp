#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "dynemu/commands.hpp"
#include "dynemu/errors.hpp"
#include "dynemu/version.hpp"

namespace {

struct Args {
  std::string config;
  std::string designs;
  std::string runs;
  std::string artifact;
  std::string params;
  std::string out;
  std::string report;
  std::string sweep = "N=40:400,n=10:100";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int n = 1;
  int index = 0;
  int reps = 5;
  int bench_n = 20;
  int bench_intervals = 200;
  bool variance = false;
  bool lhs = false;
  bool full_state = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-series emulator for ODE models: conditions a coupled linear "
               "stochastic surrogate on precomputed runs, then emulates new inputs "
               "in O(N*n)."};
  app.set_version_flag("--version", dynemu::kToolVersion);
  app.require_subcommand(1);
  Args args;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "run configuration JSON")->required();
  };

  CLI::App* design = app.add_subcommand("design", "sample parameter sets within ranges");
  add_config(design);
  design->add_option("--n", args.n, "number of sets")->required();
  design->add_option("--seed", args.seed, "sampling seed (defaults to config seed)")
      ->each([&](const std::string&) { args.seed_given = true; });
  design->add_flag("--lhs", args.lhs, "latin hypercube instead of plain uniform");
  design->add_option("--out", args.out, "output designs JSON")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "integrate the model for each design");
  add_config(simulate);
  simulate->add_option("--designs", args.designs, "designs JSON")->required();
  simulate->add_flag("--full-state", args.full_state, "also write the state components");
  simulate->add_option("--out", args.out, "output runs CSV")->required();

  CLI::App* condition = app.add_subcommand("condition", "build the conditioned emulator");
  add_config(condition);
  condition->add_option("--designs", args.designs, "designs JSON")->required();
  condition->add_option("--runs", args.runs, "runs CSV")->required();
  condition->add_option("--artifact", args.artifact, "output artifact path")->required();
  condition->add_option("--out", args.report, "report JSON (default <artifact>.report.json)");

  CLI::App* emulate = app.add_subcommand("emulate", "emulate a new input from an artifact");
  add_config(emulate);
  emulate->add_option("--artifact", args.artifact, "conditioned artifact")->required();
  emulate->add_option("--params", args.params, "parameter sets JSON")->required();
  emulate->add_option("--index", args.index, "which set to emulate (default 0)");
  emulate->add_flag("--variance", args.variance, "also compute marginal variances (slow)");
  emulate->add_option("--out", args.out, "output CSV")->required();

  CLI::App* validate = app.add_subcommand(
      "validate", "simulate vs emulate held-out sets, with d-values and plot CSVs");
  add_config(validate);
  validate->add_option("--artifact", args.artifact, "conditioned artifact")->required();
  validate->add_option("--params", args.params, "held-out parameter sets JSON")->required();
  validate->add_option("--out", args.out, "report JSON; plot CSVs land next to it")
      ->required();

  CLI::App* bench = app.add_subcommand("bench", "time the emulation step over N and n");
  add_config(bench);
  bench->add_option("--sweep", args.sweep, "sweep spec, default N=40:400,n=10:100");
  bench->add_option("--n", args.bench_n, "fixed n for the N sweep (default 20)");
  bench->add_option("--N", args.bench_intervals, "fixed N for the n sweep (default 200)");
  bench->add_option("--reps", args.reps, "repetitions per point (default 5)");
  bench->add_option("--out", args.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const dynemu::RunConfig cfg = dynemu::load_run_config(args.config);
    if (design->parsed()) {
      dynemu::cmd_design(cfg, args.n, args.seed_given ? args.seed : cfg.seed, args.lhs,
                         args.out);
    } else if (simulate->parsed()) {
      dynemu::cmd_simulate(cfg, args.designs, args.out, args.full_state);
    } else if (condition->parsed()) {
      dynemu::cmd_condition(cfg, args.designs, args.runs, args.artifact, args.report);
    } else if (emulate->parsed()) {
      dynemu::cmd_emulate(cfg, args.artifact, args.params, args.index, args.variance,
                          args.out);
    } else if (validate->parsed()) {
      dynemu::cmd_validate(cfg, args.artifact, args.params, args.out);
    } else if (bench->parsed()) {
      dynemu::BenchOptions options = dynemu::parse_sweep(args.sweep);
      options.fixed_n = args.bench_n;
      options.fixed_intervals = args.bench_intervals;
      options.reps = args.reps;
      dynemu::cmd_bench(cfg, options, args.out);
    }
  } catch (const dynemu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dynemu::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const dynemu::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
