#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dynemu/artifact_io.hpp"
#include "dynemu/emulator.hpp"
#include "dynemu/logspm.hpp"
#include "support.hpp"

using namespace dynemu;
namespace dt = dynemu::testing;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct GoldenCase {
  SimulationModel model;
  TimeGrid grid{Eigen::Vector2d(0.0, 1.0)};
  DesignSet design;
  ObservationSet runs;
  ConditionSetup setup;
  InputTrajectory x_new;
  ConditionedEmulator emulator;
};

// Fully literal fixture so the serialized bytes are stable unless the format
// or the conditioning math changes on purpose.
GoldenCase make_golden_case() {
  GoldenCase gc;
  const LogSpmFixed fixed;  // defaults: A_W 1, h_s1/h_s2 20, xi0 (20, 5, 1)
  gc.model = make_logspm_model(fixed);
  gc.grid = TimeGrid::uniform(0.0, 1.0, 3);

  Eigen::MatrixXd forcing(3, 2);
  forcing << 4.0, 2.0,  //
      0.0, 2.2,         //
      11.5, 1.9;
  auto make_in = [&](std::initializer_list<double> theta) {
    InputTrajectory in;
    in.params = Eigen::VectorXd(LogSpmParams::kThetaDim);
    int i = 0;
    for (double v : theta) in.params[i++] = v;
    in.forcing = forcing;
    in.grid_ref = gc.grid.id();
    return in;
  };
  gc.design.inputs.push_back(
      make_in({0.05, 5.0, 0.04, 4.0, 2.5, 0.04, 0.02, 1.7}));
  gc.design.inputs.push_back(
      make_in({0.03, 3.0, 0.03, 3.0, 2.0, 0.03, 0.015, 1.3}));
  gc.x_new = make_in({0.04, 4.0, 0.035, 3.5, 2.2, 0.035, 0.018, 1.5});

  std::array<std::pair<double, double>, LogSpmParams::kThetaDim> ranges = {
      {{0.02, 0.08},
       {2.0, 8.0},
       {0.02, 0.06},
       {2.0, 6.0},
       {1.0, 4.0},
       {0.02, 0.06},
       {0.01, 0.04},
       {1.0, 2.5}}};
  gc.setup.metric = logspm_default_metric(ranges);
  LogSpmParams noise_params;
  noise_params.xi0 = fixed.xi0;
  gc.setup.cct = logspm_noise_spec(noise_params, 0.1);
  gc.setup.xi0 = fixed.xi0;

  gc.runs = ObservationSet::zeros(3, 2, 1);
  gc.runs.at(1, 0)[0] = 1.71;
  gc.runs.at(2, 0)[0] = 1.64;
  gc.runs.at(3, 0)[0] = 1.80;
  gc.runs.at(1, 1)[0] = 1.32;
  gc.runs.at(2, 1)[0] = 1.28;
  gc.runs.at(3, 1)[0] = 1.41;

  gc.emulator = condition(gc.model, gc.design, gc.runs, gc.grid, gc.setup);
  return gc;
}

}  // namespace

TEST_CASE("artifact: save/load round-trips bit-exactly and emulation agrees") {
  const GoldenCase gc = make_golden_case();
  const fs::path dir = fs::temp_directory_path() / "dynemu_artifact_test";
  fs::create_directories(dir);
  const std::string first = (dir / "first.bin").string();
  const std::string second = (dir / "second.bin").string();

  save_artifact(gc.emulator, first, {{"seed", "1"}});
  const ConditionedEmulator loaded = load_artifact(gc.model, first);
  save_artifact(loaded, second, {{"seed", "1"}});

  CHECK(read_bytes(first) == read_bytes(second));
  CHECK(read_bytes(first + ".json") == read_bytes(second + ".json"));

  const EmulationResult from_memory = emulate_mean(gc.emulator, gc.x_new);
  const EmulationResult from_disk = emulate_mean(loaded, gc.x_new);
  REQUIRE(from_memory.mean.size() == from_disk.mean.size());
  for (std::size_t i = 0; i < from_memory.mean.size(); ++i) {
    CHECK((from_memory.mean[i] - from_disk.mean[i]).norm() == 0.0);
  }
  const auto var_memory = emulate_variance(gc.emulator, gc.x_new);
  const auto var_disk = emulate_variance(loaded, gc.x_new);
  for (std::size_t i = 0; i < var_memory.size(); ++i) {
    CHECK((var_memory[i] - var_disk[i]).norm() == 0.0);
  }
  fs::remove_all(dir);
}

TEST_CASE("artifact: corrupted payload is rejected") {
  const GoldenCase gc = make_golden_case();
  const fs::path dir = fs::temp_directory_path() / "dynemu_artifact_corrupt";
  fs::create_directories(dir);
  const std::string path = (dir / "artifact.bin").string();
  save_artifact(gc.emulator, path);

  std::string bytes = read_bytes(path);
  bytes[bytes.size() / 2] ^= 0x1;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  CHECK_THROWS_AS(load_artifact(gc.model, path), IoError);
  fs::remove_all(dir);
}

TEST_CASE("artifact: golden file pins the container format") {
  const GoldenCase gc = make_golden_case();
  const std::string golden = std::string(DYNEMU_REPO_DIR) + "/tests/data/golden_artifact.bin";
  const fs::path dir = fs::temp_directory_path() / "dynemu_artifact_golden";
  fs::create_directories(dir);
  const std::string fresh = (dir / "fresh.bin").string();
  save_artifact(gc.emulator, fresh, {{"seed", "1"}});

  if (std::getenv("DYNEMU_WRITE_GOLDEN") != nullptr) {
    fs::copy_file(fresh, golden, fs::copy_options::overwrite_existing);
    fs::copy_file(fresh + ".json", golden + ".json", fs::copy_options::overwrite_existing);
    MESSAGE("golden artifact rewritten");
  }
  REQUIRE_MESSAGE(fs::exists(golden),
                  "golden artifact missing; run with DYNEMU_WRITE_GOLDEN=1 to create it");
  CHECK(read_bytes(fresh) == read_bytes(golden));
  CHECK(read_bytes(fresh + ".json") == read_bytes(golden + ".json"));
  fs::remove_all(dir);
}
