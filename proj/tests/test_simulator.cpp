#include <doctest.h>

#include <cmath>
#include <random>

#include "dynemu/covariance.hpp"
#include "dynemu/rng.hpp"
#include "dynemu/simulator.hpp"
#include "support.hpp"

using namespace dynemu;
namespace dt = dynemu::testing;

namespace {

SimulationModel scalar_model(double a, double b) {
  SimulationModel model;
  model.id = "scalar";
  model.state_dim = 1;
  model.obs_dim = 1;
  model.linearize = [a, b](const Eigen::VectorXd&, const Eigen::VectorXd&)
      -> std::pair<Eigen::MatrixXd, Eigen::VectorXd> {
    Eigen::MatrixXd am(1, 1);
    am << a;
    Eigen::VectorXd bv(1);
    bv << b;
    return {am, bv};
  };
  model.rhs = [a, b](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                     const Eigen::VectorXd&) -> Eigen::VectorXd {
    return a * x + Eigen::VectorXd::Constant(1, b);
  };
  model.observation = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(1, 1); };
  return model;
}

InputTrajectory empty_input(const TimeGrid& grid) {
  InputTrajectory in;
  in.params = Eigen::VectorXd::Zero(1);
  in.forcing = Eigen::MatrixXd::Zero(grid.intervals(), 1);
  in.grid_ref = grid.id();
  return in;
}

}  // namespace

TEST_CASE("integrate_ode: constant and exponential solutions") {
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 1);
  const Eigen::VectorXd one = Eigen::VectorXd::Constant(1, 1.0);

  const SimulationModel still = scalar_model(0.0, 0.0);
  const Eigen::MatrixXd flat = integrate_ode(still, empty_input(grid), grid, one, 10);
  CHECK(flat(1, 0) == 1.0);

  const SimulationModel decay = scalar_model(-1.0, 0.0);
  const Eigen::MatrixXd states = integrate_ode(decay, empty_input(grid), grid, one, 100);
  CHECK(states(1, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("integrate_ode: fourth-order convergence on a smooth problem") {
  // Logistic growth, exact solution known.
  SimulationModel model;
  model.id = "logistic";
  model.state_dim = 1;
  model.obs_dim = 1;
  model.rhs = [](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                 const Eigen::VectorXd&) -> Eigen::VectorXd {
    return x.array() * (1.0 - x.array());
  };
  model.observation = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(1, 1); };
  const TimeGrid grid = TimeGrid::uniform(0.0, 2.0, 1);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 0.1);
  const double exact = 1.0 / (1.0 + 9.0 * std::exp(-2.0));

  const double coarse =
      std::abs(integrate_ode(model, empty_input(grid), grid, x0, 8)(1, 0) - exact);
  const double fine =
      std::abs(integrate_ode(model, empty_input(grid), grid, x0, 16)(1, 0) - exact);
  CHECK(coarse / fine > 10.0);
  CHECK(coarse / fine < 25.0);
}

TEST_CASE("integrate_ode: divergence reports time and component") {
  SimulationModel model;
  model.id = "blowup";
  model.state_dim = 1;
  model.obs_dim = 1;
  model.rhs = [](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                 const Eigen::VectorXd&) -> Eigen::VectorXd {
    return x.array().square();
  };
  model.observation = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(1, 1); };
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 4);
  const Eigen::VectorXd big = Eigen::VectorXd::Constant(1, 10.0);
  try {
    integrate_ode(model, empty_input(grid), grid, big, 50);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.time() > 0.0);
    CHECK(e.component() == 0);
  }
}

TEST_CASE("sample_linear_sde: zero noise reproduces the deterministic solution") {
  const TimeGrid grid = TimeGrid::uniform(0.0, 0.5, 4);
  ReplicaLinearization sys;
  Eigen::MatrixXd a(1, 1);
  a << -0.8;
  Eigen::VectorXd b(1);
  b << 0.6;
  sys.a.assign(4, a);
  sys.b.assign(4, b);
  const Eigen::MatrixXd cct = Eigen::MatrixXd::Zero(1, 1);
  const Eigen::MatrixXd coupling = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::VectorXd xi0 = Eigen::VectorXd::Constant(1, 2.0);

  const SdeSampleSet set =
      sample_linear_sde({sys}, cct, coupling, grid, xi0, 3, 99, 256);
  double x = 2.0;
  for (int l = 0; l < 4; ++l) {
    const double dt = grid.dt(l);
    x = std::exp(-0.8 * dt) * x + (1.0 - std::exp(-0.8 * dt)) / 0.8 * 0.6;
  }
  for (const auto& path : set.paths) {
    CHECK(path(4, 0) == doctest::Approx(x).epsilon(2e-3));  // first-order Euler bias
  }
}

TEST_CASE("sample_linear_sde: Brownian variance at t=1") {
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 1);
  ReplicaLinearization sys;
  sys.a.assign(1, Eigen::MatrixXd::Zero(1, 1));
  sys.b.assign(1, Eigen::VectorXd::Zero(1));
  const int paths = 10000;
  const SdeSampleSet set = sample_linear_sde({sys}, Eigen::MatrixXd::Identity(1, 1),
                                             Eigen::MatrixXd::Ones(1, 1), grid,
                                             Eigen::VectorXd::Zero(1), paths, 4242, 8);
  double mean = 0.0;
  double sq = 0.0;
  for (const auto& path : set.paths) {
    mean += path(1, 0);
    sq += path(1, 0) * path(1, 0);
  }
  mean /= paths;
  const double var = sq / paths - mean * mean;
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / paths));
}

TEST_CASE("sample_linear_sde: perfectly coupled identical replicas stay together") {
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 3);
  ReplicaLinearization sys;
  Eigen::MatrixXd a(1, 1);
  a << -0.5;
  Eigen::VectorXd b(1);
  b << 0.2;
  sys.a.assign(3, a);
  sys.b.assign(3, b);
  const SdeSampleSet set = sample_linear_sde(
      {sys, sys}, Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Ones(2, 2), grid,
      Eigen::VectorXd::Constant(1, 1.0), 20, 7, 16);
  for (const auto& path : set.paths) {
    for (int i = 0; i <= 3; ++i) {
      CHECK(std::abs(path(i, 0) - path(i, 1)) < 1e-4);
    }
  }
}

TEST_CASE("sample_linear_sde: reproducible and order-independent per path") {
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 2);
  ReplicaLinearization sys;
  sys.a.assign(2, Eigen::MatrixXd::Constant(1, 1, -0.3));
  sys.b.assign(2, Eigen::VectorXd::Constant(1, 0.1));
  const auto one = sample_linear_sde({sys}, Eigen::MatrixXd::Identity(1, 1),
                                     Eigen::MatrixXd::Ones(1, 1), grid,
                                     Eigen::VectorXd::Zero(1), 5, 31, 4);
  const auto two = sample_linear_sde({sys}, Eigen::MatrixXd::Identity(1, 1),
                                     Eigen::MatrixXd::Ones(1, 1), grid,
                                     Eigen::VectorXd::Zero(1), 5, 31, 4);
  for (int p = 0; p < 5; ++p) {
    CHECK((one.paths[static_cast<std::size_t>(p)] - two.paths[static_cast<std::size_t>(p)])
              .norm() == 0.0);
  }
  // Fewer paths with the same seed give a prefix of the same set.
  const auto prefix = sample_linear_sde({sys}, Eigen::MatrixXd::Identity(1, 1),
                                        Eigen::MatrixXd::Ones(1, 1), grid,
                                        Eigen::VectorXd::Zero(1), 3, 31, 4);
  for (int p = 0; p < 3; ++p) {
    CHECK((one.paths[static_cast<std::size_t>(p)] -
           prefix.paths[static_cast<std::size_t>(p)])
              .norm() == 0.0);
  }
}

TEST_CASE("sample_linear_sde: halving the Euler step moves moments within MC error") {
  // Bias control with common random numbers: evolve each Brownian path at the
  // fine resolution and at half resolution (pair-summed increments), so the
  // Monte-Carlo noise cancels and the difference isolates the time-step bias.
  const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, 3);
  const double a = -0.5;
  const double b = 0.3;
  const std::uint64_t seed = 515;
  const int paths = 100000;
  const int fine_substeps = 128;

  ReplicaLinearization sys;
  sys.a.assign(3, Eigen::MatrixXd::Constant(1, 1, a));
  sys.b.assign(3, Eigen::VectorXd::Constant(1, b));
  const auto library_run =
      sample_linear_sde({sys}, Eigen::MatrixXd::Identity(1, 1),
                        Eigen::MatrixXd::Ones(1, 1), grid, Eigen::VectorXd::Zero(1),
                        paths, seed, fine_substeps);

  double mean_fine = 0.0, sq_fine = 0.0;
  double mean_coarse = 0.0, sq_coarse = 0.0;
  double max_mismatch = 0.0;
  for (int p = 0; p < paths; ++p) {
    CounterRng rng(seed, static_cast<std::uint64_t>(p) + 1);
    double x_fine = 0.0;
    double x_coarse = 0.0;
    for (int l = 0; l < 3; ++l) {
      const double dt = grid.dt(l) / fine_substeps;
      const double sqrt_dt = std::sqrt(dt);
      double carried = 0.0;
      for (int s = 0; s < fine_substeps; ++s) {
        const double xi = rng.normal();
        x_fine += dt * (a * x_fine + b) + sqrt_dt * xi;
        if (s % 2 == 0) {
          carried = xi;
        } else {
          // One coarse step consumes the same Brownian increment.
          x_coarse += 2.0 * dt * (a * x_coarse + b) + sqrt_dt * (carried + xi);
        }
      }
    }
    max_mismatch = std::max(
        max_mismatch, std::abs(x_fine - library_run.paths[static_cast<std::size_t>(p)](3, 0)));
    mean_fine += x_fine;
    sq_fine += x_fine * x_fine;
    mean_coarse += x_coarse;
    sq_coarse += x_coarse * x_coarse;
  }
  // The reference evolution reproduces the library sampler draw for draw.
  CHECK(max_mismatch == 0.0);

  mean_fine /= paths;
  mean_coarse /= paths;
  const double var_fine = sq_fine / paths - mean_fine * mean_fine;
  const double var_coarse = sq_coarse / paths - mean_coarse * mean_coarse;
  const double se_mean = std::sqrt(var_fine / paths);
  const double se_var = var_fine * std::sqrt(2.0 / paths);
  CHECK(std::abs(mean_fine - mean_coarse) < se_mean);
  CHECK(std::abs(var_fine - var_coarse) < se_var);
}
