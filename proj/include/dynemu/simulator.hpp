#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "dynemu/coupling.hpp"
#include "dynemu/model.hpp"
#include "dynemu/time_grid.hpp"

namespace dynemu {

// Classical fixed-step RK4 with `substeps` equal steps per grid interval and
// forcing held constant within each interval. Returns the states at the grid
// points as rows of an (N+1) x m matrix.
Eigen::MatrixXd integrate_ode(const SimulationModel& model, const InputTrajectory& input,
                              const TimeGrid& grid, const Eigen::VectorXd& xi0,
                              int substeps);

// Per-interval linearization of one replica, as fed to the SDE sampler. Kept
// free of any eigendecomposition so the sampler stays an independent oracle
// for the analytic kernels.
struct ReplicaLinearization {
  std::vector<Eigen::MatrixXd> a;  // one per interval
  std::vector<Eigen::VectorXd> b;
};

struct SdeSampleSet {
  // paths[p] is (N+1) x (R*m): stacked replica states at the grid points,
  // replica-major columns.
  std::vector<Eigen::MatrixXd> paths;
  std::uint64_t seed = 0;
};

// Euler-Maruyama on the stacked replica system; per substep the noise
// increment has covariance (K (x) CCt) * dt, drawn through a jittered
// Cholesky factor. Path p uses the (seed, p) substream, so results do not
// depend on evaluation order.
SdeSampleSet sample_linear_sde(const std::vector<ReplicaLinearization>& systems,
                               const Eigen::MatrixXd& cct,
                               const Eigen::MatrixXd& coupling, const TimeGrid& grid,
                               const Eigen::VectorXd& xi0, int num_paths,
                               std::uint64_t seed, int euler_substeps);

}  // namespace dynemu
