#pragma once

#include <Eigen/Core>
#include <vector>

#include "dynemu/conditioner.hpp"

namespace dynemu {

struct EmulationResult {
  std::vector<Eigen::VectorXd> mean;       // N+1 entries; mean[0] = H xi0
  std::vector<Eigen::MatrixXd> variance;   // empty, or N+1 obs_dim x obs_dim blocks
  InputTrajectory online_input;
  double emulate_seconds = 0.0;
};

// The emulation recursion: per interval one eigendecomposition of the online
// drift plus one noise block per design replica, O(N n) in multiplications of
// state-space dimension.
EmulationResult emulate_mean(const ConditionedEmulator& ce, const InputTrajectory& x_new);

// Marginal conditional covariance at every grid time through the dense
// formula (cross-covariance row against the stored factor). O(N^2 n) blocks;
// intended for desk-scale use.
std::vector<Eigen::MatrixXd> emulate_variance(const ConditionedEmulator& ce,
                                              const InputTrajectory& x_new);

struct DenseOracleResult {
  std::vector<Eigen::VectorXd> mean;  // N+1 entries; mean[0] = H xi0
  Eigen::MatrixXd covariance;         // (N*obs_dim)^2 over times 1..N
};

// Literal conditional-Gaussian computation on the full joint covariance of
// design and online replicas. Desk-scale testing oracle for the recursion.
DenseOracleResult dense_oracle(const SimulationModel& model, const DesignSet& design,
                               const ObservationSet& runs, const InputTrajectory& x_new,
                               const TimeGrid& grid, const ConditionSetup& setup);

// sqrt(mean over i = 1..N of |emulated_i - simulated_i|^2).
double d_value(const std::vector<Eigen::VectorXd>& emulated_mean,
               const std::vector<Eigen::VectorXd>& simulated);

}  // namespace dynemu
