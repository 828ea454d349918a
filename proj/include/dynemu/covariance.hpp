#pragma once

#include <Eigen/Core>
#include <vector>

#include "dynemu/coupling.hpp"
#include "dynemu/kernels.hpp"
#include "dynemu/model.hpp"
#include "dynemu/time_grid.hpp"

namespace dynemu {

// Interval kernels of one replica over the whole grid, plus the observation
// matrices at the grid points.
struct ReplicaKernels {
  std::vector<EigenDecomp> ed;       // N
  std::vector<Eigen::MatrixXd> h;    // N
  std::vector<Eigen::VectorXd> k;    // N
  std::vector<Eigen::MatrixXd> obs;  // N+1, each obs_dim x state_dim
};

struct MeanTrajectory {
  std::vector<Eigen::VectorXd> z_tilde;  // N+1, state space
  std::vector<Eigen::VectorXd> z;        // N+1, observation space
};

// The conditioning covariance, assembled blockwise. Coordinates are ordered
// time-major, replica-minor: flat offset of (time position v, replica a) is
// (v*n + a)*obs_dim. Time index 0 never enters (its blocks vanish).
class CovarianceBlocks {
 public:
  CovarianceBlocks(std::vector<int> cond_times, int n_replicas, int obs_dim);

  int dim() const { return static_cast<int>(dense_.rows()); }
  int replicas() const { return n_; }
  int obs_dim() const { return obs_dim_; }
  // Grid time indices included in the conditioning, ascending, within 1..N.
  const std::vector<int>& cond_times() const { return cond_times_; }

  int offset(int time_pos, int replica) const {
    return (time_pos * n_ + replica) * obs_dim_;
  }
  Eigen::Block<const Eigen::MatrixXd> block(int time_pos_row, int replica_row,
                                            int time_pos_col, int replica_col) const {
    return dense_.block(offset(time_pos_row, replica_row),
                        offset(time_pos_col, replica_col), obs_dim_, obs_dim_);
  }

  Eigen::MatrixXd& dense() { return dense_; }
  const Eigen::MatrixXd& dense() const { return dense_; }

  // Copies the lower triangle into the upper one, bit-equal by construction,
  // and verifies the result is symmetric.
  void mirror_lower_to_upper();

 private:
  std::vector<int> cond_times_;
  int n_;
  int obs_dim_;
  Eigen::MatrixXd dense_;
};

// Linearizes the model on every interval and evaluates the eigendecomposition
// and h/k kernels. Diagonalization failures are rethrown with the interval
// index attached.
ReplicaKernels assemble_replica_kernels(const SimulationModel& model,
                                        const InputTrajectory& input, const TimeGrid& grid,
                                        double cond_threshold = kDefaultCondThreshold);

// z~_0 = xi0, z~_{i+1} = h_i z~_i + k_i, z_i = H_i z~_i.
MeanTrajectory mean_recursion(const ReplicaKernels& rk, const Eigen::VectorXd& xi0);

// Builds the conditioning covariance from the two recursions, starting at
// zero blocks for time 0. `weights` holds the pairwise coupling weights w
// (the effective noise kernel between two replicas is w^2). `cond_times`
// selects the observation times entering the matrix; empty means all of 1..N.
CovarianceBlocks sigma_prime(const std::vector<ReplicaKernels>& reps,
                             const Eigen::MatrixXd& cct, const Eigen::MatrixXd& weights,
                             const TimeGrid& grid, std::vector<int> cond_times = {});

}  // namespace dynemu
