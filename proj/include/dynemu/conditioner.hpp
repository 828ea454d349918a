#pragma once

#include <Eigen/Core>
#include <vector>

#include "dynemu/covariance.hpp"

namespace dynemu {

// Observations y_{i,a} at times i = 1..N for each design replica, packed
// time-major replica-minor (same flat ordering as the conditioning matrix).
struct ObservationSet {
  Eigen::VectorXd packed;
  int num_times = 0;  // N
  int n = 0;
  int obs_dim = 0;

  static ObservationSet zeros(int num_times, int n, int obs_dim);
  // i in 1..N.
  Eigen::VectorBlock<Eigen::VectorXd> at(int i, int a);
  Eigen::VectorBlock<const Eigen::VectorXd> at(int i, int a) const;
  void validate() const;
};

struct CholeskyFactor {
  Eigen::MatrixXd lower;
  double applied_jitter = 0.0;
  double applied_jitter_rel = 0.0;  // schedule entry that succeeded
};

// Defaults are relative to the mean diagonal of the assembled matrix.
inline const std::vector<double> kDefaultJitterSchedule = {0.0, 1e-10, 1e-8, 1e-6};

// Cholesky of sigma' + j*I for the first j in the schedule that succeeds;
// schedule entries are fractions of the mean diagonal.
CholeskyFactor factorize(const CovarianceBlocks& sp,
                         const std::vector<double>& jitter_schedule = kDefaultJitterSchedule);

// Solves (sigma' + jitter I) r = rhs through the stored factor.
Eigen::VectorXd solve_with_factor(const CholeskyFactor& factor, const Eigen::VectorXd& rhs);

// r = (sigma')^-1 vec(y - z), restricted to the conditioning times.
Eigen::VectorXd residual_solve(const CholeskyFactor& factor, const ObservationSet& y,
                               const std::vector<MeanTrajectory>& design_means,
                               const std::vector<int>& cond_times);

// Backward pass turning the solved residuals into the per-interval transport
// covectors z'_{i,a}; algebraically identical to the explicit propagator-chain
// sum but O(N n). Returned table is indexed i*n + a for i = 0..N-1.
std::vector<Eigen::VectorXd> zprime_covectors(const std::vector<ReplicaKernels>& reps,
                                              const Eigen::VectorXd& residual,
                                              const std::vector<int>& cond_times,
                                              int num_intervals);

struct ConditionSetup {
  MetricSpec metric;
  Eigen::MatrixXd cct;
  Eigen::VectorXd xi0;
  std::vector<double> jitter_schedule = kDefaultJitterSchedule;
  int conditioning_stride = 1;
  double cond_threshold = kDefaultCondThreshold;
};

// Everything the emulation step needs, precomputed once per design set.
struct ConditionedEmulator {
  SimulationModel model;  // attached, not persisted
  TimeGrid grid{Eigen::Vector2d(0.0, 1.0)};
  DesignSet design;
  MetricSpec metric;
  Eigen::MatrixXd cct;
  Eigen::VectorXd xi0;
  std::vector<int> cond_times;
  CholeskyFactor factor;
  Eigen::VectorXd residual;
  std::vector<Eigen::VectorXd> zprime;             // i*n + a
  std::vector<EigenDecomp> design_ed;              // a*N + l
  std::vector<MeanTrajectory> design_means;        // per replica
  std::vector<std::vector<Eigen::MatrixXd>> design_obs;  // [a][i], i = 0..N
  ObservationSet observed;
  double cond_threshold = kDefaultCondThreshold;

  // Diagnostics from the conditioning run; not persisted.
  double assembly_seconds = 0.0;
  double factorization_seconds = 0.0;
  double solve_residual = 0.0;

  int n() const { return design.size(); }
  int num_intervals() const { return grid.intervals(); }
  int state_dim() const { return static_cast<int>(xi0.size()); }
  int obs_dim() const { return observed.obs_dim; }
  const EigenDecomp& ed(int a, int l) const {
    return design_ed[static_cast<std::size_t>(a * num_intervals() + l)];
  }
  const Eigen::VectorXd& zprime_at(int l, int a) const {
    return zprime[static_cast<std::size_t>(l * n() + a)];
  }
};

// The conditioning phase: kernels, means, covariance, factorization,
// residuals and covectors, bundled into a reusable artifact.
ConditionedEmulator condition(const SimulationModel& model, const DesignSet& design,
                              const ObservationSet& runs, const TimeGrid& grid,
                              const ConditionSetup& setup);

}  // namespace dynemu
