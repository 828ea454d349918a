#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "dynemu/errors.hpp"

namespace dynemu {

// Static parameters plus the piecewise-constant driving series, row l of
// `forcing` holding the inputs on interval [t_l, t_{l+1}).
struct InputTrajectory {
  Eigen::VectorXd params;
  Eigen::MatrixXd forcing;
  std::uint64_t grid_ref = 0;
};

enum class MetricFlavor { kSquaredEuclidean, kEuclidean };

// Metric on input space, acting on the selected static parameters only.
struct MetricSpec {
  std::vector<int> coords;
  Eigen::VectorXd scales;
  MetricFlavor flavor = MetricFlavor::kSquaredEuclidean;
};

struct DesignSet {
  std::vector<InputTrajectory> inputs;

  int size() const { return static_cast<int>(inputs.size()); }
};

double rho(const InputTrajectory& x_a, const InputTrajectory& x_b, const MetricSpec& ms);

// w = exp(-rho/2); the effective noise kernel between two replicas is w^2.
double coupling_weight(const InputTrajectory& x_a, const InputTrajectory& x_b,
                       const MetricSpec& ms);

// Symmetric unit-diagonal matrix of pairwise weights over the design inputs,
// with the online input appended as the last row/column when present.
Eigen::MatrixXd coupling_matrix(const DesignSet& design,
                                const InputTrajectory* online, const MetricSpec& ms);

}  // namespace dynemu
