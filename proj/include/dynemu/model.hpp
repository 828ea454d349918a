#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <utility>

#include "dynemu/kernels.hpp"

namespace dynemu {

// The nonlinear right-hand side together with its interval-wise linearization
// and the observation map. `analytic_eigen`, when set, supplies closed-form
// eigenpairs of the linearized drift and is used instead of the numeric
// eigensolver.
struct SimulationModel {
  std::string id;
  int state_dim = 0;
  int obs_dim = 0;
  bool shared_forcing = false;

  std::function<Eigen::VectorXd(const Eigen::VectorXd& state,
                                const Eigen::VectorXd& params,
                                const Eigen::VectorXd& forcing)>
      rhs;
  std::function<std::pair<Eigen::MatrixXd, Eigen::VectorXd>(
      const Eigen::VectorXd& params, const Eigen::VectorXd& forcing)>
      linearize;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd& params)> observation;
  std::function<EigenDecomp(const Eigen::MatrixXd& a)> analytic_eigen;
};

}  // namespace dynemu
