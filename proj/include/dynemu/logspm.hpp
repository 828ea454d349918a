#pragma once

#include <Eigen/Core>
#include <array>
#include <utility>

#include "dynemu/coupling.hpp"
#include "dynemu/model.hpp"

namespace dynemu {

// Relative eigenvalue separation below which the linearized drift is treated
// as defective (its closed-form eigenvectors divide by the differences).
inline constexpr double kLogSpmEigSepTol = 1e-9;

// Three-box rainfall-runoff model: soil, groundwater and river storages with
// saturation-controlled fluxes. State is (h_s, h_gw, h_r).
struct LogSpmParams {
  // Sampled parameters, canonical order matching theta_names().
  double k_s = 0.05;
  double s_f = 5.0;
  double k_et = 0.04;
  double q_lat_max = 4.0;
  double q_gw_max = 2.5;
  double k_bf = 0.04;
  double k_dp = 0.02;
  double k_r = 1.7;
  // Fixed configuration.
  double a_w = 1.0;
  double h_s1 = 20.0;
  double h_s2 = 20.0;
  Eigen::Vector3d xi0{20.0, 5.0, 1.0};

  static constexpr int kThetaDim = 8;
  static const std::array<const char*, kThetaDim>& theta_names();

  Eigen::VectorXd theta() const;
  void validate() const;
};

// The non-sampled part of the configuration.
struct LogSpmFixed {
  double a_w = 1.0;
  double h_s1 = 20.0;
  double h_s2 = 20.0;
  Eigen::Vector3d xi0{20.0, 5.0, 1.0};
};

LogSpmParams logspm_from_theta(const Eigen::VectorXd& theta, const LogSpmFixed& fixed);

// Saturated-area and actual-evapotranspiration fractions at soil storage h_s.
std::pair<double, double> logspm_fractions(double h_s, const LogSpmParams& p);

Eigen::Vector3d logspm_rhs(const Eigen::Vector3d& state, const LogSpmParams& p,
                           double i_rain, double i_pet);

// Secant linearization of the fractions through h_s1 / h_s2; returns the
// lower-triangular drift matrix and the constant drift vector.
std::pair<Eigen::Matrix3d, Eigen::Vector3d> logspm_linearize(const LogSpmParams& p,
                                                             double i_rain, double i_pet);

// Explicit eigenvectors of the lower-triangular drift, unit diagonal; columns
// pair with the diagonal entries as eigenvalues.
std::pair<Eigen::Matrix3d, Eigen::Vector3d> logspm_closed_form_eigen(
    const Eigen::Matrix3d& a);

// Observed output is the river flow A_W * k_r * h_r; rank-1 row form.
Eigen::MatrixXd logspm_observation(const LogSpmParams& p);

// Metric over all sampled parameters, scaled by the configured ranges.
MetricSpec logspm_default_metric(
    const std::array<std::pair<double, double>, LogSpmParams::kThetaDim>& ranges);

// CCt with C = diag(frac * xi0).
Eigen::Matrix3d logspm_noise_spec(const LogSpmParams& p, double frac);

SimulationModel make_logspm_model(const LogSpmFixed& fixed);

}  // namespace dynemu
