#include "dynemu/logspm.hpp"

#include <cmath>
#include <string>

namespace dynemu {

const std::array<const char*, LogSpmParams::kThetaDim>& LogSpmParams::theta_names() {
  static const std::array<const char*, kThetaDim> names = {
      "k_s", "s_F", "k_et", "q_lat_max", "q_gw_max", "k_bf", "k_dp", "k_r"};
  return names;
}

Eigen::VectorXd LogSpmParams::theta() const {
  Eigen::VectorXd t(kThetaDim);
  t << k_s, s_f, k_et, q_lat_max, q_gw_max, k_bf, k_dp, k_r;
  return t;
}

void LogSpmParams::validate() const {
  const Eigen::VectorXd t = theta();
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !std::isfinite(t[i])) {
      throw ConfigError(std::string("logspm: parameter ") + theta_names()[i] +
                        " must be strictly positive");
    }
  }
  if (!(a_w > 0.0)) throw ConfigError("logspm: A_W must be strictly positive");
  if (!(h_s1 > 0.0) || !(h_s2 > 0.0)) {
    throw ConfigError("logspm: secant points h_s1, h_s2 must be strictly positive");
  }
}

LogSpmParams logspm_from_theta(const Eigen::VectorXd& theta, const LogSpmFixed& fixed) {
  if (theta.size() != LogSpmParams::kThetaDim) {
    throw ConfigError("logspm: expected 8 sampled parameters");
  }
  LogSpmParams p;
  p.k_s = theta[0];
  p.s_f = theta[1];
  p.k_et = theta[2];
  p.q_lat_max = theta[3];
  p.q_gw_max = theta[4];
  p.k_bf = theta[5];
  p.k_dp = theta[6];
  p.k_r = theta[7];
  p.a_w = fixed.a_w;
  p.h_s1 = fixed.h_s1;
  p.h_s2 = fixed.h_s2;
  p.xi0 = fixed.xi0;
  p.validate();
  return p;
}

std::pair<double, double> logspm_fractions(double h_s, const LogSpmParams& p) {
  const double f_sat = 1.0 / (1.0 + p.s_f * std::exp(-p.k_s * h_s)) - 1.0 / (1.0 + p.s_f);
  const double f_et = 1.0 - std::exp(-p.k_et * h_s);
  return {f_sat, f_et};
}

Eigen::Vector3d logspm_rhs(const Eigen::Vector3d& state, const LogSpmParams& p,
                           double i_rain, double i_pet) {
  const double h_s = state[0];
  const double h_gw = state[1];
  const double h_r = state[2];
  const auto [f_sat, f_et] = logspm_fractions(h_s, p);
  const double q_rain = i_rain;
  const double q_runoff = f_sat * i_rain;
  const double q_et = f_et * i_pet;
  const double q_lat = f_sat * p.q_lat_max;
  const double q_gw = f_sat * p.q_gw_max;
  const double q_bf = p.k_bf * h_gw;
  const double q_dp = p.k_dp * h_gw;
  const double q_r = p.k_r * h_r;
  Eigen::Vector3d out;
  out[0] = q_rain - q_runoff - q_et - q_lat - q_gw;
  out[1] = q_gw - q_bf - q_dp;
  out[2] = q_runoff + q_lat + q_bf - q_r;
  return out;
}

namespace {

void check_separation(double l1, double l2, double l3) {
  const double scale = std::max({std::abs(l1), std::abs(l2), std::abs(l3), 1e-300});
  const double tol = kLogSpmEigSepTol * scale;
  if (std::abs(l1 - l2) <= tol || std::abs(l1 - l3) <= tol || std::abs(l2 - l3) <= tol) {
    throw DegenerateEigenvaluesError("logspm: coinciding eigenvalues of the linearized drift");
  }
}

}  // namespace

std::pair<Eigen::Matrix3d, Eigen::Vector3d> logspm_linearize(const LogSpmParams& p,
                                                             double i_rain, double i_pet) {
  const auto [f_sat1, f_et1] = logspm_fractions(p.h_s1, p);
  const auto [f_sat2, f_et2] = logspm_fractions(p.h_s2, p);
  const double a_sat = f_sat1 / p.h_s1;
  const double a_et = f_et2 / p.h_s2;

  const double l1 = -a_sat * (i_rain + p.q_lat_max + p.q_gw_max) - a_et * i_pet;
  const double l2 = -p.k_bf - p.k_dp;
  const double l3 = -p.k_r;
  const double a = a_sat * p.q_gw_max;
  const double b = p.k_bf;
  const double c = a_sat * (i_rain + p.q_lat_max);
  check_separation(l1, l2, l3);

  Eigen::Matrix3d drift;
  drift << l1, 0.0, 0.0,  //
      a, l2, 0.0,         //
      c, b, l3;
  Eigen::Vector3d offset(i_rain, 0.0, 0.0);
  return {drift, offset};
}

std::pair<Eigen::Matrix3d, Eigen::Vector3d> logspm_closed_form_eigen(
    const Eigen::Matrix3d& a_mat) {
  if (a_mat(0, 1) != 0.0 || a_mat(0, 2) != 0.0 || a_mat(1, 2) != 0.0) {
    throw ConfigError("logspm eigenvectors: drift matrix must be lower triangular");
  }
  const double l1 = a_mat(0, 0);
  const double l2 = a_mat(1, 1);
  const double l3 = a_mat(2, 2);
  const double a = a_mat(1, 0);
  const double b = a_mat(2, 1);
  const double c = a_mat(2, 0);
  check_separation(l1, l2, l3);

  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(1, 0) = a / (l1 - l2);
  m(2, 0) = (c * (l1 - l2) + a * b) / ((l1 - l2) * (l1 - l3));
  m(2, 1) = b / (l2 - l3);
  return {m, Eigen::Vector3d(l1, l2, l3)};
}

Eigen::MatrixXd logspm_observation(const LogSpmParams& p) {
  Eigen::MatrixXd h(1, 3);
  h << 0.0, 0.0, p.a_w * p.k_r;
  return h;
}

MetricSpec logspm_default_metric(
    const std::array<std::pair<double, double>, LogSpmParams::kThetaDim>& ranges) {
  MetricSpec ms;
  ms.flavor = MetricFlavor::kSquaredEuclidean;
  ms.coords.resize(LogSpmParams::kThetaDim);
  ms.scales.resize(LogSpmParams::kThetaDim);
  for (int i = 0; i < LogSpmParams::kThetaDim; ++i) {
    const auto& [lo, hi] = ranges[static_cast<std::size_t>(i)];
    if (!(lo < hi)) {
      throw ConfigError(std::string("logspm metric: invalid range for ") +
                        LogSpmParams::theta_names()[i]);
    }
    ms.coords[static_cast<std::size_t>(i)] = i;
    ms.scales[i] = hi - lo;
  }
  return ms;
}

Eigen::Matrix3d logspm_noise_spec(const LogSpmParams& p, double frac) {
  if (!(frac > 0.0)) throw ConfigError("logspm noise: fraction must be positive");
  for (int i = 0; i < 3; ++i) {
    if (!(p.xi0[i] > 0.0)) {
      throw ConfigError("logspm noise: initial condition must be componentwise positive");
    }
  }
  const Eigen::Vector3d c = frac * p.xi0;
  return c.cwiseProduct(c).asDiagonal();
}

SimulationModel make_logspm_model(const LogSpmFixed& fixed) {
  SimulationModel model;
  model.id = "logspm";
  model.state_dim = 3;
  model.obs_dim = 1;
  model.shared_forcing = true;
  model.rhs = [fixed](const Eigen::VectorXd& state, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& forcing) -> Eigen::VectorXd {
    const LogSpmParams p = logspm_from_theta(theta, fixed);
    return logspm_rhs(state.head<3>(), p, forcing[0], forcing[1]);
  };
  model.linearize = [fixed](const Eigen::VectorXd& theta, const Eigen::VectorXd& forcing)
      -> std::pair<Eigen::MatrixXd, Eigen::VectorXd> {
    const LogSpmParams p = logspm_from_theta(theta, fixed);
    auto [a, b] = logspm_linearize(p, forcing[0], forcing[1]);
    return {a, b};
  };
  model.observation = [fixed](const Eigen::VectorXd& theta) -> Eigen::MatrixXd {
    const LogSpmParams p = logspm_from_theta(theta, fixed);
    return logspm_observation(p);
  };
  model.analytic_eigen = [](const Eigen::MatrixXd& a) -> EigenDecomp {
    auto [m, lambda] = logspm_closed_form_eigen(a);
    return canonicalize_eigenpairs(m.cast<std::complex<double>>(),
                                   lambda.cast<std::complex<double>>());
  };
  return model;
}

}  // namespace dynemu
