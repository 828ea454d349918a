#pragma once

// Shared test fixtures: random stable systems, a parameter-driven linear test
// model, and quadrature oracles evaluated through Pade matrix exponentials so
// they are independent of the eigendecomposition path under test.

#include <Eigen/Dense>
#include <algorithm>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>
#include <vector>

#include "dynemu/conditioner.hpp"
#include "dynemu/covariance.hpp"
#include "dynemu/model.hpp"
#include "dynemu/simulator.hpp"
#include "dynemu/time_grid.hpp"

namespace dynemu::testing {

inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  const double scale = std::max(1e-300, want.norm());
  return (got - want).norm() / scale;
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  const double scale = std::max(1e-300, want.norm());
  return (got - want).norm() / scale;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols,
                                     double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int size, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v[i] = u(rng);
  return v;
}

// Generic real matrix shifted to have eigenvalue real parts below -margin.
inline Eigen::MatrixXd random_stable_matrix(std::mt19937_64& rng, int m,
                                            double margin = 0.3) {
  Eigen::MatrixXd a = random_matrix(rng, m, m);
  const Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  const double max_re = es.eigenvalues().real().maxCoeff();
  a.diagonal().array() -= (max_re + margin);
  return a;
}

inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, int m) {
  const Eigen::MatrixXd g = random_matrix(rng, m, m);
  return g * g.transpose() + 0.05 * Eigen::MatrixXd::Identity(m, m);
}

inline TimeGrid random_grid(std::mt19937_64& rng, int intervals) {
  std::uniform_real_distribution<double> u(0.3, 0.9);
  Eigen::VectorXd times(intervals + 1);
  times[0] = 0.0;
  for (int i = 0; i < intervals; ++i) times[i + 1] = times[i] + u(rng);
  return TimeGrid(times);
}

// Simpson rule over [0, dt] of exp(tau A_a) CCt exp(tau A_b)^T.
inline Eigen::MatrixXd quad_g(const Eigen::MatrixXd& a_mat, const Eigen::MatrixXd& b_mat,
                              const Eigen::MatrixXd& cct, double dt, double w,
                              int steps = 256) {
  const double h = dt / steps;
  auto f = [&](double tau) -> Eigen::MatrixXd {
    return (tau * a_mat).exp() * cct * (tau * b_mat).exp().transpose();
  };
  Eigen::MatrixXd acc = f(0.0) + f(dt);
  for (int i = 1; i < steps; ++i) {
    acc += ((i % 2 == 1) ? 4.0 : 2.0) * f(i * h);
  }
  return (w * w) * (h / 3.0) * acc;
}

// Simpson rule over [0, dt] of exp(tau A) b.
inline Eigen::VectorXd quad_k(const Eigen::MatrixXd& a_mat, const Eigen::VectorXd& b,
                              double dt, int steps = 256) {
  const double h = dt / steps;
  auto f = [&](double tau) -> Eigen::VectorXd { return (tau * a_mat).exp() * b; };
  Eigen::VectorXd acc = f(0.0) + f(dt);
  for (int i = 1; i < steps; ++i) {
    acc += ((i % 2 == 1) ? 4.0 : 2.0) * f(i * h);
  }
  return (h / 3.0) * acc;
}

// Direct quadrature of the two-time covariance for piecewise-constant drifts,
// t_i >= t_j >= 1. a_per_interval holds one drift matrix per grid interval.
inline Eigen::MatrixXd quad_sigma_tilde(const std::vector<Eigen::MatrixXd>& a_list_a,
                                        const std::vector<Eigen::MatrixXd>& a_list_b,
                                        const Eigen::MatrixXd& cct, const TimeGrid& grid,
                                        int i, int j, double w, int steps = 128) {
  const int m = static_cast<int>(cct.rows());
  // tail_x[k] propagates from t_k to t_i (resp. t_j) through whole intervals.
  auto tails = [&](const std::vector<Eigen::MatrixXd>& a_list, int upto) {
    std::vector<Eigen::MatrixXd> tail(static_cast<std::size_t>(upto) + 1,
                                      Eigen::MatrixXd::Identity(m, m));
    for (int k = upto - 1; k >= 0; --k) {
      tail[static_cast<std::size_t>(k)] =
          tail[static_cast<std::size_t>(k) + 1] *
          (grid.dt(k) * a_list[static_cast<std::size_t>(k)]).exp();
    }
    return tail;
  };
  const auto tail_a = tails(a_list_a, i);
  const auto tail_b = tails(a_list_b, j);

  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < j; ++k) {
    const double dt = grid.dt(k);
    const double h = dt / steps;
    const Eigen::MatrixXd& head_a = tail_a[static_cast<std::size_t>(k) + 1];
    const Eigen::MatrixXd& head_b = tail_b[static_cast<std::size_t>(k) + 1];
    auto f = [&](double offset) -> Eigen::MatrixXd {
      // offset = t_{k+1} - t'
      const Eigen::MatrixXd pa = head_a * (offset * a_list_a[static_cast<std::size_t>(k)]).exp();
      const Eigen::MatrixXd pb = head_b * (offset * a_list_b[static_cast<std::size_t>(k)]).exp();
      return pa * cct * pb.transpose();
    };
    Eigen::MatrixXd acc = f(0.0) + f(dt);
    for (int s = 1; s < steps; ++s) {
      acc += ((s % 2 == 1) ? 4.0 : 2.0) * f(s * h);
    }
    total += (h / 3.0) * acc;
  }
  return (w * w) * total;
}

// Linear test model: the sampled parameters perturb a stable base drift, the
// scalar forcing modulates both drift and offset, so every replica and every
// interval gets its own (A, b).
inline SimulationModel make_linear_test_model(std::mt19937_64& rng, int m, int obs_dim) {
  const Eigen::MatrixXd a0 = random_stable_matrix(rng, m, 0.6);
  const Eigen::MatrixXd a1 = random_matrix(rng, m, m, 0.05);
  const Eigen::VectorXd b0 = random_vector(rng, m);
  const Eigen::MatrixXd h = random_matrix(rng, obs_dim, m);

  SimulationModel model;
  model.id = "linear-test";
  model.state_dim = m;
  model.obs_dim = obs_dim;
  model.shared_forcing = false;
  model.linearize = [a0, a1, b0, m](const Eigen::VectorXd& theta,
                                    const Eigen::VectorXd& forcing)
      -> std::pair<Eigen::MatrixXd, Eigen::VectorXd> {
    Eigen::MatrixXd a = a0;
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) a(r, c) += 0.1 * theta[r * m + c];
    }
    a += forcing[0] * a1;
    return {a, b0 * (1.0 + 0.3 * forcing[0])};
  };
  const auto lin = model.linearize;
  model.rhs = [lin](const Eigen::VectorXd& state, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& forcing) -> Eigen::VectorXd {
    auto [a, b] = lin(theta, forcing);
    return a * state + b;
  };
  model.observation = [h](const Eigen::VectorXd&) -> Eigen::MatrixXd { return h; };
  return model;
}

// A complete small conditioning problem around the linear test model.
struct SmallCase {
  SimulationModel model;
  TimeGrid grid{Eigen::Vector2d(0.0, 1.0)};
  DesignSet design;
  ObservationSet runs;
  ConditionSetup setup;
  InputTrajectory x_new;
};

inline SmallCase make_small_case(std::mt19937_64& rng, int m, int n, int intervals,
                                 bool noisy_runs = true) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SmallCase sc;
  const int obs_dim = m > 1 ? m - 1 : 1;
  sc.model = make_linear_test_model(rng, m, obs_dim);
  sc.grid = random_grid(rng, intervals);

  const int theta_dim = m * m;
  Eigen::MatrixXd forcing(intervals, 1);
  for (int l = 0; l < intervals; ++l) forcing(l, 0) = u01(rng);
  auto make_in = [&](const Eigen::VectorXd& theta) {
    InputTrajectory input;
    input.params = theta;
    input.forcing = forcing;
    input.grid_ref = sc.grid.id();
    return input;
  };
  for (int a = 0; a < n; ++a) {
    sc.design.inputs.push_back(make_in(random_vector(rng, theta_dim)));
  }
  sc.x_new = make_in(random_vector(rng, theta_dim));

  sc.setup.metric.flavor = MetricFlavor::kSquaredEuclidean;
  const int coords = std::min(theta_dim, 4);
  for (int c = 0; c < coords; ++c) sc.setup.metric.coords.push_back(c);
  sc.setup.metric.scales = Eigen::VectorXd::Constant(coords, 2.0);
  sc.setup.cct = random_psd(rng, m);
  sc.setup.xi0 = random_vector(rng, m);

  sc.runs = ObservationSet::zeros(intervals, n, obs_dim);
  for (int a = 0; a < n; ++a) {
    const Eigen::MatrixXd states =
        integrate_ode(sc.model, sc.design.inputs[static_cast<std::size_t>(a)], sc.grid,
                      sc.setup.xi0, 20);
    const Eigen::MatrixXd h_obs =
        sc.model.observation(sc.design.inputs[static_cast<std::size_t>(a)].params);
    for (int i = 1; i <= intervals; ++i) {
      Eigen::VectorXd y = h_obs * states.row(i).transpose();
      if (noisy_runs) y += 0.3 * random_vector(rng, obs_dim);
      sc.runs.at(i, a) = y;
    }
  }
  return sc;
}

}  // namespace dynemu::testing
