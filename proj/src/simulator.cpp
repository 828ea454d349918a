#include "dynemu/simulator.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "dynemu/rng.hpp"

namespace dynemu {

namespace {

void check_finite(const Eigen::VectorXd& state, double time) {
  for (Eigen::Index c = 0; c < state.size(); ++c) {
    if (!std::isfinite(state[c])) {
      throw NonFiniteError("state left finite range during integration", time,
                           static_cast<int>(c));
    }
  }
}

}  // namespace

Eigen::MatrixXd integrate_ode(const SimulationModel& model, const InputTrajectory& input,
                              const TimeGrid& grid, const Eigen::VectorXd& xi0,
                              int substeps) {
  if (substeps < 1) throw ConfigError("integrate_ode: substeps must be >= 1");
  if (input.grid_ref != grid.id()) {
    throw MismatchedGridsError("integrate_ode: input not defined on this grid");
  }
  const int intervals = grid.intervals();
  if (input.forcing.rows() != intervals) {
    throw ConfigError("integrate_ode: forcing must have one row per interval");
  }
  const Eigen::Index m = xi0.size();
  Eigen::MatrixXd states(intervals + 1, m);
  Eigen::VectorXd x = xi0;
  states.row(0) = x.transpose();
  for (int l = 0; l < intervals; ++l) {
    const Eigen::VectorXd forcing = input.forcing.row(l).transpose();
    const double h = grid.dt(l) / substeps;
    double t = grid.t(l);
    for (int s = 0; s < substeps; ++s) {
      const Eigen::VectorXd k1 = model.rhs(x, input.params, forcing);
      const Eigen::VectorXd k2 = model.rhs(x + 0.5 * h * k1, input.params, forcing);
      const Eigen::VectorXd k3 = model.rhs(x + 0.5 * h * k2, input.params, forcing);
      const Eigen::VectorXd k4 = model.rhs(x + h * k3, input.params, forcing);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
      check_finite(x, t);
    }
    states.row(l + 1) = x.transpose();
  }
  return states;
}

SdeSampleSet sample_linear_sde(const std::vector<ReplicaLinearization>& systems,
                               const Eigen::MatrixXd& cct,
                               const Eigen::MatrixXd& coupling, const TimeGrid& grid,
                               const Eigen::VectorXd& xi0, int num_paths,
                               std::uint64_t seed, int euler_substeps) {
  if (euler_substeps < 1) throw ConfigError("sample_linear_sde: substeps must be >= 1");
  if (num_paths < 1) throw ConfigError("sample_linear_sde: need at least one path");
  const int replicas = static_cast<int>(systems.size());
  if (replicas < 1) throw ConfigError("sample_linear_sde: need at least one replica");
  if (coupling.rows() != replicas || coupling.cols() != replicas) {
    throw ConfigError("sample_linear_sde: coupling matrix dimension mismatch");
  }
  const int intervals = grid.intervals();
  const Eigen::Index m = xi0.size();
  const Eigen::Index stacked = replicas * m;

  // Noise factor L with L L^T = K (x) CCt, jittered if needed.
  Eigen::MatrixXd kron(stacked, stacked);
  for (int ra = 0; ra < replicas; ++ra) {
    for (int rb = 0; rb < replicas; ++rb) {
      kron.block(ra * m, rb * m, m, m) = coupling(ra, rb) * cct;
    }
  }
  const double mean_diag = kron.diagonal().mean();
  Eigen::MatrixXd noise_factor;
  bool ok = false;
  if (kron.norm() == 0.0) {
    noise_factor = Eigen::MatrixXd::Zero(stacked, stacked);
    ok = true;
  }
  for (double rel : {0.0, 1e-12, 1e-10, 1e-8}) {
    if (ok) break;
    Eigen::MatrixXd attempt = kron;
    attempt.diagonal().array() += rel * mean_diag;
    Eigen::LLT<Eigen::MatrixXd> llt(attempt);
    if (llt.info() == Eigen::Success) {
      noise_factor = llt.matrixL();
      ok = true;
    }
  }
  if (!ok) {
    throw NotPositiveDefiniteError("sample_linear_sde: K (x) CCt is not positive definite");
  }

  SdeSampleSet out;
  out.seed = seed;
  out.paths.resize(static_cast<std::size_t>(num_paths));
  Eigen::VectorXd x(stacked);
  Eigen::VectorXd drift(stacked);
  Eigen::VectorXd noise(stacked);
  for (int p = 0; p < num_paths; ++p) {
    CounterRng rng(seed, static_cast<std::uint64_t>(p) + 1);
    Eigen::MatrixXd& path = out.paths[static_cast<std::size_t>(p)];
    path.resize(intervals + 1, stacked);
    for (int r = 0; r < replicas; ++r) x.segment(r * m, m) = xi0;
    path.row(0) = x.transpose();
    for (int l = 0; l < intervals; ++l) {
      const double dt = grid.dt(l) / euler_substeps;
      const double sqrt_dt = std::sqrt(dt);
      for (int s = 0; s < euler_substeps; ++s) {
        for (int r = 0; r < replicas; ++r) {
          const auto& sys = systems[static_cast<std::size_t>(r)];
          drift.segment(r * m, m) =
              sys.a[static_cast<std::size_t>(l)] * x.segment(r * m, m) +
              sys.b[static_cast<std::size_t>(l)];
        }
        for (Eigen::Index c = 0; c < stacked; ++c) noise[c] = rng.normal();
        x += dt * drift + sqrt_dt * (noise_factor * noise);
      }
      path.row(l + 1) = x.transpose();
    }
  }
  return out;
}

}  // namespace dynemu
