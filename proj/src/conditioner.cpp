#include "dynemu/conditioner.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <utility>

namespace dynemu {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ObservationSet ObservationSet::zeros(int num_times, int n, int obs_dim) {
  ObservationSet out;
  out.num_times = num_times;
  out.n = n;
  out.obs_dim = obs_dim;
  out.packed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_times) * n * obs_dim);
  return out;
}

Eigen::VectorBlock<Eigen::VectorXd> ObservationSet::at(int i, int a) {
  return packed.segment(((static_cast<Eigen::Index>(i) - 1) * n + a) * obs_dim, obs_dim);
}

Eigen::VectorBlock<const Eigen::VectorXd> ObservationSet::at(int i, int a) const {
  return packed.segment(((static_cast<Eigen::Index>(i) - 1) * n + a) * obs_dim, obs_dim);
}

void ObservationSet::validate() const {
  if (packed.size() != static_cast<Eigen::Index>(num_times) * n * obs_dim) {
    throw ConfigError("observation set: packed size mismatch");
  }
  for (Eigen::Index i = 0; i < packed.size(); ++i) {
    if (!std::isfinite(packed[i])) {
      throw ConfigError("observation set: non-finite value");
    }
  }
}

CholeskyFactor factorize(const CovarianceBlocks& sp,
                         const std::vector<double>& jitter_schedule) {
  if (jitter_schedule.empty()) {
    throw ConfigError("factorize: jitter schedule must not be empty");
  }
  const Eigen::MatrixXd& s = sp.dense();
  const double mean_diag = s.rows() > 0 ? s.diagonal().mean() : 0.0;
  for (double rel : jitter_schedule) {
    Eigen::MatrixXd attempt = s;
    const double jitter = rel * mean_diag;
    attempt.diagonal().array() += jitter;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(attempt);
    if (llt.info() == Eigen::Success) {
      CholeskyFactor out;
      out.lower = attempt.triangularView<Eigen::Lower>();
      out.applied_jitter = jitter;
      out.applied_jitter_rel = rel;
      return out;
    }
  }
  throw NotPositiveDefiniteError(
      "factorize: conditioning covariance is not positive definite for any jitter in the "
      "schedule (degenerate design?)");
}

Eigen::VectorXd solve_with_factor(const CholeskyFactor& factor, const Eigen::VectorXd& rhs) {
  if (rhs.size() != factor.lower.rows()) {
    throw ConfigError("solve_with_factor: dimension mismatch");
  }
  Eigen::VectorXd r = factor.lower.triangularView<Eigen::Lower>().solve(rhs);
  factor.lower.triangularView<Eigen::Lower>().transpose().solveInPlace(r);
  return r;
}

Eigen::VectorXd residual_solve(const CholeskyFactor& factor, const ObservationSet& y,
                               const std::vector<MeanTrajectory>& design_means,
                               const std::vector<int>& cond_times) {
  const int n = y.n;
  const int obs_dim = y.obs_dim;
  const Eigen::Index dim =
      static_cast<Eigen::Index>(cond_times.size()) * n * obs_dim;
  if (dim != factor.lower.rows()) {
    throw ConfigError("residual_solve: factor does not match observation layout");
  }
  Eigen::VectorXd rhs(dim);
  for (std::size_t v = 0; v < cond_times.size(); ++v) {
    const int i = cond_times[v];
    for (int a = 0; a < n; ++a) {
      rhs.segment((static_cast<Eigen::Index>(v) * n + a) * obs_dim, obs_dim) =
          y.at(i, a) - design_means[static_cast<std::size_t>(a)].z[static_cast<std::size_t>(i)];
    }
  }
  return solve_with_factor(factor, rhs);
}

std::vector<Eigen::VectorXd> zprime_covectors(const std::vector<ReplicaKernels>& reps,
                                              const Eigen::VectorXd& residual,
                                              const std::vector<int>& cond_times,
                                              int num_intervals) {
  const int n = static_cast<int>(reps.size());
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(num_intervals) *
                                   static_cast<std::size_t>(n));
  if (n == 0) return out;
  const int m = static_cast<int>(reps[0].obs[0].cols());
  const int obs_dim = static_cast<int>(reps[0].obs[0].rows());

  // Position of each grid time in the conditioning set, -1 when absent.
  std::vector<int> pos(static_cast<std::size_t>(num_intervals) + 1, -1);
  for (std::size_t v = 0; v < cond_times.size(); ++v) {
    pos[static_cast<std::size_t>(cond_times[v])] = static_cast<int>(v);
  }

  for (int a = 0; a < n; ++a) {
    const auto& rk = reps[static_cast<std::size_t>(a)];
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    for (int i = num_intervals - 1; i >= 0; --i) {
      if (i + 1 < num_intervals) {
        acc = rk.h[static_cast<std::size_t>(i + 1)].transpose() * acc;
      }
      const int v = pos[static_cast<std::size_t>(i + 1)];
      if (v >= 0) {
        const auto r_block = residual.segment(
            (static_cast<Eigen::Index>(v) * n + a) * obs_dim, obs_dim);
        acc += rk.obs[static_cast<std::size_t>(i + 1)].transpose() * r_block;
      }
      out[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
          static_cast<std::size_t>(a)] = acc;
    }
  }
  return out;
}

ConditionedEmulator condition(const SimulationModel& model, const DesignSet& design,
                              const ObservationSet& runs, const TimeGrid& grid,
                              const ConditionSetup& setup) {
  const int n = design.size();
  const int intervals = grid.intervals();
  if (runs.n != n || runs.num_times != intervals) {
    throw ConfigError("condition: observations do not match design/grid layout");
  }
  runs.validate();
  if (model.shared_forcing) {
    for (int a = 1; a < n; ++a) {
      const Eigen::MatrixXd& f = design.inputs[static_cast<std::size_t>(a)].forcing;
      const Eigen::MatrixXd& f0 = design.inputs[0].forcing;
      if (f.rows() != f0.rows() || f.cols() != f0.cols() ||
          !(f.array() == f0.array()).all()) {
        throw ConfigError("condition: model declares shared forcing but design inputs differ");
      }
    }
  }
  if (setup.conditioning_stride < 1) {
    throw ConfigError("condition: conditioning stride must be >= 1");
  }

  ConditionedEmulator ce;
  ce.model = model;
  ce.grid = grid;
  ce.design = design;
  ce.metric = setup.metric;
  ce.cct = setup.cct;
  ce.xi0 = setup.xi0;
  ce.observed = runs;
  ce.cond_threshold = setup.cond_threshold;
  for (int i = setup.conditioning_stride; i <= intervals; i += setup.conditioning_stride) {
    ce.cond_times.push_back(i);
  }

  const auto t_assembly = std::chrono::steady_clock::now();
  std::vector<ReplicaKernels> reps;
  reps.reserve(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    reps.push_back(assemble_replica_kernels(model, design.inputs[static_cast<std::size_t>(a)],
                                            grid, setup.cond_threshold));
  }
  ce.design_means.reserve(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    ce.design_means.push_back(mean_recursion(reps[static_cast<std::size_t>(a)], setup.xi0));
  }

  if (n > 0) {
    const Eigen::MatrixXd weights = coupling_matrix(design, nullptr, setup.metric);
    CovarianceBlocks sp = sigma_prime(reps, setup.cct, weights, grid, ce.cond_times);
    ce.assembly_seconds = seconds_since(t_assembly);

    const auto t_factor = std::chrono::steady_clock::now();
    ce.factor = factorize(sp, setup.jitter_schedule);
    ce.factorization_seconds = seconds_since(t_factor);

    ce.residual = residual_solve(ce.factor, runs, ce.design_means, ce.cond_times);
    // Reconstruct the right-hand side through the factor to measure the solve.
    Eigen::VectorXd back = ce.factor.lower.triangularView<Eigen::Lower>().transpose() *
                           ce.residual;
    back = ce.factor.lower.triangularView<Eigen::Lower>() * back;
    Eigen::VectorXd rhs(ce.residual.size());
    for (std::size_t v = 0; v < ce.cond_times.size(); ++v) {
      const int i = ce.cond_times[v];
      for (int a = 0; a < n; ++a) {
        rhs.segment((static_cast<Eigen::Index>(v) * n + a) * runs.obs_dim, runs.obs_dim) =
            runs.at(i, a) -
            ce.design_means[static_cast<std::size_t>(a)].z[static_cast<std::size_t>(i)];
      }
    }
    const double rhs_norm = rhs.norm();
    ce.solve_residual = rhs_norm > 0.0 ? (back - rhs).norm() / rhs_norm : 0.0;
  } else {
    ce.assembly_seconds = seconds_since(t_assembly);
    ce.factor.lower.resize(0, 0);
    ce.residual.resize(0);
  }

  ce.zprime = zprime_covectors(reps, ce.residual, ce.cond_times, intervals);
  ce.design_ed.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(intervals));
  ce.design_obs.resize(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    auto& rk = reps[static_cast<std::size_t>(a)];
    for (int l = 0; l < intervals; ++l) {
      ce.design_ed.push_back(std::move(rk.ed[static_cast<std::size_t>(l)]));
    }
    ce.design_obs[static_cast<std::size_t>(a)] = std::move(rk.obs);
  }
  return ce;
}

}  // namespace dynemu
