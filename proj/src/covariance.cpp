#include "dynemu/covariance.hpp"

#include <string>
#include <utility>

namespace dynemu {

CovarianceBlocks::CovarianceBlocks(std::vector<int> cond_times, int n_replicas,
                                   int obs_dim)
    : cond_times_(std::move(cond_times)), n_(n_replicas), obs_dim_(obs_dim) {
  if (n_ < 0 || obs_dim_ < 1) throw ConfigError("covariance blocks: bad dimensions");
  for (std::size_t v = 0; v < cond_times_.size(); ++v) {
    if (cond_times_[v] < 1 || (v > 0 && cond_times_[v] <= cond_times_[v - 1])) {
      throw ConfigError("covariance blocks: conditioning times must be ascending and >= 1");
    }
  }
  const int dim = static_cast<int>(cond_times_.size()) * n_ * obs_dim_;
  dense_ = Eigen::MatrixXd::Zero(dim, dim);
}

void CovarianceBlocks::mirror_lower_to_upper() {
  const Eigen::Index dim = dense_.rows();
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = r + 1; c < dim; ++c) {
      dense_(r, c) = dense_(c, r);
    }
  }
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < r; ++c) {
      if (dense_(r, c) != dense_(c, r)) {
        throw NumericalError("covariance blocks: symmetry violated after mirroring");
      }
    }
  }
}

ReplicaKernels assemble_replica_kernels(const SimulationModel& model,
                                        const InputTrajectory& input, const TimeGrid& grid,
                                        double cond_threshold) {
  if (input.grid_ref != grid.id()) {
    throw MismatchedGridsError("assemble_replica_kernels: input not on this grid");
  }
  const int intervals = grid.intervals();
  if (input.forcing.rows() != intervals) {
    throw ConfigError("assemble_replica_kernels: forcing must have one row per interval");
  }
  ReplicaKernels rk;
  rk.ed.reserve(static_cast<std::size_t>(intervals));
  rk.h.reserve(static_cast<std::size_t>(intervals));
  rk.k.reserve(static_cast<std::size_t>(intervals));
  for (int l = 0; l < intervals; ++l) {
    try {
      auto [a_mat, b_vec] = model.linearize(input.params, input.forcing.row(l).transpose());
      EigenDecomp ed = model.analytic_eigen ? model.analytic_eigen(a_mat)
                                            : eigendecompose(a_mat, cond_threshold);
      KernelTriple kt = kernel_triple(ed, b_vec, grid.dt(l));
      rk.ed.push_back(std::move(ed));
      rk.h.push_back(std::move(kt.h));
      rk.k.push_back(std::move(kt.k));
    } catch (const NonDiagonalizableError& e) {
      throw NonDiagonalizableError(std::string(e.what()) + " (interval " +
                                       std::to_string(l) + ")",
                                   l);
    }
  }
  const Eigen::MatrixXd h_obs = model.observation(input.params);
  rk.obs.assign(static_cast<std::size_t>(intervals + 1), h_obs);
  return rk;
}

MeanTrajectory mean_recursion(const ReplicaKernels& rk, const Eigen::VectorXd& xi0) {
  const std::size_t intervals = rk.h.size();
  MeanTrajectory out;
  out.z_tilde.resize(intervals + 1);
  out.z.resize(intervals + 1);
  out.z_tilde[0] = xi0;
  for (std::size_t l = 0; l < intervals; ++l) {
    out.z_tilde[l + 1] = rk.h[l] * out.z_tilde[l] + rk.k[l];
  }
  for (std::size_t i = 0; i <= intervals; ++i) {
    out.z[i] = rk.obs[i] * out.z_tilde[i];
  }
  return out;
}

CovarianceBlocks sigma_prime(const std::vector<ReplicaKernels>& reps,
                             const Eigen::MatrixXd& cct, const Eigen::MatrixXd& weights,
                             const TimeGrid& grid, std::vector<int> cond_times) {
  const int n = static_cast<int>(reps.size());
  const int intervals = grid.intervals();
  if (n < 1) throw ConfigError("sigma_prime: need at least one replica");
  if (weights.rows() != n || weights.cols() != n) {
    throw ConfigError("sigma_prime: coupling weight matrix dimension mismatch");
  }
  for (const auto& rk : reps) {
    if (static_cast<int>(rk.h.size()) != intervals) {
      throw ConfigError("sigma_prime: replica kernels not on this grid");
    }
  }
  if (cond_times.empty()) {
    cond_times.resize(static_cast<std::size_t>(intervals));
    for (int i = 0; i < intervals; ++i) cond_times[static_cast<std::size_t>(i)] = i + 1;
  }
  const int m = static_cast<int>(cct.rows());
  const int obs_dim = static_cast<int>(reps[0].obs[0].rows());
  CovarianceBlocks out(std::move(cond_times), n, obs_dim);
  const auto& times = out.cond_times();
  const int c = static_cast<int>(times.size());
  if (c > 0 && times.back() > intervals) {
    throw ConfigError("sigma_prime: conditioning time beyond grid");
  }

  // Propagator products between consecutive conditioning times, per replica:
  // gap[a][u] maps states at t_{times[u]} to t_{times[u+1]}.
  std::vector<std::vector<Eigen::MatrixXd>> gap(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    auto& ga = gap[static_cast<std::size_t>(a)];
    ga.resize(static_cast<std::size_t>(c > 0 ? c - 1 : 0));
    for (int u = 0; u + 1 < c; ++u) {
      Eigen::MatrixXd prod = reps[static_cast<std::size_t>(a)].h[static_cast<std::size_t>(times[u])];
      for (int l = times[u] + 1; l < times[u + 1]; ++l) {
        prod = reps[static_cast<std::size_t>(a)].h[static_cast<std::size_t>(l)] * prod;
      }
      ga[static_cast<std::size_t>(u)] = std::move(prod);
    }
  }

  Eigen::MatrixXd& dense = out.dense();
  Eigen::MatrixXd diag_block(m, m);
  Eigen::MatrixXd walk(m, m);
  Eigen::MatrixXd walk_next(m, m);
  Eigen::MatrixXd chain_tmp(m, m);
  Eigen::MatrixXd proj_tmp(obs_dim, m);

  auto write_block = [&](int u, int ar, int v, int bc, const Eigen::MatrixXd& state_cov,
                         const Eigen::MatrixXd& obs_row, const Eigen::MatrixXd& obs_col) {
    proj_tmp.noalias() = obs_row * state_cov;
    dense.block(out.offset(u, ar), out.offset(v, bc), obs_dim, obs_dim).noalias() =
        proj_tmp * obs_col.transpose();
  };

  for (int a = 0; a < n; ++a) {
    const auto& ra = reps[static_cast<std::size_t>(a)];
    for (int b = 0; b <= a; ++b) {
      const auto& rb = reps[static_cast<std::size_t>(b)];
      const double w = weights(a, b);
      diag_block.setZero(m, m);
      int v = 0;  // next conditioning-time position to emit
      for (int j = 1; j <= intervals && v < c; ++j) {
        const int l = j - 1;
        const Eigen::MatrixXd g =
            noise_block_g(ra.ed[static_cast<std::size_t>(l)], rb.ed[static_cast<std::size_t>(l)],
                          cct, grid.dt(l), w)
                .g;
        chain_tmp.noalias() = ra.h[static_cast<std::size_t>(l)] * diag_block;
        diag_block.noalias() = chain_tmp * rb.h[static_cast<std::size_t>(l)].transpose();
        diag_block += g;
        if (j != times[static_cast<std::size_t>(v)]) continue;

        // Equal-time block (v,a),(v,b); lower triangle since b <= a.
        write_block(v, a, v, b, diag_block, ra.obs[static_cast<std::size_t>(j)],
                    rb.obs[static_cast<std::size_t>(j)]);
        // Later rows of this column: propagate with replica a's kernels.
        walk = diag_block;
        for (int u = v + 1; u < c; ++u) {
          walk_next.noalias() =
              gap[static_cast<std::size_t>(a)][static_cast<std::size_t>(u - 1)] * walk;
          walk.swap(walk_next);
          write_block(u, a, v, b, walk,
                      ra.obs[static_cast<std::size_t>(times[static_cast<std::size_t>(u)])],
                      rb.obs[static_cast<std::size_t>(times[static_cast<std::size_t>(v)])]);
        }
        if (a != b) {
          // Swapped-replica columns start from the transposed diagonal block.
          walk = diag_block.transpose();
          for (int u = v + 1; u < c; ++u) {
            walk_next.noalias() =
                gap[static_cast<std::size_t>(b)][static_cast<std::size_t>(u - 1)] * walk;
            walk.swap(walk_next);
            write_block(u, b, v, a, walk,
                        rb.obs[static_cast<std::size_t>(times[static_cast<std::size_t>(u)])],
                        ra.obs[static_cast<std::size_t>(times[static_cast<std::size_t>(v)])]);
          }
        }
        ++v;
      }
    }
  }
  out.mirror_lower_to_upper();
  return out;
}

}  // namespace dynemu
