#include "dynemu/emulator.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <cmath>
#include <complex>
#include <string>
#include <utility>

namespace dynemu {

namespace {

using Cplx = std::complex<double>;

void check_online_input(const ConditionedEmulator& ce, const InputTrajectory& x_new) {
  if (x_new.grid_ref != ce.grid.id()) {
    throw MismatchedGridsError("emulate: online input not on the conditioning grid");
  }
  if (x_new.forcing.rows() != ce.grid.intervals()) {
    throw ConfigError("emulate: forcing must have one row per interval");
  }
  if (ce.model.shared_forcing && ce.n() > 0) {
    const Eigen::MatrixXd& f0 = ce.design.inputs[0].forcing;
    if (x_new.forcing.rows() != f0.rows() || x_new.forcing.cols() != f0.cols() ||
        !(x_new.forcing.array() == f0.array()).all()) {
      throw ConfigError("emulate: model declares shared forcing but online forcing differs");
    }
  }
}

std::vector<double> online_weights(const ConditionedEmulator& ce,
                                   const InputTrajectory& x_new) {
  std::vector<double> w(static_cast<std::size_t>(ce.n()));
  for (int a = 0; a < ce.n(); ++a) {
    w[static_cast<std::size_t>(a)] =
        coupling_weight(x_new, ce.design.inputs[static_cast<std::size_t>(a)], ce.metric);
  }
  return w;
}

EigenDecomp online_eigendecomp(const ConditionedEmulator& ce, const Eigen::MatrixXd& a_mat,
                               int interval) {
  try {
    return ce.model.analytic_eigen ? ce.model.analytic_eigen(a_mat)
                                   : eigendecompose(a_mat, ce.cond_threshold);
  } catch (const NonDiagonalizableError& e) {
    throw NonDiagonalizableError(std::string(e.what()) + " (interval " +
                                     std::to_string(interval) + ")",
                                 interval);
  }
}

}  // namespace

namespace {

// phi1 evaluated from precomputed exponentials: exp((la + lb) dt) is the
// product of the cached factors, with the same series fallback near zero.
inline Cplx phi1_cached(Cplx s, Cplx exp_product, double dt) {
  if (std::abs(s * dt) < kPhi1SeriesSwitch) return phi1(s, dt);
  return (exp_product - 1.0) / s;
}

}  // namespace

EmulationResult emulate_mean(const ConditionedEmulator& ce, const InputTrajectory& x_new) {
  const auto t0 = std::chrono::steady_clock::now();
  check_online_input(ce, x_new);
  const int n = ce.n();
  const int intervals = ce.num_intervals();
  const int m = ce.state_dim();
  const std::vector<double> w = online_weights(ce, x_new);
  const Eigen::MatrixXd h_obs = ce.model.observation(x_new.params);

  EmulationResult out;
  out.online_input = x_new;
  out.mean.resize(static_cast<std::size_t>(intervals) + 1);
  Eigen::VectorXd ytilde = ce.xi0;
  out.mean[0] = h_obs * ytilde;

  Eigen::VectorXcd exp_new(m);
  Eigen::VectorXcd scratch(m);
  Eigen::MatrixXcd pc(m, m);
  Eigen::MatrixXcd cross(m, m);
  Eigen::VectorXcd accum(m);
  Eigen::VectorXcd va(m);
  Eigen::VectorXcd exp_a(m);
  Eigen::VectorXd ytilde_next(m);
  for (int l = 0; l < intervals; ++l) {
    auto [a_mat, b_vec] = ce.model.linearize(x_new.params, x_new.forcing.row(l).transpose());
    const EigenDecomp ed = online_eigendecomp(ce, a_mat, l);
    const double dt = ce.grid.dt(l);
    for (int p = 0; p < m; ++p) exp_new[p] = std::exp(ed.lambda[p] * dt);

    // Propagator and drift integral sharing the cached exponentials.
    scratch.noalias() = ed.m_inv * ytilde.cast<Cplx>();
    scratch.array() *= exp_new.array();
    ytilde_next = (ed.m * scratch).real();
    scratch.noalias() = ed.m_inv * b_vec.cast<Cplx>();
    for (int p = 0; p < m; ++p) {
      scratch[p] *= phi1_cached(ed.lambda[p], exp_new[p], dt);
    }
    ytilde_next += (ed.m * scratch).real();

    // Shared left factor of every noise block on this interval.
    pc.noalias() = ed.m_inv * ce.cct;
    accum.setZero();
    for (int a = 0; a < n; ++a) {
      const EigenDecomp& eda = ce.ed(a, l);
      const double w2 = w[static_cast<std::size_t>(a)] * w[static_cast<std::size_t>(a)];
      cross.noalias() = pc * eda.m_inv.transpose();
      va.noalias() = eda.m.transpose() * ce.zprime_at(l, a);
      for (int q = 0; q < m; ++q) exp_a[q] = std::exp(eda.lambda[q] * dt);
      for (int p = 0; p < m; ++p) {
        Cplx acc_p(0.0, 0.0);
        for (int q = 0; q < m; ++q) {
          acc_p += phi1_cached(ed.lambda[p] + eda.lambda[q], exp_new[p] * exp_a[q], dt) *
                   cross(p, q) * va[q];
        }
        accum[p] += w2 * acc_p;
      }
    }
    ytilde = ytilde_next + (ed.m * accum).real();
    out.mean[static_cast<std::size_t>(l) + 1] = h_obs * ytilde;
  }
  out.emulate_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<Eigen::MatrixXd> emulate_variance(const ConditionedEmulator& ce,
                                              const InputTrajectory& x_new) {
  check_online_input(ce, x_new);
  const int n = ce.n();
  const int intervals = ce.num_intervals();
  const int m = ce.state_dim();
  const int obs_dim = ce.obs_dim();
  const std::vector<double> w = online_weights(ce, x_new);
  const Eigen::MatrixXd h_obs = ce.model.observation(x_new.params);

  // Online kernels over the whole grid.
  std::vector<EigenDecomp> ed_new;
  std::vector<Eigen::MatrixXd> h_new;
  ed_new.reserve(static_cast<std::size_t>(intervals));
  h_new.reserve(static_cast<std::size_t>(intervals));
  for (int l = 0; l < intervals; ++l) {
    auto [a_mat, b_vec] = ce.model.linearize(x_new.params, x_new.forcing.row(l).transpose());
    ed_new.push_back(online_eigendecomp(ce, a_mat, l));
    h_new.push_back(propagator_h(ed_new.back(), ce.grid.dt(l)));
  }

  // Prior marginal chain of the online replica.
  std::vector<Eigen::MatrixXd> prior(static_cast<std::size_t>(intervals) + 1);
  prior[0] = Eigen::MatrixXd::Zero(m, m);
  for (int l = 0; l < intervals; ++l) {
    const Eigen::MatrixXd g =
        noise_block_g(ed_new[static_cast<std::size_t>(l)], ed_new[static_cast<std::size_t>(l)],
                      ce.cct, ce.grid.dt(l), 1.0)
            .g;
    prior[static_cast<std::size_t>(l) + 1] =
        h_new[static_cast<std::size_t>(l)] * prior[static_cast<std::size_t>(l)] *
            h_new[static_cast<std::size_t>(l)].transpose() +
        g;
  }

  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(intervals) + 1,
                                   Eigen::MatrixXd::Zero(obs_dim, obs_dim));
  const Eigen::Index dim = ce.factor.lower.rows();
  if (n == 0 || dim == 0) {
    for (int i = 1; i <= intervals; ++i) {
      out[static_cast<std::size_t>(i)] =
          h_obs * prior[static_cast<std::size_t>(i)] * h_obs.transpose();
    }
    return out;
  }

  // Cross-covariance rows against every conditioned coordinate.
  const auto& times = ce.cond_times;
  const int c = static_cast<int>(times.size());
  std::vector<Eigen::MatrixXd> rows(static_cast<std::size_t>(intervals) + 1,
                                    Eigen::MatrixXd::Zero(obs_dim, dim));
  std::vector<std::vector<Eigen::MatrixXd>> table(
      static_cast<std::size_t>(intervals) + 1,
      std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(intervals) + 1));
  for (int b = 0; b < n; ++b) {
    // Recompute the design propagators from the stored eigendecompositions.
    std::vector<Eigen::MatrixXd> h_b(static_cast<std::size_t>(intervals));
    for (int l = 0; l < intervals; ++l) {
      h_b[static_cast<std::size_t>(l)] = propagator_h(ce.ed(b, l), ce.grid.dt(l));
    }
    // Equal-time chain for the (online, b) pair.
    Eigen::MatrixXd diag_block = Eigen::MatrixXd::Zero(m, m);
    for (int j = 1; j <= intervals; ++j) {
      const int l = j - 1;
      const Eigen::MatrixXd g = noise_block_g(ed_new[static_cast<std::size_t>(l)],
                                              ce.ed(b, l), ce.cct, ce.grid.dt(l),
                                              w[static_cast<std::size_t>(b)])
                                    .g;
      diag_block = h_new[static_cast<std::size_t>(l)] * diag_block *
                       h_b[static_cast<std::size_t>(l)].transpose() +
                   g;
      table[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = diag_block;
    }
    // Right of the diagonal: propagate in j with the design kernels.
    for (int i = 1; i <= intervals; ++i) {
      for (int j = i; j < intervals; ++j) {
        table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + 1] =
            table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
            h_b[static_cast<std::size_t>(j)].transpose();
      }
    }
    // Below the diagonal: propagate in i with the online kernels.
    for (int j = 1; j <= intervals; ++j) {
      for (int i = j; i < intervals; ++i) {
        table[static_cast<std::size_t>(i) + 1][static_cast<std::size_t>(j)] =
            h_new[static_cast<std::size_t>(i)] *
            table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    for (int i = 1; i <= intervals; ++i) {
      for (int v = 0; v < c; ++v) {
        const int j = times[static_cast<std::size_t>(v)];
        rows[static_cast<std::size_t>(i)].block(0, (static_cast<Eigen::Index>(v) * n + b) * obs_dim,
                                                obs_dim, obs_dim) =
            h_obs * table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
            ce.design_obs[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)].transpose();
      }
    }
  }

  for (int i = 1; i <= intervals; ++i) {
    const Eigen::MatrixXd vt = ce.factor.lower.triangularView<Eigen::Lower>().solve(
        rows[static_cast<std::size_t>(i)].transpose());
    Eigen::MatrixXd var = h_obs * prior[static_cast<std::size_t>(i)] * h_obs.transpose() -
                          vt.transpose() * vt;
    out[static_cast<std::size_t>(i)] = 0.5 * (var + var.transpose());
  }
  return out;
}

DenseOracleResult dense_oracle(const SimulationModel& model, const DesignSet& design,
                               const ObservationSet& runs, const InputTrajectory& x_new,
                               const TimeGrid& grid, const ConditionSetup& setup) {
  const int n = design.size();
  const int intervals = grid.intervals();
  if (runs.n != n || runs.num_times != intervals) {
    throw ConfigError("dense_oracle: observations do not match design/grid layout");
  }

  std::vector<ReplicaKernels> reps;
  reps.reserve(static_cast<std::size_t>(n) + 1);
  for (int a = 0; a < n; ++a) {
    reps.push_back(assemble_replica_kernels(model, design.inputs[static_cast<std::size_t>(a)],
                                            grid, setup.cond_threshold));
  }
  reps.push_back(assemble_replica_kernels(model, x_new, grid, setup.cond_threshold));
  const int online = n;  // replica index of the online system
  const int obs_dim = static_cast<int>(reps.back().obs[0].rows());

  const Eigen::MatrixXd weights = coupling_matrix(design, &x_new, setup.metric);
  // Joint covariance over all replicas at every time 1..N.
  const CovarianceBlocks joint = sigma_prime(reps, setup.cct, weights, grid);

  std::vector<MeanTrajectory> means;
  means.reserve(static_cast<std::size_t>(n) + 1);
  for (int a = 0; a <= n; ++a) {
    means.push_back(mean_recursion(reps[static_cast<std::size_t>(a)], setup.xi0));
  }

  // Conditioning coordinates: design replicas at the conditioning times, in
  // the same flat order the conditioner uses. Online coordinates: all times.
  std::vector<int> cond_times;
  for (int i = setup.conditioning_stride; i <= intervals; i += setup.conditioning_stride) {
    cond_times.push_back(i);
  }
  const int c = static_cast<int>(cond_times.size());
  const Eigen::Index dim_design = static_cast<Eigen::Index>(c) * n * obs_dim;
  const Eigen::Index dim_online = static_cast<Eigen::Index>(intervals) * obs_dim;

  std::vector<Eigen::Index> design_coords(static_cast<std::size_t>(dim_design));
  Eigen::Index idx = 0;
  for (int v = 0; v < c; ++v) {
    const int time_pos = cond_times[static_cast<std::size_t>(v)] - 1;
    for (int a = 0; a < n; ++a) {
      for (int d = 0; d < obs_dim; ++d) {
        design_coords[static_cast<std::size_t>(idx++)] =
            joint.offset(time_pos, a) + d;
      }
    }
  }
  std::vector<Eigen::Index> online_coords(static_cast<std::size_t>(dim_online));
  idx = 0;
  for (int i = 0; i < intervals; ++i) {
    for (int d = 0; d < obs_dim; ++d) {
      online_coords[static_cast<std::size_t>(idx++)] = joint.offset(i, online) + d;
    }
  }

  Eigen::MatrixXd sp(dim_design, dim_design);
  for (Eigen::Index r = 0; r < dim_design; ++r) {
    for (Eigen::Index q = 0; q < dim_design; ++q) {
      sp(r, q) = joint.dense()(design_coords[static_cast<std::size_t>(r)],
                               design_coords[static_cast<std::size_t>(q)]);
    }
  }
  Eigen::MatrixXd cross(dim_online, dim_design);
  for (Eigen::Index r = 0; r < dim_online; ++r) {
    for (Eigen::Index q = 0; q < dim_design; ++q) {
      cross(r, q) = joint.dense()(online_coords[static_cast<std::size_t>(r)],
                                  design_coords[static_cast<std::size_t>(q)]);
    }
  }
  Eigen::MatrixXd prior(dim_online, dim_online);
  for (Eigen::Index r = 0; r < dim_online; ++r) {
    for (Eigen::Index q = 0; q < dim_online; ++q) {
      prior(r, q) = joint.dense()(online_coords[static_cast<std::size_t>(r)],
                                  online_coords[static_cast<std::size_t>(q)]);
    }
  }

  DenseOracleResult out;
  out.mean.resize(static_cast<std::size_t>(intervals) + 1);
  out.mean[0] = means[static_cast<std::size_t>(online)].z[0];
  Eigen::VectorXd correction = Eigen::VectorXd::Zero(dim_online);
  if (dim_design > 0) {
    const double mean_diag = sp.diagonal().mean();
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool ok = false;
    for (double rel : setup.jitter_schedule) {
      Eigen::MatrixXd attempt = sp;
      attempt.diagonal().array() += rel * mean_diag;
      llt.compute(attempt);
      if (llt.info() == Eigen::Success) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw NotPositiveDefiniteError("dense_oracle: conditioning covariance not PD");
    }
    Eigen::VectorXd rhs(dim_design);
    idx = 0;
    for (int v = 0; v < c; ++v) {
      const int i = cond_times[static_cast<std::size_t>(v)];
      for (int a = 0; a < n; ++a) {
        rhs.segment(idx, obs_dim) =
            runs.at(i, a) - means[static_cast<std::size_t>(a)].z[static_cast<std::size_t>(i)];
        idx += obs_dim;
      }
    }
    correction = cross * llt.solve(rhs);
    out.covariance = prior - cross * llt.solve(cross.transpose());
  } else {
    out.covariance = prior;
  }
  for (int i = 1; i <= intervals; ++i) {
    out.mean[static_cast<std::size_t>(i)] =
        means[static_cast<std::size_t>(online)].z[static_cast<std::size_t>(i)] +
        correction.segment(static_cast<Eigen::Index>(i - 1) * obs_dim, obs_dim);
  }
  return out;
}

double d_value(const std::vector<Eigen::VectorXd>& emulated_mean,
               const std::vector<Eigen::VectorXd>& simulated) {
  if (emulated_mean.size() != simulated.size() + 1 || simulated.empty()) {
    throw ConfigError("d_value: series length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < simulated.size(); ++i) {
    if (emulated_mean[i + 1].size() != simulated[i].size()) {
      throw ConfigError("d_value: output dimension mismatch");
    }
    acc += (emulated_mean[i + 1] - simulated[i]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(simulated.size()));
}

}  // namespace dynemu
