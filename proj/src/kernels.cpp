#include "dynemu/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace dynemu {

namespace {

using Cplx = std::complex<double>;

}  // namespace

EigenDecomp canonicalize_eigenpairs(Eigen::MatrixXcd m, Eigen::VectorXcd lambda,
                                    double cond_threshold) {
  const Eigen::Index dim = lambda.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    if (lambda[i].real() != lambda[j].real()) return lambda[i].real() > lambda[j].real();
    return lambda[i].imag() > lambda[j].imag();
  });

  EigenDecomp ed;
  ed.m.resize(dim, dim);
  ed.lambda.resize(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    ed.m.col(c) = m.col(order[static_cast<std::size_t>(c)]);
    ed.lambda[c] = lambda[order[static_cast<std::size_t>(c)]];
  }

  if (dim == 2) {
    ed.m_inv = Eigen::Matrix2cd(ed.m).inverse();
  } else if (dim == 3) {
    ed.m_inv = Eigen::Matrix3cd(ed.m).inverse();
  } else {
    ed.m_inv = ed.m.partialPivLu().inverse();
  }
  // 1-norm condition estimate; defective inputs blow it up through the
  // (near-)singular inverse.
  ed.cond_estimate =
      ed.m.cwiseAbs().colwise().sum().maxCoeff() *
      ed.m_inv.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(ed.cond_estimate) || ed.cond_estimate > cond_threshold) {
    throw NonDiagonalizableError("eigenvector matrix condition estimate exceeds threshold");
  }
  return ed;
}

EigenDecomp eigendecompose(const Eigen::MatrixXd& a, double cond_threshold) {
  if (a.rows() != a.cols()) throw ConfigError("eigendecompose: matrix must be square");
  if (!(cond_threshold > 1.0)) throw ConfigError("eigendecompose: cond_threshold must exceed 1");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, true);
  if (solver.info() != Eigen::Success) {
    throw NonDiagonalizableError("eigen solve did not converge");
  }
  return canonicalize_eigenpairs(solver.eigenvectors(), solver.eigenvalues(), cond_threshold);
}

std::complex<double> phi1(std::complex<double> s, double dt) {
  const Cplx z = s * dt;
  if (std::abs(z) < kPhi1SeriesSwitch) {
    // (exp(z) - 1) / z = sum_{j>=0} z^j / (j+1)!
    Cplx sum(1.0, 0.0);
    Cplx term(1.0, 0.0);
    for (int j = 1; j < 24; ++j) {
      term *= z / static_cast<double>(j + 1);
      sum += term;
      if (std::abs(term) <= 1e-16 * std::abs(sum)) break;
    }
    return dt * sum;
  }
  return (std::exp(z) - 1.0) / s;
}

Eigen::MatrixXd propagator_h(const EigenDecomp& ed, double dt) {
  const Eigen::VectorXcd e = (ed.lambda.array() * dt).exp();
  const Eigen::MatrixXcd hc = ed.m * e.asDiagonal() * ed.m_inv;
  return hc.real();
}

Eigen::VectorXd drift_k(const EigenDecomp& ed, const Eigen::VectorXd& b, double dt) {
  const Eigen::Index dim = ed.dim();
  Eigen::VectorXcd d(dim);
  for (Eigen::Index i = 0; i < dim; ++i) d[i] = phi1(ed.lambda[i], dt);
  const Eigen::VectorXcd kc = ed.m * (d.asDiagonal() * (ed.m_inv * b));
  return kc.real();
}

KernelTriple kernel_triple(const EigenDecomp& ed, const Eigen::VectorXd& b, double dt) {
  KernelTriple out;
  out.h = propagator_h(ed, dt);
  out.k = drift_k(ed, b, dt);
  out.dt = dt;
  return out;
}

NoiseBlock noise_block_g(const EigenDecomp& ed_a, const EigenDecomp& ed_b,
                         const Eigen::MatrixXd& cct, double dt, double w) {
  if (!(dt > 0.0)) throw ConfigError("noise_block_g: dt must be positive");
  if (!(w > 0.0 && w <= 1.0)) throw ConfigError("noise_block_g: weight must be in (0, 1]");
  const Eigen::Index dim = ed_a.dim();
  const Eigen::MatrixXcd inner = ed_a.m_inv * cct * ed_b.m_inv.transpose();
  Eigen::MatrixXcd bmat(dim, dim);
  for (Eigen::Index p = 0; p < dim; ++p) {
    for (Eigen::Index q = 0; q < dim; ++q) {
      bmat(p, q) = phi1(ed_a.lambda[p] + ed_b.lambda[q], dt) * inner(p, q);
    }
  }
  NoiseBlock out;
  out.g = (w * w) * (ed_a.m * bmat * ed_b.m.transpose()).real();
  out.coupling_weight = w;
  return out;
}

Eigen::MatrixXd sigma_const(const EigenDecomp& ed_a, const EigenDecomp& ed_b,
                            const Eigen::MatrixXd& cct, double t_i, double t_j,
                            double t0, double w) {
  if (!(t_i >= t_j && t_j >= t0)) {
    throw ConfigError("sigma_const: requires t_i >= t_j >= t0");
  }
  const Eigen::Index dim = ed_a.dim();
  const double u = t_i - t0;
  const double v = t_j - t0;
  if (v == 0.0) return Eigen::MatrixXd::Zero(dim, dim);

  const Eigen::MatrixXcd inner = ed_a.m_inv * cct * ed_b.m_inv.transpose();
  Eigen::MatrixXcd bmat(dim, dim);
  for (Eigen::Index p = 0; p < dim; ++p) {
    for (Eigen::Index q = 0; q < dim; ++q) {
      const Cplx s = ed_a.lambda[p] + ed_b.lambda[q];
      // int_{t0}^{t_j} exp(t_i lp + t_j lq - t' s) dt'
      //   = exp(u lp + v lq) * (1 - exp(-v s)) / s
      const Cplx front = std::exp(u * ed_a.lambda[p] + v * ed_b.lambda[q]);
      bmat(p, q) = inner(p, q) * front * phi1(-s, v);
    }
  }
  return (w * w) * (ed_a.m * bmat * ed_b.m.transpose()).real();
}

}  // namespace dynemu
