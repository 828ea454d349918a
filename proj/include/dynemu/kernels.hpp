#pragma once

#include <Eigen/Core>
#include <complex>

#include "dynemu/errors.hpp"

namespace dynemu {

// |s*dt| below which phi1 switches to its series expansion.
inline constexpr double kPhi1SeriesSwitch = 1e-4;
// Relative imaginary residue allowed when assembling real kernels from
// complex eigenpairs of a real matrix.
inline constexpr double kImagTol = 1e-9;
inline constexpr double kDefaultCondThreshold = 1e12;

// Right eigenvectors in the columns of m, eigenvalues sorted by descending
// real part with ties broken by descending imaginary part, so repeated calls
// on the same matrix agree bitwise.
struct EigenDecomp {
  Eigen::MatrixXcd m;
  Eigen::MatrixXcd m_inv;
  Eigen::VectorXcd lambda;
  double cond_estimate = 1.0;

  Eigen::Index dim() const { return lambda.size(); }
};

EigenDecomp eigendecompose(const Eigen::MatrixXd& a,
                           double cond_threshold = kDefaultCondThreshold);

// Sorts externally supplied eigenpairs into the canonical order and fills in
// the inverse and condition estimate. Models with closed-form eigenvectors
// feed them through here.
EigenDecomp canonicalize_eigenpairs(Eigen::MatrixXcd m, Eigen::VectorXcd lambda,
                                    double cond_threshold = kDefaultCondThreshold);

// (exp(s*dt) - 1) / s, with the removable singularity at s = 0 handled by a
// truncated series for small |s*dt|.
std::complex<double> phi1(std::complex<double> s, double dt);

// Interval transition matrix Re(M diag(exp(lambda*dt)) M^-1).
Eigen::MatrixXd propagator_h(const EigenDecomp& ed, double dt);

// Integrated drift Re(M diag(phi1(lambda, dt)) M^-1 b).
Eigen::VectorXd drift_k(const EigenDecomp& ed, const Eigen::VectorXd& b, double dt);

// Propagator and drift integral for one interval.
struct KernelTriple {
  Eigen::MatrixXd h;
  Eigen::VectorXd k;
  double dt = 0.0;
};

KernelTriple kernel_triple(const EigenDecomp& ed, const Eigen::VectorXd& b, double dt);

// Process-noise covariance accumulated over one interval between two
// replicas whose noise streams are correlated with weight w.
struct NoiseBlock {
  Eigen::MatrixXd g;
  double coupling_weight = 1.0;
};

// g = w^2 Re(M_a B M_b^T) with B_pq = phi1(lambda_a_p + lambda_b_q, dt)
// (M_a^-1 CCt M_b^-T)_pq. Right-hand factors are plain transposes of the
// complex matrices, not adjoints.
NoiseBlock noise_block_g(const EigenDecomp& ed_a, const EigenDecomp& ed_b,
                         const Eigen::MatrixXd& cct, double dt, double w);

// Closed-form two-time covariance for time-independent inputs,
// t_i >= t_j >= t0. Serves as the oracle for the covariance recursion.
Eigen::MatrixXd sigma_const(const EigenDecomp& ed_a, const EigenDecomp& ed_b,
                            const Eigen::MatrixXd& cct, double t_i, double t_j,
                            double t0, double w);

}  // namespace dynemu
