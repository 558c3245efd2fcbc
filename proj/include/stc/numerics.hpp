#pragma once

// Dense linear-algebra kernels shared by the certificate, plant and shield
// code. All functions are pure; matrices are small (n <= 24).

#include <Eigen/Dense>

namespace stc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalues at or above -kPsdTolerance count as nonnegative.
inline constexpr double kPsdTolerance = 1e-9;

/// Exact zero-order-hold discretization of x' = Ax + Bu over one interval:
/// x(tau) = phi * x0 + gamma * u.
struct ZohPair {
  Matrix phi;    // e^{A tau}
  Matrix gamma;  // (int_0^tau e^{As} ds) B
  double tau = 0.0;
};

/// e^{A t} by scaling and squaring with a degree-13 diagonal Pade approximant.
/// Throws DimensionError for non-square A, DomainError for non-finite
/// entries or t < 0.
Matrix mat_exp(const Matrix& a, double t);

/// ZOH transition pair, computed from the exponential of the augmented
/// block matrix [[A, B], [0, 0]] * tau. Throws DomainError for tau <= 0.
ZohPair zoh_pair(const Matrix& a, const Matrix& b, double tau);

/// Smallest eigenvalue of a symmetric matrix. The input is symmetrized
/// first; asymmetry above 1e-9 (relative to the largest entry, floor 1)
/// raises DomainError.
double sym_eig_min(const Matrix& s);

/// Largest eigenvalue of a symmetric matrix, same contract as sym_eig_min.
double sym_eig_max(const Matrix& s);

/// Smallest lambda with det(A - lambda * Bp) = 0, via Cholesky reduction of
/// Bp to a standard symmetric problem. Throws DomainError if Bp is not
/// positive definite.
double gen_eig_min(const Matrix& a, const Matrix& bp);

/// max |eigenvalue| over the complex spectrum.
double spectral_radius(const Matrix& m);

/// PSD verdict for a minimum eigenvalue.
inline bool is_psd(double lambda_min) { return lambda_min >= -kPsdTolerance; }

}  // namespace stc
