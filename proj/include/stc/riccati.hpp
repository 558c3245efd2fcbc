#pragma once

// CARE synthesis of the LQR backup and the Lyapunov certificate quantities
// derived from it.

#include <cstdint>
#include <optional>
#include <vector>

#include "stc/numerics.hpp"

namespace stc {

class PlantModel;

/// Equilibrium linearization x' = Ax + Bu together with the actuator limits.
struct LinearPlant {
  Matrix a;
  Matrix b;
  Vector u_max;                  // per input channel, strictly positive
  std::vector<int> angle_rows;   // state indices monitored by the shield

  Eigen::Index state_dim() const { return a.rows(); }
  Eigen::Index input_dim() const { return b.cols(); }
};

/// Lyapunov certificate V(x) = x'Px with LQR gain K = R^{-1}B'P.
struct RiccatiCert {
  Matrix p;
  Matrix k;
  Matrix q;
  Matrix r;
  Matrix m_q;           // Q + K'RK
  double lambda = 0.0;  // min generalized eigenvalue of (M_Q, P), 1/s
  double v_scale = 0.0; // tr(P)/n

  double value(const Vector& x) const { return x.dot(p * x); }
};

/// Stabilizing CARE solution from the stable invariant subspace of the
/// Hamiltonian [[A, -BR^{-1}B'], [-Q, -A']] (ordered complex Schur form).
/// Throws SynthesisError when fewer than n Hamiltonian eigenvalues lie in
/// the open left half plane, ConditioningError when U1 is singular or the
/// recovered P is not symmetric, DomainError when R is not PD.
RiccatiCert solve_care(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r);

/// M(tau) = e^{A tau} - (int_0^tau e^{As} ds) B K.
Matrix zoh_closed_loop(const RiccatiCert& cert, const LinearPlant& plant, double tau);

struct DecreaseCheck {
  double lambda_min = 0.0;  // min eig of P - M'PM
  bool certified = false;
};

/// Discrete Lyapunov decrease of the held backup over one interval.
DecreaseCheck check_discrete_decrease(const RiccatiCert& cert, const LinearPlant& plant,
                                      double tau);

struct CriticalTau {
  double tau = 0.0;
  bool degenerate = false;  // not certified even at the bisection tolerance
};

/// Largest tau in (0, tau_max] at which the backup is still certified,
/// by bisection to `tol`. nullopt when certified at tau_max.
std::optional<CriticalTau> tau_critical(const RiccatiCert& cert, const LinearPlant& plant,
                                        double tau_max, double tol = 1e-4);

/// Angle at which the backup's channel saturates: u_max[channel] / |K(channel, row)|.
double saturation_angle(const RiccatiCert& cert, const LinearPlant& plant, int channel,
                        int angle_row);

/// r* = lambda_min(M_Q) / (2 lambda_max(P) L_delta).
double stability_radius(const RiccatiCert& cert, double l_delta);

/// Sampled sup of |delta(x)| / |x|^2 over the ball |x| <= radius, where
/// delta(x) = f(x, -Kx) - (A - BK)x on the model's nominal dynamics.
double estimate_l_delta(const PlantModel& model, const RiccatiCert& cert, double radius,
                        int samples, std::uint64_t seed);

struct DeltaVCheck {
  double fd = 0.0;     // central difference of V(M(tau)x) - V(x) at tau = 0
  double exact = 0.0;  // -x' M_Q x
};

DeltaVCheck delta_v_derivative_check(const RiccatiCert& cert, const LinearPlant& plant,
                                     const Vector& x, double h);

/// Per-plant certificate summary.
struct CertReport {
  double lambda_min_mq = 0.0;
  double lambda_max_p = 0.0;
  double l_delta = 0.0;
  double r_star = 0.0;
  double theta_rta = 0.0;  // rad
  double theta_sat = 0.0;  // rad
  double lambda_min_mdisc = 0.0;
  bool mdisc_certified = false;
  std::optional<double> tau_critical;  // s, none when certified on the whole grid
  double spectral_radius_tau_min = 0.0;
};

}  // namespace stc
