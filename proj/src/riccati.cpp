#include "stc/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "stc/errors.hpp"
#include "stc/plants.hpp"

namespace stc {
namespace {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

// Plane rotation with real cosine c and complex sine s such that
// [c, s; -conj(s), c] * [f; g] = [r; 0].
void make_rotation(Complex f, Complex g, double& c, Complex& s) {
  const double abs_f = std::abs(f);
  const double abs_g = std::abs(g);
  if (abs_g == 0.0) {
    c = 1.0;
    s = 0.0;
    return;
  }
  if (abs_f == 0.0) {
    c = 0.0;
    s = std::conj(g) / abs_g;
    return;
  }
  const double norm = std::hypot(abs_f, abs_g);
  c = abs_f / norm;
  s = (f / abs_f) * std::conj(g) / norm;
}

// x <- c*x + s*y, y <- c*y - conj(s)*x, elementwise over two equal-length views.
template <typename X, typename Y>
void apply_rotation(X&& x, Y&& y, double c, Complex s) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Complex xi = x(i);
    const Complex yi = y(i);
    x(i) = c * xi + s * yi;
    y(i) = c * yi - std::conj(s) * xi;
  }
}

// Swap the adjacent diagonal entries k, k+1 of the upper-triangular Schur
// factor t while keeping z * t * z^H invariant.
void swap_adjacent(ComplexMatrix& t, ComplexMatrix& z, Eigen::Index k) {
  const Eigen::Index n = t.rows();
  const Complex t11 = t(k, k);
  const Complex t22 = t(k + 1, k + 1);
  double c = 0.0;
  Complex s;
  make_rotation(t(k, k + 1), t22 - t11, c, s);
  if (k + 2 < n) {
    apply_rotation(t.row(k).tail(n - k - 2), t.row(k + 1).tail(n - k - 2), c, s);
  }
  if (k > 0) {
    apply_rotation(t.col(k).head(k), t.col(k + 1).head(k), c, std::conj(s));
  }
  t(k, k) = t22;
  t(k + 1, k + 1) = t11;
  apply_rotation(z.col(k), z.col(k + 1), c, std::conj(s));
}

void require_same_rows(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows()) throw DimensionError(std::string(what) + ": row count mismatch");
}

}  // namespace

RiccatiCert solve_care(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
  if (a.rows() != a.cols()) throw DimensionError("solve_care: A must be square");
  require_same_rows(a, b, "solve_care");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (q.rows() != n || q.cols() != n) throw DimensionError("solve_care: Q must be n x n");
  if (r.rows() != m || r.cols() != m) throw DimensionError("solve_care: R must be m x m");
  if (!a.allFinite() || !b.allFinite() || !q.allFinite() || !r.allFinite()) {
    throw DomainError("solve_care: non-finite input");
  }

  Eigen::LLT<Matrix> r_chol(0.5 * (r + r.transpose()));
  if (r_chol.info() != Eigen::Success) throw DomainError("solve_care: R is not positive definite");
  const Matrix r_inv_bt = r_chol.solve(b.transpose());

  Matrix hamiltonian(2 * n, 2 * n);
  hamiltonian.topLeftCorner(n, n) = a;
  hamiltonian.topRightCorner(n, n) = -b * r_inv_bt;
  hamiltonian.bottomLeftCorner(n, n) = -q;
  hamiltonian.bottomRightCorner(n, n) = -a.transpose();

  Eigen::ComplexSchur<Matrix> schur(hamiltonian);
  if (schur.info() != Eigen::Success) throw SynthesisError("solve_care: Schur iteration failed");
  ComplexMatrix t = schur.matrixT();
  ComplexMatrix z = schur.matrixU();

  // Imaginary-axis eigenvalues mean no stabilizing solution exists.
  const double axis_tol = 1e-10 * std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
  Eigen::Index stable = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const double re = t(i, i).real();
    if (std::abs(re) <= axis_tol) {
      throw SynthesisError("solve_care: Hamiltonian has eigenvalues on the imaginary axis");
    }
    if (re < 0.0) ++stable;
  }
  if (stable != n) {
    throw SynthesisError("solve_care: expected " + std::to_string(n) +
                         " stable Hamiltonian eigenvalues, found " + std::to_string(stable));
  }

  // Bubble the stable eigenvalues to the leading block.
  for (Eigen::Index placed = 0; placed < n; ++placed) {
    Eigen::Index j = placed;
    while (t(j, j).real() >= 0.0) ++j;
    for (Eigen::Index k = j; k > placed; --k) swap_adjacent(t, z, k - 1);
  }

  const ComplexMatrix u1 = z.topLeftCorner(n, n);
  const ComplexMatrix u2 = z.bottomLeftCorner(n, n);
  Eigen::PartialPivLU<ComplexMatrix> u1_lu(u1);
  const double rcond = u1_lu.rcond();
  if (!(rcond > 1e-13)) throw ConditioningError("solve_care: U1 is singular to working precision");

  // P = U2 U1^{-1}, i.e. P^T = U1^{-T} U2^T.
  const ComplexMatrix p_complex =
      u1.transpose().partialPivLu().solve(u2.transpose()).transpose();
  Matrix p = p_complex.real();
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw ConditioningError("solve_care: recovered P is not symmetric");
  }
  p = (0.5 * (p + p.transpose())).eval();

  RiccatiCert cert;
  cert.p = p;
  cert.k = r_chol.solve(b.transpose() * p);
  cert.q = q;
  cert.r = r;
  cert.m_q = q + cert.k.transpose() * r * cert.k;
  cert.m_q = (0.5 * (cert.m_q + cert.m_q.transpose())).eval();
  cert.lambda = gen_eig_min(cert.m_q, cert.p);
  cert.v_scale = p.trace() / static_cast<double>(n);
  if (!(cert.lambda > 0.0)) throw SynthesisError("solve_care: certificate decay rate is not positive");
  return cert;
}

Matrix zoh_closed_loop(const RiccatiCert& cert, const LinearPlant& plant, double tau) {
  const ZohPair zoh = zoh_pair(plant.a, plant.b, tau);
  return zoh.phi - zoh.gamma * cert.k;
}

DecreaseCheck check_discrete_decrease(const RiccatiCert& cert, const LinearPlant& plant,
                                      double tau) {
  const Matrix m = zoh_closed_loop(cert, plant, tau);
  Matrix m_disc = cert.p - m.transpose() * cert.p * m;
  m_disc = (0.5 * (m_disc + m_disc.transpose())).eval();
  DecreaseCheck check;
  check.lambda_min = sym_eig_min(m_disc);
  check.certified = is_psd(check.lambda_min);
  return check;
}

std::optional<CriticalTau> tau_critical(const RiccatiCert& cert, const LinearPlant& plant,
                                        double tau_max, double tol) {
  if (!(tol > 0.0)) throw DomainError("tau_critical: tolerance must be > 0");
  if (!(tau_max > 0.0)) throw DomainError("tau_critical: tau_max must be > 0");
  if (check_discrete_decrease(cert, plant, tau_max).certified) return std::nullopt;

  double lo = std::min(tol, tau_max);
  if (!check_discrete_decrease(cert, plant, lo).certified) {
    return CriticalTau{lo * 0.5, true};
  }
  double hi = tau_max;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (check_discrete_decrease(cert, plant, mid).certified) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return CriticalTau{lo, false};
}

double saturation_angle(const RiccatiCert& cert, const LinearPlant& plant, int channel,
                        int angle_row) {
  if (channel < 0 || channel >= cert.k.rows() || angle_row < 0 || angle_row >= cert.k.cols()) {
    throw DimensionError("saturation_angle: index out of range");
  }
  const double gain = std::abs(cert.k(channel, angle_row));
  if (gain == 0.0) throw DomainError("saturation_angle: zero gain entry");
  return plant.u_max(channel) / gain;
}

double stability_radius(const RiccatiCert& cert, double l_delta) {
  if (!(l_delta > 0.0)) throw DomainError("stability_radius: L_delta must be > 0");
  return sym_eig_min(cert.m_q) / (2.0 * sym_eig_max(cert.p) * l_delta);
}

double estimate_l_delta(const PlantModel& model, const RiccatiCert& cert, double radius,
                        int samples, std::uint64_t seed) {
  if (!(radius > 0.0)) throw DomainError("estimate_l_delta: radius must be > 0");
  if (samples < 1) throw DomainError("estimate_l_delta: need at least one sample");
  constexpr double kMinNorm = 1e-6;

  const LinearPlant lin = model.linearization();
  const Matrix a_cl = lin.a - lin.b * cert.k;
  const Eigen::Index n = lin.state_dim();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Each sampled point is also evaluated at every dyadic shrink of itself,
  // so the sample set for 2r contains the set for r exactly.
  double best = 0.0;
  Vector direction(n);
  for (int i = 0; i < samples; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) direction(j) = normal(rng);
    direction.normalize();
    const double fraction = std::pow(unit(rng), 1.0 / static_cast<double>(n));
    for (double s = radius * fraction; s >= kMinNorm; s = std::ldexp(s, -1)) {
      const State x = s * direction;
      const Input u = -cert.k * x;
      const State f = model.derivative(x, u);
      const double residual = (f - a_cl * x).norm();
      const double norm = x.norm();
      if (norm < kMinNorm) break;
      best = std::max(best, residual / (norm * norm));
    }
  }
  return best;
}

DeltaVCheck delta_v_derivative_check(const RiccatiCert& cert, const LinearPlant& plant,
                                     const Vector& x, double h) {
  if (x.isZero(0.0)) throw DomainError("delta_v_derivative_check: x must be nonzero");
  if (!(h >= 1e-8 && h <= 1e-4)) throw DomainError("delta_v_derivative_check: h out of range");
  // DeltaV is smooth in tau; extend M(tau) to negative tau through the
  // same block exponential so the central difference straddles zero.
  auto delta_v = [&](double tau) {
    const Eigen::Index n = plant.state_dim();
    const Eigen::Index m = plant.input_dim();
    Matrix augmented = Matrix::Zero(n + m, n + m);
    augmented.topLeftCorner(n, n) = plant.a;
    augmented.topRightCorner(n, m) = plant.b;
    const Matrix e = mat_exp(augmented * (tau < 0 ? -1.0 : 1.0), std::abs(tau));
    const Matrix m_tau = e.topLeftCorner(n, n) - e.topRightCorner(n, m) * cert.k;
    const Vector next = m_tau * x;
    return cert.value(next) - cert.value(x);
  };
  DeltaVCheck out;
  out.fd = (delta_v(h) - delta_v(-h)) / (2.0 * h);
  out.exact = -x.dot(cert.m_q * x);
  return out;
}

}  // namespace stc
