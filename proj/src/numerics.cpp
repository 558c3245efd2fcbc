#include "stc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stc/errors.hpp"

namespace stc {
namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite matrix entry");
  }
}

// Degree-13 Pade coefficients and the 1-norm bound below which the
// approximant is accurate to unit roundoff (Higham, 2005).
constexpr double kPade13[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                              1187353796428800.0,  129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,       1323241920.0,
                              40840800.0,          960960.0,            16380.0,
                              182.0,               1.0};
constexpr double kTheta13 = 5.371920351148152;

Matrix symmetrized(const Matrix& s, const char* what) {
  require_square(s, what);
  require_finite(s, what);
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  const double asym = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * scale) {
    throw DomainError(std::string(what) + ": matrix is not symmetric (max |S - S^T| = " +
                      std::to_string(asym) + ")");
  }
  return 0.5 * (s + s.transpose());
}

}  // namespace

Matrix mat_exp(const Matrix& a, double t) {
  require_square(a, "mat_exp");
  require_finite(a, "mat_exp");
  if (!std::isfinite(t) || t < 0.0) throw DomainError("mat_exp: time must be finite and >= 0");

  const Eigen::Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  if (t == 0.0 || n == 0) return ident;

  Matrix x = a * t;
  const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    x /= std::ldexp(1.0, squarings);
  }

  const Matrix x2 = x * x;
  const Matrix x4 = x2 * x2;
  const Matrix x6 = x4 * x2;
  const double* b = kPade13;
  const Matrix u_inner = x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 +
                         b[3] * x2 + b[1] * ident;
  const Matrix u = x * u_inner;
  const Matrix v = x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 +
                   b[2] * x2 + b[0] * ident;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

ZohPair zoh_pair(const Matrix& a, const Matrix& b, double tau) {
  require_square(a, "zoh_pair");
  if (b.rows() != a.rows()) {
    throw DimensionError("zoh_pair: B must have as many rows as A");
  }
  if (!std::isfinite(tau) || tau <= 0.0) throw DomainError("zoh_pair: tau must be > 0");

  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  Matrix augmented = Matrix::Zero(n + m, n + m);
  augmented.topLeftCorner(n, n) = a;
  augmented.topRightCorner(n, m) = b;
  const Matrix e = mat_exp(augmented, tau);
  return ZohPair{e.topLeftCorner(n, n), e.topRightCorner(n, m), tau};
}

double sym_eig_min(const Matrix& s) {
  const Matrix sym = symmetrized(s, "sym_eig_min");
  if (sym.rows() == 0) throw DimensionError("sym_eig_min: empty matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double sym_eig_max(const Matrix& s) {
  const Matrix sym = symmetrized(s, "sym_eig_max");
  if (sym.rows() == 0) throw DimensionError("sym_eig_max: empty matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

double gen_eig_min(const Matrix& a, const Matrix& bp) {
  const Matrix sym_a = symmetrized(a, "gen_eig_min");
  const Matrix sym_b = symmetrized(bp, "gen_eig_min");
  if (sym_a.rows() != sym_b.rows()) throw DimensionError("gen_eig_min: size mismatch");

  Eigen::LLT<Matrix> chol(sym_b);
  if (chol.info() != Eigen::Success) {
    throw DomainError("gen_eig_min: second argument is not positive definite");
  }
  // L^{-1} A L^{-T} shares the generalized spectrum of (A, Bp).
  const auto lower = chol.matrixL();
  Matrix reduced = lower.solve(sym_a);
  reduced = lower.solve(reduced.transpose()).transpose();
  return sym_eig_min(0.5 * (reduced + reduced.transpose()));
}

double spectral_radius(const Matrix& m) {
  require_square(m, "spectral_radius");
  require_finite(m, "spectral_radius");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace stc
