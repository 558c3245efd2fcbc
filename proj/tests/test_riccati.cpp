#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "stc/env.hpp"
#include "stc/errors.hpp"
#include "stc/riccati.hpp"

using namespace stc;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

LinearPlant scalar_plant(double a, double b) {
  LinearPlant p;
  p.a = scalar(a);
  p.b = scalar(b);
  p.u_max = Vector::Constant(1, 1.0);
  return p;
}

}  // namespace

TEST_CASE("scalar CARE matches the quadratic formula") {
  // 2ap - p^2 b^2/r + q = 0  ->  (b^2/r) p^2 - 2a p - q = 0
  const double a = -1.0, b = 1.0, q = 1.0, r = 1.0;
  const RiccatiCert c = solve_care(scalar(a), scalar(b), scalar(q), scalar(r));
  CHECK(c.p(0, 0) == doctest::Approx(std::numbers::sqrt2 - 1.0).epsilon(1e-13));
  CHECK(c.p(0, 0) == doctest::Approx(oracle::positive_root(b * b / r, -2.0 * a, -q)).epsilon(1e-13));
  CHECK(c.k(0, 0) == doctest::Approx(c.p(0, 0) * b / r).epsilon(1e-13));

  oracle::Gen gen(21);
  for (int trial = 0; trial < 50; ++trial) {
    const double ar = gen.uniform(-3.0, 3.0), br = gen.uniform(0.2, 3.0);
    const double qr = gen.uniform(0.1, 5.0), rr = gen.uniform(0.1, 5.0);
    const RiccatiCert cr = solve_care(scalar(ar), scalar(br), scalar(qr), scalar(rr));
    CHECK(cr.p(0, 0) == doctest::Approx(oracle::positive_root(br * br / rr, -2.0 * ar, -qr)).epsilon(1e-10));
  }
}

TEST_CASE("pendulum gain and decay") {
  const EnvSpec spec = make_env_spec(PlantId::pendulum);
  CHECK(std::abs(spec.cert.k(0, 0) - 10.92) <= 0.01);
  CHECK(std::abs(spec.cert.k(0, 1) - 2.88) <= 0.01);
  CHECK(std::abs(spec.cert.lambda / 6.23 - 1.0) <= 0.01);
  CHECK(std::abs(spec.cert.v_scale / 8.99 - 1.0) <= 0.01);
}

TEST_CASE("certificate identities on every plant") {
  for (PlantId id : all_plants()) {
    INFO(to_string(id));
    const EnvSpec spec = make_env_spec(id);
    const RiccatiCert& c = spec.cert;
    const Matrix& a = spec.linear.a;
    const Matrix& b = spec.linear.b;

    const Matrix residual =
        a.transpose() * c.p + c.p * a - c.p * b * c.r.inverse() * b.transpose() * c.p + c.q;
    CHECK(residual.norm() <= 1e-8 * c.q.norm());

    CHECK((c.p - c.p.transpose()).norm() == 0.0);
    CHECK(sym_eig_min(c.p) > 0.0);

    const Matrix a_cl = a - b * c.k;
    const Eigen::EigenSolver<Matrix> es(a_cl);
    CHECK(es.eigenvalues().real().maxCoeff() < 0.0);

    const Matrix lyap = a_cl.transpose() * c.p + c.p * a_cl + c.m_q;
    CHECK(lyap.norm() <= 1e-8 * std::max(1.0, c.m_q.norm()));

    CHECK(c.lambda > 0.0);
    CHECK(c.v_scale == doctest::Approx(c.p.trace() / static_cast<double>(a.rows())));
  }
}

TEST_CASE("CARE error paths") {
  // Unstabilizable: unstable mode with no input leaves U1 singular.
  CHECK_THROWS_AS(solve_care(scalar(1.0), scalar(0.0), scalar(1.0), scalar(1.0)), ConditioningError);
  CHECK_THROWS_AS(solve_care(scalar(1.0), scalar(1.0), scalar(1.0), scalar(-1.0)), DomainError);
  CHECK_THROWS_AS(solve_care(Matrix::Zero(2, 3), Matrix::Zero(2, 1), Matrix::Identity(2, 2), scalar(1.0)),
                  DimensionError);
}

TEST_CASE("M(tau) near zero and its derivative") {
  for (PlantId id : all_plants()) {
    INFO(to_string(id));
    const EnvSpec spec = make_env_spec(id);
    const Eigen::Index n = spec.linear.state_dim();
    const double a_cl_norm = (spec.linear.a - spec.linear.b * spec.cert.k).norm();
    CHECK((zoh_closed_loop(spec.cert, spec.linear, 1e-9) - Matrix::Identity(n, n)).norm() <= 2e-9 * a_cl_norm);

    const double h = 1e-6;
    // Central difference about h, using M(0) = I.
    const Matrix fd = (zoh_closed_loop(spec.cert, spec.linear, 2 * h) - Matrix::Identity(n, n)) / (2 * h);
    const Matrix a_cl = spec.linear.a - spec.linear.b * spec.cert.k;
    CHECK((fd - a_cl).norm() / a_cl.norm() <= 1e-4);
  }
}

TEST_CASE("discrete decrease and critical interval") {
  const EnvSpec pend = make_env_spec(PlantId::pendulum);
  const DecreaseCheck d = check_discrete_decrease(pend.cert, pend.linear, 0.05);
  CHECK(std::abs(d.lambda_min - 0.063) <= 0.005);
  CHECK(d.certified);
  const auto tc = tau_critical(pend.cert, pend.linear, pend.grid.tau_max());
  REQUIRE(tc.has_value());
  CHECK(tc->tau > 0.05);

  const EnvSpec q3 = make_env_spec(PlantId::quadrotor3d);
  CHECK_FALSE(check_discrete_decrease(q3.cert, q3.linear, 0.04).certified);
  const auto tq = tau_critical(q3.cert, q3.linear, q3.grid.tau_max());
  REQUIRE(tq.has_value());
  CHECK(std::abs(tq->tau - 0.037) <= 0.001);
  CHECK(std::abs(spectral_radius(zoh_closed_loop(q3.cert, q3.linear, 0.04)) - 1.19) <= 0.02);

  // Open-loop stable scalar with no input authority: V decreases for every tau.
  RiccatiCert c;
  c.p = scalar(0.5);
  c.k = scalar(0.0);
  CHECK_FALSE(tau_critical(c, scalar_plant(-1.0, 0.0), 10.0).has_value());
  CHECK_THROWS_AS(tau_critical(c, scalar_plant(-1.0, 0.0), 1.0, 0.0), DomainError);
}

TEST_CASE("lambda_min(M_disc) crosses zero at most once on a fine tau sweep") {
  for (PlantId id : all_plants()) {
    INFO(to_string(id));
    const EnvSpec spec = make_env_spec(id);
    int crossings = 0;
    double prev = check_discrete_decrease(spec.cert, spec.linear, 0.001).lambda_min;
    for (double tau = 0.002; tau <= spec.grid.tau_max() + 1e-12; tau += 0.001) {
      const double cur = check_discrete_decrease(spec.cert, spec.linear, tau).lambda_min;
      if ((prev >= -kPsdTolerance) != (cur >= -kPsdTolerance)) ++crossings;
      prev = cur;
    }
    CHECK(crossings <= 1);
  }
}

TEST_CASE("saturation angle and stability radius") {
  const EnvSpec pend = make_env_spec(PlantId::pendulum);
  const double sat = saturation_angle(pend.cert, pend.linear, 0, 0);
  CHECK(std::abs(sat * 180.0 / std::numbers::pi - 10.5) <= 0.1);
  CHECK(sat == doctest::Approx(pend.linear.u_max(0) / std::abs(pend.cert.k(0, 0))));

  const double r = stability_radius(pend.cert, 0.374);
  CHECK(std::abs(r - 0.116) <= 0.001);
  CHECK(stability_radius(pend.cert, 0.748) == r / 2.0);
  CHECK_THROWS_AS(stability_radius(pend.cert, 0.0), DomainError);

  RiccatiCert c;
  c.k = Matrix::Zero(1, 2);
  CHECK_THROWS_AS(saturation_angle(c, pend.linear, 0, 0), DomainError);

  for (PlantId id : all_plants()) {
    INFO(to_string(id));
    const CertReport rep = build_cert_report(make_env_spec(id));
    CHECK(rep.theta_rta < rep.theta_sat);
    CHECK(rep.r_star == doctest::Approx(rep.lambda_min_mq / (2.0 * rep.lambda_max_p * rep.l_delta)));
  }
}

TEST_CASE("L_delta estimator") {
  const EnvSpec pend = make_env_spec(PlantId::pendulum);
  // The only residual is 15(sin th - th), so |delta|/|x|^2 <= 2.5 |th| <= 2.5 r.
  for (double radius : {1e-3, 1e-2, 0.1}) {
    const double est = estimate_l_delta(pend.nominal, pend.cert, radius, 2000, 5);
    CHECK(est <= 2.5 * radius * (1.0 + 1e-6));
    CHECK(est > 0.0);
  }
  // Nested sample sets: a larger radius never lowers the estimate.
  double prev = 0.0;
  for (double radius : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const double est = estimate_l_delta(pend.nominal, pend.cert, radius, 2000, 9);
    CHECK(est >= prev);
    prev = est;
  }
  const double big = estimate_l_delta(pend.nominal, pend.cert, 0.5, 100000, 1);
  CHECK(big > 0.374 / 10.0);
  CHECK(big < 0.374 * 10.0);
  CHECK_THROWS_AS(estimate_l_delta(pend.nominal, pend.cert, 0.0, 10, 1), DomainError);
}

TEST_CASE("Delta V derivative identity on random states") {
  oracle::Gen gen(22);
  for (PlantId id : all_plants()) {
    INFO(to_string(id));
    const EnvSpec spec = make_env_spec(id);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector x = gen.vec(spec.linear.state_dim(), 0.5);
      const DeltaVCheck d = delta_v_derivative_check(spec.cert, spec.linear, x, 1e-5);
      CHECK(d.exact == doctest::Approx(-x.dot(spec.cert.m_q * x)).epsilon(1e-12));
      CHECK(std::abs(d.fd - d.exact) <= 1e-4 * std::abs(d.exact));
    }
  }
  const EnvSpec pend = make_env_spec(PlantId::pendulum);
  Vector x(2);
  x << 0.1, 0.0;
  const DeltaVCheck d = delta_v_derivative_check(pend.cert, pend.linear, x, 1e-6);
  CHECK(std::abs(d.fd - d.exact) <= 1e-4 * std::abs(d.exact));
  CHECK_THROWS_AS(delta_v_derivative_check(pend.cert, pend.linear, Vector::Zero(2), 1e-6), DomainError);
  CHECK_THROWS_AS(delta_v_derivative_check(pend.cert, pend.linear, x, 1e-2), DomainError);
}
