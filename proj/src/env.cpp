#include "stc/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stc/errors.hpp"

namespace stc {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<double> levels(double limit, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] =
        -limit + 2.0 * limit * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

Vector selector(int n, int index) {
  Vector c = Vector::Zero(n);
  c(index) = 1.0;
  return c;
}

Matrix diag(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double d : values) v(i++) = d;
  return v.asDiagonal();
}

}  // namespace

std::pair<Matrix, Matrix> default_weights(PlantId id) {
  switch (id) {
    case PlantId::pendulum:
      return {diag({10.0, 1.0}), diag({1.0})};
    case PlantId::cartpole:
      return {diag({6.0, 1.0, 11.5, 5.0}), diag({1.0})};
    case PlantId::quadrotor2d:
      return {diag({2.0, 2.0, 10.0, 1.0, 1.0, 5.0}), diag({0.1, 5.0})};
    case PlantId::quadrotor3d:
      return {diag({2.0, 2.0, 2.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 1.0}),
              diag({0.1, 5.0, 5.0, 10.0})};
  }
  throw ConfigError("default_weights: unknown plant");
}

EnvSpec make_env_spec(PlantId id, const EnvOptions& options) {
  if (!(options.mass_scale > 0.0)) throw ConfigError("mass_scale must be > 0");

  PlantModel nominal = PlantModel::make(id);
  for (const auto& [name, value] : options.params) nominal.set_param(name, value);
  if (options.dt) nominal.set_dt(*options.dt);
  PlantModel plant = nominal;
  plant.set_mass_scale(options.mass_scale);

  const LinearPlant linear = nominal.linearization();
  const auto [q, r] = default_weights(id);
  RiccatiCert cert = solve_care(linear.a, linear.b, q, r);

  EnvSpec spec(plant, nominal, linear, cert);
  spec.reward.w_c = options.w_c;
  spec.reward.validate();
  spec.disturbance = options.disturbance;
  spec.disturbance.validate(plant.input_dim());
  spec.domain_randomization = options.domain_randomization;

  const int n = plant.state_dim();
  switch (id) {
    case PlantId::pendulum:
      spec.init_ranges = {{-0.1, 0.1}, {-0.5, 0.5}};
      spec.termination = {{0, 60.0 * kDeg}};
      spec.grid = {0.05, 8};
      spec.shield.channels = {{selector(n, 0), 0.15}};
      spec.l_delta = 0.374;
      spec.sat_row = 0;
      spec.action_levels = {levels(plant.u_limits()(0), 21)};
      spec.tau_match = 0.40;
      break;
    case PlantId::cartpole:
      spec.init_ranges.assign(4, {-0.05, 0.05});
      spec.termination = {{0, 2.4}, {2, 12.0 * kDeg}};
      spec.grid = {0.04, 8};
      spec.shield.channels = {{selector(n, 2), 12.0 * kDeg}};
      spec.shield.position_bounds = {{0, 1.92}};
      spec.l_delta = 0.289;
      spec.sat_row = 2;
      spec.action_levels = {levels(plant.u_limits()(0), 41)};
      spec.tau_match = 0.32;
      break;
    case PlantId::quadrotor2d: {
      spec.init_ranges = {{-0.3, 0.3}, {-0.3, 0.3}, {-0.1, 0.1},
                          {-0.3, 0.3}, {-0.3, 0.3}, {-0.3, 0.3}};
      spec.termination = {{0, 2.5}, {1, 2.5}, {2, 30.0 * kDeg}};
      spec.grid = {0.04, 8};
      const double sat = saturation_angle(cert, linear, 1, 2);
      spec.shield.channels = {{selector(n, 2), 0.8 * sat}};
      spec.shield.position_bounds = {{0, 2.0}, {1, 2.0}};
      spec.l_delta = 2.301;
      spec.sat_channel = 1;
      spec.sat_row = 2;
      spec.action_levels = {levels(plant.u_limits()(0), 11), levels(plant.u_limits()(1), 9)};
      spec.tau_match = 0.28;
      break;
    }
    case PlantId::quadrotor3d: {
      spec.init_ranges = {{-0.3, 0.3}, {-0.3, 0.3}, {-0.3, 0.3}, {-0.1, 0.1},
                          {-0.1, 0.1}, {-0.1, 0.1}, {-0.3, 0.3}, {-0.3, 0.3},
                          {-0.3, 0.3}, {-0.1, 0.1}, {-0.1, 0.1}, {-0.1, 0.1}};
      spec.termination = {{0, 2.5},         {1, 2.5},         {2, 2.5},
                          {3, 30.0 * kDeg}, {4, 30.0 * kDeg}, {5, 90.0 * kDeg}};
      spec.grid = {0.04, 8};
      // Roll and pitch are monitored as independent channels.
      spec.shield.channels = {{selector(n, 3), 0.8 * saturation_angle(cert, linear, 1, 3)},
                              {selector(n, 4), 0.8 * saturation_angle(cert, linear, 2, 4)}};
      spec.shield.position_bounds = {{0, 2.0}, {1, 2.0}, {2, 2.0}};
      spec.l_delta = 0.684;
      spec.sat_channel = 1;
      spec.sat_row = 3;
      spec.expect_certified = false;
      for (int i = 0; i < 4; ++i) spec.action_levels.push_back(levels(plant.u_limits()(i), 5));
      spec.tau_match = 0.32;
      break;
    }
  }

  if (options.tau_min) spec.grid.tau_min = *options.tau_min;
  if (options.grid_count) spec.grid.count = *options.grid_count;
  spec.grid.validate();
  if (options.t_max) spec.t_max = *options.t_max;
  if (!(spec.t_max > 0.0)) throw ConfigError("t_max must be > 0");
  if (options.l_delta) spec.l_delta = *options.l_delta;
  if (!(spec.l_delta > 0.0)) throw ConfigError("l_delta must be > 0");
  spec.shield.mode = options.shield;

  const double theta_sat = saturation_angle(cert, linear, spec.sat_channel, spec.sat_row);
  if (!(spec.shield.channels.front().theta_rta < theta_sat)) {
    throw ConfigError("shield threshold must lie strictly below the saturation angle");
  }
  if (!spec.grid.index_of(spec.tau_match)) {
    // Snap to the nearest grid value when the grid was overridden.
    const long idx = std::lround(spec.tau_match / spec.grid.tau_min) - 1;
    spec.tau_match = spec.grid.tau(static_cast<int>(std::clamp<long>(idx, 0, spec.grid.count - 1)));
  }
  return spec;
}

State sample_initial_state(const EnvSpec& spec, Rng& rng) {
  State x(static_cast<Eigen::Index>(spec.init_ranges.size()));
  for (std::size_t i = 0; i < spec.init_ranges.size(); ++i) {
    const auto [lo, hi] = spec.init_ranges[i];
    x(static_cast<Eigen::Index>(i)) = uniform(rng, lo, hi);
  }
  return x;
}

CertReport build_cert_report(const EnvSpec& spec) {
  CertReport report;
  report.lambda_min_mq = sym_eig_min(spec.cert.m_q);
  report.lambda_max_p = sym_eig_max(spec.cert.p);
  report.l_delta = spec.l_delta;
  report.r_star = stability_radius(spec.cert, spec.l_delta);
  report.theta_rta = spec.shield.channels.front().theta_rta;
  report.theta_sat = saturation_angle(spec.cert, spec.linear, spec.sat_channel, spec.sat_row);
  const DecreaseCheck check = check_discrete_decrease(spec.cert, spec.linear, spec.grid.tau_min);
  report.lambda_min_mdisc = check.lambda_min;
  report.mdisc_certified = check.certified;
  if (auto tc = tau_critical(spec.cert, spec.linear, spec.grid.tau_max())) report.tau_critical = tc->tau;
  report.spectral_radius_tau_min =
      spectral_radius(zoh_closed_loop(spec.cert, spec.linear, spec.grid.tau_min));
  return report;
}

}  // namespace stc
