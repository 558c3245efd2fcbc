#include "stc/plants.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "stc/errors.hpp"

namespace stc {
namespace {

// Parameter slots, in the order the names are registered in make().
namespace pend { enum { m, l, g }; }
namespace cart { enum { m_c, m_p, length, g }; }
namespace quad { enum { m, inertia, g }; }
namespace q3d { enum { m, ixx, iyy, izz, g }; }

State pendulum_rhs(const std::vector<double>& p, double s, const State& x, double torque) {
  const double m = p[pend::m] * s;
  const double l = p[pend::l];
  State dx(2);
  dx(0) = x(1);
  dx(1) = 1.5 * p[pend::g] / l * std::sin(x(0)) + 3.0 / (m * l * l) * torque;
  return dx;
}

State cartpole_rhs(const std::vector<double>& p, double s, const State& x, double force) {
  const double m_p = p[cart::m_p] * s;
  const double m_t = p[cart::m_c] * s + m_p;
  const double len = p[cart::length];
  const double g = p[cart::g];
  const double theta = x(2);
  const double omega = x(3);
  const double sin_t = std::sin(theta);
  const double cos_t = std::cos(theta);
  const double temp = (force + m_p * len * omega * omega * sin_t) / m_t;
  const double theta_acc =
      (g * sin_t - cos_t * temp) / (len * (4.0 / 3.0 - m_p * cos_t * cos_t / m_t));
  const double x_acc = (force + m_p * len * (omega * omega * sin_t - theta_acc * cos_t)) / m_t;
  State dx(4);
  dx << x(1), x_acc, omega, theta_acc;
  return dx;
}

State quad2d_rhs(const std::vector<double>& p, double s, const State& x, const Input& u) {
  const double m = p[quad::m] * s;
  const double inertia = p[quad::inertia] * s;
  const double g = p[quad::g];
  const double thrust = m * g + u(0);
  State dx(6);
  dx(0) = x(3);
  dx(1) = x(4);
  dx(2) = x(5);
  dx(3) = -(thrust / m) * std::sin(x(2));
  dx(4) = (thrust / m) * std::cos(x(2)) - g;
  dx(5) = u(1) / inertia;
  return dx;
}

State quad3d_rhs(const std::vector<double>& p, double s, const State& x, const Input& u) {
  const double m = p[q3d::m] * s;
  const Eigen::Vector3d inertia(p[q3d::ixx] * s, p[q3d::iyy] * s, p[q3d::izz] * s);
  const double g = p[q3d::g];
  const double phi = x(3);
  const double theta = x(4);
  const double psi = x(5);
  const Eigen::Vector3d v(x(6), x(7), x(8));
  const Eigen::Vector3d w(x(9), x(10), x(11));

  const Eigen::Matrix3d rot = body_to_inertial(phi, theta, psi);
  const double sp = std::sin(phi);
  const double cp = std::cos(phi);
  const double ct = std::cos(theta);
  const double tt = std::tan(theta);

  const Eigen::Vector3d p_dot = rot * v;
  const Eigen::Vector3d euler_dot(w(0) + sp * tt * w(1) + cp * tt * w(2), cp * w(1) - sp * w(2),
                                  (sp * w(1) + cp * w(2)) / ct);
  const double thrust = m * g + u(0);
  const Eigen::Vector3d v_dot = rot.transpose() * Eigen::Vector3d(0.0, 0.0, -g) +
                                Eigen::Vector3d(0.0, 0.0, thrust / m) - w.cross(v);
  const Eigen::Vector3d torque(u(1), u(2), u(3));
  const Eigen::Vector3d w_dot =
      (torque - w.cross(inertia.cwiseProduct(w))).cwiseQuotient(inertia);

  State dx(12);
  dx << p_dot, euler_dot, v_dot, w_dot;
  return dx;
}

}  // namespace

std::string_view to_string(PlantId id) {
  switch (id) {
    case PlantId::pendulum: return "pendulum";
    case PlantId::cartpole: return "cartpole";
    case PlantId::quadrotor2d: return "quadrotor2d";
    case PlantId::quadrotor3d: return "quadrotor3d";
  }
  return "unknown";
}

PlantId parse_plant_id(std::string_view name) {
  for (PlantId id : all_plants()) {
    if (name == to_string(id)) return id;
  }
  throw ConfigError("unknown plant '" + std::string(name) +
                    "' (expected pendulum, cartpole, quadrotor2d or quadrotor3d)");
}

const std::vector<PlantId>& all_plants() {
  static const std::vector<PlantId> plants = {PlantId::pendulum, PlantId::cartpole,
                                              PlantId::quadrotor2d, PlantId::quadrotor3d};
  return plants;
}

PlantModel::PlantModel(PlantId id, int n, int m, std::vector<std::string> names,
                       std::vector<double> values, std::vector<std::string> limit_names,
                       Vector limits)
    : id_(id),
      state_dim_(n),
      input_dim_(m),
      names_(std::move(names)),
      values_(std::move(values)),
      limit_names_(std::move(limit_names)),
      u_limits_(std::move(limits)) {}

PlantModel PlantModel::make(PlantId id) {
  switch (id) {
    case PlantId::pendulum:
      return PlantModel(id, 2, 1, {"m", "l", "g"}, {1.0, 1.0, 10.0}, {"u_max"},
                        Vector::Constant(1, 2.0));
    case PlantId::cartpole:
      return PlantModel(id, 4, 1, {"m_c", "m_p", "L", "g"}, {1.0, 0.1, 0.5, 9.8}, {"F_max"},
                        Vector::Constant(1, 20.0));
    case PlantId::quadrotor2d: {
      Vector limits(2);
      limits << 5.0, 1.0;
      return PlantModel(id, 6, 2, {"m", "I", "g"}, {1.0, 0.05, 9.81}, {"dF_max", "M_max"},
                        limits);
    }
    case PlantId::quadrotor3d: {
      Vector limits(4);
      limits << 5.0, 1.0, 1.0, 0.5;
      return PlantModel(id, 12, 4, {"m", "Ixx", "Iyy", "Izz", "g"},
                        {1.0, 0.02, 0.02, 0.04, 9.81},
                        {"dF_max", "tau_phi_max", "tau_theta_max", "tau_psi_max"}, limits);
    }
  }
  throw ConfigError("unknown plant id");
}

void PlantModel::set_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("plant dt must be > 0");
  dt_ = dt;
}

void PlantModel::set_mass_scale(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("mass_scale must be > 0");
  mass_scale_ = scale;
}

std::vector<std::string> PlantModel::param_names() const {
  std::vector<std::string> out = names_;
  out.insert(out.end(), limit_names_.begin(), limit_names_.end());
  return out;
}

int PlantModel::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  for (std::size_t i = 0; i < limit_names_.size(); ++i) {
    if (limit_names_[i] == name) return static_cast<int>(names_.size() + i);
  }
  throw ConfigError("plant " + std::string(to_string(id_)) + " has no parameter '" +
                    std::string(name) + "'");
}

double PlantModel::param(std::string_view name) const {
  const int i = index_of(name);
  const int n_phys = static_cast<int>(names_.size());
  return i < n_phys ? values_[i] : u_limits_(i - n_phys);
}

void PlantModel::set_param(std::string_view name, double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError("parameter '" + std::string(name) + "' must be finite and > 0");
  }
  const int i = index_of(name);
  const int n_phys = static_cast<int>(names_.size());
  if (i < n_phys) {
    values_[i] = value;
  } else {
    u_limits_(i - n_phys) = value;
  }
}

State PlantModel::derivative(const State& x, const Input& u, const Input& d) const {
  const Input eff = u + d;
  switch (id_) {
    case PlantId::pendulum: return pendulum_rhs(values_, mass_scale_, x, eff(0));
    case PlantId::cartpole: return cartpole_rhs(values_, mass_scale_, x, eff(0));
    case PlantId::quadrotor2d: return quad2d_rhs(values_, mass_scale_, x, eff);
    case PlantId::quadrotor3d: return quad3d_rhs(values_, mass_scale_, x, eff);
  }
  return State::Zero(state_dim_);
}

State PlantModel::derivative(const State& x, const Input& u) const {
  switch (id_) {
    case PlantId::pendulum: return pendulum_rhs(values_, mass_scale_, x, u(0));
    case PlantId::cartpole: return cartpole_rhs(values_, mass_scale_, x, u(0));
    case PlantId::quadrotor2d: return quad2d_rhs(values_, mass_scale_, x, u);
    case PlantId::quadrotor3d: return quad3d_rhs(values_, mass_scale_, x, u);
  }
  return State::Zero(state_dim_);
}

LinearPlant PlantModel::linearization() const {
  LinearPlant lin;
  lin.a = Matrix::Zero(state_dim_, state_dim_);
  lin.b = Matrix::Zero(state_dim_, input_dim_);
  lin.u_max = u_limits_;
  const auto& p = values_;
  switch (id_) {
    case PlantId::pendulum: {
      const double l = p[pend::l];
      lin.a(0, 1) = 1.0;
      lin.a(1, 0) = 1.5 * p[pend::g] / l;
      lin.b(1, 0) = 3.0 / (p[pend::m] * l * l);
      lin.angle_rows = {0};
      break;
    }
    case PlantId::cartpole: {
      const double m_p = p[cart::m_p];
      const double m_t = p[cart::m_c] + m_p;
      const double len = p[cart::length];
      const double g = p[cart::g];
      const double d = len * (4.0 / 3.0 - m_p / m_t);
      lin.a(0, 1) = 1.0;
      lin.a(1, 2) = -m_p * len * g / (m_t * d);
      lin.a(2, 3) = 1.0;
      lin.a(3, 2) = g / d;
      lin.b(1, 0) = 1.0 / m_t + m_p * len / (m_t * m_t * d);
      lin.b(3, 0) = -1.0 / (m_t * d);
      lin.angle_rows = {2};
      break;
    }
    case PlantId::quadrotor2d: {
      lin.a(0, 3) = lin.a(1, 4) = lin.a(2, 5) = 1.0;
      lin.a(3, 2) = -p[quad::g];
      lin.b(4, 0) = 1.0 / p[quad::m];
      lin.b(5, 1) = 1.0 / p[quad::inertia];
      lin.angle_rows = {2};
      break;
    }
    case PlantId::quadrotor3d: {
      for (int i = 0; i < 6; ++i) lin.a(i, i + 6) = 1.0;
      lin.a(6, 4) = p[q3d::g];
      lin.a(7, 3) = -p[q3d::g];
      lin.b(8, 0) = 1.0 / p[q3d::m];
      lin.b(9, 1) = 1.0 / p[q3d::ixx];
      lin.b(10, 2) = 1.0 / p[q3d::iyy];
      lin.b(11, 3) = 1.0 / p[q3d::izz];
      lin.angle_rows = {3, 4};
      break;
    }
  }
  return lin;
}

Eigen::Matrix3d body_to_inertial(double phi, double theta, double psi) {
  return (Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(phi, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

std::string_view to_string(DisturbanceKind kind) {
  switch (kind) {
    case DisturbanceKind::none: return "none";
    case DisturbanceKind::constant: return "constant";
    case DisturbanceKind::periodic: return "periodic";
    case DisturbanceKind::impulse: return "impulse";
  }
  return "none";
}

DisturbanceKind parse_disturbance_kind(std::string_view name) {
  for (auto kind : {DisturbanceKind::none, DisturbanceKind::constant, DisturbanceKind::periodic,
                    DisturbanceKind::impulse}) {
    if (name == to_string(kind)) return kind;
  }
  throw ConfigError("unknown disturbance kind '" + std::string(name) + "'");
}

void DisturbanceSpec::validate(int input_dim) const {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw ConfigError("disturbance amplitude must be finite and >= 0");
  }
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ConfigError("disturbance probability must lie in [0, 1]");
  }
  if (!(frequency >= 0.0) || !std::isfinite(frequency)) {
    throw ConfigError("disturbance frequency must be finite and >= 0");
  }
  if (channel < 0 || channel >= input_dim) throw ConfigError("disturbance channel out of range");
}

DisturbanceSignal::DisturbanceSignal(DisturbanceSpec spec, int input_dim)
    : spec_(spec), input_dim_(input_dim) {
  spec_.validate(input_dim);
}

void DisturbanceSignal::begin_interval(Rng& rng) {
  impulse_sign_ = 0.0;
  if (spec_.kind != DisturbanceKind::impulse) return;
  if (uniform01(rng) < spec_.probability) impulse_sign_ = uniform01(rng) < 0.5 ? -1.0 : 1.0;
}

Input DisturbanceSignal::value(double t) const {
  Input d = Input::Zero(input_dim_);
  switch (spec_.kind) {
    case DisturbanceKind::none: break;
    case DisturbanceKind::constant: d(spec_.channel) = spec_.amplitude; break;
    case DisturbanceKind::periodic:
      d(spec_.channel) = spec_.amplitude * std::sin(2.0 * std::numbers::pi * spec_.frequency * t);
      break;
    case DisturbanceKind::impulse: d(spec_.channel) = impulse_sign_ * spec_.amplitude; break;
  }
  return d;
}

bool violates(const State& x, const std::vector<StateBound>& bounds) {
  for (const auto& b : bounds) {
    if (!(std::abs(x(b.index)) <= b.bound)) return true;
  }
  return false;
}

HoldResult integrate_hold(const PlantModel& model, const State& x, const Input& u,
                          const DisturbanceSignal& disturbance, double t_start, double tau,
                          const std::vector<StateBound>& bounds, const SubstepObserver* observer) {
  const double dt = model.dt();
  if (!(tau > 0.0)) throw DomainError("integrate_hold: tau must be > 0");
  const double ratio = tau / dt;
  const long steps = std::lround(ratio);
  if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-6) {
    throw DomainError("integrate_hold: tau must be an integer multiple of dt");
  }

  HoldResult result;
  result.x_next = x;
  if (!x.allFinite()) {
    result.early_stop = result.fault = true;
    return result;
  }
  if (violates(x, bounds)) {
    result.early_stop = true;
    return result;
  }

  // A default-constructed signal carries no dimension and stands for "none".
  const bool active = disturbance.spec().kind != DisturbanceKind::none;
  if (active && disturbance.input_dim() != u.size()) {
    throw DimensionError("integrate_hold: disturbance and input dimensions differ");
  }
  const bool varying = disturbance.spec().kind == DisturbanceKind::periodic;
  Input d = active ? disturbance.value(t_start) : Input::Zero(u.size());
  State s = x;
  for (long j = 0; j < steps; ++j) {
    const double t = t_start + static_cast<double>(j) * dt;
    if (varying) d = disturbance.value(t);
    const State k1 = model.derivative(s, u, d);
    const State k2 = model.derivative(s + 0.5 * dt * k1, u, d);
    const State k3 = model.derivative(s + 0.5 * dt * k2, u, d);
    const State k4 = model.derivative(s + dt * k3, u, d);
    const State next = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) {
      // Keep the last finite state.
      result.early_stop = result.fault = true;
      break;
    }
    s = next;
    result.substeps = j + 1;
    if (observer != nullptr) (*observer)(t_start + static_cast<double>(j + 1) * dt, s);
    if (violates(s, bounds)) {
      result.early_stop = true;
      break;
    }
  }
  result.x_next = s;
  result.t_elapsed = static_cast<double>(result.substeps) * dt;
  return result;
}

}  // namespace stc
