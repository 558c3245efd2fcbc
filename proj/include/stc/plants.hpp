#pragma once

// Nonlinear benchmark plants, zero-order-hold RK4 integration and
// disturbance injection.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stc/numerics.hpp"
#include "stc/riccati.hpp"

namespace stc {

inline constexpr int kMaxStateDim = 12;
inline constexpr int kMaxInputDim = 4;

// Inline-capacity vectors keep the integrator free of heap traffic.
using State = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxStateDim, 1>;
using Input = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxInputDim, 1>;

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

enum class PlantId { pendulum, cartpole, quadrotor2d, quadrotor3d };

std::string_view to_string(PlantId id);
/// Throws ConfigError for unknown names.
PlantId parse_plant_id(std::string_view name);
const std::vector<PlantId>& all_plants();

class PlantModel {
 public:
  /// Nominal parameters: pendulum m=1, l=1, g=10; cart-pole m_c=1, m_p=0.1,
  /// L=0.5, g=9.8; planar quadrotor m=1, I=0.05, g=9.81; Quadrotor3D m=1,
  /// Ixx=Iyy=0.02, Izz=0.04, g=9.81. dt = 1 ms, mass_scale = 1.
  static PlantModel make(PlantId id);

  PlantId id() const { return id_; }
  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }

  const Vector& u_limits() const { return u_limits_; }
  double dt() const { return dt_; }
  void set_dt(double dt);
  double mass_scale() const { return mass_scale_; }
  void set_mass_scale(double scale);

  /// Named physical constants and actuator limits, e.g. "m", "L", "Izz",
  /// "u_max", "dF_max". Unknown names throw ConfigError.
  std::vector<std::string> param_names() const;
  double param(std::string_view name) const;
  void set_param(std::string_view name, double value);

  /// x' = f(x, u + d). Mass (and mass-proportional inertia) is multiplied by
  /// mass_scale. No clipping is applied here.
  State derivative(const State& x, const Input& u, const Input& d) const;
  State derivative(const State& x, const Input& u) const;

  /// Analytic equilibrium linearization with nominal (unscaled) parameters.
  LinearPlant linearization() const;

 private:
  PlantModel(PlantId id, int n, int m, std::vector<std::string> names, std::vector<double> values,
             std::vector<std::string> limit_names, Vector limits);

  int index_of(std::string_view name) const;

  PlantId id_;
  int state_dim_;
  int input_dim_;
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<std::string> limit_names_;
  Vector u_limits_;
  double dt_ = 1e-3;
  double mass_scale_ = 1.0;
};

/// Free-function form of PlantModel::derivative.
inline State dynamics(const PlantModel& model, const State& x, const Input& u, const Input& d) {
  return model.derivative(x, u, d);
}

/// Quadrotor3D body-to-inertial rotation R = Rz(psi) Ry(theta) Rx(phi).
Eigen::Matrix3d body_to_inertial(double phi, double theta, double psi);

enum class DisturbanceKind { none, constant, periodic, impulse };

std::string_view to_string(DisturbanceKind kind);
DisturbanceKind parse_disturbance_kind(std::string_view name);

struct DisturbanceSpec {
  DisturbanceKind kind = DisturbanceKind::none;
  double amplitude = 0.0;     // input units
  double frequency = 0.0;     // Hz, periodic only
  double probability = 0.05;  // per decision, impulse only
  int channel = 0;

  /// Throws ConfigError on negative amplitude or probability outside [0, 1].
  void validate(int input_dim) const;
};

/// Additive input disturbance. Periodic signals use episode time; impulses
/// fire per decision with a random sign and are held for that interval.
class DisturbanceSignal {
 public:
  DisturbanceSignal() = default;
  DisturbanceSignal(DisturbanceSpec spec, int input_dim);

  /// Called once per decision, before the hold interval is integrated.
  void begin_interval(Rng& rng);
  Input value(double t) const;
  bool impulse_active() const { return impulse_sign_ != 0.0; }
  const DisturbanceSpec& spec() const { return spec_; }
  int input_dim() const { return input_dim_; }

 private:
  DisturbanceSpec spec_;
  int input_dim_ = 0;
  double impulse_sign_ = 0.0;
};

/// |x[index]| > bound terminates the episode.
struct StateBound {
  int index = 0;
  double bound = 0.0;
};

bool violates(const State& x, const std::vector<StateBound>& bounds);

struct HoldResult {
  State x_next;
  double t_elapsed = 0.0;
  long substeps = 0;
  bool early_stop = false;  // a bound was crossed (or the state blew up)
  bool fault = false;       // non-finite state encountered
};

/// Receives (time, state) after every RK4 sub-step.
using SubstepObserver = std::function<void(double, const State&)>;

/// Integrates one zero-order-hold interval of length tau starting at episode
/// time t_start with RK4 sub-steps of model.dt(). Bounds are checked on
/// entry and after every sub-step. Throws DomainError unless tau > 0 and
/// tau / dt is integral.
HoldResult integrate_hold(const PlantModel& model, const State& x, const Input& u,
                          const DisturbanceSignal& disturbance, double t_start, double tau,
                          const std::vector<StateBound>& bounds,
                          const SubstepObserver* observer = nullptr);

}  // namespace stc
