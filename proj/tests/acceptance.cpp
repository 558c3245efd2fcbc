// Acceptance run: one PASS/FAIL line per top-level criterion, tolerances
// pinned here. Exits non-zero when any line fails.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "stc/episode.hpp"
#include "stc/harness.hpp"
#include "stc/numerics.hpp"
#include "stc/riccati.hpp"
#include "stc/suites.hpp"

using namespace stc;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Accumulates the individual comparisons behind one criterion line.
class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)) {}

  void check(bool ok, const std::string& what) {
    ++total_;
    if (!ok) {
      ++failures_;
      if (!failed_.empty()) failed_ += "; ";
      failed_ += what;
    }
  }
  void near(double got, double want, double tol, const std::string& what) {
    check(std::abs(got - want) <= tol, what + " = " + fmt(got) + " vs " + fmt(want) + " +/- " + fmt(tol));
  }
  void rel(double got, double want, double tol, const std::string& what) {
    check(std::abs(got - want) <= tol * std::abs(want),
          what + " = " + fmt(got) + " vs " + fmt(want) + " +/- " + fmt(100.0 * tol) + "%");
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : ", ") + s; }

  bool report() const {
    const bool ok = failed_.empty();
    std::cout << (ok ? "PASS " : "FAIL ") << name_ << " [" << total_ - failures_ << "/" << total_ << "]";
    if (!notes_.empty()) std::cout << " (" << notes_ << ")";
    if (!ok) std::cout << "\n     " << failed_;
    std::cout << std::endl;
    return ok;
  }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
  }

 private:
  std::string name_;
  std::string failed_;
  std::string notes_;
  int total_ = 0;
  int failures_ = 0;
};

const std::vector<PlantId> kPlants{PlantId::pendulum, PlantId::cartpole, PlantId::quadrotor2d,
                                   PlantId::quadrotor3d};

int workers() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

double metric(const json& report, const std::string& cell, const std::string& path) {
  const json& c = report.at("cells").at(cell);
  const json* v = find_path(c, path);
  if (v == nullptr || !v->is_number()) throw std::runtime_error("missing " + cell + " " + path);
  return v->get<double>();
}

// --- certificate table ------------------------------------------------------

std::vector<bool> certificate_table() {
  std::vector<bool> out;
  const auto t0 = Clock::now();
  SuiteSpec s;
  s.id = SuiteId::verify;
  const json r = run_suite(s);
  const double elapsed = seconds_since(t0);
  const json& c = r.at("cells");

  Criterion pend("certificate: pendulum K, lambda, V_scale");
  const json& p = c.at("pendulum");
  pend.near(p["K"][0][0], 10.92, 0.01, "K_theta");
  pend.near(p["K"][0][1], 2.88, 0.01, "K_theta_dot");
  pend.rel(p["lambda"], 6.23, 0.01, "lambda");
  pend.rel(p["v_scale"], 8.99, 0.01, "V_scale");
  out.push_back(pend.report());

  Criterion scale("certificate: decay rate and V_scale for cartpole, quadrotor2d, quadrotor3d");
  const std::vector<std::pair<std::string, std::pair<double, double>>> table4{
      {"cartpole", {0.244, 56.6}}, {"quadrotor2d", {0.78, 5.71}}, {"quadrotor3d", {0.80, 5.05}}};
  for (const auto& [plant, v] : table4) {
    scale.rel(c.at(plant)["lambda"], v.first, 0.01, plant + " lambda");
    scale.rel(c.at(plant)["v_scale"], v.second, 0.01, plant + " V_scale");
  }
  out.push_back(scale.report());

  Criterion cols("certificate: lambda_min(M_Q), lambda_max(P), theta_sat, M_disc, r*");
  const std::vector<std::string> names{"pendulum", "cartpole", "quadrotor2d", "quadrotor3d"};
  const double mq[] = {1.548, 1.087, 1.220, 1.000};
  const double pmax[] = {17.81, 216.6, 28.71, 25.42};
  const double sat[] = {10.5, 29.9, 12.0, 12.6};
  const double mdisc[] = {0.063, 0.040, 0.046};
  const double rstar[] = {0.116, 0.009, 0.009, 0.029};
  for (std::size_t i = 0; i < names.size(); ++i) {
    const json& x = c.at(names[i]);
    cols.near(x["lambda_min_mq"], mq[i], 0.01, names[i] + " lambda_min(M_Q)");
    cols.rel(x["lambda_max_p"], pmax[i], 0.005, names[i] + " lambda_max(P)");
    cols.near(x["theta_sat_deg"], sat[i], 0.1, names[i] + " theta_sat");
    cols.near(x["r_star"], rstar[i], 0.001, names[i] + " r*");
    if (i < 3) {
      cols.check(x["mdisc_certified"].get<bool>(), names[i] + " M_disc certified");
      cols.near(x["lambda_min_mdisc"], mdisc[i], 0.005, names[i] + " lambda_min(M_disc)");
    } else {
      cols.check(!x["mdisc_certified"].get<bool>(), names[i] + " M_disc uncertified");
    }
  }
  out.push_back(cols.report());

  Criterion q3d("certificate: quadrotor3d spectral radius of M(0.04) and critical interval");
  const json& q = c.at("quadrotor3d");
  q3d.near(q["spectral_radius_tau_min"], 1.19, 0.02, "rho(M(0.04))");
  q3d.check(q["tau_critical"].is_number(), "tau_c exists");
  if (q["tau_critical"].is_number()) q3d.near(q["tau_critical"], 0.037, 0.001, "tau_c");
  out.push_back(q3d.report());

  Criterion rt("certificate: table runtime < 5 s");
  rt.check(elapsed < 5.0, "elapsed " + Criterion::fmt(elapsed) + " s");
  rt.note(Criterion::fmt(elapsed) + " s");
  out.push_back(rt.report());
  return out;
}

// --- baselines --------------------------------------------------------------

std::vector<bool> baselines() {
  std::vector<bool> out;
  const auto t0 = Clock::now();
  SuiteSpec s;
  s.id = SuiteId::baselines;
  s.n_eval = 100;
  s.parallelism = workers();
  const json r = run_suite(s);
  const double elapsed = seconds_since(t0);

  Criterion b1("baselines: B1 MSI exactly tau_min, every episode reaches 50 s");
  for (PlantId id : kPlants) {
    const std::string cell = std::string(to_string(id)) + "/B1";
    const double tau_min = make_env_spec(id).grid.tau_min;
    b1.check(metric(r, cell, "metrics.msi.mean") == tau_min,
             cell + " MSI " + Criterion::fmt(metric(r, cell, "metrics.msi.mean")));
    b1.check(metric(r, cell, "metrics.msi.std") == 0.0, cell + " MSI std");
    b1.check(metric(r, cell, "metrics.min_length") >= 50.0 - 1e-9,
             cell + " min length " + Criterion::fmt(metric(r, cell, "metrics.min_length")));
  }
  out.push_back(b1.report());

  Criterion b2("baselines: B2 unstable, Q3D crash time 0.39 +/- 0.25 s");
  for (PlantId id : {PlantId::pendulum, PlantId::cartpole, PlantId::quadrotor2d}) {
    const std::string cell = std::string(to_string(id)) + "/B2";
    const double len = metric(r, cell, "metrics.length.mean");
    b2.check(len < 3.0, cell + " length " + Criterion::fmt(len));
    b2.note(cell + " " + Criterion::fmt(len) + " s");
  }
  const double q3d_len = metric(r, "quadrotor3d/B2", "metrics.length.mean");
  b2.near(q3d_len, 0.39, 0.25, "quadrotor3d/B2 length");
  b2.note("quadrotor3d/B2 " + Criterion::fmt(q3d_len) + " s");
  out.push_back(b2.report());

  Criterion b3("baselines: B3 MSI 0.202 / 0.212 / 0.080 +/- 0.02");
  const std::pair<const char*, double> msi[] = {
      {"pendulum/B3", 0.202}, {"cartpole/B3", 0.212}, {"quadrotor2d/B3", 0.080}};
  for (const auto& [cell, want] : msi) {
    b3.near(metric(r, cell, "metrics.msi.mean"), want, 0.02, std::string(cell) + " MSI");
    b3.note(std::string(cell) + " " + Criterion::fmt(metric(r, cell, "metrics.msi.mean")));
  }
  out.push_back(b3.report());

  Criterion pin("baselines: B3 on quadrotor3d pinned at 0.040 +/- 1e-6");
  pin.near(metric(r, "quadrotor3d/B3", "metrics.msi.mean"), 0.040, 1e-6, "quadrotor3d/B3 MSI");
  pin.note("tracker MSI " + Criterion::fmt(metric(r, "quadrotor3d/B3", "metrics.msi_tracker.mean")));
  out.push_back(pin.report());

  Criterion norms("baselines: B1/B3 state norms within +/- 50% of the published values");
  const std::vector<std::tuple<const char*, const char*, double>> published{
      {"pendulum/B1", "theta", 0.028},     {"pendulum/B1", "theta_dot", 0.092},
      {"pendulum/B3", "theta", 0.026},     {"pendulum/B3", "theta_dot", 0.167},
      {"cartpole/B1", "x", 0.069},         {"cartpole/B1", "x_dot", 0.078},
      {"cartpole/B1", "theta", 0.014},     {"cartpole/B1", "theta_dot", 0.048},
      {"cartpole/B3", "x", 0.065},         {"cartpole/B3", "x_dot", 0.094},
      {"cartpole/B3", "theta", 0.013},     {"cartpole/B3", "theta_dot", 0.097},
      {"quadrotor2d/B1", "x", 0.166},      {"quadrotor2d/B1", "x_dot", 0.166},
      {"quadrotor2d/B1", "theta", 0.033},  {"quadrotor2d/B1", "theta_dot", 0.120},
      {"quadrotor2d/B3", "x", 0.160},      {"quadrotor2d/B3", "x_dot", 0.164},
      {"quadrotor2d/B3", "theta", 0.034},  {"quadrotor2d/B3", "theta_dot", 0.349},
      {"quadrotor3d/B1", "phi", 0.176},    {"quadrotor3d/B1", "p", 7.23},
      {"quadrotor3d/B1", "px", 0.447},     {"quadrotor3d/B1", "pz", 0.123},
      {"quadrotor3d/B3", "phi", 0.176},    {"quadrotor3d/B3", "p", 7.235},
      {"quadrotor3d/B3", "px", 0.444},     {"quadrotor3d/B3", "pz", 0.118}};
  for (const auto& [cell, state, want] : published) {
    norms.rel(metric(r, cell, std::string("metrics.state_norms.") + state), want, 0.5,
              std::string(cell) + " " + state);
  }
  out.push_back(norms.report());

  Criterion rt("baselines: 100 episodes per plant in < 2 min");
  rt.check(elapsed < 120.0, "elapsed " + Criterion::fmt(elapsed) + " s");
  rt.note(Criterion::fmt(elapsed) + " s on " + std::to_string(s.parallelism) + " workers");
  out.push_back(rt.report());
  return out;
}

// --- robustness ---------------------------------------------------------------

std::vector<bool> robustness() {
  std::vector<bool> out;
  SuiteSpec s;
  s.id = SuiteId::robustness_mass;
  s.plants = {PlantId::pendulum, PlantId::cartpole, PlantId::quadrotor2d};
  s.mass_scales = {0.7, 1.3};
  s.domain_randomization = false;
  s.parallelism = workers();
  const json m = run_suite(s);

  Criterion light("robustness: mass 0.7x, B3 fails on pendulum and cartpole, survives on quadrotor2d at MSI 0.080");
  for (const char* cell : {"pendulum/B3/mass=0.7", "cartpole/B3/mass=0.7"}) {
    const double len = metric(m, cell, "metrics.length.mean");
    light.check(len < 5.0, std::string(cell) + " length " + Criterion::fmt(len) + " (MSI " +
                               Criterion::fmt(metric(m, cell, "metrics.msi.mean")) + ")");
  }
  const double q2d_len = metric(m, "quadrotor2d/B3/mass=0.7", "metrics.length.mean");
  light.check(q2d_len >= 5.0, "quadrotor2d/B3/mass=0.7 length " + Criterion::fmt(q2d_len));
  light.near(metric(m, "quadrotor2d/B3/mass=0.7", "metrics.msi.mean"), 0.080, 0.01, "quadrotor2d/B3/mass=0.7 MSI");
  out.push_back(light.report());

  Criterion heavy("robustness: mass 1.3x, B2 stable on pendulum and cartpole");
  for (PlantId id : {PlantId::pendulum, PlantId::cartpole}) {
    const std::string cell = std::string(to_string(id)) + "/B2/mass=1.3";
    const EnvSpec spec = make_env_spec(id);
    const double bound = 50.0 - spec.tau_match;
    const double len = metric(m, cell, "metrics.length.mean");
    heavy.check(len > bound, cell + " length " + Criterion::fmt(len) + " vs > " + Criterion::fmt(bound));
  }
  out.push_back(heavy.report());

  SuiteSpec d;
  d.id = SuiteId::robustness_disturbance;
  d.plants = {PlantId::quadrotor2d};
  d.parallelism = workers();
  const json dr = run_suite(d);
  Criterion dist("robustness: quadrotor2d B3 MSI in [0.079, 0.088] under all 7 disturbance conditions");
  int conditions = 0;
  for (const auto& [cell, c] : dr.at("cells").items()) {
    if (cell.rfind("quadrotor2d/B3/", 0) != 0) continue;
    ++conditions;
    const double v = metric(dr, cell, "metrics.msi.mean");
    dist.check(v >= 0.079 && v <= 0.088, cell + " MSI " + Criterion::fmt(v));
  }
  dist.check(conditions == 7, "condition count " + std::to_string(conditions));
  out.push_back(dist.report());
  return out;
}

// --- properties ---------------------------------------------------------------

State random_state(oracle::Gen& gen, const EnvSpec& spec, double widen) {
  State x(spec.state_dim());
  for (int i = 0; i < spec.state_dim(); ++i) {
    const auto [lo, hi] = spec.init_ranges[static_cast<std::size_t>(i)];
    x(i) = gen.uniform(lo * widen, hi * widen);
  }
  return x;
}

EnvSpec spec_with(PlantId id, ShieldMode mode) {
  EnvOptions o;
  o.shield = mode;
  return make_env_spec(id, o);
}

std::vector<bool> properties() {
  std::vector<bool> out;
  oracle::Gen gen(2024);

  Criterion zoh("property: ZOH agrees with dense integration to 1e-6");
  double worst = 0.0;
  for (PlantId id : kPlants) {
    const EnvSpec spec = make_env_spec(id);
    for (int i = 0; i < spec.grid.count; ++i) {
      const double tau = spec.grid.tau(i);
      const ZohPair z = zoh_pair(spec.linear.a, spec.linear.b, tau);
      const auto [phi, gamma] = oracle::rk4_zoh(spec.linear.a, spec.linear.b, tau, std::lround(tau / 1e-4));
      worst = std::max({worst, (z.phi - phi).cwiseAbs().maxCoeff(), (z.gamma - gamma).cwiseAbs().maxCoeff()});
    }
  }
  zoh.check(worst <= 1e-6, "max deviation " + Criterion::fmt(worst));
  zoh.note("max " + Criterion::fmt(worst));
  out.push_back(zoh.report());

  Criterion semi("property: matrix-exponential semigroup to 1e-10");
  worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = gen.integer(1, 12);
    const Matrix a = gen.mat(n, n, 1.0);
    const double s = gen.uniform(0.0, 0.4), t = gen.uniform(0.0, 0.4);
    const Matrix e = mat_exp(a, s + t);
    worst = std::max(worst, (e - mat_exp(a, s) * mat_exp(a, t)).norm() / std::max(1.0, e.norm()));
  }
  semi.check(worst <= 1e-10, "max relative deviation " + Criterion::fmt(worst));
  out.push_back(semi.report());

  Criterion care("property: CARE residual and continuous Lyapunov identity to 1e-8");
  for (PlantId id : kPlants) {
    const EnvSpec spec = make_env_spec(id);
    const RiccatiCert& c = spec.cert;
    const Matrix& a = spec.linear.a;
    const Matrix& b = spec.linear.b;
    const Matrix res = a.transpose() * c.p + c.p * a - c.p * b * c.r.inverse() * b.transpose() * c.p + c.q;
    const double rr = res.norm() / c.q.norm();
    care.check(rr <= 1e-8, std::string(to_string(id)) + " CARE residual " + Criterion::fmt(rr));
    const Matrix a_cl = a - b * c.k;
    const double lr = (a_cl.transpose() * c.p + c.p * a_cl + c.m_q).norm() / std::max(1.0, c.m_q.norm());
    care.check(lr <= 1e-8, std::string(to_string(id)) + " Lyapunov identity " + Criterion::fmt(lr));
  }
  out.push_back(care.report());

  Criterion dv("property: Delta V derivative identity to 1e-4 relative, 100 states x 4 plants");
  for (PlantId id : kPlants) {
    const EnvSpec spec = make_env_spec(id);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector x = gen.vec(spec.linear.state_dim(), 0.5);
      const DeltaVCheck d = delta_v_derivative_check(spec.cert, spec.linear, x, 1e-5);
      dv.check(std::abs(d.fd - d.exact) <= 1e-4 * std::abs(d.exact),
               std::string(to_string(id)) + " fd " + Criterion::fmt(d.fd) + " vs " + Criterion::fmt(d.exact));
    }
  }
  out.push_back(dv.report());

  Criterion sh("property: shield pass-through and override exactness");
  for (PlantId id : kPlants) {
    const EnvSpec spec = spec_with(id, ShieldMode::hard);
    const std::string name(to_string(id));
    for (int trial = 0; trial < 2000; ++trial) {
      const State x = random_state(gen, spec, 4.0);
      Input u(spec.input_dim());
      for (int i = 0; i < spec.input_dim(); ++i) {
        const double lim = spec.plant.u_limits()(i);
        u(i) = gen.uniform(-lim, lim);
      }
      const int idx = gen.integer(0, spec.grid.count - 1);
      const ShieldDecision d =
          shield_filter(spec.shield, spec.cert, spec.nominal, spec.linear, spec.grid, x, u, idx);
      const bool pred = predict_safety(spec.shield, spec.nominal, spec.linear, x, u, spec.grid.tau(idx)).violated;
      if (pred) {
        sh.check(d.fired && d.tau_index == 0 && d.u == backup_input(spec.cert, spec.linear.u_max, x),
                 name + " override not exact");
      } else {
        sh.check(!d.fired && d.tau_index == idx && d.u == u, name + " pass-through not exact");
      }
    }
  }
  out.push_back(sh.report());

  Criterion rw("property: reward decomposition exactness");
  Criterion det("property: bit-identical rerun determinism");
  for (PlantId id : kPlants) {
    const EnvSpec spec = spec_with(id, ShieldMode::hard);
    RandomPolicy pol;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const EpisodeTrace a = run_episode(spec, pol, seed);
      const EpisodeTrace b = run_episode(spec, pol, seed);
      for (const StepRecord& s : a.steps) {
        rw.check(s.reward.total ==
                     RewardTerms::sum(s.reward.stability, s.reward.communication, s.reward.safety, s.reward.terminal),
                 std::string(to_string(id)) + " step reward");
      }
      std::ostringstream sa, sb;
      write_trace_csv(sa, a);
      write_trace_csv(sb, b);
      det.check(sa.str() == sb.str() && a.sq_sum == b.sq_sum && a.length == b.length,
                std::string(to_string(id)) + " seed " + std::to_string(seed));
    }
  }
  out.push_back(rw.report());

  Criterion msi("property: MSI tracker stays within [tau_min, tau_max]");
  for (PlantId id : kPlants) {
    const TriggerGrid g = make_env_spec(id).grid;
    for (int run = 0; run < 50; ++run) {
      MsiTracker t(g.tau_min);
      for (int k = 0; k < 500; ++k) {
        t.update(g.tau(gen.integer(0, g.count - 1)));
        msi.check(t.value() >= g.tau_min - 1e-15 && t.value() <= g.tau_max() + 1e-15,
                  "value " + Criterion::fmt(t.value()));
      }
    }
  }
  out.push_back(msi.report());

  out.push_back(det.report());

  Criterion hard("property: hard shield gives zero hard violations on every B1/B3 evaluation");
  for (PlantId id : kPlants) {
    const EnvSpec spec = spec_with(id, ShieldMode::hard);
    for (const char* name : {"b1", "b3"}) {
      EvalConfig cfg;
      cfg.spec = &spec;
      cfg.policy = make_policy_factory(name);
      cfg.n_eval = 100;
      cfg.parallelism = workers();
      const Evaluation ev = evaluate(cfg);
      hard.check(ev.summary.hard_violation_pct == 0.0, std::string(to_string(id)) + " " + name + " " +
                                                           Criterion::fmt(ev.summary.hard_violation_pct) + "%");
    }
  }
  out.push_back(hard.report());
  return out;
}

}  // namespace

int main() {
  std::vector<bool> results;
  const std::vector<std::function<std::vector<bool>()>> groups{certificate_table, baselines, robustness, properties};
  for (const auto& g : groups) {
    try {
      for (bool ok : g()) results.push_back(ok);
    } catch (const std::exception& e) {
      std::cout << "FAIL criterion group aborted: " << e.what() << std::endl;
      results.push_back(false);
    }
  }
  const auto passed = std::count(results.begin(), results.end(), true);
  std::cout << passed << "/" << results.size() << " acceptance criteria passed" << std::endl;
  return passed == static_cast<long>(results.size()) ? 0 : 1;
}
