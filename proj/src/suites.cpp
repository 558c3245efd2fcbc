#include "stc/suites.hpp"

#include <cmath>
#include <sstream>

#include "stc/errors.hpp"

namespace stc {
namespace {

using nlohmann::json;

json cell_json(const EnvSpec& spec, std::string_view policy, const MetricsSummary& m,
               double failure_length) {
  json j{{"plant", std::string(to_string(spec.plant.id()))},
         {"policy", std::string(policy)},
         {"shield", std::string(to_string(spec.shield.mode))},
         {"tau_min", spec.grid.tau_min},
         {"mass_scale", spec.plant.mass_scale()},
         {"domain_randomization", spec.domain_randomization},
         {"disturbance",
          {{"kind", std::string(to_string(spec.disturbance.kind))},
           {"amplitude", spec.disturbance.amplitude},
           {"frequency", spec.disturbance.frequency}}},
         {"metrics", to_json(m, state_names(spec.plant.id()))}};
  if (failure_length > 0.0) j["failed"] = m.length.mean < failure_length;
  return j;
}

struct Runner {
  const SuiteSpec& suite;
  json cells = json::object();

  void cell(const std::string& key, PlantId plant, const EnvOptions& options,
            std::string_view policy, double failure_length) {
    try {
      const EnvSpec spec = make_env_spec(plant, options);
      EvalConfig cfg;
      cfg.spec = &spec;
      cfg.policy = make_policy_factory(policy);
      cfg.n_eval = suite.n_eval;
      cfg.base_seed = suite.base_seed;
      cfg.parallelism = suite.parallelism;
      const Evaluation ev = evaluate(cfg);
      cells[key] = cell_json(spec, policy, ev.summary, failure_length);
    } catch (const std::exception& e) {
      cells[key] = json{{"error", e.what()}};
    }
  }
};

EnvOptions with_shield(ShieldMode mode, double w_c) {
  EnvOptions o;
  o.shield = mode;
  o.w_c = w_c;
  return o;
}

std::string tau_label(double tau) {
  std::ostringstream os;
  os << tau;
  return os.str();
}

}  // namespace

std::string_view to_string(SuiteId id) {
  switch (id) {
    case SuiteId::verify:
      return "verify";
    case SuiteId::baselines:
      return "baselines";
    case SuiteId::ablation_a:
      return "ablation_a";
    case SuiteId::ablation_b:
      return "ablation_b";
    case SuiteId::robustness_mass:
      return "robustness_mass";
    case SuiteId::robustness_disturbance:
      return "robustness_disturbance";
  }
  return "unknown";
}

SuiteId parse_suite_id(std::string_view name) {
  for (SuiteId id : {SuiteId::verify, SuiteId::baselines, SuiteId::ablation_a, SuiteId::ablation_b,
                     SuiteId::robustness_mass, SuiteId::robustness_disturbance}) {
    if (to_string(id) == name) return id;
  }
  throw ConfigError("unknown suite '" + std::string(name) + "'");
}

std::vector<PlantId> default_plants(SuiteId id) {
  if (id == SuiteId::robustness_mass || id == SuiteId::robustness_disturbance) {
    return {PlantId::pendulum, PlantId::cartpole, PlantId::quadrotor2d};
  }
  return all_plants();
}

std::vector<DisturbanceCondition> disturbance_grid(PlantId id) {
  // {constant lo, constant hi, periodic lo (1 Hz), periodic hi (2 Hz), impulse lo, impulse hi}
  double a[6] = {};
  switch (id) {
    case PlantId::pendulum:
      a[0] = 0.2, a[1] = 0.5, a[2] = 0.3, a[3] = 0.5, a[4] = 0.5, a[5] = 1.0;
      break;
    case PlantId::cartpole:
      a[0] = 1.0, a[1] = 2.0, a[2] = 1.5, a[3] = 2.5, a[4] = 2.0, a[5] = 4.0;
      break;
    case PlantId::quadrotor2d:
    case PlantId::quadrotor3d:
      a[0] = 0.5, a[1] = 1.0, a[2] = 0.8, a[3] = 1.5, a[4] = 1.0, a[5] = 2.0;
      break;
  }
  auto make = [](DisturbanceKind kind, double amp, double freq) {
    DisturbanceSpec d;
    d.kind = kind;
    d.amplitude = amp;
    d.frequency = freq;
    return d;
  };
  return {{"none", DisturbanceSpec{}},
          {"constant_lo", make(DisturbanceKind::constant, a[0], 0.0)},
          {"constant_hi", make(DisturbanceKind::constant, a[1], 0.0)},
          {"periodic_lo", make(DisturbanceKind::periodic, a[2], 1.0)},
          {"periodic_hi", make(DisturbanceKind::periodic, a[3], 2.0)},
          {"impulse_lo", make(DisturbanceKind::impulse, a[4], 0.0)},
          {"impulse_hi", make(DisturbanceKind::impulse, a[5], 0.0)}};
}

json run_suite(const SuiteSpec& suite) {
  if (suite.n_eval < 1) throw ConfigError("suite: n_eval must be >= 1");
  const std::vector<PlantId> plants = suite.plants.empty() ? default_plants(suite.id) : suite.plants;
  Runner run{suite};

  for (PlantId plant : plants) {
    const std::string p(to_string(plant));
    switch (suite.id) {
      case SuiteId::verify:
        try {
          const EnvSpec spec = make_env_spec(plant);
          run.cells[p] = to_json(build_cert_report(spec), spec);
        } catch (const std::exception& e) {
          run.cells[p] = json{{"error", e.what()}};
        }
        break;
      case SuiteId::baselines: {
        // Baselines run unshielded; the +hard cells repeat B1/B3 behind the
        // hard shield to measure executed-trajectory violations.
        const EnvOptions off = with_shield(ShieldMode::off, suite.w_c);
        const EnvOptions hard = with_shield(ShieldMode::hard, suite.w_c);
        run.cell(p + "/B1", plant, off, "b1", 3.0);
        run.cell(p + "/B2", plant, off, "b2", 3.0);
        run.cell(p + "/B3", plant, off, "b3", 3.0);
        run.cell(p + "/B1+hard", plant, hard, "b1", 3.0);
        run.cell(p + "/B3+hard", plant, hard, "b3", 3.0);
        break;
      }
      case SuiteId::ablation_a: {
        // Fixed-rate LQR at the matched interval, with and without the shield.
        const std::string policy = "lqr@" + tau_label(make_env_spec(plant).tau_match);
        for (ShieldMode mode : {ShieldMode::hard, ShieldMode::soft, ShieldMode::off}) {
          run.cell(p + "/shield=" + std::string(to_string(mode)), plant,
                   with_shield(mode, suite.w_c), policy, 3.0);
        }
        break;
      }
      case SuiteId::ablation_b: {
        const EnvOptions hard = with_shield(ShieldMode::hard, suite.w_c);
        const std::string policy = "fixed_b3@" + tau_label(make_env_spec(plant).tau_match);
        run.cell(p + "/fixed_tau", plant, hard, policy, 3.0);
        run.cell(p + "/adaptive", plant, hard, "b3", 3.0);
        break;
      }
      case SuiteId::robustness_mass: {
        for (const char* policy : {"b2", "b3"}) {
          for (double scale : suite.mass_scales) {
            EnvOptions o = with_shield(ShieldMode::off, suite.w_c);
            o.mass_scale = scale;
            run.cell(p + "/" + (policy == std::string("b2") ? "B2" : "B3") + "/mass=" +
                         tau_label(scale),
                     plant, o, policy, 5.0);
          }
        }
        if (suite.domain_randomization) {
          EnvOptions o = with_shield(ShieldMode::off, suite.w_c);
          o.domain_randomization = true;
          run.cell(p + "/B3/dr", plant, o, "b3", 5.0);
        }
        break;
      }
      case SuiteId::robustness_disturbance:
        for (const DisturbanceCondition& c : disturbance_grid(plant)) {
          EnvOptions o = with_shield(ShieldMode::off, suite.w_c);
          o.disturbance = c.spec;
          run.cell(p + "/B3/" + c.name, plant, o, "b3", 5.0);
        }
        break;
    }
  }

  return json{{"suite", std::string(to_string(suite.id))},
              {"n_eval", suite.n_eval},
              {"base_seed", suite.base_seed},
              {"cells", run.cells}};
}

const json* find_path(const json& root, std::string_view path) {
  const json* node = &root;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string key(path.substr(start, dot == std::string_view::npos ? std::string_view::npos
                                                                           : dot - start));
    if (node->is_array()) {
      // Numeric segments index arrays, e.g. "K.0.1".
      if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos) return nullptr;
      const std::size_t i = std::stoul(key);
      if (i >= node->size()) return nullptr;
      node = &(*node)[i];
    } else if (node->is_object()) {
      const auto it = node->find(key);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else {
      return nullptr;
    }
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return node;
}

std::vector<CheckOutcome> compare_report(const std::vector<json>& reports, const json& reference,
                                         bool only_present) {
  if (!reference.is_object() || !reference.contains("entries") || !reference["entries"].is_array()) {
    throw ConfigError("reference document needs an 'entries' array");
  }
  std::vector<CheckOutcome> out;
  std::size_t index = 0;
  for (const json& e : reference["entries"]) {
    const std::string where = "reference entry " + std::to_string(index++);
    for (const char* key : {"suite", "cell", "metric", "op"}) {
      if (!e.contains(key) || !e[key].is_string()) {
        throw ConfigError(where + ": field '" + key + "' must be a string");
      }
    }
    CheckOutcome c;
    c.suite = e["suite"].get<std::string>();
    c.cell = e["cell"].get<std::string>();
    c.metric = e["metric"].get<std::string>();
    c.op = e["op"].get<std::string>();
    c.source = e.value("source", "");

    const json* report = nullptr;
    for (const json& r : reports) {
      if (r.value("suite", "") == c.suite) report = &r;
    }
    if (report == nullptr) continue;
    const auto cells = report->find("cells");
    if (cells == report->end() || !cells->contains(c.cell)) {
      if (only_present) continue;
      throw ConfigError(where + ": cell '" + c.cell + "' missing from the " + c.suite + " report");
    }
    const json* value = find_path((*cells)[c.cell], c.metric);
    if (value == nullptr) {
      throw ConfigError(where + ": metric '" + c.metric + "' missing from cell '" + c.cell + "'");
    }

    auto number = [&](const char* key) {
      if (!e.contains(key) || !e[key].is_number()) {
        throw ConfigError(where + ": op '" + c.op + "' needs a numeric '" + key + "'");
      }
      return e[key].get<double>();
    };

    if (c.op == "eq" && value->is_boolean()) {
      if (!e.contains("expected") || !e["expected"].is_boolean()) {
        throw ConfigError(where + ": boolean metric needs a boolean 'expected'");
      }
      c.observed = value->get<bool>() ? 1.0 : 0.0;
      c.expected = e["expected"].dump();
      c.pass = value->get<bool>() == e["expected"].get<bool>();
      out.push_back(c);
      continue;
    }
    if (!value->is_number()) {
      throw ConfigError(where + ": metric '" + c.metric + "' is not numeric");
    }
    const double obs = value->get<double>();
    c.observed = obs;
    std::ostringstream exp;
    if (c.op == "near" || c.op == "rel") {
      const double x = number("expected");
      const double tol = number("tol");
      if (tol < 0.0) throw ConfigError(where + ": negative tolerance");
      const double bound = c.op == "near" ? tol : tol * std::abs(x);
      c.pass = std::abs(obs - x) <= bound;
      exp << x << (c.op == "near" ? " +/- " : " +/- rel ") << tol;
    } else if (c.op == "lt" || c.op == "le" || c.op == "gt" || c.op == "ge" || c.op == "eq") {
      const double x = number("expected");
      c.pass = c.op == "lt"   ? obs < x
               : c.op == "le" ? obs <= x
               : c.op == "gt" ? obs > x
               : c.op == "ge" ? obs >= x
                              : obs == x;
      exp << c.op << ' ' << x;
    } else if (c.op == "between") {
      if (!e.contains("range") || !e["range"].is_array() || e["range"].size() != 2 ||
          !e["range"][0].is_number() || !e["range"][1].is_number()) {
        throw ConfigError(where + ": 'between' needs a numeric [lo, hi] 'range'");
      }
      const double lo = e["range"][0].get<double>();
      const double hi = e["range"][1].get<double>();
      c.pass = obs >= lo && obs <= hi;
      exp << '[' << lo << ", " << hi << ']';
    } else {
      throw ConfigError(where + ": unknown op '" + c.op + "'");
    }
    c.expected = exp.str();
    out.push_back(c);
  }
  return out;
}

}  // namespace stc
