#include "stc/experiment_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "stc/errors.hpp"

namespace stc {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config: '" + key + "' must be an integer");
  return v.get<int>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config: '" + key + "' must be true or false");
  return v.get<bool>();
}

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("cannot parse " + what + " '" + text + "'");
}

}  // namespace

EnvOptions ExperimentConfig::env_options() const {
  EnvOptions o;
  o.shield = shield;
  o.w_c = w_c;
  o.mass_scale = mass_scale;
  o.disturbance = disturbance;
  o.domain_randomization = domain_randomization;
  o.tau_min = tau_min;
  o.grid_count = grid_count;
  o.t_max = t_max;
  o.l_delta = l_delta;
  o.params = params;
  return o;
}

ExperimentConfig parse_experiment_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(doc,
                 {"plant", "policy", "bridge", "shield", "w_c", "grid", "t_max", "l_delta",
                  "mass_scale", "domain_randomization", "disturbance", "params", "seed", "n_eval",
                  "parallelism", "out_dir", "traces"},
                 "config");
  ExperimentConfig c;
  if (doc.contains("plant")) c.plant = parse_plant_id(get_string(doc["plant"], "plant"));
  if (doc.contains("policy")) c.policy = get_string(doc["policy"], "policy");
  if (doc.contains("bridge")) {
    const json& b = doc["bridge"];
    if (!b.is_object()) throw ConfigError("config: 'bridge' must be an object");
    reject_unknown(b, {"command", "timeout_ms"}, "config.bridge");
    if (b.contains("command")) {
      if (!b["command"].is_array()) throw ConfigError("config: 'bridge.command' must be an array");
      for (const json& a : b["command"]) c.bridge_command.push_back(get_string(a, "bridge.command"));
    }
    if (b.contains("timeout_ms")) c.bridge_timeout_ms = get_int(b["timeout_ms"], "bridge.timeout_ms");
  }
  if (doc.contains("shield")) c.shield = parse_shield_mode(get_string(doc["shield"], "shield"));
  if (doc.contains("w_c")) c.w_c = get_number(doc["w_c"], "w_c");
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    if (!g.is_object()) throw ConfigError("config: 'grid' must be an object");
    reject_unknown(g, {"tau_min", "count"}, "config.grid");
    if (g.contains("tau_min")) c.tau_min = get_number(g["tau_min"], "grid.tau_min");
    if (g.contains("count")) c.grid_count = get_int(g["count"], "grid.count");
  }
  if (doc.contains("t_max")) c.t_max = get_number(doc["t_max"], "t_max");
  if (doc.contains("l_delta")) c.l_delta = get_number(doc["l_delta"], "l_delta");
  if (doc.contains("mass_scale")) c.mass_scale = get_number(doc["mass_scale"], "mass_scale");
  if (doc.contains("domain_randomization")) {
    c.domain_randomization = get_bool(doc["domain_randomization"], "domain_randomization");
  }
  if (doc.contains("disturbance")) {
    const json& d = doc["disturbance"];
    if (!d.is_object()) throw ConfigError("config: 'disturbance' must be an object");
    reject_unknown(d, {"kind", "amplitude", "frequency", "probability", "channel"},
                   "config.disturbance");
    if (d.contains("kind")) c.disturbance.kind = parse_disturbance_kind(get_string(d["kind"], "disturbance.kind"));
    if (d.contains("amplitude")) c.disturbance.amplitude = get_number(d["amplitude"], "disturbance.amplitude");
    if (d.contains("frequency")) c.disturbance.frequency = get_number(d["frequency"], "disturbance.frequency");
    if (d.contains("probability")) {
      c.disturbance.probability = get_number(d["probability"], "disturbance.probability");
    }
    if (d.contains("channel")) c.disturbance.channel = get_int(d["channel"], "disturbance.channel");
  }
  if (doc.contains("params")) {
    if (!doc["params"].is_object()) throw ConfigError("config: 'params' must be an object");
    for (const auto& [k, v] : doc["params"].items()) c.params[k] = get_number(v, "params." + k);
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("config: 'seed' must be a non-negative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("n_eval")) c.n_eval = get_int(doc["n_eval"], "n_eval");
  if (doc.contains("parallelism")) c.parallelism = get_int(doc["parallelism"], "parallelism");
  if (doc.contains("out_dir")) c.out_dir = get_string(doc["out_dir"], "out_dir");
  if (doc.contains("traces")) c.traces = parse_trace_retention(get_string(doc["traces"], "traces"));

  if (c.n_eval < 1) throw ConfigError("config: n_eval must be >= 1");
  if (c.parallelism < 1) throw ConfigError("config: parallelism must be >= 1");
  if (c.bridge_timeout_ms < 1) throw ConfigError("config: bridge.timeout_ms must be >= 1");
  if (c.policy == "bridge") {
    if (c.bridge_command.empty()) throw ConfigError("config: policy 'bridge' needs bridge.command");
  } else {
    make_policy_factory(c.policy);  // validates the name
  }
  // Parameter names and ranges are validated against the plant here.
  PlantModel probe = PlantModel::make(c.plant);
  for (const auto& [k, v] : c.params) probe.set_param(k, v);
  c.disturbance.validate(probe.input_dim());
  if (!(c.mass_scale > 0.0)) throw ConfigError("config: mass_scale must be > 0");
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_experiment_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json grid = json::object();
  if (c.tau_min) grid["tau_min"] = *c.tau_min;
  if (c.grid_count) grid["count"] = *c.grid_count;
  json doc{{"plant", std::string(to_string(c.plant))},
           {"policy", c.policy},
           {"bridge", {{"command", c.bridge_command}, {"timeout_ms", c.bridge_timeout_ms}}},
           {"shield", std::string(to_string(c.shield))},
           {"w_c", c.w_c},
           {"grid", grid},
           {"mass_scale", c.mass_scale},
           {"domain_randomization", c.domain_randomization},
           {"disturbance",
            {{"kind", std::string(to_string(c.disturbance.kind))},
             {"amplitude", c.disturbance.amplitude},
             {"frequency", c.disturbance.frequency},
             {"probability", c.disturbance.probability},
             {"channel", c.disturbance.channel}}},
           {"params", c.params},
           {"seed", c.seed},
           {"n_eval", c.n_eval},
           {"parallelism", c.parallelism},
           {"out_dir", c.out_dir},
           {"traces", std::string(to_string(c.traces))}};
  if (c.t_max) doc["t_max"] = *c.t_max;
  if (c.l_delta) doc["l_delta"] = *c.l_delta;
  return doc;
}

void apply_env_overrides(ExperimentConfig& config,
                         const std::function<const char*(const char*)>& getenv) {
  if (const char* out = getenv("STCLAB_OUT_DIR"); out != nullptr && *out != '\0') {
    config.out_dir = out;
  }
  if (const char* par = getenv("STCLAB_PARALLELISM"); par != nullptr && *par != '\0') {
    const double v = parse_double(par, "STCLAB_PARALLELISM");
    if (v < 1 || v != static_cast<int>(v)) throw ConfigError("STCLAB_PARALLELISM must be a positive integer");
    config.parallelism = static_cast<int>(v);
  }
}

DisturbanceSpec parse_disturbance_arg(const std::string& text) {
  DisturbanceSpec d;
  std::string body = text;
  if (const auto at = body.find('@'); at != std::string::npos) {
    const double ch = parse_double(body.substr(at + 1), "disturbance channel");
    if (ch < 0 || ch != static_cast<int>(ch)) throw ConfigError("disturbance channel must be a non-negative integer");
    d.channel = static_cast<int>(ch);
    body = body.substr(0, at);
  }
  std::vector<std::string> parts;
  std::stringstream ss(body);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty disturbance specification");
  d.kind = parse_disturbance_kind(parts[0]);
  const std::size_t expected_min = d.kind == DisturbanceKind::none ? 1 : d.kind == DisturbanceKind::periodic ? 3 : 2;
  const std::size_t expected_max = d.kind == DisturbanceKind::impulse ? 3 : expected_min;
  if (parts.size() < expected_min || parts.size() > expected_max) {
    throw ConfigError("disturbance '" + text +
                      "': expected none, constant:A, periodic:A:F or impulse:A[:P]");
  }
  if (parts.size() > 1) d.amplitude = parse_double(parts[1], "disturbance amplitude");
  if (d.kind == DisturbanceKind::periodic) d.frequency = parse_double(parts[2], "disturbance frequency");
  if (d.kind == DisturbanceKind::impulse && parts.size() == 3) {
    d.probability = parse_double(parts[2], "impulse probability");
  }
  return d;
}

}  // namespace stc
