// stclab: certificate verification, evaluation, experiment suites and the
// environment server for external policies.
//
// Exit codes: 0 success, 1 verification or regression-gate failure,
// 2 usage or configuration error, 3 I/O error, 4 runtime error.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stc/bridge.hpp"
#include "stc/errors.hpp"
#include "stc/experiment_config.hpp"
#include "stc/suites.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stc;

namespace {

constexpr int kOk = 0;
constexpr int kGateFailed = 1;
constexpr int kUsage = 2;
constexpr int kIo = 3;
constexpr int kRuntime = 4;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#ifndef STCLAB_DATA_DIR
#define STCLAB_DATA_DIR "data"
#endif

std::string default_reference() { return std::string(STCLAB_DATA_DIR) + "/reference_values.json"; }

json envelope(double elapsed) {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return {{"generated_at", buf}, {"elapsed_s", elapsed}};
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("write to " + path.string() + " failed");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// Flags shared by eval and serve-env; each overrides the config file.
struct RunFlags {
  std::string config;
  std::optional<std::string> plant, policy, shield, out, traces, disturbance;
  std::optional<double> wc, mass_scale;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_eval, parallelism;
  bool dr = false;
  std::vector<std::string> bridge_cmd;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Experiment config JSON file");
    app->add_option("--plant", plant, "pendulum | cartpole | quadrotor2d | quadrotor3d");
    app->add_option("--policy", policy,
                    "b1 | b2 | b3 | random | zero | lqr@<tau> | fixed_b3@<tau> | bridge");
    app->add_option("--shield", shield, "Shield mode: hard | soft | off");
    app->add_option("--wc", wc, "Communication reward weight w_c (>= 0)");
    app->add_option("--seed", seed, "Base seed; episode i uses seed + i");
    app->add_option("--n-eval", n_eval, "Number of episodes");
    app->add_option("--parallelism", parallelism, "Worker threads");
    app->add_option("--out", out, "Output directory");
    app->add_option("--traces", traces, "Trace retention: none | summary | full");
    app->add_option("--mass-scale", mass_scale, "Plant mass multiplier (certificate stays nominal)");
    app->add_option("--disturbance", disturbance,
                    "none | constant:A | periodic:A:F | impulse:A[:P], optional @channel");
    app->add_flag("--dr", dr, "Domain randomization: mass ~ U[0.6, 1.4] per episode");
    app->add_option("--bridge-cmd", bridge_cmd,
                    "Command of the external policy process (with --policy bridge)")
        ->expected(1, -1);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config.empty()) c = load_experiment_config(config);
    json doc = to_json(c);
    if (plant) doc["plant"] = *plant;
    if (policy) doc["policy"] = *policy;
    if (shield) doc["shield"] = *shield;
    if (wc) doc["w_c"] = *wc;
    if (seed) doc["seed"] = *seed;
    if (n_eval) doc["n_eval"] = *n_eval;
    if (parallelism) doc["parallelism"] = *parallelism;
    if (out) doc["out_dir"] = *out;
    if (traces) doc["traces"] = *traces;
    if (mass_scale) doc["mass_scale"] = *mass_scale;
    if (dr) doc["domain_randomization"] = true;
    if (!bridge_cmd.empty()) doc["bridge"]["command"] = bridge_cmd;
    if (disturbance) {
      const DisturbanceSpec d = parse_disturbance_arg(*disturbance);
      doc["disturbance"] = {{"kind", std::string(to_string(d.kind))},
                            {"amplitude", d.amplitude},
                            {"frequency", d.frequency},
                            {"probability", d.probability},
                            {"channel", d.channel}};
    }
    ExperimentConfig resolved = parse_experiment_config(doc);
    apply_env_overrides(resolved, [](const char* name) { return std::getenv(name); });
    return resolved;
  }
};

PolicyFactory factory_for(const ExperimentConfig& c) {
  if (c.policy != "bridge") return make_policy_factory(c.policy);
  BridgeOptions options;
  options.timeout = std::chrono::milliseconds(c.bridge_timeout_ms);
  const std::vector<std::string> cmd = c.bridge_command;
  return [cmd, options](const EnvSpec& spec) -> std::unique_ptr<Policy> {
    return std::make_unique<ChildBridgePolicy>(cmd, spec, options);
  };
}

void print_cert_table(const json& cells) {
  std::cout << std::left << std::setw(12) << "plant" << std::right << std::setw(10) << "lambda"
            << std::setw(10) << "V_scale" << std::setw(10) << "lmin(MQ)" << std::setw(10)
            << "lmax(P)" << std::setw(9) << "th_sat" << std::setw(9) << "th_RTA" << std::setw(10)
            << "Mdisc" << std::setw(8) << "r*" << std::setw(10) << "tau_c" << std::setw(9)
            << "rho" << '\n';
  std::cout << std::fixed;
  for (const auto& [plant, c] : cells.items()) {
    if (c.contains("error")) {
      std::cout << std::left << std::setw(12) << plant << " error: " << c["error"].get<std::string>()
                << '\n';
      continue;
    }
    std::cout << std::left << std::setw(12) << plant << std::right << std::setprecision(4)
              << std::setw(10) << c["lambda"].get<double>() << std::setw(10)
              << c["v_scale"].get<double>() << std::setw(10) << c["lambda_min_mq"].get<double>()
              << std::setw(10) << c["lambda_max_p"].get<double>() << std::setprecision(2)
              << std::setw(9) << c["theta_sat_deg"].get<double>() << std::setw(9)
              << c["theta_rta_deg"].get<double>();
    std::ostringstream mdisc;
    if (c["mdisc_certified"].get<bool>()) {
      mdisc << std::fixed << std::setprecision(4) << c["lambda_min_mdisc"].get<double>();
    } else {
      mdisc << "--";
    }
    std::cout << std::setw(10) << mdisc.str() << std::setprecision(3) << std::setw(8)
              << c["r_star"].get<double>();
    std::ostringstream tc;
    if (c["tau_critical"].is_null()) {
      tc << "none";
    } else {
      tc << std::fixed << std::setprecision(4) << c["tau_critical"].get<double>();
    }
    std::cout << std::setw(10) << tc.str() << std::setprecision(3) << std::setw(9)
              << c["spectral_radius_tau_min"].get<double>() << '\n';
  }
  std::cout.unsetf(std::ios::fixed);
}

void print_cells(const json& report) {
  for (const auto& [key, c] : report["cells"].items()) {
    if (c.contains("error")) {
      std::cout << "  " << std::left << std::setw(36) << key << " error: " << c["error"].get<std::string>()
                << '\n';
      continue;
    }
    if (!c.contains("metrics")) continue;
    const json& m = c["metrics"];
    std::cout << "  " << std::left << std::setw(36) << key << std::right << std::fixed
              << std::setprecision(3) << " MSI " << m["msi"]["mean"].get<double>() << " +/- "
              << m["msi"]["std"].get<double>() << "  RTA% " << std::setprecision(2)
              << m["rta_pct"]["mean"].get<double>() << "  len " << m["length"]["mean"].get<double>()
              << " s" << (c.value("failed", false) ? "  [failed]" : "") << '\n';
  }
  std::cout.unsetf(std::ios::fixed);
}

int report_gate(const std::vector<CheckOutcome>& checks) {
  int failures = 0;
  for (const CheckOutcome& c : checks) {
    if (!c.pass) ++failures;
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.suite << " " << c.cell << " " << c.metric
              << " observed " << c.observed << " expected " << c.expected
              << (c.source.empty() ? "" : " (" + c.source + ")") << '\n';
  }
  std::cout << checks.size() - failures << "/" << checks.size() << " reference checks passed\n";
  return failures == 0 ? kOk : kGateFailed;
}

// --- subcommands ------------------------------------------------------------

int cmd_verify(const std::vector<std::string>& plant_names, const std::string& out,
               const std::string& reference, bool gate) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteSpec suite;
  suite.id = SuiteId::verify;
  for (const std::string& p : plant_names) suite.plants.push_back(parse_plant_id(p));
  const json report = run_suite(suite);
  print_cert_table(report["cells"]);

  int status = kOk;
  for (const auto& [plant, c] : report["cells"].items()) {
    if (c.contains("error")) {
      std::cerr << plant << ": " << c["error"].get<std::string>() << '\n';
      status = kGateFailed;
    } else if (c["mdisc_expected_certified"].get<bool>() && !c["mdisc_certified"].get<bool>()) {
      std::cerr << plant << ": backup is expected to be certified at tau_min but M_disc is not PSD\n";
      status = kGateFailed;
    } else if (!c["mdisc_expected_certified"].get<bool>() && !c["mdisc_certified"].get<bool>()) {
      std::cout << plant << ": held backup not Lyapunov-decreasing at tau_min (expected)\n";
    }
  }
  if (gate && !reference.empty()) {
    if (report_gate(compare_report({report}, read_json(reference))) != kOk) status = kGateFailed;
  }
  if (!out.empty()) {
    json doc = report;
    doc["envelope"] = envelope(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    write_file(out, doc.dump(2) + "\n");
  }
  return status;
}

int cmd_eval(const RunFlags& flags) {
  const ExperimentConfig cfg = flags.resolve();
  const auto t0 = std::chrono::steady_clock::now();
  const EnvSpec spec = make_env_spec(cfg.plant, cfg.env_options());
  EvalConfig ec;
  ec.spec = &spec;
  ec.policy = factory_for(cfg);
  ec.n_eval = cfg.n_eval;
  ec.base_seed = cfg.seed;
  // A bridge peer serves one episode stream at a time.
  ec.parallelism = cfg.policy == "bridge" ? 1 : cfg.parallelism;
  ec.retention = cfg.traces;
  const Evaluation ev = evaluate(ec);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out(cfg.out_dir);
  json summary{{"config", to_json(cfg)},
               {"metrics", to_json(ev.summary, state_names(cfg.plant))},
               {"envelope", envelope(elapsed)}};
  write_file(out / "summary.json", summary.dump(2) + "\n");
  if (cfg.traces != TraceRetention::none) {
    json eps = json::array();
    for (const EpisodeSummary& e : ev.episodes) eps.push_back(to_json(e));
    write_file(out / "episodes.json", eps.dump(2) + "\n");
  }
  for (const EpisodeTrace& t : ev.traces) {
    std::ostringstream csv;
    write_trace_csv(csv, t);
    char name[32];
    std::snprintf(name, sizeof(name), "episode_%04d.csv", t.episode);
    write_file(out / "traces" / name, csv.str());
  }

  const MetricsSummary& m = ev.summary;
  std::cout << to_string(cfg.plant) << " policy=" << cfg.policy << " shield=" << to_string(cfg.shield)
            << " episodes=" << m.episodes << "\n  MSI " << m.msi.mean << " +/- " << m.msi.std
            << "  RTA% " << m.rta_pct.mean << "  hard-violation% " << m.hard_violation_pct
            << "  length " << m.length.mean << " s  degraded " << m.degraded << "\n  wrote "
            << (out / "summary.json").string() << '\n';
  return kOk;
}

int cmd_suite(const std::string& name, const std::vector<std::string>& plant_names, int n_eval,
              std::uint64_t seed, std::optional<int> parallelism, const std::string& out,
              const std::string& reference, bool no_gate) {
  SuiteSpec suite;
  suite.id = parse_suite_id(name);
  for (const std::string& p : plant_names) suite.plants.push_back(parse_plant_id(p));
  suite.n_eval = n_eval;
  suite.base_seed = seed;
  ExperimentConfig env_cfg;
  if (parallelism) env_cfg.parallelism = *parallelism;
  apply_env_overrides(env_cfg, [](const char* v) { return std::getenv(v); });
  suite.parallelism = env_cfg.parallelism;

  const auto t0 = std::chrono::steady_clock::now();
  const json report = run_suite(suite);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (suite.id == SuiteId::verify) {
    print_cert_table(report["cells"]);
  } else {
    std::cout << "suite " << name << " (" << suite.n_eval << " episodes per cell, " << std::fixed
              << std::setprecision(1) << elapsed << " s)\n";
    std::cout.unsetf(std::ios::fixed);
    print_cells(report);
  }

  const fs::path path = out.empty() ? fs::path(env_cfg.out_dir) / (name + ".json") : fs::path(out);
  json doc = report;
  doc["envelope"] = envelope(elapsed);
  write_file(path, doc.dump(2) + "\n");
  std::cout << "wrote " << path.string() << '\n';

  if (no_gate) return kOk;
  return report_gate(compare_report({report}, read_json(reference)));
}

int cmd_serve(const RunFlags& flags, std::optional<int> port, int max_connections) {
  const ExperimentConfig cfg = flags.resolve();
  const EnvSpec spec = make_env_spec(cfg.plant, cfg.env_options());
  BridgeOptions options;
  options.timeout = std::chrono::milliseconds(cfg.bridge_timeout_ms);
  if (!port) {
    FdTransport transport(STDIN_FILENO, STDOUT_FILENO, false);
    const ServeStats stats = serve_connection(spec, transport, options, &std::cerr);
    std::cerr << "serve-env: " << stats.episodes << " episodes, " << stats.faults << " faults\n";
    return kOk;
  }
  serve_tcp(
      spec, *port, options, max_connections,
      [](int bound) { std::cerr << "serve-env: listening on 127.0.0.1:" << bound << std::endl; },
      &std::cerr);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stclab: self-triggered control lab (certificates, baselines, robustness, bridge)"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 1 verification/gate failure, 2 usage or config error, 3 I/O error, "
      "4 runtime error.\nEnvironment: STCLAB_OUT_DIR, STCLAB_PARALLELISM override the output "
      "directory and worker count.");

  std::vector<std::string> verify_plants;
  std::string verify_out;
  std::string verify_reference;
  auto* verify = app.add_subcommand("verify", "Certificate table for each plant");
  verify->add_option("--plant", verify_plants, "Plant(s); default all four");
  verify->add_option("--out", verify_out, "Write the JSON report here");
  verify->add_option("--reference", verify_reference, "Also gate against this reference document");

  RunFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Evaluate one policy on one plant");
  eval_flags.add(eval);

  std::string suite_name;
  std::vector<std::string> suite_plants;
  int suite_n_eval = 100;
  std::uint64_t suite_seed = 0;
  std::optional<int> suite_parallelism;
  std::string suite_out;
  std::string suite_reference = default_reference();
  bool no_gate = false;
  auto* suite = app.add_subcommand("suite", "Run an experiment suite and gate it against reference values");
  suite->add_option("name", suite_name,
                    "verify | baselines | ablation_a | ablation_b | robustness_mass | "
                    "robustness_disturbance")
      ->required();
  suite->add_option("--plant", suite_plants, "Restrict to these plants");
  suite->add_option("--n-eval", suite_n_eval, "Episodes per cell");
  suite->add_option("--seed", suite_seed, "Base seed");
  suite->add_option("--parallelism", suite_parallelism, "Worker threads");
  suite->add_option("--out", suite_out, "Report path (default <out_dir>/<suite>.json)");
  suite->add_option("--reference", suite_reference, "Reference-values document");
  suite->add_flag("--no-gate", no_gate, "Skip the regression gate");

  RunFlags serve_flags;
  std::optional<int> port;
  int max_connections = 0;
  auto* serve = app.add_subcommand("serve-env", "Serve the environment over the JSON-lines bridge");
  serve_flags.add(serve);
  serve->add_option("--port", port, "Listen on 127.0.0.1:<port> instead of stdio (0 picks a port)");
  serve->add_option("--max-connections", max_connections, "Exit after this many connections (0 = unlimited)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*verify) return cmd_verify(verify_plants, verify_out, verify_reference, !verify_reference.empty());
    if (*eval) return cmd_eval(eval_flags);
    if (*suite) {
      return cmd_suite(suite_name, suite_plants, suite_n_eval, suite_seed, suite_parallelism, suite_out,
                       suite_reference, no_gate);
    }
    if (*serve) return cmd_serve(serve_flags, port, max_connections);
  } catch (const ConfigError& e) {
    std::cerr << "stclab: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "stclab: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "stclab: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
