#include "stc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include "stc/errors.hpp"

namespace stc {

std::string_view to_string(TraceRetention r) {
  switch (r) {
    case TraceRetention::none:
      return "none";
    case TraceRetention::summary:
      return "summary";
    case TraceRetention::full:
      return "full";
  }
  return "unknown";
}

TraceRetention parse_trace_retention(std::string_view name) {
  if (name == "none") return TraceRetention::none;
  if (name == "summary") return TraceRetention::summary;
  if (name == "full") return TraceRetention::full;
  throw ConfigError("unknown trace level '" + std::string(name) + "' (expected none, summary, full)");
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  const double shift = values.front();
  double acc = 0.0;
  for (double v : values) acc += v - shift;
  out.mean = shift + acc / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(values.size()));
  return out;
}

EpisodeSummary summarize(const EpisodeTrace& trace) {
  EpisodeSummary s;
  s.episode = trace.episode;
  s.seed = trace.seed;
  s.mass_scale = trace.mass_scale;
  s.msi = mean_executed_tau(trace);
  s.msi_tracker = trace.msi_tracker_final;
  s.state_norms = state_norms(trace);
  s.length = trace.length;
  s.decisions = static_cast<int>(trace.steps.size());
  s.cause = trace.cause;
  int fired = 0;
  int hard = 0;
  int predicate = 0;
  for (const StepRecord& r : trace.steps) {
    fired += r.fired ? 1 : 0;
    hard += r.hard_violation ? 1 : 0;
    predicate += r.predicate ? 1 : 0;
    s.total_reward += r.reward.total;
  }
  if (!trace.steps.empty()) {
    const double n = static_cast<double>(trace.steps.size());
    s.rta_pct = 100.0 * fired / n;
    s.hard_violation_pct = 100.0 * hard / n;
    s.predicate_pct = 100.0 * predicate / n;
  }
  return s;
}

MetricsSummary aggregate(std::vector<EpisodeSummary> episodes) {
  std::sort(episodes.begin(), episodes.end(),
            [](const EpisodeSummary& a, const EpisodeSummary& b) { return a.episode < b.episode; });
  MetricsSummary m;
  m.episodes = static_cast<int>(episodes.size());
  if (episodes.empty()) return m;

  auto column = [&](auto field) {
    std::vector<double> v;
    v.reserve(episodes.size());
    for (const EpisodeSummary& e : episodes) v.push_back(field(e));
    return v;
  };
  m.msi = mean_std(column([](const EpisodeSummary& e) { return e.msi; }));
  m.msi_tracker = mean_std(column([](const EpisodeSummary& e) { return e.msi_tracker; }));
  m.rta_pct = mean_std(column([](const EpisodeSummary& e) { return e.rta_pct; }));
  m.hard_violation_pct =
      mean_std(column([](const EpisodeSummary& e) { return e.hard_violation_pct; })).mean;
  m.predicate_pct = mean_std(column([](const EpisodeSummary& e) { return e.predicate_pct; })).mean;
  m.length = mean_std(column([](const EpisodeSummary& e) { return e.length; }));
  m.mean_reward = mean_std(column([](const EpisodeSummary& e) { return e.total_reward; })).mean;
  m.min_length = episodes.front().length;
  for (const EpisodeSummary& e : episodes) {
    m.min_length = std::min(m.min_length, e.length);
    if (e.cause == TerminationCause::protocol_fault) ++m.degraded;
    ++m.causes[std::string(to_string(e.cause))];
  }
  const Eigen::Index n = episodes.front().state_norms.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    m.state_norms.push_back(
        mean_std(column([i](const EpisodeSummary& e) { return e.state_norms(i); })).mean);
  }
  return m;
}

Evaluation evaluate(const EvalConfig& config) {
  if (config.spec == nullptr) throw ConfigError("evaluate: no environment");
  if (!config.policy) throw ConfigError("evaluate: no policy");
  if (config.n_eval < 1) throw ConfigError("evaluate: n_eval must be >= 1");
  if (config.parallelism < 1) throw ConfigError("evaluate: parallelism must be >= 1");

  const std::size_t n = static_cast<std::size_t>(config.n_eval);
  std::vector<EpisodeSummary> summaries(n);
  std::vector<EpisodeTrace> traces(config.retention == TraceRetention::full ? n : 0);
  TraceOptions options;
  options.record_substeps = config.record_substeps;

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  // One policy instance per worker; policies are reset at every episode.
  auto worker = [&] {
    try {
      std::unique_ptr<Policy> policy = config.policy(*config.spec);
      for (std::size_t i = next++; i < n; i = next++) {
        const int episode = static_cast<int>(i);
        EpisodeTrace trace =
            run_episode(*config.spec, *policy, config.base_seed + i, episode, options);
        summaries[i] = summarize(trace);
        if (!traces.empty()) traces[i] = std::move(trace);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };

  const int workers = std::min<int>(config.parallelism, config.n_eval);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Evaluation out;
  out.summary = aggregate(summaries);
  if (config.retention != TraceRetention::none) out.episodes = std::move(summaries);
  out.traces = std::move(traces);
  return out;
}

std::vector<std::string> state_names(PlantId id) {
  switch (id) {
    case PlantId::pendulum:
      return {"theta", "theta_dot"};
    case PlantId::cartpole:
      return {"x", "x_dot", "theta", "theta_dot"};
    case PlantId::quadrotor2d:
      return {"x", "z", "theta", "x_dot", "z_dot", "theta_dot"};
    case PlantId::quadrotor3d:
      return {"px", "py", "pz", "phi", "theta", "psi", "vx", "vy", "vz", "p", "q", "r"};
  }
  return {};
}

namespace {

nlohmann::json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const MetricsSummary& m, const std::vector<std::string>& names) {
  nlohmann::json norms = nlohmann::json::object();
  for (std::size_t i = 0; i < m.state_norms.size(); ++i) {
    norms[i < names.size() ? names[i] : "s" + std::to_string(i)] = m.state_norms[i];
  }
  return {{"episodes", m.episodes},
          {"degraded", m.degraded},
          {"msi", mean_std_json(m.msi)},
          {"msi_tracker", mean_std_json(m.msi_tracker)},
          {"rta_pct", mean_std_json(m.rta_pct)},
          {"hard_violation_pct", m.hard_violation_pct},
          {"predicate_pct", m.predicate_pct},
          {"state_norms", norms},
          {"length", mean_std_json(m.length)},
          {"min_length", m.min_length},
          {"mean_reward", m.mean_reward},
          {"causes", m.causes}};
}

nlohmann::json to_json(const EpisodeSummary& e) {
  std::vector<double> norms(e.state_norms.data(), e.state_norms.data() + e.state_norms.size());
  return {{"episode", e.episode},
          {"seed", e.seed},
          {"mass_scale", e.mass_scale},
          {"msi", e.msi},
          {"msi_tracker", e.msi_tracker},
          {"rta_pct", e.rta_pct},
          {"hard_violation_pct", e.hard_violation_pct},
          {"predicate_pct", e.predicate_pct},
          {"state_norms", norms},
          {"length", e.length},
          {"decisions", e.decisions},
          {"total_reward", e.total_reward},
          {"cause", std::string(to_string(e.cause))}};
}

nlohmann::json to_json(const CertReport& r, const EnvSpec& spec) {
  constexpr double kDeg = 180.0 / std::numbers::pi;
  const RiccatiCert& c = spec.cert;
  const Matrix& a = spec.linear.a;
  const Matrix& b = spec.linear.b;
  const Matrix residual = a.transpose() * c.p + c.p * a -
                          c.p * b * c.r.llt().solve(b.transpose()) * c.p + c.q;
  const Eigen::VectorXcd cl = (a - b * c.k).eigenvalues();
  return {{"K", matrix_json(c.k)},
          {"lambda", c.lambda},
          {"v_scale", c.v_scale},
          {"lambda_min_mq", r.lambda_min_mq},
          {"lambda_max_p", r.lambda_max_p},
          {"l_delta", r.l_delta},
          {"r_star", r.r_star},
          {"theta_rta_deg", r.theta_rta * kDeg},
          {"theta_sat_deg", r.theta_sat * kDeg},
          {"lambda_min_mdisc", r.lambda_min_mdisc},
          {"mdisc_certified", r.mdisc_certified},
          {"mdisc_expected_certified", spec.expect_certified},
          {"tau_min", spec.grid.tau_min},
          {"tau_critical", r.tau_critical ? nlohmann::json(*r.tau_critical) : nlohmann::json()},
          {"spectral_radius_tau_min", r.spectral_radius_tau_min},
          {"care_residual_rel", residual.norm() / c.q.norm()},
          {"closed_loop_max_real", cl.real().maxCoeff()}};
}

}  // namespace stc
