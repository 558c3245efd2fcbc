#include <charconv>
#include <ostream>
#include <string>

#include "stc/episode.hpp"

namespace stc {
namespace {

// Shortest representation that parses back to the same double.
void put(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

void put_vec(std::ostream& out, const auto& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << ',';
    put(out, v(i));
  }
}

}  // namespace

std::string trace_csv_header(int state_dim, int input_dim) {
  std::string h = "episode,k,t";
  for (int i = 0; i < state_dim; ++i) h += ",x" + std::to_string(i);
  h += ",msi";
  for (int i = 0; i < input_dim; ++i) h += ",u_prop" + std::to_string(i);
  for (int i = 0; i < input_dim; ++i) h += ",u_exec" + std::to_string(i);
  h +=
      ",tau_idx_prop,tau_idx_exec,tau_exec,fired,predicate,hard_violation,impulse,"
      "r_stability,r_communication,r_safety,r_terminal,r_total,v_before,v_after";
  return h;
}

void write_trace_csv(std::ostream& out, const EpisodeTrace& trace) {
  const int n = static_cast<int>(trace.x0.size());
  const int m = trace.steps.empty() ? 0 : static_cast<int>(trace.steps.front().u_executed.size());
  out << trace_csv_header(n, m) << '\n';
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const StepRecord& r = trace.steps[k];
    out << trace.episode << ',' << k << ',';
    put(out, r.t);
    put_vec(out, r.x);
    out << ',';
    put(out, r.msi);
    put_vec(out, r.u_proposed);
    put_vec(out, r.u_executed);
    out << ',' << r.tau_index_proposed << ',' << r.tau_index_executed << ',';
    put(out, r.tau_executed);
    out << ',' << int(r.fired) << ',' << int(r.predicate) << ',' << int(r.hard_violation) << ','
        << int(r.impulse);
    for (double v : {r.reward.stability, r.reward.communication, r.reward.safety, r.reward.terminal,
                     r.reward.total, r.v_before, r.v_after}) {
      out << ',';
      put(out, v);
    }
    out << '\n';
  }
}

}  // namespace stc
