// Stand-in for an external policy process, speaking the JSON-lines bridge
// protocol on stdin/stdout. Modes:
//   lqr        clip(-Kx) at tau index 0, from the K and u_max in the meta message
//   zero       u = 0 at tau index 0
//   random S   uniform u_idx and tau_idx from seed S (reseeded per reset)
//   garbage    answers every obs with a line that is not JSON
//   badtau     answers with a tau_idx outside the grid
//   silent     never answers
//   late MS    answers the first obs after MS milliseconds, echoing ep/k
//   quit       exits right after the meta message
// With --log FILE every received line is appended to FILE.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

using Json = nlohmann::json;

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::ofstream log;
  if (auto it = std::find(args.begin(), args.end(), "--log"); it != args.end() && it + 1 != args.end()) {
    log.open(*(it + 1), std::ios::app);
    args.erase(it, it + 2);
  }
  if (args.empty()) {
    std::cerr << "usage: bridge_peer MODE [ARG] [--log FILE]\n";
    return 2;
  }
  const std::string mode = args[0];
  const std::uint64_t arg = args.size() > 1 ? std::stoull(args[1]) : 0;

  std::vector<std::vector<double>> k;
  std::vector<double> u_max;
  std::vector<std::vector<double>> levels;
  std::size_t grid = 0;
  std::mt19937_64 rng(arg);
  bool answered_late = false;

  std::string line;
  while (std::getline(std::cin, line)) {
    if (log) log << line << '\n' << std::flush;
    const Json msg = Json::parse(line);
    const std::string type = msg.at("type");
    if (type == "meta") {
      k = msg.at("K").get<std::vector<std::vector<double>>>();
      u_max = msg.at("u_max").get<std::vector<double>>();
      levels = msg.at("u_levels").get<std::vector<std::vector<double>>>();
      grid = msg.at("tau_grid").size();
      if (mode == "quit") return 0;
      continue;
    }
    if (type == "close") return 0;
    if (type == "reset") {
      rng.seed(arg ^ msg.at("seed").get<std::uint64_t>());
      continue;
    }
    if (type != "obs" || msg.at("done").get<bool>()) continue;

    const auto x = msg.at("x").get<std::vector<double>>();
    Json act{{"type", "act"}, {"tau_idx", 0}};
    if (mode == "lqr") {
      // Same accumulation order as the engine's backup law.
      std::vector<double> u(k.size());
      for (std::size_t i = 0; i < k.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) acc += k[i][j] * x[j];
        u[i] = std::clamp(-acc, -u_max[i], u_max[i]);
      }
      act["u"] = u;
    } else if (mode == "zero") {
      act["u"] = std::vector<double>(u_max.size(), 0.0);
    } else if (mode == "random") {
      std::vector<std::size_t> idx;
      for (const auto& lv : levels) idx.push_back(static_cast<std::size_t>(rng() % lv.size()));
      act["u_idx"] = idx;
      act["tau_idx"] = rng() % grid;
    } else if (mode == "garbage") {
      std::cout << "this is not json" << std::endl;
      continue;
    } else if (mode == "badtau") {
      act["u"] = std::vector<double>(u_max.size(), 0.0);
      act["tau_idx"] = grid + 3;
    } else if (mode == "silent") {
      continue;
    } else if (mode == "late") {
      act["u"] = std::vector<double>(u_max.size(), 0.0);
      act["ep"] = msg.at("ep");
      act["k"] = msg.at("k");
      if (!answered_late) {
        answered_late = true;
        std::this_thread::sleep_for(std::chrono::milliseconds(arg));
      }
    } else {
      std::cerr << "bridge_peer: unknown mode " << mode << '\n';
      return 2;
    }
    std::cout << act.dump() << std::endl;
  }
  return 0;
}
