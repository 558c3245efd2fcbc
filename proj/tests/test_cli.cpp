#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stc/bridge.hpp"

#ifndef STCLAB
#error "STCLAB must name the stclab executable"
#endif

namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run stclab(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / ("stclab_cli_" + std::to_string(::getpid()) + ".log");
  const std::string cmd = std::string("\"") + STCLAB + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(log);
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stclab_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("exit codes") {
  const Run ok = stclab("verify --plant pendulum");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("pendulum") != std::string::npos);
  CHECK(stclab("verify --plant segway").code == 2);
  CHECK(stclab("eval --config /nonexistent/run.json").code == 2);
  CHECK(stclab("suite table9").code == 2);
  CHECK(stclab("").code == 2);
  CHECK(stclab("eval --plant pendulum --n-eval 0").code == 2);
  CHECK(stclab("eval --plant pendulum --policy bridge").code == 2);
  CHECK(stclab("--help").code == 0);
}

TEST_CASE("verify gates against the shipped reference values") {
  const fs::path out = scratch("verify.json");
  const Run r = stclab("verify --reference \"" STCLAB_DATA_DIR "/reference_values.json\" --out \"" +
                       out.string() + "\"");
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  const auto doc = nlohmann::json::parse(slurp(out));
  CHECK(doc["cells"].size() == 4);
  CHECK(doc.contains("envelope"));
  fs::remove(out);
}

TEST_CASE("eval writes summary and traces") {
  const fs::path dir = scratch("eval");
  const Run r = stclab("eval --plant quadrotor2d --policy b3 --n-eval 3 --traces full --seed 5 --out \"" +
                       dir.string() + "\"");
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["metrics"]["episodes"] == 3);
  CHECK(summary["config"]["seed"] == 5);
  const std::string csv = slurp(dir / "traces" / "episode_0000.csv");
  CHECK(csv.rfind("episode,k,t,", 0) == 0);
  CHECK(csv.find("tau_exec") != std::string::npos);
  CHECK(fs::exists(dir / "traces" / "episode_0002.csv"));
  CHECK(fs::exists(dir / "episodes.json"));
  fs::remove_all(dir);
}

TEST_CASE("environment variables override the output directory") {
  const fs::path dir = scratch("env_out");
  const std::string cmd = "env STCLAB_OUT_DIR=\"" + dir.string() + "\" \"" + STCLAB +
                          "\" eval --plant pendulum --n-eval 1 > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(dir / "summary.json"));
  fs::remove_all(dir);
}

TEST_CASE("config file drives eval") {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.json");
    cfg << R"({"plant": "cartpole", "policy": "b1", "n_eval": 2, "t_max": 3, "out_dir": ")" << (dir / "out").string()
        << R"("})";
  }
  CHECK(stclab("eval --config \"" + (dir / "run.json").string() + "\"").code == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(summary["config"]["plant"] == "cartpole");
  CHECK(summary["metrics"]["length"]["mean"].get<double>() == doctest::Approx(3.0));
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << R"({"plant": "cartpole", "episodes": 2})";
  }
  CHECK(stclab("eval --config \"" + (dir / "bad.json").string() + "\"").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("serve-env over stdio") {
  stc::ChildProcessTransport t({STCLAB, "serve-env", "--plant", "pendulum"});
  const auto meta_line = t.receive_line(10s);
  REQUIRE(meta_line);
  const auto meta = nlohmann::json::parse(*meta_line);
  CHECK(meta["type"] == "meta");
  CHECK(meta["plant"] == "pendulum");
  t.send_line(R"({"type":"reset","ep":0,"seed":1})");
  const auto obs = nlohmann::json::parse(t.receive_line(10s).value());
  CHECK(obs["type"] == "obs");
  CHECK(obs["k"] == 0);
  t.send_line(R"({"type":"act","u":[0.0],"tau_idx":3})");
  const auto next = nlohmann::json::parse(t.receive_line(10s).value());
  CHECK(next["k"] == 1);
  CHECK(next.contains("tau_idx_exec"));
  CHECK(next.contains("reward"));
  t.send_line(R"({"type":"act","u":[0.0],"tau_idx":99})");
  const auto err = nlohmann::json::parse(t.receive_line(10s).value());
  CHECK(err["type"] == "error");
  CHECK(err["ep"] == 0);
  CHECK(err["message"].get<std::string>().find("outside the grid") != std::string::npos);
  t.send_line(R"({"type":"close"})");
  CHECK(t.wait() == 0);
}
