#include <catch2/catch.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLI_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("optimize echoes its configuration into the result", "[cli]") {
  TempDir dir("sloppyopt_cli_opt");
  const fs::path cfg = dir.path / "cfg.json";
  write_file(cfg, R"({
    "model": {"id": "sum_of_exponentials", "n": 8},
    "theta0": {"shift": 0.05},
    "optimizer": {"name": "hierarchical", "n_max": 5},
    "output_dir": ")" + (dir.path / "out").string() + R"("
  })");
  const int code = run_cli("optimize --config " + cfg.string() +
                           " --strategy stochastic --k 4 --seed 42");
  REQUIRE(code == 0);
  const json result = json::parse(slurp(dir.path / "out" / "result.json"));
  CHECK(result.at("strategy") == "stochastic");
  CHECK(result.at("k") == 4);
  CHECK(result.at("seed") == 42);
  CHECK(result.contains("theta_final"));
  CHECK(result.contains("eigenspectrum"));
  CHECK(result.contains("misalignment_history"));
  CHECK(fs::exists(dir.path / "out" / "trace.csv"));
}

TEST_CASE("optimize reruns are byte-identical", "[cli]") {
  TempDir dir("sloppyopt_cli_repro");
  const fs::path cfg = dir.path / "cfg.json";
  write_file(cfg, R"({
    "model": {"id": "prescribed_quadratic", "n": 6, "m": 12, "decades": 1.0, "seed": 7},
    "theta0": {"constant": 0.8},
    "optimizer": {"name": "hierarchical", "strategy": "stochastic", "k": 3, "seed": 9, "n_max": 6},
    "output_dir": ")" + (dir.path / "out").string() + R"("
  })");
  REQUIRE(run_cli("optimize --config " + cfg.string()) == 0);
  const std::string first_result = slurp(dir.path / "out" / "result.json");
  const std::string first_trace = slurp(dir.path / "out" / "trace.csv");
  REQUIRE(run_cli("optimize --config " + cfg.string()) == 0);
  CHECK(slurp(dir.path / "out" / "result.json") == first_result);
  CHECK(slurp(dir.path / "out" / "trace.csv") == first_trace);
}

TEST_CASE("missing dataset files exit with the config error code", "[cli]") {
  TempDir dir("sloppyopt_cli_missing");
  const fs::path cfg = dir.path / "cfg.json";
  write_file(cfg, R"({
    "model": {"id": "toy_kinetics", "grid": [3, 3]},
    "dataset": {"path": "/nonexistent/data.csv"},
    "optimizer": {"name": "hierarchical"},
    "output_dir": ")" + (dir.path / "out").string() + R"("
  })");
  CHECK(run_cli("optimize --config " + cfg.string()) == 2);
}

TEST_CASE("unknown config keys are rejected", "[cli]") {
  TempDir dir("sloppyopt_cli_strict");
  const fs::path cfg = dir.path / "cfg.json";
  write_file(cfg, R"({
    "model": {"id": "sum_of_exponentials", "n": 4},
    "optimizzer": {"name": "hierarchical"},
    "output_dir": "out"
  })");
  CHECK(run_cli("optimize --config " + cfg.string()) == 2);
}

TEST_CASE("bench writes one trace per optimizer-seed pair plus a summary", "[cli]") {
  TempDir dir("sloppyopt_cli_bench");
  const fs::path cfg = dir.path / "plan.json";
  write_file(cfg, R"({
    "model": {"id": "sum_of_exponentials", "n": 6},
    "theta0": {"shift": 0.05},
    "budget": 120,
    "seeds": [1, 2],
    "optimizers": [{"name": "hier_stoch", "k": 3}, {"name": "nelder_mead"}],
    "output_dir": ")" + (dir.path / "bench").string() + R"("
  })");
  REQUIRE(run_cli("bench --config " + cfg.string()) == 0);
  int trace_files = 0;
  for (const auto& entry : fs::directory_iterator(dir.path / "bench"))
    if (entry.path().filename().string().find("_trace.csv") != std::string::npos) ++trace_files;
  CHECK(trace_files == 4);
  REQUIRE(fs::exists(dir.path / "bench" / "summary.json"));
  const json summary = json::parse(slurp(dir.path / "bench" / "summary.json"));
  CHECK(summary.at("runs").size() == 4);
}

TEST_CASE("bench rejects an empty optimizer list", "[cli]") {
  TempDir dir("sloppyopt_cli_bench_empty");
  const fs::path cfg = dir.path / "plan.json";
  write_file(cfg, R"({
    "model": {"id": "sum_of_exponentials", "n": 6},
    "optimizers": [],
    "output_dir": "x"
  })");
  CHECK(run_cli("bench --config " + cfg.string()) == 2);
}

TEST_CASE("spectrum emits the constructed eigenvalues", "[cli]") {
  TempDir dir("sloppyopt_cli_spec");
  const fs::path cfg = dir.path / "cfg.json";
  write_file(cfg, R"({
    "model": {"id": "prescribed_quadratic", "n": 5, "m": 10, "decades": 1.0, "seed": 3},
    "theta0": {"constant": 0.5},
    "output_dir": ")" + (dir.path / "out").string() + R"("
  })");
  REQUIRE(run_cli("spectrum --config " + cfg.string()) == 0);
  const json spec = json::parse(slurp(dir.path / "out" / "spectrum.json"));
  const auto eigs = spec.at("eigenvalues");
  REQUIRE(eigs.size() == 5);
  for (int i = 0; i < 5; ++i) {
    const double expected = std::pow(10.0, -i);
    REQUIRE(std::abs(eigs[i].get<double>() - expected) / expected < 1e-6);
  }
  const std::string first = slurp(dir.path / "out" / "spectrum.csv");
  REQUIRE(run_cli("spectrum --config " + cfg.string()) == 0);
  CHECK(slurp(dir.path / "out" / "spectrum.csv") == first);
}

TEST_CASE("generate-data then optimize on the file round-trips", "[cli]") {
  TempDir dir("sloppyopt_cli_gen");
  const fs::path gen_cfg = dir.path / "gen.json";
  const fs::path data = dir.path / "data.csv";
  write_file(gen_cfg, R"({
    "model": {"id": "toy_kinetics", "grid": [4, 4]},
    "noise_rel": 0.02,
    "seed": 5,
    "output": ")" + data.string() + R"("
  })");
  REQUIRE(run_cli("generate-data --config " + gen_cfg.string()) == 0);
  REQUIRE(fs::exists(data));

  const fs::path opt_cfg = dir.path / "opt.json";
  write_file(opt_cfg, R"({
    "model": {"id": "toy_kinetics", "grid": [4, 4]},
    "dataset": {"path": ")" + data.string() + R"("},
    "theta0": {"shift": 0.1},
    "optimizer": {"name": "hierarchical", "n_max": 3},
    "output_dir": ")" + (dir.path / "out").string() + R"("
  })");
  REQUIRE(run_cli("optimize --config " + opt_cfg.string()) == 0);
  const json result = json::parse(slurp(dir.path / "out" / "result.json"));
  CHECK(result.at("loss_final").get<double>() >= 0.0);
}

TEST_CASE("uncertainty subcommand writes a per-parameter report", "[cli]") {
  TempDir dir("sloppyopt_cli_unc");
  const fs::path cfg = dir.path / "cfg.json";
  write_file(cfg, R"({
    "model": {"id": "toy_kinetics", "grid": [4, 4]},
    "dataset": {"generate": {"noise_rel": 0.03, "seed": 2}},
    "output_dir": ")" + (dir.path / "out").string() + R"("
  })");
  REQUIRE(run_cli("uncertainty --config " + cfg.string()) == 0);
  const json report = json::parse(slurp(dir.path / "out" / "uncertainty.json"));
  REQUIRE(report.at("parameters").size() == 8);
  for (const auto& p : report.at("parameters")) {
    REQUIRE(p.contains("name"));
    REQUIRE(p.contains("delta_theta"));
    const std::string cls = p.at("class");
    REQUIRE((cls == "stiff" || cls == "sloppy"));
  }
}
