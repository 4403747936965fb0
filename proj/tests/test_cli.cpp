// End-to-end tests driving the installed command line binary. The binary path
// arrives as the last argv entry (wired up by CMake), so this file owns main.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_work;

struct RunResult {
  int exit_code = -1;
  std::string stderr_text;
};

RunResult run_cli(const std::string& args) {
  const fs::path err = g_work / "stderr.txt";
  const std::string cmd = g_cli + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.stderr_text = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path p = g_work / name;
  std::ofstream out(p);
  out << body;
  return p;
}

// Small but non-degenerate: 3 rounds over a 40x150 world trains in a second.
const char* kTinyConfig = R"({
  "rounds": 3, "holdout_rounds": 1, "slate_size": 8, "exploration_epsilon": 0.2,
  "seeds": [1], "gamma_grid": [0.0, 0.5],
  "world": {"n_users": 40, "n_items": 150, "latent_dim": 2,
            "affinity_scale": 0.25, "quality_noise": 0.0},
  "scoring": {"gamma": 0.5, "k": 20},
  "train": {"epochs": 4, "learning_rate": 1.0, "embed_dim": 8,
            "exposure_embed_dim": 8, "batch_size": 64}
})";

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::string header;
  REQUIRE(static_cast<bool>(std::getline(in, header)));
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  std::vector<std::map<std::string, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::map<std::string, std::string> row;
    std::string cell;
    for (const auto& col : cols) {
      std::getline(ss, cell, ',');
      row[col] = cell;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("sweep on a valid config writes the four data files") {
  const fs::path cfg = write_config("tiny.json", kTinyConfig);
  const fs::path out = g_work / "sweep_out";
  const RunResult r = run_cli("--config " + cfg.string() + " --out " + out.string() + " --quiet sweep");
  CHECK(r.exit_code == 0);
  for (const char* f : {"sweep.csv", "aggregate.csv", "sweep_long.csv", "chosen_gamma.json"})
    CHECK_MESSAGE(fs::exists(out / f), f);
}

TEST_CASE("rerunning sweep with the same config is byte-identical") {
  const fs::path cfg = write_config("tiny.json", kTinyConfig);
  const fs::path a = g_work / "det_a";
  const fs::path b = g_work / "det_b";
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + a.string() + " --quiet sweep").exit_code == 0);
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + b.string() + " --quiet sweep").exit_code == 0);
  for (const char* f : {"sweep.csv", "aggregate.csv", "sweep_long.csv", "chosen_gamma.json"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
}

TEST_CASE("invalid config exits 1 with a field-level message") {
  const fs::path cfg = write_config("bad.json", R"({"gamma_grid": []})");
  const RunResult r = run_cli("--config " + cfg.string() + " sweep");
  CHECK(r.exit_code == 1);
  CHECK(r.stderr_text.find("gamma_grid") != std::string::npos);
}

TEST_CASE("negative loop gamma exits 1") {
  const fs::path cfg = write_config("tiny.json", kTinyConfig);
  const RunResult r = run_cli("--config " + cfg.string() + " loop --gamma -0.5");
  CHECK(r.exit_code == 1);
}

TEST_CASE("unknown subcommand exits 1") {
  CHECK(run_cli("frobnicate").exit_code == 1);
}

TEST_CASE("loop writes a trace and per-seed logs; seeds control determinism") {
  const fs::path cfg = write_config("tiny.json", kTinyConfig);
  const fs::path a = g_work / "loop_a";
  const fs::path b = g_work / "loop_b";
  const fs::path c = g_work / "loop_c";
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + a.string() + " --quiet loop").exit_code == 0);
  CHECK(fs::exists(a / "loop_trace.csv"));
  CHECK(fs::exists(a / "logs_seed1.csv"));
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + b.string() + " --quiet loop").exit_code == 0);
  CHECK(slurp(a / "loop_trace.csv") == slurp(b / "loop_trace.csv"));
  REQUIRE(run_cli("--config " + cfg.string() + " --seed-override 2 --out " + c.string() +
                  " --quiet loop").exit_code == 0);
  CHECK(slurp(a / "loop_trace.csv") != slurp(c / "loop_trace.csv"));
}

TEST_CASE("replaying loop logs with the same config reproduces the final round") {
  const fs::path cfg = write_config("tiny.json", kTinyConfig);
  const fs::path loop_out = g_work / "rt_loop";
  const fs::path replay_out = g_work / "rt_replay";
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + loop_out.string() + " --quiet loop")
              .exit_code == 0);
  REQUIRE(run_cli("--config " + cfg.string() + " --out " + replay_out.string() +
                  " --quiet replay --logs " + (loop_out / "logs_seed1.csv").string())
              .exit_code == 0);

  const auto trace = read_csv(loop_out / "loop_trace.csv");
  const auto& last = trace.back();  // final round, served at the config gamma
  const auto sweep = read_csv(replay_out / "sweep.csv");
  bool found = false;
  for (const auto& row : sweep) {
    if (row.at("model") != "corrected" || row.at("gamma") != "0.5") continue;
    found = true;
    CHECK(row.at("positive_recall") == last.at("positive_recall"));
    CHECK(row.at("negative_recall") == last.at("negative_recall"));
    CHECK(row.at("unique_retrieved") == last.at("unique_retrieved"));
    CHECK(row.at("popular_dominance") == last.at("popular_dominance"));
    CHECK(row.at("exposure_gini") == last.at("exposure_gini"));
  }
  CHECK(found);
}

TEST_CASE("replay rejects empty and truncated logs with exit 2") {
  const fs::path cfg = write_config("tiny.json", kTinyConfig);
  const fs::path empty = g_work / "empty.csv";
  std::ofstream(empty) << "round,user_id,item_id,label\n";
  RunResult r = run_cli("--config " + cfg.string() + " replay --logs " + empty.string());
  CHECK(r.exit_code == 2);

  const fs::path trunc = g_work / "trunc.csv";
  std::ofstream(trunc) << "round,user_id,item_id,label\n0,1,2,positive\n0,1\n";
  r = run_cli("--config " + cfg.string() + " replay --logs " + trunc.string());
  CHECK(r.exit_code == 2);
  CHECK(r.stderr_text.find("line 3") != std::string::npos);
}

TEST_CASE("replay rejects out-of-range ids with exit 2") {
  const fs::path cfg = write_config("tiny.json", kTinyConfig);
  const fs::path logs = g_work / "oob.csv";
  std::ofstream(logs) << "round,user_id,item_id,label\n0,9999,2,positive\n";
  const RunResult r = run_cli("--config " + cfg.string() + " replay --logs " + logs.string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("generate-world writes a world snapshot") {
  const fs::path cfg = write_config("tiny.json", kTinyConfig);
  const fs::path out = g_work / "world_out";
  CHECK(run_cli("--config " + cfg.string() + " --out " + out.string() + " --quiet generate-world")
            .exit_code == 0);
  CHECK(fs::exists(out / "world.json"));
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli [doctest options] <path-to-exporec>\n");
    return 1;
  }
  g_cli = argv[argc - 1];
  g_work = fs::temp_directory_path() / "exporec_cli_test";
  fs::remove_all(g_work);
  fs::create_directories(g_work);
  doctest::Context ctx;
  ctx.applyCommandLine(argc - 1, argv);
  return ctx.run();
}
